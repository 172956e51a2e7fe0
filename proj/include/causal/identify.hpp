#pragma once

#include <optional>
#include <string>
#include <vector>

#include "causal/expr.hpp"
#include "causal/graph.hpp"

namespace causal {

struct IdentifyResult {
    bool identified = false;
    Estimand estimand;               // valid when identified (do-free)
    std::string witness;             // offending structure when not identifiable
    std::vector<std::string> trace;  // algorithm decisions, human-readable
};

// W admissible for adjustment between X and Y: no descendants of X, and W
// blocks every back-door path
bool backdoor_admissible(const CausalDiagram& d, const VarSet& x, const VarSet& y,
                         const VarSet& w);

// strict interception criterion through a searched observed mediator set
std::optional<Estimand> frontdoor_identify(const CausalDiagram& d, const VarSet& x,
                                           const VarSet& y);

// P(y | do(x), context) via adjustment shortcuts, then the c-component
// recursion with conditional queries handled joint-then-divide
IdentifyResult identify_effect(const CausalDiagram& d, const VarSet& y, const VarSet& x,
                               const VarSet& context = {});

}  // namespace causal
