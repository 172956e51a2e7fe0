#pragma once

#include <optional>
#include <string>
#include <vector>

#include "causal/expr.hpp"
#include "causal/graph.hpp"

namespace causal {

enum class RuleId { R1, R2, R3 };

std::string rule_name(RuleId r);

// the (X, Y, Z, W) roles of a rule instance; forward = left-to-right
// (observation/action deletion), backward = insertion
struct RuleBinding {
    VarSet X, Y, Z, W;
    bool forward = true;
};

// checks the rule's side condition on the correct mutilated graph
SeparationCertificate rule_applicable(const CausalDiagram& d, RuleId rule, const RuleBinding& b);

// rewrites the first matching term of e per the rule; the certificate must be
// separated, match the binding, and have been computed on this diagram
ExprPtr apply_rule(const CausalDiagram& d, const ExprPtr& e, RuleId rule, const RuleBinding& b,
                   const SeparationCertificate& cert);

struct DerivationStep {
    std::string move;  // "R1" | "R2" | "R3" | "condition-split" | "bayes-split"
    RuleBinding binding;
    std::optional<SeparationCertificate> certificate;
    ExprPtr before, after;
};

struct Derivation {
    std::string diagram_fingerprint;
    std::vector<DerivationStep> steps;
    ExprPtr start, end;
};

struct Goal {
    enum class Kind { do_free, s_sound, match } kind = Kind::do_free;
    ExprPtr target;  // for match
    VarSet selection;  // for s_sound: these may appear only as conditioning in do-free terms
};

struct DeriveBudget {
    int depth = 8;
    int width = 512;
};

struct DeriveResult {
    std::optional<Derivation> derivation;
    int states_explored = 0;
    int depth_reached = 0;
};

// bounded iterative-deepening search over {R1, R2, R3 (both directions),
// condition-split, bayes-split}; deterministic for fixed inputs
DeriveResult derive(const CausalDiagram& d, const ExprPtr& start, const Goal& goal,
                    const DeriveBudget& budget = {});

bool goal_satisfied(const CausalDiagram& d, const Goal& goal, const ExprPtr& e);

// re-checks every certificate and the before/after chain
bool replay_derivation(const CausalDiagram& d, const Derivation& dv);

}  // namespace causal
