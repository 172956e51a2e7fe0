#pragma once

#include <optional>
#include <string>
#include <vector>

#include "causal/expr.hpp"
#include "causal/graph.hpp"
#include "causal/identify.hpp"

namespace causal {

struct MediationQuery {
    VarId x, m, y;
    int x_active = 1, x_ref = 0;
    std::vector<std::string> warnings;  // filled by validate_query
};

void validate_query(const CausalDiagram& d, MediationQuery& q);

struct ConditionResult {
    std::string name;  // "A-1" ... "B-3"
    bool holds = false;
    std::string detail;
};

struct AssumptionReport {
    char set_name = 'A';
    VarSet w_used;
    std::vector<ConditionResult> conditions;
    bool overall = false;
    // identification sub-results for the two effect conditions of set A
    std::optional<IdentifyResult> mediator_effect;  // treatment on mediator, given W
    std::optional<IdentifyResult> joint_effect;     // treatment+mediator on outcome, given W
};

AssumptionReport check_set_A(const CausalDiagram& d, const MediationQuery& q, const VarSet& w);
AssumptionReport check_set_B(const CausalDiagram& d, const MediationQuery& q, const VarSet& w);

// controlled direct effect at a free mediator value
IdentifyResult cde_estimand(const CausalDiagram& d, const MediationQuery& q);

struct NdeResult {
    bool identified = false;
    Estimand estimand;
    VarSet w_used;
    AssumptionReport report;                     // the successful report when identified
    std::vector<AssumptionReport> failures;      // per-W failure reports otherwise
};

NdeResult nde_estimand(const CausalDiagram& d, const MediationQuery& q);

}  // namespace causal
