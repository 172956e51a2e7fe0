#pragma once

#include <optional>
#include <string>
#include <vector>

#include "causal/docalculus.hpp"
#include "causal/expr.hpp"
#include "causal/graph.hpp"

namespace causal {

// adds one fresh selection node per target (S1, S2, ... in canonical order)
SelectionDiagram attach_selection(const CausalDiagram& base, const VarSet& targets);

struct TransportFormula {
    ExprPtr expr;  // "tgt"-tagged terms are do-free; everything else is source
    Derivation derivation;
};

struct TransportOutcome {
    std::optional<TransportFormula> formula;
    DeriveResult search;  // frontier statistics when not found within budget
};

TransportOutcome transport_effect(const SelectionDiagram& sd, const VarSet& y, const VarSet& x,
                                  const DeriveBudget& budget = {});

// whether the study population's term equals the target's: selection nodes
// d-separated from the outcome given the term's conditions, under the do-cut
bool invariant_term(const SelectionDiagram& sd, const ProbTerm& t);

enum class Regime { observational, randomized };

struct StudyDescriptor {
    std::string label;
    SelectionDiagram diagram;
    Regime regime = Regime::observational;
    VarSet randomized;  // nonempty iff regime == randomized
    VarSet measured;
};

struct SubRelation {
    ExprPtr term;       // target-valued sub-relation
    std::string study;  // label of the study it is taken from
};

struct SynthesisPlan {
    ExprPtr target;
    std::vector<SubRelation> sub_relations;
    ExprPtr composition;  // terms tagged with their study labels
};

struct SynthesisOutcome {
    std::optional<SynthesisPlan> plan;
    std::vector<ExprPtr> uncovered;  // sub-relations no study could certify
};

SynthesisOutcome meta_synthesize(const CausalDiagram& target, const ExprPtr& r,
                                 const std::vector<StudyDescriptor>& studies);

struct AdaptFactor {
    ProbTerm factor;   // pop "src" when invariant, "tgt" when it must be re-learned
    bool invariant = false;
};

struct AdaptPlan {
    std::vector<AdaptFactor> factors;  // topological chain factorization
    ExprPtr composition;               // answer to the target query
    VarSet target_measurements;        // variables that must be measured in the target
};

AdaptPlan adapt_factorization(const SelectionDiagram& sd, const ProbTerm& target_query);

}  // namespace causal
