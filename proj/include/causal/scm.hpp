#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "causal/expr.hpp"
#include "causal/graph.hpp"

namespace causal {

using Assignment = std::map<VarId, int>;

struct Dist {
    std::vector<VarId> vars;              // canonical order
    std::map<std::vector<int>, double> p; // full table over the domain product
    double total() const;
};

struct ExoBlock {
    VarId name;
    int card = 2;
    std::vector<double> probs;
};

struct Mechanism {
    std::vector<VarId> parents;  // observed + latent, fixed order, own noise appended last
    int card = 2;
    std::vector<int> table;  // mixed-radix over parent domains, last index = noise
};

// Fully specified finite model: explicit-latent diagram, independent exogenous
// blocks (shared latents plus one dedicated noise per endogenous variable),
// total function tables.  Evaluation is exact enumeration; no sampling.
class DiscreteSCM {
public:
    CausalDiagram diagram;  // latent-canonicalized (no bidirected edges)
    std::map<VarId, int> card;
    std::vector<ExoBlock> exo;        // latents first (diagram order), then noises
    std::map<VarId, Mechanism> fn;    // per observed variable

    void validate() const;
    int card_of(const VarId& v) const;

    Dist joint(const Assignment& do_assign = {}) const;  // observed joint, memoized
    Dist marginal(const VarSet& vars, const Assignment& do_assign = {}) const;
    double prob(const Assignment& event, const Assignment& given = {},
                const Assignment& do_assign = {}) const;
    double expectation(const VarId& y, const Assignment& given = {},
                       const Assignment& do_assign = {}) const;

    // counterfactual E[Y_{x_active, M_{x_ref}}] - E[Y_{x_ref}] by exogenous enumeration
    double eval_nde(const VarId& x, const VarId& m, const VarId& y, int x_active = 1,
                    int x_ref = 0) const;

private:
    mutable std::map<std::string, Dist> joint_cache_;
};

DiscreteSCM random_scm(const CausalDiagram& d, uint64_t seed, int cardinality = 2);

// evaluates an expression with every free variable fixed by `assign`
double eval_estimand(const ExprPtr& e, const std::map<std::string, const DiscreteSCM*>& env,
                     const Assignment& assign = {});
// evaluation over all assignments of the expression's free variables
Dist eval_estimand_dist(const ExprPtr& e, const std::map<std::string, const DiscreteSCM*>& env,
                        const CausalDiagram& d);

struct FalsificationWitness {
    DiscreteSCM m1, m2;
    double observational_tv = 0.0;
    double effect_gap = 0.0;
};

// searches for two models matching on the observed joint but disagreeing on
// P(y | do(x)); none after the budget is not a proof of identifiability
std::optional<FalsificationWitness> falsify_identifiability(const CausalDiagram& d,
                                                             const VarSet& y, const VarSet& x,
                                                             int budget = 10000);

}  // namespace causal
