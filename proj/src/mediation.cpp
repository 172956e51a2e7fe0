#include "causal/mediation.hpp"

#include <algorithm>
#include <functional>

namespace causal {

namespace {

// expectation of est's single free outcome variable y: E[y] = sum_y y * est
ExprPtr expectation_of(const CausalDiagram& d, const ExprPtr& est, const VarId& y) {
    if (est->kind == Expr::Kind::Term && est->term.outcome.size() == 1 &&
        !est->term.outcome[0].value && est->term.outcome[0].name == y) {
        return make_expectation(est->term);
    }
    return make_sum({y}, make_product({make_var(y), est}));
}

// the back-door blocking test between M and Y "disregarding the path through
// X": X is removed outright (under intervention its edges carry constants)
// and M's outgoing edges are cut so only back-door paths remain
bool a2_blocks(const CausalDiagram& d, const MediationQuery& q, const VarSet& w) {
    VarSet keep;
    for (const auto& n : d.nodes())
        if (n != q.x) keep.insert(n);
    CausalDiagram no_x = induced(d, keep);
    CausalDiagram g = cut_outgoing(no_x, {q.m});
    return d_separated(g, {q.m}, {q.y}, w, "drop{" + q.x + "} cut_out{" + q.m + "}").separated;
}

std::vector<VarSet> candidate_sets(const CausalDiagram& d, const MediationQuery& q) {
    VarSet de = relatives(d, {q.x}, Direction::descendants, false);
    VarSet pool;
    for (const auto& v : d.observed_non_selection())
        if (v != q.x && v != q.m && v != q.y && !de.count(v)) pool.insert(v);
    std::vector<VarId> items = d.sorted(pool);
    std::vector<std::vector<VarSet>> by_size(5);
    std::function<void(size_t, VarSet&)> rec = [&](size_t start, VarSet& cur) {
        by_size[cur.size()].push_back(cur);
        if (cur.size() == 4) return;
        for (size_t i = start; i < items.size(); ++i) {
            cur.insert(items[i]);
            rec(i + 1, cur);
            cur.erase(items[i]);
        }
    };
    VarSet cur;
    rec(0, cur);
    std::vector<VarSet> out;
    for (auto& g : by_size)
        for (auto& s : g) out.push_back(std::move(s));
    return out;
}

}  // namespace

void validate_query(const CausalDiagram& d, MediationQuery& q) {
    d.order_of(q.x);
    d.order_of(q.m);
    d.order_of(q.y);
    if (q.x == q.m || q.m == q.y || q.x == q.y)
        throw causal_error("MalformedExpr", "treatment, mediator and outcome must be distinct");
    VarSet de_x = relatives(d, {q.x}, Direction::descendants, false);
    if (!de_x.count(q.m))
        q.warnings.push_back("mediator '" + q.m + "' is not a descendant of treatment '" + q.x + "'");
    VarSet de_m = relatives(d, {q.m}, Direction::descendants, false);
    if (!de_m.count(q.y))
        q.warnings.push_back("outcome '" + q.y + "' is not a descendant of mediator '" + q.m + "'");
}

AssumptionReport check_set_A(const CausalDiagram& d, const MediationQuery& q, const VarSet& w) {
    AssumptionReport r;
    r.set_name = 'A';
    r.w_used = w;

    VarSet de = relatives(d, {q.x}, Direction::descendants, false);
    bool a1 = set_intersect(w, de).empty();
    r.conditions.push_back({"A-1", a1,
                            a1 ? "no member of " + d.render_set(w) + " descends from " + q.x
                               : "covariate set contains a descendant of " + q.x});

    bool a2 = a2_blocks(d, q, w);
    r.conditions.push_back({"A-2", a2,
                            a2 ? d.render_set(w) + " blocks the mediator-outcome back-door paths"
                               : "unblocked mediator-outcome back-door path remains"});

    r.mediator_effect = identify_effect(d, {q.m}, {q.x}, w);
    r.conditions.push_back({"A-3", r.mediator_effect->identified,
                            r.mediator_effect->identified ? "covariate-specific treatment-on-mediator effect identified"
                                                          : r.mediator_effect->witness});

    r.joint_effect = identify_effect(d, {q.y}, {q.x, q.m}, w);
    r.conditions.push_back({"A-4", r.joint_effect->identified,
                            r.joint_effect->identified ? "covariate-specific joint effect on outcome identified"
                                                       : r.joint_effect->witness});

    r.overall = true;
    for (const auto& c : r.conditions) r.overall = r.overall && c.holds;
    return r;
}

AssumptionReport check_set_B(const CausalDiagram& d, const MediationQuery& q, const VarSet& w) {
    AssumptionReport r;
    r.set_name = 'B';
    r.w_used = w;

    VarSet de = relatives(d, {q.x}, Direction::descendants, false);
    bool b1 = set_intersect(w, de).empty();
    r.conditions.push_back({"B-1", b1, b1 ? "no descendant of treatment" : "descendant present"});

    bool b2 = b1 && backdoor_admissible(d, {q.x}, {q.m}, w);
    r.conditions.push_back(
        {"B-2", b2, b2 ? "treatment-mediator back-doors blocked" : "treatment-mediator back-door open"});

    bool b3 = d_separated(cut_outgoing(d, {q.m}), {q.m}, {q.y}, set_union(w, {q.x}),
                          "cut_out{" + q.m + "}")
                  .separated;
    r.conditions.push_back(
        {"B-3", b3, b3 ? "mediator-outcome back-doors blocked given treatment" : "mediator-outcome back-door open"});

    r.overall = b1 && b2 && b3;
    return r;
}

IdentifyResult cde_estimand(const CausalDiagram& d, const MediationQuery& q) {
    IdentifyResult joint = identify_effect(d, {q.y}, {q.x, q.m});
    if (!joint.identified) return joint;
    ExprPtr e1 = subst_value(expectation_of(d, joint.estimand.expr, q.y), q.x, q.x_active);
    ExprPtr e0 = subst_value(expectation_of(d, joint.estimand.expr, q.y), q.x, q.x_ref);
    IdentifyResult res = joint;
    res.estimand = as_estimand(normalize(d, make_difference(e1, e0)));
    res.trace.push_back("controlled contrast at treatment values " + std::to_string(q.x_active) +
                        " vs " + std::to_string(q.x_ref));
    return res;
}

NdeResult nde_estimand(const CausalDiagram& d, const MediationQuery& q) {
    NdeResult res;
    for (const auto& w : candidate_sets(d, q)) {
        AssumptionReport rep = check_set_A(d, q, w);
        if (!rep.overall) {
            res.failures.push_back(rep);
            continue;
        }
        // compose: sum over the covariates and the mediator of
        //   P(w) [E(y | do(x=active, m), w) - E(y | do(x=ref, m), w)] P(m | do(x=ref), w)
        // with the do-terms replaced by their identified estimands
        ExprPtr ey = expectation_of(d, rep.joint_effect->estimand.expr, q.y);
        ExprPtr e1 = subst_value(ey, q.x, q.x_active);
        ExprPtr e0 = subst_value(ey, q.x, q.x_ref);
        ExprPtr pm = subst_value(rep.mediator_effect->estimand.expr, q.x, q.x_ref);
        std::vector<ExprPtr> factors{make_difference(e1, e0), pm};
        std::vector<VarId> bound{q.m};
        if (!w.empty()) {
            factors.push_back(make_term(ProbTerm{"src", tv(d, w), {}, {}}));
            for (const auto& v : d.sorted(w)) bound.push_back(v);
        }
        res.identified = true;
        res.w_used = w;
        res.report = rep;
        res.estimand = as_estimand(normalize(d, make_sum(bound, make_product(factors))));
        return res;
    }
    return res;
}

}  // namespace causal
