#include "causal/transport.hpp"

#include <algorithm>
#include <functional>

#include "causal/identify.hpp"

namespace causal {

namespace {

ExprPtr rename_free(const ExprPtr& e, const VarId& from, const VarId& to) {
    switch (e->kind) {
        case Expr::Kind::Term:
        case Expr::Kind::Expectation: {
            ProbTerm t = e->term;
            for (auto* part : {&t.outcome, &t.given_obs, &t.given_do})
                for (auto& v : *part)
                    if (!v.value && v.name == from) v.name = to;
            return e->kind == Expr::Kind::Term ? make_term(t) : make_expectation(t);
        }
        case Expr::Kind::Var:
            return e->var == from ? make_var(to) : e;
        case Expr::Kind::Sum:
            for (const auto& sv : e->sum_vars)
                if (sv == from) return e;
            return make_sum(e->sum_vars, rename_free(e->children[0], from, to));
        case Expr::Kind::Constant:
            return e;
        default: {
            auto out = std::make_shared<Expr>(*e);
            out->children.clear();
            for (const auto& c : e->children) out->children.push_back(rename_free(c, from, to));
            return out;
        }
    }
}

VarSet term_vars(const ProbTerm& t) {
    VarSet out;
    for (const auto* part : {&t.outcome, &t.given_obs, &t.given_do})
        for (const auto& v : *part) out.insert(base_var(v.name));
    return out;
}

}  // namespace

SelectionDiagram attach_selection(const CausalDiagram& base, const VarSet& targets) {
    for (const auto& v : targets) base.order_of(v);
    std::vector<VarId> nodes = base.nodes();
    VarSet selection = base.selection_nodes();
    auto directed = base.directed_edges();
    int k = 0;
    for (const auto& t : base.sorted(targets)) {
        VarId s;
        do {
            s = "S" + std::to_string(++k);
        } while (base.has_node(s) || selection.count(s));
        nodes.push_back(s);
        selection.insert(s);
        directed.push_back({s, t});
    }
    return CausalDiagram::build(nodes, base.latents(), directed, base.bidirected_edges(),
                                selection);
}

TransportOutcome transport_effect(const SelectionDiagram& sd, const VarSet& y, const VarSet& x,
                                  const DeriveBudget& budget) {
    const VarSet& sel = sd.selection_nodes();
    ProbTerm start;
    start.outcome = tv(sd, y);
    start.given_obs = tv(sd, sel);
    start.given_do = tv(sd, x);

    Goal goal;
    goal.kind = Goal::Kind::s_sound;
    goal.selection = sel;

    TransportOutcome out;
    out.search = derive(sd, make_term(start), goal, budget);
    if (!out.search.derivation) return out;

    // selection-conditioned do-free terms are the target population's
    ExprPtr tagged = map_terms(out.search.derivation->end, [&](const ProbTerm& t) {
        bool has_s = false;
        for (const auto& v : t.given_obs)
            if (sel.count(base_var(v.name))) has_s = true;
        if (!has_s) return t;
        ProbTerm r = t;
        r.pop = "tgt";
        std::vector<TermVar> obs;
        for (const auto& v : r.given_obs)
            if (!sel.count(base_var(v.name))) obs.push_back(v);
        r.given_obs = obs;
        return r;
    });
    out.formula = TransportFormula{normalize(sd, tagged), *out.search.derivation};
    return out;
}

bool invariant_term(const SelectionDiagram& sd, const ProbTerm& t) {
    const VarSet& sel = sd.selection_nodes();
    if (sel.empty()) return true;
    VarSet outcome, cond, doset;
    for (const auto& v : t.outcome) outcome.insert(base_var(v.name));
    for (const auto& v : t.given_obs) cond.insert(base_var(v.name));
    for (const auto& v : t.given_do) {
        cond.insert(base_var(v.name));
        doset.insert(base_var(v.name));
    }
    CausalDiagram g = cut_incoming(sd, doset);
    return d_separated(g, sel, outcome, cond, "cut_in" + sd.render_set(doset)).separated;
}

namespace {

// can `study` certify this term as a target-population quantity?
bool study_covers(const CausalDiagram& target, const StudyDescriptor& study, const ProbTerm& t) {
    VarSet vars = term_vars(t);
    for (const auto& v : vars)
        if (!study.measured.count(v)) return false;
    VarSet doset;
    for (const auto& v : t.given_do) doset.insert(base_var(v.name));
    if (study.regime == Regime::observational) {
        if (!doset.empty()) return false;
    } else {
        if (!set_minus(doset, study.randomized).empty()) return false;
        if (doset.empty()) {
            // randomization rewires the treated variables: an experimental study
            // only certifies observational terms untouched by the randomized set
            VarSet touched = relatives(study.diagram, study.randomized, Direction::descendants, true);
            if (!set_intersect(vars, touched).empty()) return false;
        }
    }
    (void)target;
    return invariant_term(study.diagram, t);
}

}  // namespace

SynthesisOutcome meta_synthesize(const CausalDiagram& target, const ExprPtr& r,
                                 const std::vector<StudyDescriptor>& studies) {
    SynthesisOutcome out;
    if (r->kind != Expr::Kind::Term)
        throw causal_error("MalformedExpr", "synthesis target must be a single probability term");
    ProbTerm goal = r->term;
    VarSet y, x;
    for (const auto& v : goal.outcome) y.insert(base_var(v.name));
    for (const auto& v : goal.given_do) x.insert(base_var(v.name));

    struct Decomposition {
        std::vector<ProbTerm> terms;
        std::vector<VarId> sum_over;
    };
    std::vector<Decomposition> decs;
    decs.push_back({{goal}, {}});
    if (goal.given_obs.empty() && !x.empty()) {
        VarSet pool;
        for (const auto& v : target.observed_non_selection())
            if (!x.count(v) && !y.count(v)) pool.insert(v);
        // adjustment decompositions, smallest admissible sets first
        std::vector<VarSet> singletons;
        for (const auto& v : target.sorted(pool)) singletons.push_back({v});
        std::vector<VarSet> cands = singletons;
        for (size_t i = 0; i < singletons.size(); ++i)
            for (size_t j = i + 1; j < singletons.size(); ++j)
                cands.push_back(set_union(singletons[i], singletons[j]));
        for (const auto& w : cands) {
            if (!backdoor_admissible(target, x, y, w)) continue;
            ProbTerm py{goal.pop, goal.outcome, tv(target, set_union(x, w)), {}};
            ProbTerm pw{goal.pop, tv(target, w), {}, {}};
            decs.push_back({{py, pw}, target.sorted(w)});
        }
        // mediator (chain) decompositions over a single variable
        for (const auto& v : target.sorted(pool)) {
            ProbTerm py{goal.pop, goal.outcome, tv({v}), goal.given_do};
            ProbTerm pv{goal.pop, tv({v}), {}, goal.given_do};
            decs.push_back({{py, pv}, {v}});
        }
    }

    std::set<std::string> uncovered_seen;
    for (const auto& dec : decs) {
        std::vector<SubRelation> subs;
        bool full = true;
        for (const auto& t : dec.terms) {
            const StudyDescriptor* hit = nullptr;
            for (const auto& study : studies)
                if (study_covers(target, study, t)) {
                    hit = &study;
                    break;
                }
            if (!hit) {
                full = false;
                ExprPtr te = normalize(target, make_term(t));
                std::string key = render(target, te, RenderFormat::structured);
                if (uncovered_seen.insert(key).second) out.uncovered.push_back(te);
                continue;
            }
            subs.push_back({normalize(target, make_term(t)), hit->label});
        }
        if (!full) continue;
        std::vector<ExprPtr> factors;
        for (const auto& s : subs) {
            ProbTerm t = s.term->term;
            t.pop = s.study;
            factors.push_back(make_term(t));
        }
        SynthesisPlan plan;
        plan.target = normalize(target, r);
        plan.sub_relations = subs;
        plan.composition = normalize(target, make_sum(dec.sum_over, make_product(factors)));
        out.plan = plan;
        out.uncovered.clear();
        return out;
    }
    return out;
}

AdaptPlan adapt_factorization(const SelectionDiagram& sd, const ProbTerm& target_query) {
    AdaptPlan plan;
    std::vector<VarId> obs;
    for (const auto& v : topo_order(sd))
        if (!sd.is_latent(v) && !sd.is_selection(v)) obs.push_back(v);

    std::vector<ExprPtr> factors;
    for (const auto& v : obs) {
        VarSet pa;
        for (const auto& p : sd.parents(v))
            if (!sd.is_latent(p) && !sd.is_selection(p)) pa.insert(p);
        ProbTerm f{"src", tv({v}), tv(sd, pa), {}};
        bool inv = invariant_term(sd, f);
        if (!inv) {
            f.pop = "tgt";
            for (const auto& n : term_vars(f)) plan.target_measurements.insert(n);
        }
        plan.factors.push_back({f, inv});
        factors.push_back(make_term(f));
    }

    VarSet qvars;
    for (const auto& v : target_query.outcome) qvars.insert(base_var(v.name));
    VarSet cvars;
    for (const auto& v : target_query.given_obs) cvars.insert(base_var(v.name));
    if (!target_query.given_do.empty())
        throw causal_error("MalformedExpr", "adaptation answers observational queries only");

    auto joint = make_product(factors);
    std::vector<VarId> num_bound, den_bound;
    ExprPtr num = joint, den = joint;
    for (const auto& v : obs) {
        if (cvars.count(v)) continue;
        if (!qvars.count(v)) {
            num_bound.push_back(v);
            den_bound.push_back(v);
        } else {
            VarId nv = v + "'";
            den = rename_free(den, v, nv);
            den_bound.push_back(nv);
        }
    }
    plan.composition = normalize(
        sd, make_quotient(make_sum(num_bound, num), make_sum(den_bound, den)));
    return plan;
}

}  // namespace causal
