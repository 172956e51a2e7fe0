#include "causal/docalculus.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <map>

namespace causal {

namespace {

VarSet names_of(const std::vector<TermVar>& vs) {
    VarSet out;
    for (const auto& v : vs) out.insert(v.name);
    return out;
}

VarSet all_names(const ProbTerm& t) {
    VarSet out = names_of(t.outcome);
    for (const auto& v : t.given_obs) out.insert(v.name);
    for (const auto& v : t.given_do) out.insert(v.name);
    return out;
}

bool has_primed(const ProbTerm& t) {
    for (const auto* part : {&t.outcome, &t.given_obs, &t.given_do})
        for (const auto& v : *part)
            if (v.name != base_var(v.name)) return true;
    return false;
}

std::vector<TermVar> pick(const std::vector<TermVar>& vs, const VarSet& names, bool keep) {
    std::vector<TermVar> out;
    for (const auto& v : vs)
        if (names.count(v.name) == keep) out.push_back(v);
    return out;
}

// whether the term fits the rule pattern under binding b, and the rewritten term
std::optional<ProbTerm> rewrite(const ProbTerm& t, RuleId rule, const RuleBinding& b) {
    if (has_primed(t)) return std::nullopt;
    VarSet out = names_of(t.outcome), obs = names_of(t.given_obs), doset = names_of(t.given_do);
    if (out != b.Y) return std::nullopt;
    ProbTerm r = t;
    if (b.forward) {
        switch (rule) {
            case RuleId::R1:  // P(y | do(x), z, w) -> P(y | do(x), w)
                if (doset != b.X || set_union(b.Z, b.W) != obs ||
                    set_intersect(b.Z, b.W) != VarSet{})
                    return std::nullopt;
                r.given_obs = pick(t.given_obs, b.Z, false);
                return r;
            case RuleId::R2:  // P(y | do(x), do(z), w) -> P(y | do(x), z, w)
                if (obs != b.W || set_union(b.X, b.Z) != doset) return std::nullopt;
                for (const auto& v : pick(t.given_do, b.Z, true)) r.given_obs.push_back(v);
                r.given_do = pick(t.given_do, b.Z, false);
                return r;
            case RuleId::R3:  // P(y | do(x), do(z), w) -> P(y | do(x), w)
                if (obs != b.W || set_union(b.X, b.Z) != doset) return std::nullopt;
                r.given_do = pick(t.given_do, b.Z, false);
                return r;
        }
    } else {
        switch (rule) {
            case RuleId::R1:  // insert observations z
                if (doset != b.X || obs != b.W || !set_intersect(b.Z, all_names(t)).empty())
                    return std::nullopt;
                for (const auto& v : b.Z) r.given_obs.push_back({v, std::nullopt});
                return r;
            case RuleId::R2:  // exchange observation z for action do(z)
                if (doset != b.X || set_union(b.Z, b.W) != obs ||
                    set_intersect(b.Z, b.W) != VarSet{})
                    return std::nullopt;
                for (const auto& v : pick(t.given_obs, b.Z, true)) r.given_do.push_back(v);
                r.given_obs = pick(t.given_obs, b.Z, false);
                return r;
            case RuleId::R3:  // insert actions do(z)
                if (doset != b.X || obs != b.W || !set_intersect(b.Z, all_names(t)).empty())
                    return std::nullopt;
                for (const auto& v : b.Z) r.given_do.push_back({v, std::nullopt});
                return r;
        }
    }
    return std::nullopt;
}

// replace the k-th probability node (Term or Expectation, pre-order); k
// becomes negative once the replacement happened
ExprPtr replace_nth(const ExprPtr& e, int& k, const std::function<ExprPtr(const Expr&)>& f) {
    if (k < 0) return e;
    if (e->kind == Expr::Kind::Term || e->kind == Expr::Kind::Expectation) {
        if (k-- == 0) return f(*e);
        return e;
    }
    if (e->children.empty()) return e;
    auto out = std::make_shared<Expr>(*e);
    out->children.clear();
    for (const auto& c : e->children) out->children.push_back(replace_nth(c, k, f));
    return out;
}

struct TermSite {
    ProbTerm term;
    bool is_expectation = false;
    VarSet bound;  // sum variables in scope
    int index = 0;
};

void collect_sites(const ExprPtr& e, VarSet bound, int& idx, std::vector<TermSite>& out) {
    switch (e->kind) {
        case Expr::Kind::Term:
        case Expr::Kind::Expectation:
            out.push_back({e->term, e->kind == Expr::Kind::Expectation, bound, idx++});
            return;
        case Expr::Kind::Sum:
            for (const auto& v : e->sum_vars) bound.insert(v);
            collect_sites(e->children[0], bound, idx, out);
            return;
        default:
            for (const auto& c : e->children) collect_sites(c, bound, idx, out);
    }
}

}  // namespace

std::string rule_name(RuleId r) {
    switch (r) {
        case RuleId::R1: return "R1";
        case RuleId::R2: return "R2";
        case RuleId::R3: return "R3";
    }
    return "?";
}

SeparationCertificate rule_applicable(const CausalDiagram& d, RuleId rule, const RuleBinding& b) {
    for (const auto* s1 : {&b.X, &b.Y, &b.Z, &b.W})
        for (const auto* s2 : {&b.X, &b.Y, &b.Z, &b.W})
            if (s1 != s2 && !set_intersect(*s1, *s2).empty())
                throw causal_error("OverlappingSets", "rule binding sets must be disjoint");
    VarSet cond = set_union(b.X, b.W);
    switch (rule) {
        case RuleId::R1: {
            CausalDiagram g = cut_incoming(d, b.X);
            return d_separated(g, b.Y, b.Z, cond, "cut_in" + d.render_set(b.X));
        }
        case RuleId::R2: {
            CausalDiagram g = cut_outgoing(cut_incoming(d, b.X), b.Z);
            return d_separated(g, b.Y, b.Z, cond,
                               "cut_in" + d.render_set(b.X) + " cut_out" + d.render_set(b.Z));
        }
        case RuleId::R3: {
            VarSet zw = rule3_zw(d, b.X, b.Z, b.W);
            CausalDiagram g = cut_incoming(d, set_union(b.X, zw));
            return d_separated(g, b.Y, b.Z, cond,
                               "cut_in" + d.render_set(set_union(b.X, zw)));
        }
    }
    throw causal_error("MalformedExpr", "unknown rule");
}

ExprPtr apply_rule(const CausalDiagram& d, const ExprPtr& e, RuleId rule, const RuleBinding& b,
                   const SeparationCertificate& cert) {
    SeparationCertificate want = rule_applicable(d, rule, b);
    if (cert.diagram_fingerprint != want.diagram_fingerprint || cert.graph_tag != want.graph_tag)
        throw causal_error("StaleCertificate", "certificate was computed on a different graph");
    if (cert.A != want.A || cert.B != want.B || cert.C != want.C || !cert.separated ||
        cert.separated != want.separated)
        throw causal_error("CertificateMismatch", "certificate does not license this rule instance");

    bool done = false;
    std::function<ExprPtr(const ExprPtr&)> walk = [&](const ExprPtr& n) -> ExprPtr {
        if (done) return n;
        if (n->kind == Expr::Kind::Term || n->kind == Expr::Kind::Expectation) {
            auto r = rewrite(n->term, rule, b);
            if (r) {
                done = true;
                return n->kind == Expr::Kind::Term ? make_term(*r) : make_expectation(*r);
            }
            return n;
        }
        if (n->children.empty()) return n;
        auto out = std::make_shared<Expr>(*n);
        out->children.clear();
        for (const auto& c : n->children) out->children.push_back(walk(c));
        return out;
    };
    ExprPtr result = walk(e);
    if (!done) throw causal_error("PatternNotFound", "no term matches the rule binding");
    return normalize(d, result);
}

bool goal_satisfied(const CausalDiagram& d, const Goal& goal, const ExprPtr& e) {
    switch (goal.kind) {
        case Goal::Kind::do_free:
            return expr_do_free(e);
        case Goal::Kind::s_sound: {
            // terms conditioned on selection nodes become target-population
            // quantities; those must be do-free and speak only about the
            // variables whose mechanisms the selection nodes point at
            VarSet pointed;
            for (const auto& s : goal.selection)
                for (const auto& c : d.children(s)) pointed.insert(c);
            std::vector<const ProbTerm*> terms;
            collect_terms(e, terms);
            for (const auto* t : terms) {
                for (const auto& v : t->outcome)
                    if (goal.selection.count(base_var(v.name))) return false;
                for (const auto& v : t->given_do)
                    if (goal.selection.count(base_var(v.name))) return false;
                bool has_s = false;
                for (const auto& v : t->given_obs)
                    if (goal.selection.count(base_var(v.name))) has_s = true;
                if (!has_s) continue;
                if (!t->given_do.empty()) return false;
                for (const auto& v : t->outcome)
                    if (!pointed.count(base_var(v.name))) return false;
            }
            return true;
        }
        case Goal::Kind::match:
            return goal.target && equivalent(d, e, goal.target);
    }
    return false;
}

DeriveResult derive(const CausalDiagram& d, const ExprPtr& start, const Goal& goal,
                    const DeriveBudget& budget) {
    struct State {
        ExprPtr expr;
        std::vector<DerivationStep> steps;
    };

    ExprPtr s0 = normalize(d, start);
    DeriveResult res;

    auto finish = [&](const State& st) {
        Derivation dv;
        dv.diagram_fingerprint = d.fingerprint();
        dv.steps = st.steps;
        dv.start = s0;
        dv.end = st.expr;
        res.derivation = dv;
        return res;
    };

    if (goal_satisfied(d, goal, s0)) return finish({s0, {}});

    std::vector<VarId> obs_vars;
    for (const auto& v : d.observed_non_selection()) obs_vars.push_back(v);

    std::set<std::string> seen{render(d, s0, RenderFormat::structured)};
    std::vector<State> frontier{{s0, {}}};
    const State* found = nullptr;
    State found_state;

    for (int depth = 1; depth <= budget.depth && !found; ++depth) {
        res.depth_reached = depth;
        std::vector<State> next;
        for (const auto& st : frontier) {
            if (found) break;
            std::vector<TermSite> sites;
            int idx = 0;
            collect_sites(st.expr, {}, idx, sites);
            ++res.states_explored;

            auto emit = [&](const std::string& move, const RuleBinding& b,
                            std::optional<SeparationCertificate> cert, int site_index,
                            const std::function<ExprPtr(const Expr&)>& repl) {
                if (found) return;
                int k = site_index;
                ExprPtr after = normalize(d, replace_nth(st.expr, k, repl));
                std::string key = render(d, after, RenderFormat::structured);
                if (!seen.insert(key).second) return;
                State ns;
                ns.expr = after;
                ns.steps = st.steps;
                ns.steps.push_back({move, b, std::move(cert), st.expr, after});
                if (goal_satisfied(d, goal, after)) {
                    found_state = ns;
                    found = &found_state;
                    return;
                }
                if (static_cast<int>(next.size()) < budget.width) next.push_back(std::move(ns));
            };

            auto try_rule = [&](RuleId rule, const RuleBinding& b, const TermSite& site) {
                auto r = rewrite(site.term, rule, b);
                if (!r) return;
                SeparationCertificate cert;
                try {
                    cert = rule_applicable(d, rule, b);
                } catch (const causal_error&) {
                    return;
                }
                if (!cert.separated) return;
                bool is_e = site.is_expectation;
                emit(rule_name(rule), b, cert, site.index, [&](const Expr&) {
                    return is_e ? make_expectation(*r) : make_term(*r);
                });
            };

            for (RuleId rule : {RuleId::R1, RuleId::R2, RuleId::R3}) {
                for (bool fwd : {true, false}) {
                    for (const auto& site : sites) {
                        if (found) break;
                        if (has_primed(site.term)) continue;
                        const ProbTerm& t = site.term;
                        VarSet out = names_of(t.outcome), obs = names_of(t.given_obs),
                               doset = names_of(t.given_do);
                        RuleBinding b;
                        b.Y = out;
                        b.forward = fwd;
                        if (fwd) {
                            // single-variable deletions / exchanges
                            const VarSet& cands = rule == RuleId::R1 ? obs : doset;
                            for (const auto& z : d.sorted(cands)) {
                                b.Z = {z};
                                if (rule == RuleId::R1) {
                                    b.X = doset;
                                    b.W = set_minus(obs, b.Z);
                                } else {
                                    b.X = set_minus(doset, b.Z);
                                    b.W = obs;
                                }
                                try_rule(rule, b, site);
                            }
                        } else {
                            if (rule == RuleId::R2) {
                                for (const auto& z : d.sorted(obs)) {
                                    if (d.is_selection(z)) continue;
                                    b.Z = {z};
                                    b.X = doset;
                                    b.W = set_minus(obs, b.Z);
                                    try_rule(rule, b, site);
                                }
                            } else {
                                // insertions restricted to sum-bound variables so the
                                // expression's free variables never change
                                VarSet avail = set_minus(site.bound, all_names(t));
                                for (const auto& z : d.sorted(set_intersect(
                                         avail, VarSet(obs_vars.begin(), obs_vars.end())))) {
                                    b.Z = {z};
                                    b.X = doset;
                                    b.W = obs;
                                    try_rule(rule, b, site);
                                }
                            }
                        }
                    }
                }
            }

            // condition-split: P(a | c) = sum_b P(a | b, c) P(b | c)
            for (const auto& site : sites) {
                if (found) break;
                if (site.is_expectation || has_primed(site.term)) continue;
                const ProbTerm& t = site.term;
                VarSet tn = all_names(t);
                for (const auto& v : obs_vars) {
                    if (tn.count(v) || site.bound.count(v)) continue;
                    RuleBinding b;
                    b.Z = {v};
                    emit("condition-split", b, std::nullopt, site.index, [&](const Expr& node) {
                        ProbTerm left = node.term;
                        left.given_obs.push_back({v, std::nullopt});
                        ProbTerm right;
                        right.pop = node.term.pop;
                        right.outcome = {{v, std::nullopt}};
                        right.given_obs = node.term.given_obs;
                        right.given_do = node.term.given_do;
                        return make_sum({v}, make_product({make_term(left), make_term(right)}));
                    });
                }
            }

            // bayes-split: P(a, b | c) = P(a | b, c) P(b | c)
            for (const auto& site : sites) {
                if (found) break;
                if (site.is_expectation || site.term.outcome.size() < 2) continue;
                for (size_t oi = 0; oi < site.term.outcome.size(); ++oi) {
                    RuleBinding b;
                    b.Z = {site.term.outcome[oi].name};
                    emit("bayes-split", b, std::nullopt, site.index, [&](const Expr& node) {
                        ProbTerm left = node.term, right;
                        TermVar peeled = left.outcome[oi];
                        left.outcome.erase(left.outcome.begin() + static_cast<long>(oi));
                        left.given_obs.push_back(peeled);
                        right.pop = node.term.pop;
                        right.outcome = {peeled};
                        right.given_obs = node.term.given_obs;
                        right.given_do = node.term.given_do;
                        return make_product({make_term(left), make_term(right)});
                    });
                }
            }
        }
        if (found) return finish(found_state);
        frontier = std::move(next);
        if (frontier.empty()) break;
    }
    return res;
}

bool replay_derivation(const CausalDiagram& d, const Derivation& dv) {
    if (dv.diagram_fingerprint != d.fingerprint()) return false;
    ExprPtr cur = dv.start;
    for (const auto& step : dv.steps) {
        if (!(*normalize(d, step.before) == *normalize(d, cur))) return false;
        if (step.certificate) {
            RuleId rule = step.move == "R1"   ? RuleId::R1
                          : step.move == "R2" ? RuleId::R2
                                              : RuleId::R3;
            SeparationCertificate again = rule_applicable(d, rule, step.binding);
            if (!again.separated) return false;
            if (again.diagram_fingerprint != step.certificate->diagram_fingerprint) return false;
        }
        cur = step.after;
    }
    return *normalize(d, cur) == *normalize(d, dv.end);
}

}  // namespace causal
