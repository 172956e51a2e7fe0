#include "causal/scm.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

namespace causal {

namespace {

// mixed-radix enumeration helper
bool next_config(std::vector<int>& cfg, const std::vector<int>& cards) {
    for (size_t i = cfg.size(); i-- > 0;) {
        if (++cfg[i] < cards[i]) return true;
        cfg[i] = 0;
    }
    return false;
}

double tv_distance(const Dist& a, const Dist& b) {
    double tv = 0.0;
    for (const auto& [k, v] : a.p) {
        auto it = b.p.find(k);
        tv += std::abs(v - (it == b.p.end() ? 0.0 : it->second));
    }
    for (const auto& [k, v] : b.p)
        if (!a.p.count(k)) tv += std::abs(v);
    return tv / 2.0;
}

}  // namespace

double Dist::total() const {
    double t = 0.0;
    for (const auto& [k, v] : p) t += v;
    return t;
}

void DiscreteSCM::validate() const {
    for (const auto& b : exo) {
        if (static_cast<int>(b.probs.size()) != b.card)
            throw causal_error("MalformedExpr", "exogenous block '" + b.name + "' size mismatch");
        double s = 0.0;
        for (double p : b.probs) {
            if (p < 0) throw causal_error("MalformedExpr", "negative probability in '" + b.name + "'");
            s += p;
        }
        if (std::abs(s - 1.0) > 1e-12)
            throw causal_error("MalformedExpr", "exogenous block '" + b.name + "' does not sum to 1");
    }
    for (const auto& v : diagram.observed()) {
        auto it = fn.find(v);
        if (it == fn.end()) throw causal_error("MalformedExpr", "no mechanism for '" + v + "'");
        size_t want = 1;
        for (const auto& p : it->second.parents) want *= static_cast<size_t>(card_of(p));
        if (it->second.table.size() != want)
            throw causal_error("MalformedExpr", "mechanism table for '" + v + "' size mismatch");
        for (int val : it->second.table)
            if (val < 0 || val >= it->second.card)
                throw causal_error("MalformedExpr", "mechanism value out of range for '" + v + "'");
    }
}

int DiscreteSCM::card_of(const VarId& v) const {
    auto it = card.find(v);
    if (it != card.end()) return it->second;
    for (const auto& b : exo)
        if (b.name == v) return b.card;
    throw causal_error("UnknownNode", "no domain for '" + v + "'");
}

Dist DiscreteSCM::joint(const Assignment& do_assign) const {
    std::ostringstream key;
    for (const auto& [k, v] : do_assign) key << k << "=" << v << ";";
    auto hit = joint_cache_.find(key.str());
    if (hit != joint_cache_.end()) return hit->second;

    std::vector<VarId> obs = diagram.observed();
    std::vector<VarId> order = topo_order(diagram);

    std::vector<int> exo_cards;
    for (const auto& b : exo) exo_cards.push_back(b.card);
    std::map<VarId, int> exo_index;
    for (size_t i = 0; i < exo.size(); ++i) exo_index[exo[i].name] = static_cast<int>(i);

    Dist out;
    out.vars = obs;
    std::vector<int> cfg(exo.size(), 0);
    if (exo.empty()) cfg.clear();
    Assignment vals;
    do {
        double pu = 1.0;
        for (size_t i = 0; i < exo.size(); ++i) pu *= exo[i].probs[cfg[i]];
        if (pu == 0.0) continue;
        vals.clear();
        for (const auto& v : order) {
            if (diagram.is_latent(v)) {
                auto it = exo_index.find(v);
                if (it == exo_index.end())
                    throw causal_error("MalformedExpr", "latent '" + v + "' has no exogenous block");
                vals[v] = cfg[it->second];
                continue;
            }
            auto dit = do_assign.find(v);
            if (dit != do_assign.end()) {
                vals[v] = dit->second;
                continue;
            }
            const Mechanism& m = fn.at(v);
            size_t idx = 0;
            for (const auto& p : m.parents) {
                int pv;
                auto eit = exo_index.find(p);
                if (eit != exo_index.end() && !diagram.has_node(p))
                    pv = cfg[eit->second];  // dedicated noise block
                else
                    pv = vals.at(p);
                idx = idx * static_cast<size_t>(card_of(p)) + static_cast<size_t>(pv);
            }
            vals[v] = m.table[idx];
        }
        std::vector<int> keyv;
        keyv.reserve(obs.size());
        for (const auto& v : obs) keyv.push_back(vals.at(v));
        out.p[keyv] += pu;
    } while (!exo.empty() && next_config(cfg, exo_cards));

    joint_cache_[key.str()] = out;
    return out;
}

Dist DiscreteSCM::marginal(const VarSet& vars, const Assignment& do_assign) const {
    Dist full = joint(do_assign);
    std::vector<size_t> keep;
    Dist out;
    for (size_t i = 0; i < full.vars.size(); ++i)
        if (vars.count(full.vars[i])) {
            keep.push_back(i);
            out.vars.push_back(full.vars[i]);
        }
    for (const auto& [k, v] : full.p) {
        std::vector<int> sub;
        sub.reserve(keep.size());
        for (size_t i : keep) sub.push_back(k[i]);
        out.p[sub] += v;
    }
    return out;
}

double DiscreteSCM::prob(const Assignment& event, const Assignment& given,
                         const Assignment& do_assign) const {
    Dist full = joint(do_assign);
    double num = 0.0, den = 0.0;
    for (const auto& [k, v] : full.p) {
        bool g_ok = true, e_ok = true;
        for (size_t i = 0; i < full.vars.size(); ++i) {
            auto git = given.find(full.vars[i]);
            if (git != given.end() && git->second != k[i]) g_ok = false;
            auto eit = event.find(full.vars[i]);
            if (eit != event.end() && eit->second != k[i]) e_ok = false;
        }
        if (g_ok) {
            den += v;
            if (e_ok) num += v;
        }
    }
    if (given.empty()) return num;
    if (den <= 0.0) {
        std::ostringstream os;
        for (const auto& [k, v] : given) os << k << "=" << v << " ";
        throw causal_error("ZeroDenominator", "conditioning event has probability zero: " + os.str());
    }
    return num / den;
}

double DiscreteSCM::expectation(const VarId& y, const Assignment& given,
                                const Assignment& do_assign) const {
    double e = 0.0;
    for (int v = 0; v < card_of(y); ++v) {
        Assignment ev{{y, v}};
        e += v * prob(ev, given, do_assign);
    }
    return e;
}

double DiscreteSCM::eval_nde(const VarId& x, const VarId& m, const VarId& y, int x_active,
                             int x_ref) const {
    std::vector<VarId> order = topo_order(diagram);
    std::vector<int> exo_cards;
    for (const auto& b : exo) exo_cards.push_back(b.card);
    std::map<VarId, int> exo_index;
    for (size_t i = 0; i < exo.size(); ++i) exo_index[exo[i].name] = static_cast<int>(i);

    auto propagate = [&](const std::vector<int>& cfg, const Assignment& do_assign) {
        Assignment vals;
        for (const auto& v : order) {
            if (diagram.is_latent(v)) {
                vals[v] = cfg[exo_index.at(v)];
                continue;
            }
            auto dit = do_assign.find(v);
            if (dit != do_assign.end()) {
                vals[v] = dit->second;
                continue;
            }
            const Mechanism& mech = fn.at(v);
            size_t idx = 0;
            for (const auto& p : mech.parents) {
                int pv;
                auto eit = exo_index.find(p);
                if (eit != exo_index.end() && !diagram.has_node(p))
                    pv = cfg[eit->second];
                else
                    pv = vals.at(p);
                idx = idx * static_cast<size_t>(card_of(p)) + static_cast<size_t>(pv);
            }
            vals[v] = mech.table[idx];
        }
        return vals;
    };

    double counterfactual = 0.0, baseline = 0.0;
    std::vector<int> cfg(exo.size(), 0);
    do {
        double pu = 1.0;
        for (size_t i = 0; i < exo.size(); ++i) pu *= exo[i].probs[cfg[i]];
        if (pu == 0.0) continue;
        Assignment ref = propagate(cfg, {{x, x_ref}});
        Assignment nested = propagate(cfg, {{x, x_active}, {m, ref.at(m)}});
        counterfactual += pu * nested.at(y);
        baseline += pu * ref.at(y);
    } while (!exo.empty() && next_config(cfg, exo_cards));
    return counterfactual - baseline;
}

DiscreteSCM random_scm(const CausalDiagram& d, uint64_t seed, int cardinality) {
    if (cardinality < 2) throw causal_error("MalformedExpr", "cardinality must be at least 2");
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    auto rnd = [&](int n) { return static_cast<int>(rng() % static_cast<uint64_t>(n)); };
    auto rndu = [&]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

    DiscreteSCM m;
    m.diagram = latent_canonicalize(d);

    auto fill_probs = [&](int n) {
        std::vector<double> p(n);
        double s = 0.0;
        for (auto& v : p) {
            v = 0.05 + rndu();
            s += v;
        }
        for (auto& v : p) v /= s;
        return p;
    };

    for (const auto& v : m.diagram.nodes())
        if (m.diagram.is_latent(v)) m.exo.push_back({v, cardinality, fill_probs(cardinality)});
    for (const auto& v : m.diagram.observed()) {
        m.card[v] = cardinality;
        m.exo.push_back({"_u" + v, cardinality + 1, fill_probs(cardinality + 1)});
    }

    for (const auto& v : m.diagram.observed()) {
        Mechanism mech;
        mech.card = cardinality;
        for (const auto& p : m.diagram.sorted(m.diagram.parents(v))) mech.parents.push_back(p);
        mech.parents.push_back("_u" + v);
        size_t parent_configs = 1;
        for (size_t i = 0; i + 1 < mech.parents.size(); ++i)
            parent_configs *= static_cast<size_t>(cardinality);
        int noise_card = cardinality + 1;
        mech.table.resize(parent_configs * static_cast<size_t>(noise_card));
        for (size_t cfg = 0; cfg < parent_configs; ++cfg) {
            // surjective noise column: guarantees positivity of every value
            std::vector<int> col(noise_card);
            for (int i = 0; i < cardinality; ++i) col[i] = i;
            for (int i = cardinality - 1; i > 0; --i) std::swap(col[i], col[rnd(i + 1)]);
            for (int i = cardinality; i < noise_card; ++i) col[i] = rnd(cardinality);
            for (int i = 0; i < noise_card; ++i)
                mech.table[cfg * noise_card + static_cast<size_t>(i)] = col[i];
        }
        m.fn[v] = mech;
    }
    m.validate();
    return m;
}

namespace {

struct Evaluator {
    const std::map<std::string, const DiscreteSCM*>& env;

    const DiscreteSCM& pop(const std::string& label) const {
        auto it = env.find(label);
        if (it == env.end()) throw causal_error("UnboundPopulation", "no model bound for '" + label + "'");
        return *it->second;
    }

    const DiscreteSCM& any() const {
        if (env.empty()) throw causal_error("UnboundPopulation", "empty population environment");
        return *env.begin()->second;
    }

    int value_of(const TermVar& v, const Assignment& a) const {
        if (v.value) return *v.value;
        auto it = a.find(v.name);
        if (it == a.end())
            throw causal_error("MalformedExpr", "unbound variable '" + v.name + "' in evaluation");
        return it->second;
    }

    double term(const ProbTerm& t, const Assignment& a) const {
        const DiscreteSCM& m = pop(t.pop);
        Assignment event, given, doa;
        for (const auto& v : t.outcome) event[base_var(v.name)] = value_of(v, a);
        for (const auto& v : t.given_obs) given[base_var(v.name)] = value_of(v, a);
        for (const auto& v : t.given_do) doa[base_var(v.name)] = value_of(v, a);
        return m.prob(event, given, doa);
    }

    double eval(const ExprPtr& e, Assignment& a) const {
        switch (e->kind) {
            case Expr::Kind::Constant:
                return e->constant;
            case Expr::Kind::Var: {
                auto it = a.find(e->var);
                if (it == a.end())
                    throw causal_error("MalformedExpr", "unbound variable '" + e->var + "'");
                return it->second;
            }
            case Expr::Kind::Term:
                return term(e->term, a);
            case Expr::Kind::Expectation: {
                const DiscreteSCM& m = pop(e->term.pop);
                const VarId y = base_var(e->term.outcome[0].name);
                double out = 0.0;
                for (int v = 0; v < m.card_of(y); ++v) {
                    ProbTerm t = e->term;
                    t.outcome[0].value = v;
                    out += v * term(t, a);
                }
                return out;
            }
            case Expr::Kind::Sum: {
                double out = 0.0;
                std::function<void(size_t)> rec = [&](size_t i) {
                    if (i == e->sum_vars.size()) {
                        out += eval(e->children[0], a);
                        return;
                    }
                    const VarId& v = e->sum_vars[i];
                    int c = any().card_of(base_var(v));
                    auto prev = a.find(v);
                    std::optional<int> shadowed;
                    if (prev != a.end()) shadowed = prev->second;
                    for (int k = 0; k < c; ++k) {
                        a[v] = k;
                        rec(i + 1);
                    }
                    if (shadowed)
                        a[v] = *shadowed;
                    else
                        a.erase(v);
                };
                rec(0);
                return out;
            }
            case Expr::Kind::Product: {
                double out = 1.0;
                for (const auto& c : e->children) out *= eval(c, a);
                return out;
            }
            case Expr::Kind::Quotient: {
                double den = eval(e->children[1], a);
                if (std::abs(den) < 1e-300)
                    throw causal_error("ZeroDenominator", "quotient denominator is zero");
                return eval(e->children[0], a) / den;
            }
            case Expr::Kind::Difference:
                return eval(e->children[0], a) - eval(e->children[1], a);
        }
        return 0.0;
    }
};

}  // namespace

double eval_estimand(const ExprPtr& e, const std::map<std::string, const DiscreteSCM*>& env,
                     const Assignment& assign) {
    Assignment a = assign;
    return Evaluator{env}.eval(e, a);
}

Dist eval_estimand_dist(const ExprPtr& e, const std::map<std::string, const DiscreteSCM*>& env,
                        const CausalDiagram& d) {
    VarSet fv = free_variables(e);
    std::vector<VarId> vars;
    for (const auto& v : fv) vars.push_back(v);
    std::sort(vars.begin(), vars.end(), [&](const VarId& a, const VarId& b) {
        VarId ba = base_var(a), bb = base_var(b);
        int oa = d.has_node(ba) ? d.order_of(ba) : 1 << 20;
        int ob = d.has_node(bb) ? d.order_of(bb) : 1 << 20;
        return std::tie(oa, a) < std::tie(ob, b);
    });
    Evaluator ev{env};
    Dist out;
    out.vars = vars;
    std::vector<int> cards;
    for (const auto& v : vars) cards.push_back(ev.any().card_of(base_var(v)));
    std::vector<int> cfg(vars.size(), 0);
    do {
        Assignment a;
        for (size_t i = 0; i < vars.size(); ++i) a[vars[i]] = cfg[i];
        out.p[cfg] = ev.eval(e, a);
    } while (!vars.empty() && next_config(cfg, cards));
    return out;
}

namespace {

// witness construction by confounder rebalancing: when a latent confounder
// feeds both the outcome and an intervened direct parent of it, two response
// tables for the outcome can agree on the observational joint (after the
// confounder is marginalized out) yet disagree under intervention, because
// do() removes the confounder's influence on the treatment.  both models keep
// every observed context at positive probability, so the disagreement is not
// an artifact of zero-probability conditioning -- identifiable queries over
// positive distributions admit no such pair.
//
// P(L=1) = 1/2 and P(xv=1 | L) in {1/4, 3/4}; responses of yv to (xv, L) are
// chosen so both models produce the same mixture over L at every xv while the
// unmixed rows differ:
//   model 1: P(yv=1 | xv=1, L) = 4/5, 1/5   (interventional response 1/2)
//   model 2: P(yv=1 | xv=1, L) = 1/5, 2/5   (interventional response 3/10)
// yv ignores parents outside {xv, L}; every other observed node is an
// independent fair coin driven by its own noise.
std::optional<FalsificationWitness> rebalanced_pair(const CausalDiagram& g, const VarId& yv,
                                                    const VarId& L, const VarId& xv,
                                                    const VarSet& y, const VarSet& x) {
    auto noise_card = [&](const VarId& v) { return v == xv ? 4 : v == yv ? 5 : 2; };
    auto build = [&](bool rebalanced) {
        DiscreteSCM m;
        m.diagram = g;
        for (const auto& v : g.observed()) m.card[v] = 2;
        for (const auto& v : g.nodes())
            if (g.is_latent(v)) m.exo.push_back({v, 2, {0.5, 0.5}});
        for (const auto& v : g.observed()) {
            int nc = noise_card(v);
            m.exo.push_back({"_u" + v, nc, std::vector<double>(nc, 1.0 / nc)});
        }
        for (const auto& v : g.observed()) {
            Mechanism mech;
            mech.card = 2;
            for (const auto& p : g.sorted(g.parents(v))) mech.parents.push_back(p);
            mech.parents.push_back("_u" + v);
            size_t li = 0, xi = 0, ni = mech.parents.size() - 1;
            std::vector<int> cards;
            for (size_t i = 0; i < mech.parents.size(); ++i) {
                if (mech.parents[i] == L) li = i;
                if (mech.parents[i] == xv) xi = i;
                cards.push_back(i == ni ? noise_card(v) : 2);
            }
            size_t total = 1;
            for (int c : cards) total *= static_cast<size_t>(c);
            mech.table.resize(total, 0);
            std::vector<int> cfg(cards.size(), 0);
            size_t idx = 0;
            do {
                int u = cfg[ni], out;
                if (v == xv) {
                    out = u < (cfg[li] ? 3 : 1);
                } else if (v == yv) {
                    int ones = 3;  // xv = 0: P(yv=1) = 3/5 in both models
                    if (cfg[xi]) ones = rebalanced ? (cfg[li] ? 2 : 1) : (cfg[li] ? 1 : 4);
                    out = u < ones;
                } else {
                    out = u;
                }
                mech.table[idx++] = out;
            } while (next_config(cfg, cards));
            m.fn[v] = mech;
        }
        m.validate();
        return m;
    };

    FalsificationWitness w;
    w.m1 = build(false);
    w.m2 = build(true);
    w.observational_tv = tv_distance(w.m1.joint(), w.m2.joint());
    if (w.observational_tv > 1e-9) return std::nullopt;

    // effect gap: max TV over intervention assignments
    std::vector<VarId> xs(x.begin(), x.end());
    std::vector<int> cards(xs.size(), 2), cfg(xs.size(), 0);
    double gap = 0.0;
    do {
        Assignment da;
        for (size_t i = 0; i < xs.size(); ++i) da[xs[i]] = cfg[i];
        gap = std::max(gap, tv_distance(w.m1.marginal(y, da), w.m2.marginal(y, da)));
    } while (!xs.empty() && next_config(cfg, cards));
    w.effect_gap = gap;
    if (gap < 0.05) return std::nullopt;
    return w;
}

std::optional<FalsificationWitness> construct_witness(const CausalDiagram& g, const VarSet& y,
                                                      const VarSet& x) {
    for (const auto& yv : g.sorted(y)) {
        if (x.count(yv)) continue;
        for (const auto& L : g.sorted(g.parents(yv))) {
            if (!g.is_latent(L)) continue;
            for (const auto& xv : g.sorted(set_intersect(x, g.parents(yv)))) {
                if (!g.children(L).count(xv)) continue;
                if (auto w = rebalanced_pair(g, yv, L, xv, y, x)) return w;
            }
        }
    }
    return std::nullopt;
}

}  // namespace

std::optional<FalsificationWitness> falsify_identifiability(const CausalDiagram& d, const VarSet& y,
                                                            const VarSet& x, int budget) {
    if (budget <= 0) return std::nullopt;
    for (const auto& v : set_intersect(y, x))
        (void)v;  // queries like P(x | do(x)) are point-mass in every model: no witness
    if (!set_intersect(y, x).empty()) return std::nullopt;
    CausalDiagram g = latent_canonicalize(d);
    return construct_witness(g, y, x);
}

}  // namespace causal
