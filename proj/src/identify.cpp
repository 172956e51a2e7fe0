#include "causal/identify.hpp"

#include <algorithm>
#include <functional>

namespace causal {

namespace {

// rename free generic occurrences of `from` (including sum shadow handling)
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

// subsets of `pool` by ascending size then canonical order
std::vector<VarSet> subsets_by_size(const CausalDiagram& d, const VarSet& pool, size_t max_size) {
    std::vector<VarId> items = d.sorted(pool);
    std::vector<VarSet> out{{}};
    std::vector<std::vector<VarSet>> by_size(max_size + 1);
    std::function<void(size_t, VarSet&)> rec = [&](size_t start, VarSet& cur) {
        if (cur.size() > 0 && cur.size() <= max_size) by_size[cur.size()].push_back(cur);
        if (cur.size() == max_size) return;
        for (size_t i = start; i < items.size(); ++i) {
            cur.insert(items[i]);
            rec(i + 1, cur);
            cur.erase(items[i]);
        }
    };
    VarSet cur;
    rec(0, cur);
    for (auto& group : by_size)
        for (auto& s : group) out.push_back(std::move(s));
    return out;
}

struct QDist {
    ExprPtr expr;
    VarSet vars;
};

struct IdCtx {
    const CausalDiagram& d;        // projected graph (bidirected, no latents)
    std::vector<VarId> order;      // global topological order
    VarSet fixed;                  // names that must stay free in the final expression
    std::vector<std::string>* trace;

    VarId fresh(const VarId& v) const {
        VarId n = v;
        do {
            n += "'";
        } while (fixed.count(n));
        return n;
    }

    // sum Q down to `keep`, priming any bound variable that must remain free
    ExprPtr marginal_expr(const QDist& q, const VarSet& keep) const {
        VarSet drop = set_minus(q.vars, keep);
        if (drop.empty()) return q.expr;
        ExprPtr body = q.expr;
        std::vector<VarId> bound;
        for (const auto& v : d.sorted(drop)) {
            if (fixed.count(v)) {
                VarId nv = fresh(v);
                body = rename_free(body, v, nv);
                bound.push_back(nv);
            } else {
                bound.push_back(v);
            }
        }
        return normalize(d, make_sum(bound, body));
    }

    QDist marginal(const QDist& q, const VarSet& keep) const {
        return {marginal_expr(q, keep), set_intersect(q.vars, keep)};
    }

    // Q(v | predecessors of v in the global order, within q.vars)
    ExprPtr cond_factor(const QDist& q, const VarId& v) const {
        VarSet pred;
        for (const auto& u : order) {
            if (u == v) break;
            if (q.vars.count(u)) pred.insert(u);
        }
        ExprPtr num = marginal_expr(q, set_union(pred, VarSet{v}));
        if (pred.empty()) return num;
        ExprPtr den = marginal_expr(q, pred);
        return normalize(d, make_quotient(num, den));
    }
};

struct HedgeFail {
    std::string witness;
};

ExprPtr id_rec(const IdCtx& ctx, CausalDiagram g, VarSet y, VarSet x, QDist q) {
    auto note = [&](const std::string& s) {
        if (ctx.trace) ctx.trace->push_back(s);
    };
    VarSet v(q.vars);

    if (x.empty()) {
        note("base: marginalize to " + g.render_set(y));
        return ctx.marginal_expr(q, y);
    }
    VarSet anc = relatives(g, y, Direction::ancestors, true);
    if (anc != v) {
        note("strip non-ancestors of " + g.render_set(y) + ": keep " + g.render_set(anc));
        return id_rec(ctx, induced(g, anc), y, set_intersect(x, anc), ctx.marginal(q, anc));
    }
    VarSet anc_cut = relatives(cut_incoming(g, x), y, Direction::ancestors, true);
    VarSet w = set_minus(set_minus(v, x), anc_cut);
    if (!w.empty()) {
        note("extend interventions by do-irrelevant " + g.render_set(w));
        ExprPtr sub = id_rec(ctx, g, y, set_union(x, w), q);
        // the sub-result is provably constant in the newly intervened
        // variables, but its factors may still mention them; average the
        // leftovers against their observational marginals (a no-op in value)
        // so the estimand closes over them
        VarSet leftover = set_intersect(set_minus(w, ctx.fixed), free_variables(sub));
        if (!leftover.empty()) {
            ExprPtr pw = make_term(ProbTerm{"src", tv(g, leftover), {}, {}});
            sub = normalize(ctx.d, make_sum(g.sorted(leftover), make_product({pw, sub})));
        }
        return sub;
    }
    std::vector<VarSet> comps = c_components(induced(g, set_minus(v, x)));
    if (comps.size() > 1) {
        note("factor across confounded components of the intervention-free part");
        std::vector<ExprPtr> factors;
        for (const auto& s : comps) factors.push_back(id_rec(ctx, g, s, set_minus(v, s), q));
        VarSet outer = set_minus(v, set_union(y, x));
        ExprPtr body = make_product(factors);
        std::vector<VarId> bound;
        for (const auto& u : g.sorted(outer)) {
            if (ctx.fixed.count(u)) {
                VarId nu = ctx.fresh(u);
                body = rename_free(body, u, nu);
                bound.push_back(nu);
            } else {
                bound.push_back(u);
            }
        }
        return normalize(ctx.d, make_sum(bound, body));
    }
    VarSet s = comps.empty() ? set_minus(v, x) : comps[0];
    std::vector<VarSet> full = c_components(g);
    if (full.size() == 1 && full[0] == v) {
        throw HedgeFail{"confounded component " + g.render_set(v) +
                        " with embedded component " + g.render_set(s) +
                        " forms a forbidden (hedge) structure"};
    }
    for (const auto& sc : full) {
        if (sc == s) {
            note("read component " + g.render_set(s) + " off the chain factorization");
            std::vector<ExprPtr> factors;
            for (const auto& u : ctx.order)
                if (s.count(u)) factors.push_back(ctx.cond_factor(q, u));
            QDist qs{normalize(ctx.d, make_product(factors)), s};
            return ctx.marginal_expr(qs, y);
        }
    }
    for (const auto& sc : full) {
        if (set_minus(s, sc).empty()) {  // s strictly inside sc
            note("recurse into enclosing component " + g.render_set(sc));
            std::vector<ExprPtr> factors;
            for (const auto& u : ctx.order)
                if (sc.count(u)) factors.push_back(ctx.cond_factor(q, u));
            QDist qn{normalize(ctx.d, make_product(factors)), sc};
            return id_rec(ctx, induced(g, sc), y, set_intersect(x, sc), qn);
        }
    }
    throw causal_error("MalformedExpr", "internal: component cover failure");
}

}  // namespace

bool backdoor_admissible(const CausalDiagram& d, const VarSet& x, const VarSet& y,
                         const VarSet& w) {
    VarSet de = relatives(d, x, Direction::descendants, false);
    if (!set_intersect(w, de).empty()) return false;
    return d_separated(cut_outgoing(d, x), x, y, w, "cut_out" + d.render_set(x)).separated;
}

std::optional<Estimand> frontdoor_identify(const CausalDiagram& d, const VarSet& x,
                                           const VarSet& y) {
    for (const auto& v : x) d.order_of(v);
    for (const auto& v : y) d.order_of(v);
    VarSet pool;
    for (const auto& v : d.observed_non_selection())
        if (!x.count(v) && !y.count(v)) pool.insert(v);

    // all directed x->y paths, for the interception test
    std::vector<VarSet> path_interiors;
    {
        std::vector<VarId> path;
        std::function<void(const VarId&)> dfs = [&](const VarId& n) {
            if (y.count(n)) {
                VarSet interior;
                for (const auto& p : path)
                    if (!x.count(p)) interior.insert(p);
                path_interiors.push_back(interior);
                return;
            }
            for (const auto& c : d.sorted(d.children(n))) {
                path.push_back(c);
                dfs(c);
                path.pop_back();
            }
        };
        for (const auto& s : d.sorted(x)) dfs(s);
    }

    for (const auto& z : subsets_by_size(d, pool, 2)) {
        if (z.empty()) continue;
        bool intercepts = !path_interiors.empty();
        for (const auto& interior : path_interiors)
            if (set_intersect(interior, z).empty()) intercepts = false;
        if (!intercepts) continue;
        if (!d_separated(cut_outgoing(d, x), x, z, {}, "cut_out").separated) continue;
        if (!d_separated(cut_outgoing(d, z), z, y, x, "cut_out").separated) continue;

        // sum_z P(z | x) sum_x' P(y | x', z) P(x')
        std::vector<VarId> zs = d.sorted(z), xs = d.sorted(x), ys = d.sorted(y);
        std::vector<VarId> xprime;
        for (const auto& v : xs) xprime.push_back(v + "'");
        ProbTerm pz{"src", tv(zs), tv(xs), {}};
        ProbTerm py{"src", tv(ys), tv(xprime), {}};
        for (const auto& v : zs) py.given_obs.push_back({v, std::nullopt});
        ProbTerm px{"src", tv(xprime), {}, {}};
        ExprPtr inner = make_sum(xprime, make_product({make_term(py), make_term(px)}));
        ExprPtr expr = normalize(d, make_sum(zs, make_product({make_term(pz), inner})));
        return as_estimand(expr);
    }
    return std::nullopt;
}

IdentifyResult identify_effect(const CausalDiagram& d, const VarSet& y, const VarSet& x,
                               const VarSet& context) {
    for (const auto* s1 : {&y, &x, &context})
        for (const auto* s2 : {&y, &x, &context})
            if (s1 != s2 && !set_intersect(*s1, *s2).empty())
                throw causal_error("OverlappingSets", "query sets must be disjoint");
    for (const auto& v : set_union(set_union(y, x), context)) {
        d.order_of(v);
        if (d.is_latent(v)) throw causal_error("UnknownNode", "'" + v + "' is latent");
    }

    IdentifyResult res;

    // adjustment shortcut: covariate set on top of the requested context
    {
        VarSet de = relatives(d, x, Direction::descendants, false);
        VarSet pool;
        for (const auto& v : d.observed_non_selection())
            if (!x.count(v) && !y.count(v) && !context.count(v) && !de.count(v)) pool.insert(v);
        if (set_intersect(context, de).empty()) {
            for (const auto& w : subsets_by_size(d, pool, 4)) {
                VarSet adj = set_union(context, w);
                if (!backdoor_admissible(d, x, y, adj)) continue;
                res.identified = true;
                res.trace.push_back("adjustment for " + d.render_set(adj));
                ProbTerm py{"src", tv(d, y), tv(d, set_union(x, adj)), {}};
                if (w.empty()) {
                    res.estimand = as_estimand(normalize(d, make_term(py)));
                } else {
                    ProbTerm pw{"src", tv(d, w), tv(d, context), {}};
                    res.estimand = as_estimand(normalize(
                        d, make_sum(d.sorted(w),
                                    make_product({make_term(py), make_term(pw)}))));
                }
                return res;
            }
        }
    }

    if (context.empty()) {
        if (auto fd = frontdoor_identify(d, x, y)) {
            res.identified = true;
            res.trace.push_back("front-door interception");
            res.estimand = *fd;
            return res;
        }
    }

    // complete recursion on the latent-projected graph
    CausalDiagram g = project_latents(latent_canonicalize(d));
    {
        // drop selection nodes: they never carry mechanisms relevant here
        VarSet keep;
        for (const auto& v : g.observed_non_selection()) keep.insert(v);
        g = induced(g, keep);
    }
    IdCtx ctx{g, topo_order(g), set_union(set_union(y, x), context), &res.trace};

    VarSet xx = x, ctx_obs = context;
    // move context variables into the intervention set where exchange is licensed
    bool moved = true;
    while (moved && !ctx_obs.empty()) {
        moved = false;
        for (const auto& w : g.sorted(ctx_obs)) {
            CausalDiagram mg = cut_outgoing(cut_incoming(g, xx), {w});
            if (d_separated(mg, y, {w}, set_union(xx, set_minus(ctx_obs, {w})), "idc").separated) {
                ctx_obs.erase(w);
                xx.insert(w);
                res.trace.push_back("context '" + w + "' exchanged for an intervention");
                moved = true;
                break;
            }
        }
    }

    QDist q0{make_term(ProbTerm{"src", tv(g, VarSet(ctx.order.begin(), ctx.order.end())), {}, {}}),
             VarSet(ctx.order.begin(), ctx.order.end())};
    try {
        ExprPtr joint = id_rec(ctx, g, set_union(y, ctx_obs), xx, q0);
        ExprPtr expr = joint;
        if (!ctx_obs.empty()) {
            // divide by the context marginal: sum the outcome out under primed names
            ExprPtr den = joint;
            std::vector<VarId> bound;
            for (const auto& v : g.sorted(y)) {
                VarId nv = ctx.fresh(v);
                den = rename_free(den, v, nv);
                bound.push_back(nv);
            }
            expr = make_quotient(joint, make_sum(bound, den));
        }
        res.identified = true;
        res.estimand = as_estimand(normalize(g, expr));
        return res;
    } catch (const HedgeFail& h) {
        res.identified = false;
        res.witness = h.witness;
        return res;
    }
}

}  // namespace causal
