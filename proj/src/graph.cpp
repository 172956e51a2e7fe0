#include "causal/graph.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <sstream>

namespace causal {

namespace {

std::pair<VarId, VarId> norm_pair(const VarId& a, const VarId& b, const std::map<VarId, int>& order) {
    return order.at(a) <= order.at(b) ? std::make_pair(a, b) : std::make_pair(b, a);
}

}  // namespace

CausalDiagram CausalDiagram::build(std::vector<VarId> nodes, VarSet latent,
                                   std::vector<std::pair<VarId, VarId>> directed,
                                   std::vector<std::pair<VarId, VarId>> bidirected,
                                   VarSet selection) {
    CausalDiagram d;
    for (const auto& n : nodes) {
        if (n.empty()) throw causal_error("MalformedDecl", "empty node name");
        if (d.order_.count(n)) throw causal_error("DuplicateNode", "node '" + n + "' declared twice");
        d.order_[n] = static_cast<int>(d.nodes_.size());
        d.nodes_.push_back(n);
        d.parents_[n];
        d.children_[n];
    }
    for (const auto& l : latent)
        if (!d.order_.count(l)) throw causal_error("UnknownNode", "latent '" + l + "' not declared");
    for (const auto& s : selection) {
        if (!d.order_.count(s)) throw causal_error("UnknownNode", "selection node '" + s + "' not declared");
        if (latent.count(s)) throw causal_error("MalformedDecl", "selection node '" + s + "' cannot be latent");
    }
    d.latent_ = std::move(latent);
    d.selection_ = std::move(selection);

    std::set<std::pair<VarId, VarId>> seen;
    for (const auto& [a, b] : directed) {
        if (!d.order_.count(a) || !d.order_.count(b))
            throw causal_error("UnknownNodeInEdge", a + " -> " + b);
        if (a == b) throw causal_error("MalformedDecl", "self-loop on '" + a + "'");
        if (!seen.insert({a, b}).second) continue;
        d.directed_.push_back({a, b});
        d.parents_[b].insert(a);
        d.children_[a].insert(b);
    }
    std::set<std::pair<VarId, VarId>> bseen;
    for (const auto& [a, b] : bidirected) {
        if (!d.order_.count(a) || !d.order_.count(b))
            throw causal_error("UnknownNodeInEdge", a + " <-> " + b);
        if (a == b) throw causal_error("MalformedDecl", "bidirected self-loop on '" + a + "'");
        if (d.latent_.count(a) || d.latent_.count(b))
            throw causal_error("MalformedDecl", "bidirected edge touches latent node");
        auto p = norm_pair(a, b, d.order_);
        if (!bseen.insert(p).second) continue;
        d.bidirected_.push_back(p);
    }
    for (const auto& s : d.selection_)
        if (!d.parents_.at(s).empty())
            throw causal_error("MalformedDecl", "selection node '" + s + "' has parents");

    // acyclicity via Kahn
    std::map<VarId, int> indeg;
    for (const auto& n : d.nodes_) indeg[n] = static_cast<int>(d.parents_.at(n).size());
    std::deque<VarId> q;
    for (const auto& n : d.nodes_)
        if (indeg[n] == 0) q.push_back(n);
    size_t done = 0;
    while (!q.empty()) {
        VarId n = q.front();
        q.pop_front();
        ++done;
        for (const auto& c : d.children_.at(n))
            if (--indeg[c] == 0) q.push_back(c);
    }
    if (done != d.nodes_.size()) throw causal_error("CycleError", "directed part contains a cycle");
    return d;
}

int CausalDiagram::order_of(const VarId& v) const {
    auto it = order_.find(v);
    if (it == order_.end()) throw causal_error("UnknownNode", v);
    return it->second;
}

std::vector<VarId> CausalDiagram::observed() const {
    std::vector<VarId> out;
    for (const auto& n : nodes_)
        if (!latent_.count(n)) out.push_back(n);
    return out;
}

std::vector<VarId> CausalDiagram::observed_non_selection() const {
    std::vector<VarId> out;
    for (const auto& n : nodes_)
        if (!latent_.count(n) && !selection_.count(n)) out.push_back(n);
    return out;
}

const VarSet& CausalDiagram::parents(const VarId& v) const {
    auto it = parents_.find(v);
    if (it == parents_.end()) throw causal_error("UnknownNode", v);
    return it->second;
}

const VarSet& CausalDiagram::children(const VarId& v) const {
    auto it = children_.find(v);
    if (it == children_.end()) throw causal_error("UnknownNode", v);
    return it->second;
}

bool CausalDiagram::has_edge(const VarId& a, const VarId& b) const {
    auto it = children_.find(a);
    return it != children_.end() && it->second.count(b) > 0;
}

std::vector<VarId> CausalDiagram::sorted(const VarSet& s) const {
    std::vector<VarId> out(s.begin(), s.end());
    std::sort(out.begin(), out.end(),
              [&](const VarId& a, const VarId& b) { return order_of(a) < order_of(b); });
    return out;
}

std::string CausalDiagram::render_set(const VarSet& s) const {
    std::string out = "{";
    bool first = true;
    for (const auto& v : sorted(s)) {
        if (!first) out += ",";
        out += v;
        first = false;
    }
    return out + "}";
}

std::string CausalDiagram::fingerprint() const {
    std::ostringstream os;
    os << "n:";
    for (const auto& n : nodes_) {
        os << n;
        if (latent_.count(n)) os << "~";
        if (selection_.count(n)) os << "!";
        os << ";";
    }
    os << "d:";
    for (const auto& [a, b] : directed_) os << a << ">" << b << ";";
    os << "b:";
    for (const auto& [a, b] : bidirected_) os << a << "<>" << b << ";";
    return os.str();
}

std::string SeparationCertificate::witness_text() const {
    std::string out;
    for (size_t i = 0; i < witness.size(); ++i) {
        if (i) out += " ";
        out += witness[i];
    }
    return out;
}

VarSet set_union(const VarSet& a, const VarSet& b) {
    VarSet r = a;
    r.insert(b.begin(), b.end());
    return r;
}

VarSet set_minus(const VarSet& a, const VarSet& b) {
    VarSet r;
    for (const auto& v : a)
        if (!b.count(v)) r.insert(v);
    return r;
}

VarSet set_intersect(const VarSet& a, const VarSet& b) {
    VarSet r;
    for (const auto& v : a)
        if (b.count(v)) r.insert(v);
    return r;
}

CausalDiagram latent_canonicalize(const CausalDiagram& d) {
    if (d.bidirected_edges().empty()) return d;
    std::vector<VarId> nodes = d.nodes();
    VarSet latent = d.latents();
    auto directed = d.directed_edges();
    int k = 0;
    for (const auto& [a, b] : d.bidirected_edges()) {
        VarId l;
        do {
            l = "_L" + std::to_string(++k);
        } while (d.has_node(l));
        nodes.push_back(l);
        latent.insert(l);
        directed.push_back({l, a});
        directed.push_back({l, b});
    }
    return CausalDiagram::build(nodes, latent, directed, {}, d.selection_nodes());
}

CausalDiagram cut_incoming(const CausalDiagram& d, const VarSet& x) {
    for (const auto& v : x) d.order_of(v);
    std::vector<std::pair<VarId, VarId>> directed, bidirected;
    for (const auto& e : d.directed_edges())
        if (!x.count(e.second)) directed.push_back(e);
    for (const auto& e : d.bidirected_edges())
        if (!x.count(e.first) && !x.count(e.second)) bidirected.push_back(e);
    return CausalDiagram::build(d.nodes(), d.latents(), directed, bidirected, d.selection_nodes());
}

CausalDiagram cut_outgoing(const CausalDiagram& d, const VarSet& x) {
    for (const auto& v : x) d.order_of(v);
    std::vector<std::pair<VarId, VarId>> directed;
    for (const auto& e : d.directed_edges())
        if (!x.count(e.first)) directed.push_back(e);
    return CausalDiagram::build(d.nodes(), d.latents(), directed, d.bidirected_edges(),
                                d.selection_nodes());
}

VarSet relatives(const CausalDiagram& d, const VarSet& s, Direction dir, bool inclusive) {
    for (const auto& v : s) d.order_of(v);
    VarSet seen = s;
    std::deque<VarId> q(s.begin(), s.end());
    while (!q.empty()) {
        VarId n = q.front();
        q.pop_front();
        const VarSet& next = dir == Direction::ancestors ? d.parents(n) : d.children(n);
        for (const auto& m : next)
            if (seen.insert(m).second) q.push_back(m);
    }
    return inclusive ? seen : set_minus(seen, s);
}

namespace {

struct DSepGraph {
    const CausalDiagram& g;
    VarSet cond_anc;  // conditioning set plus its ancestors
};

// reachability form of d-separation: states are (node, arrived-from-child?)
bool sep_verdict(const CausalDiagram& g, const VarSet& a, const VarSet& b, const VarSet& c) {
    VarSet cond_anc = relatives(g, c, Direction::ancestors, true);
    std::set<std::pair<VarId, bool>> seen;  // bool: entered via an edge pointing INTO the node
    std::deque<std::pair<VarId, bool>> q;
    for (const auto& s : a) q.push_back({s, false});
    while (!q.empty()) {
        auto [n, into] = q.front();
        q.pop_front();
        if (!seen.insert({n, into}).second) continue;
        bool in_c = c.count(n) > 0;
        if (b.count(n)) return false;  // connected
        // leave via children (edge points out of n): allowed unless n conditioned,
        // except when n entered head-to-head... standard rules:
        if (!in_c) {
            for (const auto& ch : g.children(n)) q.push_back({ch, true});
        }
        // leave via parents (edge points into parent from n's perspective = tail at parent):
        if (into) {
            // n was entered by an arrow into n → n is a collider on the path if we now
            // leave via a parent; collider passable iff n (or a descendant) conditioned
            if (cond_anc.count(n))
                for (const auto& p : g.parents(n)) q.push_back({p, false});
        } else {
            if (!in_c)
                for (const auto& p : g.parents(n)) q.push_back({p, false});
        }
    }
    return true;
}

// first active simple path in lexicographic order (by node sequence, canonical node order)
bool find_witness(const CausalDiagram& g, const VarSet& a, const VarSet& b, const VarSet& c,
                  std::vector<std::string>& out) {
    VarSet cond_anc = relatives(g, c, Direction::ancestors, true);
    std::vector<VarId> path;
    std::vector<bool> into;  // into[i]: edge i-1 -> i points into node i
    VarSet on_path;

    std::function<bool(const VarId&)> dfs = [&](const VarId& n) -> bool {
        if (b.count(n) && path.size() > 1) return true;
        // candidate continuations in canonical order
        VarSet nbrs = set_union(g.parents(n), g.children(n));
        for (const auto& m : g.sorted(nbrs)) {
            if (on_path.count(m)) continue;
            if (a.count(m)) continue;
            bool edge_into_m = g.children(n).count(m) > 0;  // n -> m
            // check activity of node n as an interior node (needs both its edges)
            if (path.size() > 1) {
                bool entered_into_n = into.back();
                bool collider = entered_into_n && !edge_into_m;  // -> n <-
                if (collider) {
                    if (!cond_anc.count(n)) continue;
                } else {
                    if (c.count(n)) continue;
                }
            } else {
                if (false) {}
            }
            path.push_back(m);
            into.push_back(edge_into_m);
            on_path.insert(m);
            if (dfs(m)) return true;
            path.pop_back();
            into.pop_back();
            on_path.erase(m);
        }
        return false;
    };

    for (const auto& s : g.sorted(a)) {
        path = {s};
        into = {};
        on_path = {s};
        if (dfs(s)) {
            out.clear();
            for (size_t i = 0; i < path.size(); ++i) {
                if (i) out.push_back(into[i - 1] ? "->" : "<-");
                out.push_back(path[i]);
            }
            return true;
        }
    }
    return false;
}

}  // namespace

SeparationCertificate d_separated(const CausalDiagram& d, const VarSet& a, const VarSet& b,
                                  const VarSet& c, const std::string& graph_tag) {
    for (const auto& v : a) d.order_of(v);
    for (const auto& v : b) d.order_of(v);
    for (const auto& v : c) d.order_of(v);
    if (!set_intersect(a, b).empty() || !set_intersect(a, c).empty() ||
        !set_intersect(b, c).empty())
        throw causal_error("OverlappingSets", "d-separation query sets must be disjoint");

    CausalDiagram g = latent_canonicalize(d);
    SeparationCertificate cert;
    cert.A = a;
    cert.B = b;
    cert.C = c;
    cert.graph_tag = graph_tag;
    cert.diagram_fingerprint = d.fingerprint();
    cert.separated = sep_verdict(g, a, b, c);
    if (!cert.separated) {
        if (!find_witness(g, a, b, c, cert.witness))
            throw causal_error("MalformedExpr", "internal: connected verdict without witness");
    }
    return cert;
}

VarSet rule3_zw(const CausalDiagram& d, const VarSet& x, const VarSet& z, const VarSet& w) {
    if (!set_intersect(x, z).empty() || !set_intersect(x, w).empty() ||
        !set_intersect(z, w).empty())
        throw causal_error("OverlappingSets", "rule3_zw sets must be disjoint");
    CausalDiagram gx = cut_incoming(latent_canonicalize(d), x);
    VarSet w_anc = relatives(gx, w, Direction::ancestors, true);
    VarSet out;
    for (const auto& v : z)
        if (!w_anc.count(v)) out.insert(v);
    return out;
}

std::vector<VarSet> c_components(const CausalDiagram& d) {
    // union-find over observed nodes through bidirected edges and latent-only paths
    std::map<VarId, VarId> up;
    std::function<VarId(VarId)> find = [&](VarId v) {
        while (up[v] != v) {
            up[v] = up[up[v]];
            v = up[v];
        }
        return v;
    };
    auto unite = [&](const VarId& a, const VarId& b) { up[find(a)] = find(b); };
    for (const auto& n : d.nodes()) up[n] = n;

    for (const auto& [a, b] : d.bidirected_edges()) unite(a, b);
    // any two nodes joined by a latent common ancestor chain confound each other
    for (const auto& n : d.nodes()) {
        if (!d.is_latent(n)) continue;
        for (const auto& c : d.children(n)) unite(n, c);
        for (const auto& p : d.parents(n)) unite(n, p);
    }

    std::map<VarId, VarSet> groups;
    for (const auto& n : d.nodes())
        if (!d.is_latent(n)) groups[find(n)].insert(n);
    // deterministic order: by smallest member's canonical position
    std::vector<VarSet> out;
    std::vector<std::pair<int, VarId>> keys;
    for (const auto& [root, members] : groups) {
        int best = d.order_of(*members.begin());
        for (const auto& m : members) best = std::min(best, d.order_of(m));
        keys.push_back({best, root});
    }
    std::sort(keys.begin(), keys.end());
    for (const auto& [_, root] : keys) out.push_back(groups[root]);
    return out;
}

CausalDiagram project_latents(const CausalDiagram& d) {
    if (d.latents().empty()) return d;
    std::vector<VarId> nodes;
    for (const auto& n : d.nodes())
        if (!d.is_latent(n)) nodes.push_back(n);

    // observed nodes reachable from each node through latent-only directed paths
    auto reach_observed = [&](const VarId& start) {
        VarSet out, seen{start};
        std::deque<VarId> q{start};
        while (!q.empty()) {
            VarId n = q.front();
            q.pop_front();
            for (const auto& c : d.children(n)) {
                if (!d.is_latent(c)) {
                    out.insert(c);
                } else if (seen.insert(c).second) {
                    q.push_back(c);
                }
            }
        }
        return out;
    };

    std::vector<std::pair<VarId, VarId>> directed, bidirected;
    for (const auto& [a, b] : d.directed_edges()) {
        if (!d.is_latent(a) && !d.is_latent(b)) directed.push_back({a, b});
        if (!d.is_latent(a) && d.is_latent(b))
            for (const auto& t : reach_observed(b)) directed.push_back({a, t});
    }
    for (const auto& n : d.nodes()) {
        if (!d.is_latent(n)) continue;
        bool is_root = true;
        for (const auto& p : d.parents(n))
            if (d.is_latent(p)) is_root = false;  // chained latents handled at the root
        if (d.parents(n).empty() || is_root) {
            if (!d.parents(n).empty()) continue;  // latent with observed parents handled above
            auto r = d.sorted(reach_observed(n));
            for (size_t i = 0; i < r.size(); ++i)
                for (size_t j = i + 1; j < r.size(); ++j) bidirected.push_back({r[i], r[j]});
        }
    }
    for (const auto& e : d.bidirected_edges()) bidirected.push_back(e);
    return CausalDiagram::build(nodes, {}, directed, bidirected, d.selection_nodes());
}

CausalDiagram induced(const CausalDiagram& d, const VarSet& keep) {
    for (const auto& v : keep) d.order_of(v);
    std::vector<VarId> nodes;
    VarSet latent, selection;
    for (const auto& n : d.nodes())
        if (keep.count(n)) {
            nodes.push_back(n);
            if (d.is_latent(n)) latent.insert(n);
            if (d.is_selection(n)) selection.insert(n);
        }
    std::vector<std::pair<VarId, VarId>> directed, bidirected;
    for (const auto& e : d.directed_edges())
        if (keep.count(e.first) && keep.count(e.second)) directed.push_back(e);
    for (const auto& e : d.bidirected_edges())
        if (keep.count(e.first) && keep.count(e.second)) bidirected.push_back(e);
    return CausalDiagram::build(nodes, latent, directed, bidirected, selection);
}

std::vector<VarId> topo_order(const CausalDiagram& d) {
    std::map<VarId, int> indeg;
    for (const auto& n : d.nodes()) indeg[n] = static_cast<int>(d.parents(n).size());
    std::vector<VarId> ready, out;
    for (const auto& n : d.nodes())
        if (indeg[n] == 0) ready.push_back(n);
    while (!ready.empty()) {
        // declaration-order tie-break
        auto it = std::min_element(ready.begin(), ready.end(), [&](const VarId& a, const VarId& b) {
            return d.order_of(a) < d.order_of(b);
        });
        VarId n = *it;
        ready.erase(it);
        out.push_back(n);
        for (const auto& c : d.children(n))
            if (--indeg[c] == 0) ready.push_back(c);
    }
    return out;
}

}  // namespace causal
