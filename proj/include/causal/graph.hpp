#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace causal {

using VarId = std::string;
using VarSet = std::set<VarId>;

struct causal_error : std::runtime_error {
    std::string kind;
    causal_error(std::string k, const std::string& msg)
        : std::runtime_error(k + ": " + msg), kind(std::move(k)) {}
};

// Directed acyclic graph over named variables.  Latent nodes are ordinary
// nodes flagged unobserved; bidirected edges are stored explicitly and only
// expanded to fresh latents where separation logic needs a plain DAG.
// Selection nodes (population-discrepancy markers) are observed roots
// carrying an extra flag.  Node order is declaration order and is the
// canonical enumeration order everywhere.
class CausalDiagram {
public:
    CausalDiagram() = default;

    static CausalDiagram build(std::vector<VarId> nodes,
                               VarSet latent,
                               std::vector<std::pair<VarId, VarId>> directed,
                               std::vector<std::pair<VarId, VarId>> bidirected = {},
                               VarSet selection = {});

    const std::vector<VarId>& nodes() const { return nodes_; }
    bool has_node(const VarId& v) const { return order_.count(v) > 0; }
    bool is_latent(const VarId& v) const { return latent_.count(v) > 0; }
    bool is_selection(const VarId& v) const { return selection_.count(v) > 0; }
    int order_of(const VarId& v) const;

    const VarSet& latents() const { return latent_; }
    const VarSet& selection_nodes() const { return selection_; }
    std::vector<VarId> observed() const;           // declaration order, selection nodes included
    std::vector<VarId> observed_non_selection() const;

    const std::vector<std::pair<VarId, VarId>>& directed_edges() const { return directed_; }
    const std::vector<std::pair<VarId, VarId>>& bidirected_edges() const { return bidirected_; }

    const VarSet& parents(const VarId& v) const;
    const VarSet& children(const VarId& v) const;
    bool has_edge(const VarId& a, const VarId& b) const;

    // canonical sorting / rendering helpers
    std::vector<VarId> sorted(const VarSet& s) const;
    std::string render_set(const VarSet& s) const;
    std::string fingerprint() const;  // structural identity, used for certificate staleness

private:
    std::vector<VarId> nodes_;
    std::map<VarId, int> order_;
    VarSet latent_;
    VarSet selection_;
    std::vector<std::pair<VarId, VarId>> directed_;
    std::vector<std::pair<VarId, VarId>> bidirected_;
    std::map<VarId, VarSet> parents_, children_;
};

// a SelectionDiagram is a CausalDiagram with a nonempty selection-node set
using SelectionDiagram = CausalDiagram;

struct SeparationCertificate {
    VarSet A, B, C;
    std::string graph_tag;            // which mutilation the query ran on
    bool separated = false;
    std::vector<std::string> witness; // alternating node / arrow tokens, empty iff separated
    std::string diagram_fingerprint;  // fingerprint of the mutilated graph queried
    std::string witness_text() const;
};

enum class Direction { ancestors, descendants };

CausalDiagram latent_canonicalize(const CausalDiagram& d);
CausalDiagram cut_incoming(const CausalDiagram& d, const VarSet& x);
CausalDiagram cut_outgoing(const CausalDiagram& d, const VarSet& x);
VarSet relatives(const CausalDiagram& d, const VarSet& s, Direction dir, bool inclusive);

SeparationCertificate d_separated(const CausalDiagram& d, const VarSet& a, const VarSet& b,
                                  const VarSet& c, const std::string& graph_tag = "G");

// the Z-nodes that are not ancestors of any W-node once X's incoming edges are cut
VarSet rule3_zw(const CausalDiagram& d, const VarSet& x, const VarSet& z, const VarSet& w);

std::vector<VarSet> c_components(const CausalDiagram& d);

// collapse latent nodes into bidirected edges (inverse of latent_canonicalize
// for root latents; directed paths through latents are projected)
CausalDiagram project_latents(const CausalDiagram& d);

// induced subgraph on `keep` (latent nodes kept only if listed)
CausalDiagram induced(const CausalDiagram& d, const VarSet& keep);

std::vector<VarId> topo_order(const CausalDiagram& d);  // Kahn, declaration-order tie-break

VarSet set_union(const VarSet& a, const VarSet& b);
VarSet set_minus(const VarSet& a, const VarSet& b);
VarSet set_intersect(const VarSet& a, const VarSet& b);

}  // namespace causal
