#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "causal/dsl.hpp"
#include "causal/graph.hpp"
#include "causal/scm.hpp"
#include "causal/transport.hpp"

namespace fx {

using namespace causal;

inline CausalDiagram mediation_plain() {
    return CausalDiagram::build({"X", "M", "Y"}, {}, {{"X", "M"}, {"M", "Y"}, {"X", "Y"}});
}

inline CausalDiagram mediation_backdoor() {
    return CausalDiagram::build(
        {"W", "X", "M", "Y"}, {},
        {{"W", "X"}, {"W", "M"}, {"W", "Y"}, {"X", "M"}, {"M", "Y"}, {"X", "Y"}});
}

inline CausalDiagram mediation_dependent_covariates() {
    return CausalDiagram::build(
        {"X", "M", "Y", "W2", "W3"}, {},
        {{"W2", "X"}, {"X", "M"}, {"M", "Y"}, {"X", "Y"}, {"W3", "Y"}},
        {{"X", "W3"}, {"W3", "W2"}, {"W2", "M"}});
}

inline CausalDiagram mediation_frontdoor() {
    return CausalDiagram::build({"X", "Z", "M", "Y"}, {},
                                {{"X", "Z"}, {"Z", "M"}, {"M", "Y"}, {"X", "Y"}},
                                {{"X", "M"}});
}

inline CausalDiagram mediation_pathway_covariate() {
    return CausalDiagram::build(
        {"X", "Z", "W", "M", "T", "Y"}, {},
        {{"X", "Z"}, {"Z", "M"}, {"W", "M"}, {"X", "T"}, {"T", "Y"}, {"M", "Y"}, {"W", "Y"}},
        {{"X", "M"}, {"X", "Y"}});
}

inline CausalDiagram mediation_double_frontdoor() {
    return CausalDiagram::build(
        {"X", "W", "M", "Z", "Y"}, {},
        {{"X", "M"}, {"W", "M"}, {"X", "Z"}, {"Z", "Y"}, {"M", "Y"}},
        {{"X", "W"}, {"W", "Y"}});
}

inline CausalDiagram mediation_collider_covariate() {
    return CausalDiagram::build(
        {"X", "M", "Z", "T", "Y"}, {},
        {{"X", "M"}, {"M", "Z"}, {"X", "Y"}, {"Z", "Y"}, {"T", "Y"}},
        {{"X", "T"}, {"Z", "T"}});
}

inline SelectionDiagram transport_zspecific() {
    return CausalDiagram::build({"Z", "X", "Y", "S1"}, {},
                                {{"Z", "X"}, {"Z", "Y"}, {"X", "Y"}, {"S1", "Z"}}, {}, {"S1"});
}

inline SelectionDiagram transport_external(bool confound_treatment = false) {
    std::vector<std::pair<VarId, VarId>> e{{"U", "Z"}, {"U", "Y"}};
    if (confound_treatment) e.push_back({"U", "X"});
    e.push_back({"X", "Y"});
    e.push_back({"S1", "Z"});
    return CausalDiagram::build({"X", "Z", "Y", "U", "S1"}, {"U"}, e, {}, {"S1"});
}

inline SelectionDiagram transport_posttreatment() {
    return CausalDiagram::build({"X", "Z", "Y", "S1"}, {},
                                {{"X", "Z"}, {"Z", "Y"}, {"X", "Y"}, {"S1", "Z"}}, {}, {"S1"});
}

inline CausalDiagram synthesis_target() {
    return CausalDiagram::build({"Z", "X", "W", "Y"}, {},
                                {{"Z", "X"}, {"Z", "Y"}, {"X", "W"}, {"W", "Y"}});
}

inline SelectionDiagram adapt_chain() {
    return CausalDiagram::build({"X", "Y", "Z", "S1"}, {},
                                {{"X", "Y"}, {"Y", "Z"}, {"S1", "Y"}}, {}, {"S1"});
}

inline CausalDiagram bow() {
    return CausalDiagram::build({"X", "Y"}, {}, {{"X", "Y"}}, {{"X", "Y"}});
}

inline CausalDiagram bow_mediator() {
    return CausalDiagram::build({"X", "M", "Y"}, {}, {{"X", "M"}, {"M", "Y"}}, {{"X", "Y"}});
}

inline CausalDiagram chain() {
    return CausalDiagram::build({"A", "B", "C"}, {}, {{"A", "B"}, {"B", "C"}});
}

inline CausalDiagram collider() {
    return CausalDiagram::build({"X", "Y", "Z"}, {}, {{"X", "Y"}, {"Z", "Y"}});
}

inline std::string fixture_path(const std::string& name) {
    return std::string(FIXTURES_DIR) + "/" + name;
}

inline std::string load_fixture(const std::string& name) {
    return read_file(fixture_path(name));
}

// the population diagram behind a selection diagram: drop the S nodes
inline CausalDiagram strip_selection(const SelectionDiagram& sd) {
    VarSet keep;
    for (const auto& v : sd.nodes())
        if (!sd.is_selection(v)) keep.insert(v);
    return induced(sd, keep);
}

// a source/target model pair differing exactly at the mechanisms the
// selection nodes point at (function table and dedicated noise block)
struct PopulationPair {
    DiscreteSCM src, tgt;
};

inline PopulationPair paired_scms(const SelectionDiagram& sd, uint64_t seed) {
    CausalDiagram base = strip_selection(sd);
    PopulationPair pp{random_scm(base, seed), random_scm(base, seed)};
    DiscreteSCM donor = random_scm(base, seed ^ 0x5bd1e995u);
    VarSet pointed;
    for (const auto& s : sd.sorted(sd.selection_nodes()))
        for (const auto& c : sd.children(s)) pointed.insert(c);
    for (const auto& v : pointed) {
        pp.tgt.fn[v] = donor.fn.at(v);
        for (size_t k = 0; k < pp.tgt.exo.size(); ++k)
            if (pp.tgt.exo[k].name == "_u" + v) pp.tgt.exo[k] = donor.exo[k];
    }
    return pp;
}

// per-study models: each study's population differs from the shared source
// model exactly at its selection-pointed mechanisms
inline std::map<std::string, DiscreteSCM> study_models(const CausalDiagram& target,
                                                       const std::vector<StudyDescriptor>& studies,
                                                       uint64_t seed) {
    std::map<std::string, DiscreteSCM> out;
    DiscreteSCM tgt_model = random_scm(target, seed);
    for (const auto& st : studies) {
        DiscreteSCM m = tgt_model;
        DiscreteSCM donor = random_scm(target, seed ^ std::hash<std::string>{}(st.label));
        for (const auto& s : st.diagram.sorted(st.diagram.selection_nodes()))
            for (const auto& v : st.diagram.children(s)) {
                m.fn[v] = donor.fn.at(v);
                for (size_t k = 0; k < m.exo.size(); ++k)
                    if (m.exo[k].name == "_u" + v) m.exo[k] = donor.exo[k];
            }
        out[st.label] = std::move(m);
    }
    out["tgt"] = std::move(tgt_model);
    return out;
}

// brute-force d-separation oracle: enumerate every simple path in the
// latent-explicit graph and test the blocking rule directly
inline bool dsep_oracle(const CausalDiagram& d0, const VarSet& a, const VarSet& b,
                        const VarSet& c) {
    CausalDiagram d = latent_canonicalize(d0);
    VarSet anc_c = relatives(d, c, Direction::ancestors, true);
    std::vector<VarId> path;
    // into[i]: the edge between path[i-1] and path[i] points into path[i]
    std::vector<bool> into;
    std::function<bool(const VarId&)> walk = [&](const VarId& n) -> bool {
        if (b.count(n) && path.size() > 1) {
            for (size_t i = 1; i + 1 < path.size(); ++i) {
                const VarId& mid = path[i];
                // the right-hand edge points into mid iff it does not point
                // into path[i+1]
                bool coll = into[i] && !into[i + 1];
                bool blocked = coll ? !anc_c.count(mid) : c.count(mid) != 0;
                if (blocked) return false;
            }
            return true;
        }
        if (b.count(n)) return false;
        for (const auto& [kind, nexts] :
             std::initializer_list<std::pair<bool, VarSet>>{{false, d.children(n)},
                                                            {true, d.parents(n)}}) {
            for (const auto& nx : d.sorted(nexts)) {
                bool seen = false;
                for (const auto& p : path) seen |= (p == nx);
                if (seen) continue;
                path.push_back(nx);
                into.push_back(!kind);  // moving to a child: arrow into nx
                if (walk(nx)) return true;
                path.pop_back();
                into.pop_back();
            }
        }
        return false;
    };
    for (const auto& s : d.sorted(a)) {
        path = {s};
        into = {false};
        if (walk(s)) return false;
    }
    return true;
}

}  // namespace fx
