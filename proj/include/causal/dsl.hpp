#pragma once

#include <string>
#include <vector>

#include "causal/graph.hpp"
#include "causal/scm.hpp"
#include "causal/transport.hpp"

namespace causal {

// line-oriented graph description:
//   nodes: A, B, C    latent: L    A -> B    A <-> B    S1 ~> B    # comment
// statements may also be separated by ';' on one line
CausalDiagram parse_graph_dsl(const std::string& text);

struct StudyCorpus {
    CausalDiagram base;
    std::vector<StudyDescriptor> studies;
};

// shared base graph followed by blocks:
//   study h { select: W; regime: randomized(X); measured: X, W, Y }
StudyCorpus parse_study_corpus(const std::string& text);

std::string scm_to_json(const DiscreteSCM& m);
DiscreteSCM scm_from_json(const std::string& text);

std::string read_file(const std::string& path);

}  // namespace causal
