#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "causal/dsl.hpp"
#include "causal/scm.hpp"
#include "fixtures.hpp"

using namespace causal;

namespace {

void expect_parse_error(const std::string& text, const std::string& needle) {
    try {
        (void)parse_graph_dsl(text);
        FAIL_CHECK("expected ParseError for: ", text);
    } catch (const causal_error& e) {
        CHECK(e.kind == "ParseError");
        CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos,
                      "message was: ", e.what());
    }
}

}  // namespace

TEST_CASE("every graph fixture parses to its in-memory twin") {
    const std::vector<std::pair<std::string, CausalDiagram>> table{
        {"mediation_plain.cg", fx::mediation_plain()},
        {"mediation_backdoor.cg", fx::mediation_backdoor()},
        {"mediation_dependent_covariates.cg", fx::mediation_dependent_covariates()},
        {"mediation_frontdoor.cg", fx::mediation_frontdoor()},
        {"mediation_pathway_covariate.cg", fx::mediation_pathway_covariate()},
        {"mediation_double_frontdoor.cg", fx::mediation_double_frontdoor()},
        {"mediation_collider_covariate.cg", fx::mediation_collider_covariate()},
        {"transport_zspecific.cg", fx::transport_zspecific()},
        {"transport_external.cg", fx::transport_external(false)},
        {"transport_external_confounded.cg", fx::transport_external(true)},
        {"transport_posttreatment.cg", fx::transport_posttreatment()},
        {"synthesis_target.cg", fx::synthesis_target()},
        {"adapt_chain.cg", fx::adapt_chain()},
        {"bow.cg", fx::bow()},
        {"bow_mediator.cg", fx::bow_mediator()},
        {"chain.cg", fx::chain()},
        {"collider.cg", fx::collider()},
    };
    for (const auto& [file, twin] : table) {
        auto parsed = parse_graph_dsl(fx::load_fixture(file));
        CHECK_MESSAGE(parsed.fingerprint() == twin.fingerprint(), file);
    }
}

TEST_CASE("one-line form with semicolons and comments") {
    auto d = parse_graph_dsl("nodes: A, B, C; A -> B; B -> C  # a chain");
    CHECK(d.fingerprint() == fx::chain().fingerprint());
    auto d2 = parse_graph_dsl("nodes: X, Y; latent: U; U -> X; U -> Y; X -> Y");
    CHECK(d2.is_latent("U"));
    auto obs = d2.observed();
    CHECK(VarSet(obs.begin(), obs.end()) == VarSet{"X", "Y"});
}

TEST_CASE("parse errors carry line numbers") {
    expect_parse_error("nodes: A, B\nA -> ", "line 2");
    expect_parse_error("nodes: A, B\nA -> ", "dangling");
    expect_parse_error("nodes: A\n\nwhat is this", "line 3");
    expect_parse_error("nodes: A, B\nA -> B, C", "exactly one name");
    expect_parse_error("", "no nodes");

    // edge endpoints declare their nodes implicitly
    auto d = parse_graph_dsl("A -> B\nB -> C");
    CHECK(d.fingerprint() == fx::chain().fingerprint());
}

TEST_CASE("cycles are rejected at build time") {
    try {
        (void)parse_graph_dsl("nodes: A, B\nA -> B\nB -> A");
        FAIL("expected CycleError");
    } catch (const causal_error& e) {
        CHECK(e.kind == "CycleError");
    }
}

TEST_CASE("study corpus fields round through the parser") {
    auto corpus = parse_study_corpus(fx::load_fixture("synthesis_corpus.studies"));
    CHECK(corpus.base.fingerprint() == fx::synthesis_target().fingerprint());
    REQUIRE(corpus.studies.size() == 6);

    std::map<std::string, const StudyDescriptor*> by;
    for (const auto& st : corpus.studies) by[st.label] = &st;
    REQUIRE(by.count("c"));
    REQUIRE(by.count("h"));
    REQUIRE(by.count("g"));

    CHECK(by["c"]->regime == Regime::observational);
    CHECK(by["c"]->randomized.empty());
    CHECK(by["c"]->measured == VarSet{"X", "Y", "Z"});
    CHECK(by["c"]->diagram.selection_nodes().size() == 1);
    for (const auto& s : by["c"]->diagram.selection_nodes())
        CHECK(by["c"]->diagram.children(s) == VarSet{"Z"});

    CHECK(by["h"]->regime == Regime::randomized);
    CHECK(by["h"]->randomized == VarSet{"X"});
    CHECK(by["h"]->measured == VarSet{"W", "X", "Y"});

    CHECK(by["g"]->regime == Regime::randomized);
    CHECK(by["g"]->diagram.selection_nodes().empty());
}

TEST_CASE("study corpus parse failures") {
    auto bad = [&](const std::string& text, const std::string& needle) {
        try {
            (void)parse_study_corpus(text);
            FAIL_CHECK("expected ParseError");
        } catch (const causal_error& e) {
            CHECK(e.kind == "ParseError");
            CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos,
                          "message was: ", e.what());
        }
    };
    std::string base = "nodes: X, Y\nX -> Y\n";
    bad(base + "study a { regime: sometimes; measured: X, Y }", "bad regime");
    bad(base + "study a { measured: X, Y", "unterminated");
    bad(base + "study a { select: X }", "no measured");
    bad(base + "study a { regime: randomized(X); measured: Y }", "must be measured");
    bad("study a { measured: X }", "no base graph");
}

TEST_CASE("model serialization is byte-stable and value-exact") {
    auto m = random_scm(fx::mediation_frontdoor(), 7, 3);
    std::string j = scm_to_json(m);
    auto back = scm_from_json(j);
    CHECK(scm_to_json(back) == j);
    CHECK(back.diagram.fingerprint() == m.diagram.fingerprint());
    REQUIRE(back.exo.size() == m.exo.size());
    for (size_t i = 0; i < m.exo.size(); ++i) {
        CHECK(back.exo[i].name == m.exo[i].name);
        REQUIRE(back.exo[i].probs.size() == m.exo[i].probs.size());
        for (size_t k = 0; k < m.exo[i].probs.size(); ++k)
            CHECK(back.exo[i].probs[k] == m.exo[i].probs[k]);  // bit-exact
    }
    for (const auto& [v, mech] : m.fn) {
        REQUIRE(back.fn.count(v));
        CHECK(back.fn.at(v).table == mech.table);
        CHECK(back.fn.at(v).parents == mech.parents);
    }

    CHECK_THROWS_AS((void)scm_from_json("{ not json"), causal_error);
}
