// acceptance gate: one line per criterion, exit code = number of failures
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "causal/dsl.hpp"
#include "causal/identify.hpp"
#include "causal/mediation.hpp"
#include "causal/scm.hpp"
#include "causal/transport.hpp"
#include "fixtures.hpp"

using namespace causal;

namespace {

struct Outcome {
    bool pass = false;
    std::string msg;
};

std::string text(const CausalDiagram& d, const ExprPtr& e) {
    return render(d, e, RenderFormat::text);
}

std::vector<std::pair<std::string, CausalDiagram>> fixture_diagrams() {
    return {
        {"mediation_plain", fx::mediation_plain()},
        {"mediation_backdoor", fx::mediation_backdoor()},
        {"mediation_dependent_covariates", fx::mediation_dependent_covariates()},
        {"mediation_frontdoor", fx::mediation_frontdoor()},
        {"mediation_pathway_covariate", fx::mediation_pathway_covariate()},
        {"mediation_double_frontdoor", fx::mediation_double_frontdoor()},
        {"mediation_collider_covariate", fx::mediation_collider_covariate()},
        {"transport_zspecific", fx::transport_zspecific()},
        {"transport_external", fx::transport_external(false)},
        {"transport_external_confounded", fx::transport_external(true)},
        {"transport_posttreatment", fx::transport_posttreatment()},
        {"synthesis_target", fx::synthesis_target()},
        {"adapt_chain", fx::adapt_chain()},
        {"bow", fx::bow()},
        {"bow_mediator", fx::bow_mediator()},
        {"chain", fx::chain()},
        {"collider", fx::collider()},
    };
}

Assignment merged(const Assignment& a, const Assignment& b) {
    Assignment out = a;
    for (const auto& [k, v] : b) out[k] = v;
    return out;
}

// criterion 1: wherever a rule's side condition certifies, its two sides
// agree numerically on every seeded model
Outcome criterion1() {
    auto t0 = std::chrono::steady_clock::now();
    long certified = 0;
    for (const auto& [name, d] : fixture_diagrams()) {
        std::vector<VarId> nodes = d.observed();
        if (nodes.size() > 6) continue;
        std::vector<DiscreteSCM> models;
        for (uint64_t s = 0; s < 20; ++s) models.push_back(random_scm(d, s));

        std::string violation;
        std::vector<int> role(nodes.size(), 0);  // 0 skip, 1 X, 2 Y, 3 Z, 4 W
        int count[5] = {0, 0, 0, 0, 0};
        std::function<void(size_t)> sweep = [&](size_t i) {
            if (!violation.empty()) return;
            if (i == nodes.size()) {
                if (count[2] == 0 || count[3] == 0) return;  // Y, Z nonempty
                VarSet sets[5];
                for (size_t k = 0; k < nodes.size(); ++k) sets[role[k]].insert(nodes[k]);
                const VarSet &X = sets[1], &Y = sets[2], &Z = sets[3], &W = sets[4];
                for (RuleId r : {RuleId::R1, RuleId::R2, RuleId::R3}) {
                    auto cert = rule_applicable(d, r, {X, Y, Z, W, true});
                    if (!cert.separated) continue;
                    ++certified;
                    for (size_t s = 0; s < models.size(); ++s) {
                        Assignment ax, ay, az, aw;
                        auto val = [&](const VarId& v) {
                            return int((std::hash<std::string>{}(v) ^ (s * 0x9e3779b97fULL)) >>
                                       17) &
                                   1;
                        };
                        for (const auto& v : X) ax[v] = val(v);
                        for (const auto& v : Y) ay[v] = val(v);
                        for (const auto& v : Z) az[v] = val(v);
                        for (const auto& v : W) aw[v] = val(v);
                        const DiscreteSCM& m = models[s];
                        double lhs, rhs;
                        if (r == RuleId::R1) {
                            lhs = m.prob(ay, merged(az, aw), ax);
                            rhs = m.prob(ay, aw, ax);
                        } else if (r == RuleId::R2) {
                            lhs = m.prob(ay, aw, merged(ax, az));
                            rhs = m.prob(ay, merged(az, aw), ax);
                        } else {
                            lhs = m.prob(ay, aw, merged(ax, az));
                            rhs = m.prob(ay, aw, ax);
                        }
                        if (std::abs(lhs - rhs) > 1e-9) {
                            std::ostringstream os;
                            os << name << " " << rule_name(r) << " X=" << d.render_set(X)
                               << " Y=" << d.render_set(Y) << " Z=" << d.render_set(Z)
                               << " W=" << d.render_set(W) << " seed " << s << ": " << lhs
                               << " vs " << rhs;
                            violation = os.str();
                            return;
                        }
                    }
                }
                return;
            }
            for (int r = 0; r < 5; ++r) {
                if (r > 0 && count[r] == 2) continue;
                role[i] = r;
                ++count[r];
                sweep(i + 1);
                --count[r];
            }
            role[i] = 0;
        };
        sweep(0);
        if (!violation.empty()) return {false, "violated: " + violation};
    }
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
    std::ostringstream os;
    os << certified << " certified rule instances, all sides equal within 1e-9 across 20 "
          "models each ("
       << secs << "s)";
    if (secs > 300) return {false, os.str() + " — exceeded the 5 minute budget"};
    return {true, os.str()};
}

// criterion 2: the three selection-transport fixtures reproduce the expected
// formulas and match the target interventional oracle
Outcome criterion2() {
    const std::vector<std::pair<SelectionDiagram, std::string>> cases{
        {fx::transport_zspecific(), "Σ_z P(y | z, do(x)) P*(z)"},
        {fx::transport_external(false), "P(y | do(x))"},
        {fx::transport_posttreatment(), "Σ_z P(y | x, z) P*(z | x)"},
    };
    for (const auto& [sd, expected] : cases) {
        auto out = transport_effect(sd, {"Y"}, {"X"});
        if (!out.formula) return {false, "no transport formula where '" + expected + "' expected"};
        std::string got = text(sd, normalize(sd, out.formula->expr));
        if (got != expected)
            return {false, "formula mismatch: got '" + got + "', expected '" + expected + "'"};
        for (uint64_t seed = 0; seed < 20; ++seed) {
            auto pp = fx::paired_scms(sd, seed);
            std::map<std::string, const DiscreteSCM*> env{{"src", &pp.src}, {"tgt", &pp.tgt}};
            for (int xv = 0; xv < 2; ++xv)
                for (int yv = 0; yv < 2; ++yv) {
                    double truth = pp.tgt.prob({{"Y", yv}}, {}, {{"X", xv}});
                    double est =
                        eval_estimand(out.formula->expr, env, {{"X", xv}, {"Y", yv}});
                    if (std::abs(est - truth) > 1e-9) {
                        std::ostringstream os;
                        os << "'" << expected << "' numeric mismatch at seed " << seed << ": "
                           << est << " vs " << truth;
                        return {false, os.str()};
                    }
                }
        }
    }
    return {true, "all three formulas match syntactically and numerically (20 paired models each)"};
}

// criterion 3: the dependent-covariate natural direct effect must equal a
// published reference form that couples the two covariates in a single joint
// weight; that form is numerically unsound, so the syntactic sub-check is
// expected to fail while the engine's independent-weight product form passes
// the oracle sub-check
Outcome criterion3() {
    auto d = fx::mediation_dependent_covariates();
    auto res = nde_estimand(d, {"X", "M", "Y", 1, 0, {}});
    if (!res.identified) return {false, "effect unexpectedly not identified"};
    const char* ref_text =
        "sum{M, W2, W3} (((E(Y | X=1, M, W3) - E(Y | X=0, M, W3))) * P(M | X=0, W2) * "
        "P(W2, W3))";
    ExprPtr ref = normalize(d, parse_expr(d, ref_text));
    ExprPtr got = normalize(d, res.estimand.expr);
    bool syntactic = text(d, got) == text(d, ref);

    double worst_engine = 0.0, worst_ref = 0.0;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        auto m = random_scm(d, seed);
        std::map<std::string, const DiscreteSCM*> env{{"src", &m}};
        double truth = m.eval_nde("X", "M", "Y", 1, 0);
        worst_engine = std::max(worst_engine, std::abs(eval_estimand(got, env) - truth));
        worst_ref = std::max(worst_ref, std::abs(eval_estimand(ref, env) - truth));
    }
    bool numeric = worst_engine <= 1e-9;

    std::ostringstream os;
    if (syntactic && numeric) return {true, "estimand matches the reference form and the oracle"};
    os << "numeric sub-check " << (numeric ? "passes" : "FAILS") << " (engine estimand within "
       << worst_engine << " of the counterfactual oracle over 20 models); syntactic sub-check "
       << (syntactic ? "passes" : "FAILS")
       << ": the reference couples the covariates in a joint weight P(w2, w3), which deviates "
          "from the same oracle by up to "
       << worst_ref
       << " on these models — the required cross-world independence does not hold on this "
          "diagram, so the engine deliberately emits the sound independent-weight product form "
          "instead: "
       << text(d, got);
    return {false, os.str()};
}

// criterion 4: the dependent-covariate diagram satisfies the split
// assumption set while the single-set conditions fail for every covariate
// subset; the interception diagram fails only the treatment-mediator
// condition yet the effect is still identified
Outcome criterion4() {
    auto d2 = fx::mediation_dependent_covariates();
    MediationQuery q{"X", "M", "Y", 1, 0, {}};
    auto a = check_set_A(d2, q, {});
    if (!a.overall) return {false, "split assumption set unexpectedly fails with W={}"};
    for (const VarSet& w : std::vector<VarSet>{{}, {"W2"}, {"W3"}, {"W2", "W3"}}) {
        auto b = check_set_B(d2, q, w);
        if (b.overall)
            return {false, "single assumption set unexpectedly holds for W=" + d2.render_set(w)};
    }

    auto d3 = fx::mediation_frontdoor();
    auto b3 = check_set_B(d3, q, {});
    std::map<std::string, bool> holds;
    for (const auto& c : b3.conditions) holds[c.name] = c.holds;
    if (!holds["B-1"] || holds["B-2"] || !holds["B-3"])
        return {false, "interception fixture condition pattern is not B-1 ok / B-2 fail / B-3 ok"};
    if (!nde_estimand(d3, q).identified)
        return {false, "interception fixture effect not identified despite mediator route"};
    return {true,
            "split set holds where every single covariate set fails; mediator-route fixture "
            "fails only B-2 and stays identified"};
}

// criterion 5: natural-direct-effect coverage across the mediation family
Outcome criterion5() {
    const std::vector<std::pair<std::string, CausalDiagram>> cases{
        {"plain", fx::mediation_plain()},
        {"backdoor", fx::mediation_backdoor()},
        {"frontdoor", fx::mediation_frontdoor()},
        {"double_frontdoor", fx::mediation_double_frontdoor()},
        {"pathway_covariate", fx::mediation_pathway_covariate()},
        {"collider_covariate", fx::mediation_collider_covariate()},
    };
    for (const auto& [name, d] : cases) {
        auto res = nde_estimand(d, {"X", "M", "Y", 1, 0, {}});
        if (!res.identified) return {false, name + ": not identified"};
        for (uint64_t seed = 0; seed < 20; ++seed) {
            auto m = random_scm(d, seed);
            std::map<std::string, const DiscreteSCM*> env{{"src", &m}};
            double truth = m.eval_nde("X", "M", "Y", 1, 0);
            double est = eval_estimand(res.estimand.expr, env);
            if (std::abs(est - truth) > 1e-9) {
                std::ostringstream os;
                os << name << " seed " << seed << ": " << est << " vs oracle " << truth;
                return {false, os.str()};
            }
        }
    }
    return {true, "identified on all six fixtures, each within 1e-9 of the counterfactual "
                  "oracle on 20 models"};
}

// criterion 6: adjustment and interception formulas on the canonical
// fixtures, refusal with a falsification witness on the confounded pair
Outcome criterion6() {
    auto db = fx::mediation_backdoor();
    auto back = identify_effect(db, {"Y"}, {"X"});
    if (!back.identified) return {false, "covariate-adjustment fixture not identified"};
    std::string back_text = text(db, back.estimand.expr);
    if (back_text != "Σ_w P(w) P(y | w, x)")
        return {false, "adjustment formula mismatch: got '" + back_text + "'"};

    auto df = fx::mediation_frontdoor();
    auto front = frontdoor_identify(df, {"X"}, {"M"});
    if (!front) return {false, "interception sub-query not identified"};
    std::string front_text = text(df, front->expr);
    if (front_text != "Σ_z P(z | x) (Σ_x' P(m | x', z) P(x'))")
        return {false, "interception formula mismatch: got '" + front_text + "'"};

    auto bow = fx::bow();
    auto res = identify_effect(bow, {"Y"}, {"X"});
    if (res.identified) return {false, "confounded pair unexpectedly identified"};
    auto w = falsify_identifiability(bow, {"Y"}, {"X"});
    if (!w) return {false, "no falsification witness for the confounded pair"};
    if (w->observational_tv > 1e-9 || w->effect_gap < 0.05) {
        std::ostringstream os;
        os << "witness too weak: tv " << w->observational_tv << ", gap " << w->effect_gap;
        return {false, os.str()};
    }
    std::ostringstream os;
    os << "adjustment and interception formulas exact; confounded pair refused with witness "
          "(tv "
       << w->observational_tv << ", gap " << w->effect_gap << ")";
    return {true, os.str()};
}

// criterion 7: study synthesis composes the expected plan, matches the
// target oracle, refuses the insufficient corpus, and certifies exactly the
// invariant chain factors of the selected study
Outcome criterion7() {
    auto corpus = parse_study_corpus(fx::load_fixture("synthesis_corpus.studies"));
    ExprPtr r = parse_expr(corpus.base, "P(y | do(x))");
    auto pick = [&](std::vector<std::string> labels) {
        std::vector<StudyDescriptor> out;
        for (const auto& st : corpus.studies)
            for (const auto& l : labels)
                if (st.label == l) out.push_back(st);
        return out;
    };

    auto studies_hi = pick({"h", "i"});
    auto hi = meta_synthesize(corpus.base, r, studies_hi);
    if (!hi.plan) return {false, "complementary studies produced no plan"};
    std::string plan_text = text(corpus.base, hi.plan->composition);
    if (plan_text != "Σ_w P_h(y | w, do(x)) P_i(w | do(x))")
        return {false, "plan mismatch: got '" + plan_text + "'"};
    for (uint64_t seed = 0; seed < 20; ++seed) {
        auto models = fx::study_models(corpus.base, studies_hi, seed);
        std::map<std::string, const DiscreteSCM*> env;
        for (const auto& [label, m] : models) env[label] = &m;
        const DiscreteSCM& tgt = models.at("tgt");
        for (int xv = 0; xv < 2; ++xv)
            for (int yv = 0; yv < 2; ++yv) {
                double truth = tgt.prob({{"Y", yv}}, {}, {{"X", xv}});
                double est =
                    eval_estimand(hi.plan->composition, env, {{"X", xv}, {"Y", yv}});
                if (std::abs(est - truth) > 1e-9) {
                    std::ostringstream os;
                    os << "composition numeric mismatch at seed " << seed << ": " << est
                       << " vs " << truth;
                    return {false, os.str()};
                }
            }
    }

    if (meta_synthesize(corpus.base, r, pick({"c", "e", "f"})).plan)
        return {false, "insufficient corpus unexpectedly synthesized"};

    const StudyDescriptor* c = nullptr;
    for (const auto& st : corpus.studies)
        if (st.label == "c") c = &st;
    if (!c) return {false, "study c missing from the corpus"};
    bool ok_z = !invariant_term(c->diagram, parse_expr(c->diagram, "P(z)")->term);
    bool ok_xz = invariant_term(c->diagram, parse_expr(c->diagram, "P(x | z)")->term);
    bool ok_yzx = invariant_term(c->diagram, parse_expr(c->diagram, "P(y | z, x)")->term);
    if (!ok_z || !ok_xz || !ok_yzx)
        return {false, "study c chain-factor certification is not exactly {P(x|z), P(y|z,x)}"};
    return {true, "plan, oracle match (20 seeds), refusal, and invariant factors all as "
                  "expected"};
}

// criterion 8: factorization adaptation across a selection on the middle of
// a chain answers the target conditional without measuring its conditioning
// variable there
Outcome criterion8() {
    SelectionDiagram sd = fx::adapt_chain();
    auto plan = adapt_factorization(sd, parse_expr(sd, "P*(x | z)")->term);
    std::vector<std::pair<std::string, bool>> want{
        {"P(x)", true}, {"P*(y | x)", false}, {"P(z | y)", true}};
    if (plan.factors.size() != want.size()) return {false, "unexpected factor count"};
    for (size_t i = 0; i < want.size(); ++i) {
        std::string got = text(sd, make_term(plan.factors[i].factor));
        if (got != want[i].first || plan.factors[i].invariant != want[i].second)
            return {false, "factor " + got + " tagged " +
                               (plan.factors[i].invariant ? "kept" : "re-learned") +
                               ", expected " + want[i].first};
    }
    if (plan.target_measurements != VarSet{"X", "Y"})
        return {false, "target measurements are not exactly {X, Y}"};
    for (uint64_t seed = 0; seed < 20; ++seed) {
        auto pp = fx::paired_scms(sd, seed);
        std::map<std::string, const DiscreteSCM*> env{{"src", &pp.src}, {"tgt", &pp.tgt}};
        for (int xv = 0; xv < 2; ++xv)
            for (int zv = 0; zv < 2; ++zv) {
                double truth = pp.tgt.prob({{"X", xv}}, {{"Z", zv}});
                double est = eval_estimand(plan.composition, env, {{"X", xv}, {"Z", zv}});
                if (std::abs(est - truth) > 1e-9) {
                    std::ostringstream os;
                    os << "adapted answer off at seed " << seed << ": " << est << " vs "
                       << truth;
                    return {false, os.str()};
                }
            }
    }
    return {true, "source keeps P(x), P(z|y); target re-learns P*(y|x); Z unmeasured in the "
                  "target; oracle match on 20 paired models"};
}

// criterion 9: the rewrite engine and the recursive identifier agree
// wherever both produce an answer
Outcome criterion9() {
    int agreements = 0;
    for (const auto& [name, d] : fixture_diagrams()) {
        VarId x, y;
        if (d.has_node("X") && d.has_node("Y")) {
            x = "X";
            y = "Y";
        } else {
            auto obs = d.observed();
            x = obs.front();
            y = obs.back();
        }
        ExprPtr start = parse_expr(d, "P(" + y + " | do(" + x + "))");
        Goal goal;
        goal.kind = Goal::Kind::do_free;
        auto derived = derive(d, start, goal);

        IdentifyResult ident;
        try {
            ident = identify_effect(d, {y}, {x});
        } catch (const causal_error&) {
            continue;
        }
        if (!derived.derivation || !ident.identified) continue;
        ++agreements;
        for (uint64_t seed = 0; seed < 20; ++seed) {
            auto m = random_scm(d, seed);
            std::map<std::string, const DiscreteSCM*> env{{"src", &m}};
            for (int xv = 0; xv < 2; ++xv)
                for (int yv = 0; yv < 2; ++yv) {
                    Assignment a{{x, xv}, {y, yv}};
                    double via_rules = eval_estimand(derived.derivation->end, env, a);
                    double via_id = eval_estimand(ident.estimand.expr, env, a);
                    if (std::abs(via_rules - via_id) > 1e-9) {
                        std::ostringstream os;
                        os << name << " seed " << seed << ": rewrite engine " << via_rules
                           << " vs identifier " << via_id;
                        return {false, os.str()};
                    }
                }
        }
    }
    std::ostringstream os;
    os << agreements << " fixtures answered by both engines, all within 1e-9 on 20 models each";
    return {true, os.str()};
}

std::pair<int, std::string> run_cli(const std::string& args) {
    // templates carry raw expression syntax; quote each token for the shell
    std::string cmd = std::string(CLI_PATH);
    std::istringstream toks(args);
    std::string tok;
    while (toks >> tok) cmd += " '" + tok + "'";
    cmd += " 2>/dev/null";
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return {-1, ""};
    std::string out;
    char buf[4096];
    size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
    int rc = pclose(p);
    return {WIFEXITED(rc) ? WEXITSTATUS(rc) : -1, out};
}

// criterion 10: every fixture has an expected-output sidecar; the pinned
// command reproduces it and is byte-identical across repeated runs
Outcome criterion10() {
    namespace fsys = std::filesystem;
    int checked = 0;
    for (const auto& entry : fsys::directory_iterator(FIXTURES_DIR)) {
        auto path = entry.path();
        if (path.extension() != ".cg" && path.extension() != ".studies") continue;
        fsys::path sidecar = path;
        sidecar.replace_extension(".expected");
        if (!fsys::exists(sidecar))
            return {false, "missing sidecar for " + path.filename().string()};

        std::istringstream in(read_file(sidecar.string()));
        std::string cmd_line, exit_line, expected, line;
        std::getline(in, cmd_line);
        std::getline(in, exit_line);
        if (cmd_line.rfind("# cmd: ", 0) != 0 || exit_line.rfind("# exit: ", 0) != 0)
            return {false, sidecar.filename().string() + " has a malformed header"};
        while (std::getline(in, line)) expected += line + "\n";
        int want_exit = std::stoi(exit_line.substr(8));

        std::string tmpl = cmd_line.substr(7);
        const std::string token = "{fixture}";
        size_t at = tmpl.find(token);
        if (at != std::string::npos) tmpl.replace(at, token.size(), path.string());

        auto [exit1, out1] = run_cli(tmpl);
        auto [exit2, out2] = run_cli(tmpl);
        if (out1 != out2 || exit1 != exit2)
            return {false, path.filename().string() + ": repeated runs differ"};
        if (exit1 != want_exit || out1 != expected) {
            std::ostringstream os;
            os << path.filename().string() << ": expected exit " << want_exit << " with\n"
               << expected << "got exit " << exit1 << " with\n"
               << out1;
            return {false, os.str()};
        }
        ++checked;
    }
    std::ostringstream os;
    os << checked << " fixture commands deterministic and matching their sidecars";
    if (checked == 0) return {false, "no fixtures found"};
    return {true, os.str()};
}

}  // namespace

int main() {
    const std::vector<std::function<Outcome()>> criteria{
        criterion1, criterion2, criterion3, criterion4, criterion5,
        criterion6, criterion7, criterion8, criterion9, criterion10,
    };
    int failures = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i]();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::cout << "CRITERION " << (i + 1) << ": " << (o.pass ? "PASS" : "FAIL") << " — "
                  << o.msg << "\n";
    }
    return failures;
}
