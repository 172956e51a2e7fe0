#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "causal/docalculus.hpp"
#include "causal/dsl.hpp"
#include "causal/identify.hpp"
#include "causal/mediation.hpp"
#include "causal/scm.hpp"
#include "causal/transport.hpp"

namespace {

using namespace causal;

RenderFormat parse_format(const std::string& f) {
    if (f == "text") return RenderFormat::text;
    if (f == "latex") return RenderFormat::latex;
    if (f == "structured") return RenderFormat::structured;
    throw causal_error("ParseError", "unknown format '" + f + "'");
}

// "X=A,B;Y=C" -> role name to variable set
std::map<std::string, VarSet> parse_bind(const std::string& s) {
    std::map<std::string, VarSet> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ';')) {
        if (part.empty()) continue;
        size_t eq = part.find('=');
        if (eq == std::string::npos)
            throw causal_error("ParseError", "bad binding '" + part + "', expected ROLE=names");
        std::string role = part.substr(0, eq);
        std::stringstream names(part.substr(eq + 1));
        std::string n;
        while (std::getline(names, n, ','))
            if (!n.empty()) out[role].insert(n);
    }
    return out;
}

ProbTerm effect_term(const CausalDiagram& d, const std::string& expr_text) {
    ExprPtr e = parse_expr(d, expr_text);
    if (e->kind != Expr::Kind::Term)
        throw causal_error("MalformedExpr", "expected a single probability term");
    return e->term;
}

VarSet base_names(const std::vector<TermVar>& vs) {
    VarSet out;
    for (const auto& v : vs) out.insert(base_var(v.name));
    return out;
}

void print_derivation(const CausalDiagram& d, const Derivation& dv, RenderFormat fmt) {
    int n = 0;
    for (const auto& st : dv.steps) {
        std::cout << "  step " << ++n << " [" << st.move << "] "
                  << render(d, st.before, fmt) << "  =>  " << render(d, st.after, fmt) << "\n";
        if (st.certificate)
            std::cout << "         side condition on " << st.certificate->graph_tag << "\n";
    }
}

struct Options {
    std::string graph_file, scm_spec, studies_file, effect, query;
    std::vector<std::string> scm_files;
    std::string format = "text";
    int budget_depth = 8, budget_width = 512;
    uint64_t seed = 1;
    bool trace = false;
};

int run_dsep(const Options& o) {
    CausalDiagram d = parse_graph_dsl(read_file(o.graph_file));
    auto bind = parse_bind(o.query);
    auto cert = d_separated(d, bind["X"], bind["Y"], bind["Z"]);
    if (cert.separated) {
        std::cout << "separated\n";
        return 0;
    }
    std::cout << "connected: " << cert.witness_text() << "\n";
    return 1;
}

int run_check_rule(const Options& o, const std::string& rule, const std::string& bind_text) {
    CausalDiagram d = parse_graph_dsl(read_file(o.graph_file));
    RuleId r;
    if (rule == "R1")
        r = RuleId::R1;
    else if (rule == "R2")
        r = RuleId::R2;
    else if (rule == "R3")
        r = RuleId::R3;
    else
        throw causal_error("ParseError", "unknown rule '" + rule + "'");
    auto bind = parse_bind(bind_text);
    RuleBinding b{bind["X"], bind["Y"], bind["Z"], bind["W"], true};
    auto cert = rule_applicable(d, r, b);
    if (cert.separated) {
        std::cout << rule_name(r) << " applicable (" << cert.graph_tag << ")\n";
        return 0;
    }
    std::cout << rule_name(r) << " refused, active path: " << cert.witness_text() << "\n";
    return 1;
}

int run_identify(const Options& o) {
    CausalDiagram d = parse_graph_dsl(read_file(o.graph_file));
    RenderFormat fmt = parse_format(o.format);
    ProbTerm t = effect_term(d, o.effect);
    auto res = identify_effect(d, base_names(t.outcome), base_names(t.given_do),
                               base_names(t.given_obs));
    if (res.identified) {
        std::cout << render(d, res.estimand.expr, fmt) << "\n";
        if (o.trace)
            for (const auto& line : res.trace) std::cout << "  " << line << "\n";
        return 0;
    }
    std::cout << "not identifiable: " << res.witness << "\n";
    if (o.trace)
        for (const auto& line : res.trace) std::cout << "  " << line << "\n";
    return 1;
}

int run_mediate(const Options& o) {
    CausalDiagram d = parse_graph_dsl(read_file(o.graph_file));
    RenderFormat fmt = parse_format(o.format);
    std::string q = o.query;
    bool nde;
    if (q.rfind("NDE(", 0) == 0)
        nde = true;
    else if (q.rfind("CDE(", 0) == 0)
        nde = false;
    else
        throw causal_error("ParseError", "mediation query must be NDE(X,M,Y) or CDE(X,M,Y)");
    if (q.back() != ')') throw causal_error("ParseError", "missing ')' in mediation query");
    std::stringstream names(q.substr(4, q.size() - 5));
    std::vector<std::string> parts;
    std::string n;
    while (std::getline(names, n, ',')) {
        while (!n.empty() && n.front() == ' ') n.erase(n.begin());
        while (!n.empty() && n.back() == ' ') n.pop_back();
        parts.push_back(n);
    }
    if (parts.size() != 3)
        throw causal_error("ParseError", "mediation query takes exactly (X, M, Y)");
    MediationQuery mq{parts[0], parts[1], parts[2], 1, 0, {}};
    validate_query(d, mq);
    for (const auto& w : mq.warnings) std::cout << "warning: " << w << "\n";
    if (nde) {
        auto res = nde_estimand(d, mq);
        if (res.identified) {
            std::cout << render(d, res.estimand.expr, fmt) << "\n";
            std::cout << "covariates: " << d.render_set(res.w_used) << "\n";
            if (o.trace)
                for (const auto& c : res.report.conditions)
                    std::cout << "  " << c.name << (c.holds ? " holds: " : " fails: ")
                              << c.detail << "\n";
            return 0;
        }
        std::cout << "not identified\n";
        if (o.trace)
            for (const auto& rep : res.failures)
                for (const auto& c : rep.conditions)
                    if (!c.holds)
                        std::cout << "  W=" << d.render_set(rep.w_used) << " " << c.name
                                  << " fails: " << c.detail << "\n";
        return 1;
    }
    auto res = cde_estimand(d, mq);
    if (res.identified) {
        std::cout << render(d, res.estimand.expr, fmt) << "\n";
        return 0;
    }
    std::cout << "not identified: " << res.witness << "\n";
    return 1;
}

int run_transport(const Options& o) {
    CausalDiagram d = parse_graph_dsl(read_file(o.graph_file));
    RenderFormat fmt = parse_format(o.format);
    ProbTerm t = effect_term(d, o.effect);
    DeriveBudget budget{o.budget_depth, o.budget_width};
    auto out = transport_effect(d, base_names(t.outcome), base_names(t.given_do), budget);
    if (out.formula) {
        std::cout << render(d, out.formula->expr, fmt) << "\n";
        if (o.trace) print_derivation(d, out.formula->derivation, fmt);
        return 0;
    }
    std::cout << "no transport formula within budget (explored "
              << out.search.states_explored << " states, depth " << out.search.depth_reached
              << ")\n";
    return 1;
}

int run_synthesize(const Options& o) {
    StudyCorpus corpus = parse_study_corpus(read_file(o.studies_file));
    RenderFormat fmt = parse_format(o.format);
    ExprPtr r = parse_expr(corpus.base, o.effect);
    auto out = meta_synthesize(corpus.base, r, corpus.studies);
    if (out.plan) {
        std::cout << render(corpus.base, out.plan->composition, fmt) << "\n";
        for (const auto& sub : out.plan->sub_relations)
            std::cout << "  " << render(corpus.base, sub.term, fmt) << "  from study "
                      << sub.study << "\n";
        return 0;
    }
    std::cout << "unsynthesizable\n";
    for (const auto& u : out.uncovered)
        std::cout << "  uncovered: " << render(corpus.base, u, fmt) << "\n";
    return 1;
}

int run_eval(const Options& o) {
    std::map<std::string, DiscreteSCM> models;
    std::optional<CausalDiagram> graph;
    if (!o.graph_file.empty()) graph = parse_graph_dsl(read_file(o.graph_file));
    for (const auto& spec : o.scm_files) {
        size_t eq = spec.find('=');
        std::string label = eq == std::string::npos ? "src" : spec.substr(0, eq);
        std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
        models.emplace(label, scm_from_json(read_file(path)));
    }
    if (models.empty()) {
        if (!graph) throw causal_error("ParseError", "eval needs --scm or --graph with --seed");
        models.emplace("src", random_scm(*graph, o.seed));
    }
    const CausalDiagram& d = graph ? *graph : models.begin()->second.diagram;
    ExprPtr e = parse_expr(d, o.query);
    std::map<std::string, const DiscreteSCM*> env;
    for (const auto& [label, m] : models) env[label] = &m;
    Dist dist = eval_estimand_dist(e, env, d);
    std::cout << std::setprecision(17);
    if (dist.vars.empty()) {
        std::cout << dist.p.begin()->second << "\n";
        return 0;
    }
    for (const auto& [vals, p] : dist.p) {
        for (size_t k = 0; k < dist.vars.size(); ++k)
            std::cout << dist.vars[k] << "=" << vals[k] << (k + 1 < dist.vars.size() ? " " : "");
        std::cout << " : " << p << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    Options o;
    std::string rule, bind_text;

    CLI::App app{"symbolic causal inference: identification, mediation, transport, synthesis"};
    app.require_subcommand(1);

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--format", o.format, "text|latex|structured");
        sub->add_option("--budget-depth", o.budget_depth, "derivation depth budget");
        sub->add_option("--budget-width", o.budget_width, "derivation frontier budget");
        sub->add_option("--seed", o.seed, "model seed");
        sub->add_flag("--trace", o.trace, "print derivation/decision trace");
    };

    auto* identify = app.add_subcommand("identify", "identify a causal effect");
    identify->add_option("--graph", o.graph_file)->required();
    identify->add_option("--effect", o.effect)->required();
    add_common(identify);

    auto* mediate = app.add_subcommand("mediate", "natural/controlled direct effect");
    mediate->add_option("--graph", o.graph_file)->required();
    mediate->add_option("--query", o.query, "NDE(X,M,Y) or CDE(X,M,Y)")->required();
    add_common(mediate);

    auto* transport = app.add_subcommand("transport", "transport an effect across populations");
    transport->add_option("--graph", o.graph_file)->required();
    transport->add_option("--effect", o.effect)->required();
    add_common(transport);

    auto* synthesize = app.add_subcommand("synthesize", "compose a relation from studies");
    synthesize->add_option("--studies", o.studies_file)->required();
    synthesize->add_option("--effect", o.effect)->required();
    add_common(synthesize);

    auto* eval = app.add_subcommand("eval", "evaluate an expression against models");
    eval->add_option("--graph", o.graph_file);
    eval->add_option("--scm", o.scm_files, "model file, or label=file (repeatable)");
    eval->add_option("--query", o.query)->required();
    add_common(eval);

    auto* check_rule = app.add_subcommand("check-rule", "test a rule's side condition");
    check_rule->add_option("--graph", o.graph_file)->required();
    check_rule->add_option("--rule", rule, "R1|R2|R3")->required();
    check_rule->add_option("--bind", bind_text, "X=..;Y=..;Z=..;W=..")->required();
    add_common(check_rule);

    auto* dsep = app.add_subcommand("d-sep", "test d-separation");
    dsep->add_option("--graph", o.graph_file)->required();
    dsep->add_option("--bind", o.query, "X=..;Y=..;Z=..")->required();
    add_common(dsep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*identify) return run_identify(o);
        if (*mediate) return run_mediate(o);
        if (*transport) return run_transport(o);
        if (*synthesize) return run_synthesize(o);
        if (*eval) return run_eval(o);
        if (*check_rule) return run_check_rule(o, rule, bind_text);
        if (*dsep) return run_dsep(o);
    } catch (const causal_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
