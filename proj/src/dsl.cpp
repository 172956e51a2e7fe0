#include "causal/dsl.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace causal {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(item);
    return out;
}

std::vector<VarId> name_list(const std::string& s, int line) {
    std::vector<VarId> out;
    for (const auto& raw : split(s, ',')) {
        std::string n = trim(raw);
        if (n.empty())
            throw causal_error("ParseError",
                               "line " + std::to_string(line) + ": empty name in list");
        for (char c : n)
            if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_')
                throw causal_error("ParseError", "line " + std::to_string(line) +
                                                     ": bad character in name '" + n + "'");
        out.push_back(n);
    }
    return out;
}

struct GraphAccum {
    std::vector<VarId> nodes;
    VarSet latent, selection;
    std::vector<std::pair<VarId, VarId>> directed, bidirected;

    void ensure(const VarId& v) {
        if (std::find(nodes.begin(), nodes.end(), v) == nodes.end()) nodes.push_back(v);
    }

    void statement(const std::string& stmt, int line) {
        std::string s = trim(stmt);
        if (s.empty()) return;
        auto err = [&](const std::string& m) {
            throw causal_error("ParseError", "line " + std::to_string(line) + ": " + m);
        };
        if (s.rfind("nodes:", 0) == 0) {
            for (const auto& n : name_list(s.substr(6), line)) ensure(n);
            return;
        }
        if (s.rfind("latent:", 0) == 0) {
            for (const auto& n : name_list(s.substr(7), line)) {
                ensure(n);
                latent.insert(n);
            }
            return;
        }
        for (const auto& [tok, kind] : std::initializer_list<std::pair<const char*, int>>{
                 {"<->", 1}, {"~>", 2}, {"->", 0}}) {
            size_t pos = s.find(tok);
            if (pos == std::string::npos) continue;
            std::string a = trim(s.substr(0, pos));
            std::string b = trim(s.substr(pos + std::strlen(tok)));
            if (a.empty()) err(std::string("missing left endpoint before '") + tok + "'");
            if (b.empty()) err(std::string("dangling '") + tok + "' (missing right endpoint)");
            if (name_list(a, line).size() != 1 || name_list(b, line).size() != 1)
                err("edges take exactly one name per side");
            ensure(a);
            ensure(b);
            if (kind == 0)
                directed.push_back({a, b});
            else if (kind == 1)
                bidirected.push_back({a, b});
            else {
                selection.insert(a);
                directed.push_back({a, b});
            }
            return;
        }
        err("unrecognized statement '" + s + "'");
    }

    CausalDiagram build() const {
        return CausalDiagram::build(nodes, latent, directed, bidirected, selection);
    }
};

std::string strip_comment(const std::string& line) {
    size_t h = line.find('#');
    return h == std::string::npos ? line : line.substr(0, h);
}

}  // namespace

CausalDiagram parse_graph_dsl(const std::string& text) {
    GraphAccum g;
    int lineno = 0;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        ++lineno;
        for (const auto& stmt : split(strip_comment(line), ';')) g.statement(stmt, lineno);
    }
    if (g.nodes.empty()) throw causal_error("ParseError", "no nodes declared");
    return g.build();
}

StudyCorpus parse_study_corpus(const std::string& text) {
    StudyCorpus corpus;
    std::vector<std::string> lines;
    {
        std::stringstream ss(text);
        std::string line;
        while (std::getline(ss, line)) lines.push_back(strip_comment(line));
    }

    GraphAccum base;
    size_t i = 0;
    for (; i < lines.size(); ++i) {
        if (trim(lines[i]).rfind("study ", 0) == 0) break;
        for (const auto& stmt : split(lines[i], ';')) base.statement(stmt, int(i + 1));
    }
    if (base.nodes.empty()) throw causal_error("ParseError", "no base graph before studies");
    corpus.base = base.build();

    while (i < lines.size()) {
        std::string head = trim(lines[i]);
        if (head.empty()) {
            ++i;
            continue;
        }
        int lineno = int(i + 1);
        auto err = [&](const std::string& m) {
            throw causal_error("ParseError", "line " + std::to_string(lineno) + ": " + m);
        };
        if (head.rfind("study ", 0) != 0) err("expected 'study <label> {'");
        size_t brace = head.find('{');
        if (brace == std::string::npos) err("missing '{' in study header");
        std::string label = trim(head.substr(6, brace - 6));
        if (label.empty()) err("missing study label");

        std::string body = head.substr(brace + 1);
        ++i;
        while (body.find('}') == std::string::npos) {
            if (i >= lines.size()) err("unterminated study block '" + label + "'");
            body += "\n" + lines[i];
            lineno = int(++i);
        }
        body = body.substr(0, body.find('}'));

        StudyDescriptor sd;
        sd.label = label;
        VarSet select;
        bool saw_measured = false;
        for (auto& chunk : split(body, ';')) {
            std::string stmt;
            for (char c : chunk) stmt += (c == '\n') ? ' ' : c;
            stmt = trim(stmt);
            if (stmt.empty()) continue;
            if (stmt.rfind("select:", 0) == 0) {
                for (const auto& n : name_list(stmt.substr(7), lineno)) select.insert(n);
            } else if (stmt.rfind("regime:", 0) == 0) {
                std::string r = trim(stmt.substr(7));
                if (r == "observational") {
                    sd.regime = Regime::observational;
                } else if (r.rfind("randomized(", 0) == 0 && r.back() == ')') {
                    sd.regime = Regime::randomized;
                    for (const auto& n : name_list(r.substr(11, r.size() - 12), lineno))
                        sd.randomized.insert(n);
                } else {
                    err("bad regime '" + r + "'");
                }
            } else if (stmt.rfind("measured:", 0) == 0) {
                saw_measured = true;
                for (const auto& n : name_list(stmt.substr(9), lineno)) sd.measured.insert(n);
            } else {
                err("unrecognized study field '" + stmt + "'");
            }
        }
        if (!saw_measured) err("study '" + label + "' lists no measured variables");
        for (const auto& v : set_union(select, set_union(sd.randomized, sd.measured)))
            corpus.base.order_of(v);
        if (sd.regime == Regime::randomized && !set_minus(sd.randomized, sd.measured).empty())
            err("randomized variables must be measured");
        sd.diagram = attach_selection(corpus.base, select);
        corpus.studies.push_back(std::move(sd));
    }
    return corpus;
}

std::string scm_to_json(const DiscreteSCM& m) {
    nlohmann::ordered_json j;
    j["nodes"] = m.diagram.nodes();
    j["latent"] = m.diagram.sorted(m.diagram.latents());
    nlohmann::ordered_json edges = nlohmann::ordered_json::array();
    for (const auto& [a, b] : m.diagram.directed_edges()) edges.push_back({a, b});
    j["directed"] = edges;
    nlohmann::ordered_json sel = nlohmann::ordered_json::array();
    for (const auto& s : m.diagram.sorted(m.diagram.selection_nodes())) sel.push_back(s);
    j["selection"] = sel;
    nlohmann::ordered_json card = nlohmann::ordered_json::object();
    for (const auto& v : m.diagram.nodes())
        if (m.card.count(v)) card[v] = m.card.at(v);
    j["card"] = card;
    nlohmann::ordered_json exo = nlohmann::ordered_json::array();
    for (const auto& b : m.exo)
        exo.push_back({{"name", b.name}, {"card", b.card}, {"probs", b.probs}});
    j["exo"] = exo;
    nlohmann::ordered_json fn = nlohmann::ordered_json::object();
    for (const auto& [v, mech] : m.fn)
        fn[v] = {{"parents", mech.parents}, {"card", mech.card}, {"table", mech.table}};
    j["fn"] = fn;
    return j.dump(2) + "\n";
}

DiscreteSCM scm_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw causal_error("ParseError", std::string("bad model document: ") + e.what());
    }
    try {
        std::vector<VarId> nodes = j.at("nodes").get<std::vector<VarId>>();
        VarSet latent, selection;
        for (const auto& v : j.at("latent")) latent.insert(v.get<VarId>());
        if (j.contains("selection"))
            for (const auto& v : j["selection"]) selection.insert(v.get<VarId>());
        std::vector<std::pair<VarId, VarId>> directed;
        for (const auto& e : j.at("directed"))
            directed.push_back({e.at(0).get<VarId>(), e.at(1).get<VarId>()});
        DiscreteSCM m;
        m.diagram = CausalDiagram::build(nodes, latent, directed, {}, selection);
        for (auto it = j.at("card").begin(); it != j.at("card").end(); ++it)
            m.card[it.key()] = it.value().get<int>();
        for (const auto& b : j.at("exo")) {
            ExoBlock blk;
            blk.name = b.at("name").get<VarId>();
            blk.card = b.at("card").get<int>();
            blk.probs = b.at("probs").get<std::vector<double>>();
            m.exo.push_back(std::move(blk));
        }
        for (auto it = j.at("fn").begin(); it != j.at("fn").end(); ++it) {
            Mechanism mech;
            mech.parents = it.value().at("parents").get<std::vector<VarId>>();
            mech.card = it.value().at("card").get<int>();
            mech.table = it.value().at("table").get<std::vector<int>>();
            m.fn[it.key()] = std::move(mech);
        }
        m.validate();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw causal_error("ParseError", std::string("bad model document: ") + e.what());
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw causal_error("ParseError", "cannot open file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace causal
