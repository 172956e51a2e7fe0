#include "causal/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

namespace causal {

bool Expr::operator==(const Expr& o) const {
    if (kind != o.kind) return false;
    switch (kind) {
        case Kind::Term:
        case Kind::Expectation:
            return term == o.term;
        case Kind::Constant:
            return constant == o.constant;
        case Kind::Var:
            return var == o.var;
        case Kind::Sum:
            if (sum_vars != o.sum_vars) return false;
            break;
        default:
            break;
    }
    if (children.size() != o.children.size()) return false;
    for (size_t i = 0; i < children.size(); ++i)
        if (!(*children[i] == *o.children[i])) return false;
    return true;
}

ExprPtr make_term(ProbTerm t) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Term;
    e->term = std::move(t);
    return e;
}

ExprPtr make_sum(std::vector<VarId> over, ExprPtr body) {
    if (over.empty()) return body;
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Sum;
    e->sum_vars = std::move(over);
    e->children = {std::move(body)};
    return e;
}

ExprPtr make_product(std::vector<ExprPtr> fs) {
    if (fs.size() == 1) return fs[0];
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Product;
    e->children = std::move(fs);
    return e;
}

ExprPtr make_quotient(ExprPtr num, ExprPtr den) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Quotient;
    e->children = {std::move(num), std::move(den)};
    return e;
}

ExprPtr make_difference(ExprPtr l, ExprPtr r) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Difference;
    e->children = {std::move(l), std::move(r)};
    return e;
}

ExprPtr make_expectation(ProbTerm t) {
    if (t.outcome.size() != 1 || t.outcome[0].value.has_value())
        throw causal_error("MalformedExpr", "expectation needs a single generic outcome");
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Expectation;
    e->term = std::move(t);
    return e;
}

ExprPtr make_constant(double v) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Constant;
    e->constant = v;
    return e;
}

ExprPtr make_var(VarId v) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Var;
    e->var = std::move(v);
    return e;
}

std::vector<TermVar> tv(const std::vector<VarId>& names) {
    std::vector<TermVar> out;
    for (const auto& n : names) out.push_back({n, std::nullopt});
    return out;
}

std::vector<TermVar> tv(const CausalDiagram& d, const VarSet& names) {
    std::vector<TermVar> out;
    for (const auto& n : d.sorted(names)) out.push_back({n, std::nullopt});
    return out;
}

VarId base_var(const VarId& name) {
    size_t end = name.size();
    while (end > 0 && name[end - 1] == '\'') --end;
    return name.substr(0, end);
}

bool expr_do_free(const ExprPtr& e) {
    if (e->kind == Expr::Kind::Term || e->kind == Expr::Kind::Expectation)
        return e->term.given_do.empty();
    for (const auto& c : e->children)
        if (!expr_do_free(c)) return false;
    return true;
}

void collect_terms(const ExprPtr& e, std::vector<const ProbTerm*>& out) {
    if (e->kind == Expr::Kind::Term || e->kind == Expr::Kind::Expectation) out.push_back(&e->term);
    for (const auto& c : e->children) collect_terms(c, out);
}

static void collect_pops(const ExprPtr& e, std::set<std::string>& out) {
    if (e->kind == Expr::Kind::Term || e->kind == Expr::Kind::Expectation) out.insert(e->term.pop);
    for (const auto& c : e->children) collect_pops(c, out);
}

Estimand as_estimand(const ExprPtr& e) {
    Estimand est;
    est.expr = e;
    est.do_free = expr_do_free(e);
    collect_pops(e, est.populations_used);
    return est;
}

namespace {

void free_vars_rec(const ExprPtr& e, VarSet bound, VarSet& out) {
    switch (e->kind) {
        case Expr::Kind::Term:
        case Expr::Kind::Expectation:
            for (const auto* part : {&e->term.outcome, &e->term.given_obs, &e->term.given_do}) {
                // an expectation's outcome is averaged out, not free
                if (e->kind == Expr::Kind::Expectation && part == &e->term.outcome) continue;
                for (const auto& v : *part)
                    if (!v.value && !bound.count(v.name)) out.insert(v.name);
            }
            break;
        case Expr::Kind::Var:
            if (!bound.count(e->var)) out.insert(e->var);
            break;
        case Expr::Kind::Sum:
            for (const auto& v : e->sum_vars) bound.insert(v);
            free_vars_rec(e->children[0], bound, out);
            break;
        default:
            for (const auto& c : e->children) free_vars_rec(c, bound, out);
            break;
    }
}

bool mentions_generic(const ExprPtr& e, const VarId& v) {
    switch (e->kind) {
        case Expr::Kind::Term:
        case Expr::Kind::Expectation:
            for (const auto* part : {&e->term.outcome, &e->term.given_obs, &e->term.given_do})
                for (const auto& tvar : *part)
                    if (!tvar.value && tvar.name == v) return true;
            return false;
        case Expr::Kind::Var:
            return e->var == v;
        case Expr::Kind::Sum:
            for (const auto& sv : e->sum_vars)
                if (sv == v) return false;  // shadowed
            return mentions_generic(e->children[0], v);
        default:
            for (const auto& c : e->children)
                if (mentions_generic(c, v)) return true;
            return false;
    }
}

struct VarOrder {
    const CausalDiagram& d;
    std::pair<int, VarId> key(const TermVar& v) const {
        VarId b = base_var(v.name);
        int o = d.has_node(b) ? d.order_of(b) : 1 << 20;
        return {o, v.name};
    }
    std::pair<int, VarId> key(const VarId& v) const {
        VarId b = base_var(v);
        int o = d.has_node(b) ? d.order_of(b) : 1 << 20;
        return {o, v};
    }
};

class Normalizer {
public:
    explicit Normalizer(const CausalDiagram& d) : d_(d), ord_{d} {}

    ExprPtr run(ExprPtr e) {
        for (int i = 0; i < 64; ++i) {
            ExprPtr next = norm(e);
            if (*next == *e) return next;
            e = next;
        }
        return e;
    }

private:
    const CausalDiagram& d_;
    VarOrder ord_;

    std::vector<TermVar> sort_vars(std::vector<TermVar> vs) {
        std::sort(vs.begin(), vs.end(),
                  [&](const TermVar& a, const TermVar& b) { return ord_.key(a) < ord_.key(b); });
        return vs;
    }

    ExprPtr norm(const ExprPtr& e) {
        switch (e->kind) {
            case Expr::Kind::Constant:
            case Expr::Kind::Var:
                return e;
            case Expr::Kind::Term:
            case Expr::Kind::Expectation: {
                ProbTerm t = e->term;
                t.outcome = sort_vars(t.outcome);
                t.given_obs = sort_vars(t.given_obs);
                t.given_do = sort_vars(t.given_do);
                return e->kind == Expr::Kind::Term ? make_term(t) : make_expectation(t);
            }
            case Expr::Kind::Difference: {
                ExprPtr l = norm(e->children[0]), r = norm(e->children[1]);
                return make_difference(l, r);
            }
            case Expr::Kind::Quotient:
                return norm_quotient(norm(e->children[0]), norm(e->children[1]));
            case Expr::Kind::Product:
                return norm_product(e);
            case Expr::Kind::Sum:
                return norm_sum(e);
        }
        return e;
    }

    ExprPtr norm_product(const ExprPtr& e) {
        std::vector<ExprPtr> fs;
        double c = 1.0;
        bool has_const = false;
        std::function<void(const ExprPtr&)> flat = [&](const ExprPtr& f) {
            ExprPtr n = norm(f);
            if (n->kind == Expr::Kind::Product) {
                for (const auto& g : n->children) flat(g);
            } else if (n->kind == Expr::Kind::Constant) {
                c *= n->constant;
                has_const = true;
            } else {
                fs.push_back(n);
            }
        };
        for (const auto& f : e->children) flat(f);
        if (has_const && c == 0.0) return make_constant(0.0);
        if (fs.empty()) return make_constant(has_const ? c : 1.0);
        std::stable_sort(fs.begin(), fs.end(), [&](const ExprPtr& a, const ExprPtr& b) {
            return render(d_, a, RenderFormat::structured) < render(d_, b, RenderFormat::structured);
        });
        if (has_const && c != 1.0) fs.insert(fs.begin(), make_constant(c));
        return make_product(fs);
    }

    ExprPtr norm_quotient(ExprPtr num, ExprPtr den) {
        if (den->kind == Expr::Kind::Constant && den->constant == 1.0) return num;
        if (*num == *den) return make_constant(1.0);
        // cancel structurally equal factors
        auto factors = [](const ExprPtr& x) {
            return x->kind == Expr::Kind::Product ? x->children : std::vector<ExprPtr>{x};
        };
        std::vector<ExprPtr> nf = factors(num), df = factors(den);
        bool cancelled = false;
        for (auto it = df.begin(); it != df.end();) {
            auto hit = std::find_if(nf.begin(), nf.end(),
                                    [&](const ExprPtr& f) { return *f == **it; });
            if (hit != nf.end()) {
                nf.erase(hit);
                it = df.erase(it);
                cancelled = true;
            } else {
                ++it;
            }
        }
        if (cancelled) {
            ExprPtr n2 = nf.empty() ? make_constant(1.0) : make_product(nf);
            if (df.empty()) return norm(n2);
            return norm_quotient(norm(n2), norm(make_product(df)));
        }
        // P(a,b | c, do) / P(b | c, do)  ->  P(a | b, c, do)
        if (num->kind == Expr::Kind::Term && den->kind == Expr::Kind::Term) {
            const ProbTerm &a = num->term, &b = den->term;
            if (a.pop == b.pop && a.given_do == b.given_do && a.given_obs == b.given_obs) {
                std::vector<TermVar> rest = a.outcome;
                bool subset = true;
                for (const auto& v : b.outcome) {
                    auto it = std::find(rest.begin(), rest.end(), v);
                    if (it == rest.end()) {
                        subset = false;
                        break;
                    }
                    rest.erase(it);
                }
                if (subset && !rest.empty()) {
                    ProbTerm t;
                    t.pop = a.pop;
                    t.outcome = rest;
                    t.given_obs = a.given_obs;
                    for (const auto& v : b.outcome) t.given_obs.push_back(v);
                    t.given_do = a.given_do;
                    return norm(make_term(t));
                }
            }
        }
        return make_quotient(num, den);
    }

    ExprPtr norm_sum(const ExprPtr& e) {
        std::vector<VarId> vars = e->sum_vars;
        ExprPtr body = norm(e->children[0]);
        while (body->kind == Expr::Kind::Sum) {
            for (const auto& v : body->sum_vars) vars.push_back(v);
            body = body->children[0];
        }
        std::sort(vars.begin(), vars.end(),
                  [&](const VarId& a, const VarId& b) { return ord_.key(a) < ord_.key(b); });
        vars.erase(std::unique(vars.begin(), vars.end()), vars.end());

        // marginalize sum variables appearing only as the generic outcome of one factor
        std::vector<ExprPtr> fs =
            body->kind == Expr::Kind::Product ? body->children : std::vector<ExprPtr>{body};
        bool changed = false;
        for (auto vit = vars.begin(); vit != vars.end();) {
            const VarId v = *vit;
            int holder = -1, count = 0;
            for (size_t i = 0; i < fs.size(); ++i)
                if (mentions_generic(fs[i], v)) {
                    holder = static_cast<int>(i);
                    ++count;
                }
            bool removed = false;
            if (count == 1 && fs[holder]->kind == Expr::Kind::Term) {
                ProbTerm t = fs[holder]->term;
                auto in_outcome = std::find_if(t.outcome.begin(), t.outcome.end(),
                                               [&](const TermVar& x) { return !x.value && x.name == v; });
                bool in_givens = false;
                for (const auto* part : {&t.given_obs, &t.given_do})
                    for (const auto& x : *part)
                        if (!x.value && x.name == v) in_givens = true;
                if (in_outcome != t.outcome.end() && !in_givens) {
                    t.outcome.erase(in_outcome);
                    fs[holder] = t.outcome.empty() ? make_constant(1.0) : make_term(t);
                    vit = vars.erase(vit);
                    removed = changed = true;
                }
            }
            // a sum over a variable the body ignores still multiplies by the
            // domain size, so unused variables must stay in the binder
            if (!removed) ++vit;
        }
        if (changed) body = norm(make_product(fs));
        if (vars.empty()) return body;

        // factor out sum-independent parts of a product body
        if (body->kind == Expr::Kind::Product) {
            std::vector<ExprPtr> dep, indep;
            for (const auto& f : body->children) {
                bool mentions = false;
                for (const auto& v : vars)
                    if (mentions_generic(f, v)) mentions = true;
                (mentions ? dep : indep).push_back(f);
            }
            if (!indep.empty() && !dep.empty()) {
                indep.push_back(make_sum(vars, make_product(dep)));
                return norm(make_product(indep));
            }
        }
        return make_sum(vars, body);
    }
};

}  // namespace

ExprPtr normalize(const CausalDiagram& d, const ExprPtr& e) { return Normalizer(d).run(e); }

VarSet free_variables(const ExprPtr& e) {
    VarSet out;
    free_vars_rec(e, {}, out);
    return out;
}

bool equivalent(const CausalDiagram& d, const ExprPtr& a, const ExprPtr& b) {
    return *normalize(d, a) == *normalize(d, b);
}

ExprPtr subst_value(const ExprPtr& e, const VarId& v, int value) {
    switch (e->kind) {
        case Expr::Kind::Term:
        case Expr::Kind::Expectation: {
            ProbTerm t = e->term;
            for (auto* part : {&t.outcome, &t.given_obs, &t.given_do})
                for (auto& x : *part)
                    if (!x.value && x.name == v) x.value = value;
            if (e->kind == Expr::Kind::Expectation && t.outcome[0].value)
                throw causal_error("MalformedExpr", "cannot fix an expectation's outcome");
            return e->kind == Expr::Kind::Term ? make_term(t) : make_expectation(t);
        }
        case Expr::Kind::Var:
            if (e->var == v) return make_constant(static_cast<double>(value));
            return e;
        case Expr::Kind::Sum:
            for (const auto& sv : e->sum_vars)
                if (sv == v) return e;  // shadowed
            return make_sum(e->sum_vars, subst_value(e->children[0], v, value));
        case Expr::Kind::Constant:
            return e;
        default: {
            auto out = std::make_shared<Expr>(*e);
            out->children.clear();
            for (const auto& c : e->children) out->children.push_back(subst_value(c, v, value));
            return out;
        }
    }
}

ExprPtr map_terms(const ExprPtr& e, const std::function<ProbTerm(const ProbTerm&)>& f) {
    if (e->kind == Expr::Kind::Term) return make_term(f(e->term));
    if (e->kind == Expr::Kind::Expectation) return make_expectation(f(e->term));
    if (e->children.empty()) return e;
    auto out = std::make_shared<Expr>(*e);
    out->children.clear();
    for (const auto& c : e->children) out->children.push_back(map_terms(c, f));
    return out;
}

namespace {

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string fmt_num(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

struct Renderer {
    const CausalDiagram& d;
    RenderFormat f;

    std::string var(const TermVar& v, bool lowercase_generic) const {
        if (v.value) return v.name + (f == RenderFormat::latex ? " = " : "=") + std::to_string(*v.value);
        return lowercase_generic && f != RenderFormat::structured ? lower(v.name) : v.name;
    }

    std::string pop_head(const std::string& base, const std::string& pop) const {
        if (f == RenderFormat::structured) return pop == "src" ? base : base + "[" + pop + "]";
        if (pop == "src") return base;
        if (pop == "tgt") return f == RenderFormat::latex ? base + "^{*}" : base + "*";
        return f == RenderFormat::latex ? base + "_{" + pop + "}" : base + "_" + pop;
    }

    std::string term(const ProbTerm& t, bool expectation) const {
        std::string head = pop_head(expectation ? "E" : "P", t.pop);
        std::string out = head + "(";
        bool first = true;
        for (const auto& v : t.outcome) {
            if (!first) out += ", ";
            out += var(v, !expectation);
            first = false;
        }
        if (!t.given_obs.empty() || !t.given_do.empty()) {
            out += f == RenderFormat::latex ? " \\mid " : " | ";
            first = true;
            for (const auto& v : t.given_obs) {
                if (!first) out += ", ";
                out += var(v, true);
                first = false;
            }
            if (!t.given_do.empty()) {
                if (!first) out += ", ";
                out += "do(";
                bool df = true;
                for (const auto& v : t.given_do) {
                    if (!df) out += ", ";
                    out += var(v, true);
                    df = false;
                }
                out += ")";
            }
        }
        return out + ")";
    }

    bool composite(const ExprPtr& e) const {
        return e->kind == Expr::Kind::Sum || e->kind == Expr::Kind::Product ||
               e->kind == Expr::Kind::Quotient || e->kind == Expr::Kind::Difference;
    }

    std::string paren(const ExprPtr& e) const {
        std::string s = render(e);
        return composite(e) ? "(" + s + ")" : s;
    }

    std::string render(const ExprPtr& e) const {
        switch (e->kind) {
            case Expr::Kind::Term:
                return term(e->term, false);
            case Expr::Kind::Expectation:
                return term(e->term, true);
            case Expr::Kind::Constant:
                return fmt_num(e->constant);
            case Expr::Kind::Var:
                return "val(" + e->var + ")";
            case Expr::Kind::Sum: {
                std::string vars;
                for (size_t i = 0; i < e->sum_vars.size(); ++i) {
                    if (i) vars += ", ";
                    vars += f == RenderFormat::structured ? e->sum_vars[i] : lower(e->sum_vars[i]);
                }
                if (f == RenderFormat::structured) return "sum{" + vars + "} " + paren(e->children[0]);
                if (f == RenderFormat::latex)
                    return "\\sum_{" + vars + "} " + render(e->children[0]);
                std::string head = e->sum_vars.size() == 1 ? "Σ_" + vars : "Σ_{" + vars + "}";
                return head + " " + render(e->children[0]);
            }
            case Expr::Kind::Product: {
                std::string out;
                for (size_t i = 0; i < e->children.size(); ++i) {
                    if (i) out += f == RenderFormat::structured ? " * " : " ";
                    const auto& c = e->children[i];
                    bool need = c->kind == Expr::Kind::Sum || c->kind == Expr::Kind::Quotient ||
                                c->kind == Expr::Kind::Difference ||
                                c->kind == Expr::Kind::Product;
                    out += need ? "(" + render(c) + ")" : render(c);
                }
                return out;
            }
            case Expr::Kind::Quotient:
                return "(" + render_operand(e->children[0]) + " / " +
                       render_operand(e->children[1]) + ")";
            case Expr::Kind::Difference:
                return "(" + render_operand(e->children[0]) + " - " +
                       render_operand(e->children[1]) + ")";
        }
        return "";
    }

    std::string render_operand(const ExprPtr& e) const { return paren(e); }
};

// ---------------------------------------------------------------- parsing

struct Token {
    enum class Kind { Ident, Number, Sym, End } kind;
    std::string text;
    double num = 0.0;
    size_t pos = 0;
};

class Lexer {
public:
    explicit Lexer(const std::string& s) : s_(s) { advance(); }
    const Token& cur() const { return cur_; }
    void advance() {
        while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
        cur_.pos = i_;
        if (i_ >= s_.size()) {
            cur_ = {Token::Kind::End, "", 0, i_};
            return;
        }
        char c = s_[i_];
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t j = i_;
            while (j < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[j])) || s_[j] == '_'))
                ++j;
            while (j < s_.size() && s_[j] == '\'') ++j;
            cur_ = {Token::Kind::Ident, s_.substr(i_, j - i_), 0, i_};
            i_ = j;
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            size_t j = i_;
            while (j < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[j])) ||
                                     s_[j] == '.' || s_[j] == 'e' || s_[j] == 'E' ||
                                     ((s_[j] == '+' || s_[j] == '-') && j > i_ &&
                                      (s_[j - 1] == 'e' || s_[j - 1] == 'E'))))
                ++j;
            std::string txt = s_.substr(i_, j - i_);
            cur_ = {Token::Kind::Number, txt, std::stod(txt), i_};
            i_ = j;
            return;
        }
        if (c == '*' || c == '(' || c == ')' || c == '{' || c == '}' || c == '[' || c == ']' ||
            c == '|' || c == ',' || c == '=' || c == '/' || c == '-') {
            // "*" directly after P/E heads is handled by the parser
            cur_ = {Token::Kind::Sym, std::string(1, c), 0, i_};
            ++i_;
            return;
        }
        throw causal_error("ParseError", "unexpected character '" + std::string(1, c) +
                                             "' at offset " + std::to_string(i_));
    }

private:
    std::string s_;
    size_t i_ = 0;
    Token cur_;
};

class Parser {
public:
    Parser(const CausalDiagram& d, const std::string& text) : d_(d), lex_(text) {}

    ExprPtr parse() {
        ExprPtr e = expr();
        if (lex_.cur().kind != Token::Kind::End)
            throw err("trailing input '" + lex_.cur().text + "'");
        return e;
    }

private:
    const CausalDiagram& d_;
    Lexer lex_;

    causal_error err(const std::string& msg) const {
        return causal_error("ParseError", msg + " at offset " + std::to_string(lex_.cur().pos));
    }

    bool sym(const std::string& s) {
        if (lex_.cur().kind == Token::Kind::Sym && lex_.cur().text == s) {
            lex_.advance();
            return true;
        }
        return false;
    }

    void expect_sym(const std::string& s) {
        if (!sym(s)) throw err("expected '" + s + "'");
    }

    VarId resolve(const std::string& raw) {
        VarId base = base_var(raw);
        std::string primes = raw.substr(base.size());
        std::string lb = lower(base);
        std::optional<VarId> hit;
        for (const auto& n : d_.nodes()) {
            if (lower(n) == lb) {
                if (hit) throw err("ambiguous variable '" + raw + "'");
                hit = n;
            }
        }
        if (!hit) throw err("unknown variable '" + raw + "'");
        return *hit + primes;
    }

    ExprPtr expr() {  // left-assoc differences
        ExprPtr l = product();
        while (sym("-")) {
            ExprPtr r = product();
            l = make_difference(l, r);
        }
        return l;
    }

    ExprPtr product() {
        std::vector<ExprPtr> fs{unary()};
        while (true) {
            if (sym("*")) {
                fs.push_back(unary());
            } else if (sym("/")) {
                ExprPtr den = unary();
                ExprPtr num = make_product(fs);
                fs = {make_quotient(num, den)};
            } else if (starts_unary()) {
                fs.push_back(unary());
            } else {
                break;
            }
        }
        return make_product(fs);
    }

    bool starts_unary() const {
        const Token& t = lex_.cur();
        return t.kind == Token::Kind::Number || t.kind == Token::Kind::Ident ||
               (t.kind == Token::Kind::Sym && t.text == "(");
    }

    ExprPtr unary() {
        const Token& t = lex_.cur();
        if (t.kind == Token::Kind::Sym && t.text == "(") {
            lex_.advance();
            ExprPtr e = expr();
            expect_sym(")");
            return e;
        }
        if (t.kind == Token::Kind::Number) {
            double v = t.num;
            lex_.advance();
            return make_constant(v);
        }
        if (t.kind == Token::Kind::Ident) {
            std::string id = t.text;
            std::string idl = lower(id);
            if (idl == "sum") {
                lex_.advance();
                expect_sym("{");
                std::vector<VarId> vars;
                do {
                    if (lex_.cur().kind != Token::Kind::Ident) throw err("expected sum variable");
                    vars.push_back(resolve(lex_.cur().text));
                    lex_.advance();
                } while (sym(","));
                expect_sym("}");
                return make_sum(vars, unary());
            }
            if (idl == "val") {
                lex_.advance();
                expect_sym("(");
                if (lex_.cur().kind != Token::Kind::Ident) throw err("expected variable");
                VarId v = resolve(lex_.cur().text);
                lex_.advance();
                expect_sym(")");
                return make_var(v);
            }
            if (idl == "p" || idl == "e") return prob_term(idl == "e");
        }
        throw err("expected expression, got '" + t.text + "'");
    }

    ExprPtr prob_term(bool expectation) {
        lex_.advance();  // past P / E
        std::string pop = "src";
        if (sym("*")) {
            pop = "tgt";
        } else if (sym("[")) {
            if (lex_.cur().kind != Token::Kind::Ident) throw err("expected population label");
            pop = lex_.cur().text;
            lex_.advance();
            expect_sym("]");
        }
        expect_sym("(");
        ProbTerm t;
        t.pop = pop;
        do {
            t.outcome.push_back(term_var());
        } while (sym(","));
        if (sym("|")) {
            do {
                if (lex_.cur().kind == Token::Kind::Ident && lower(lex_.cur().text) == "do") {
                    lex_.advance();
                    expect_sym("(");
                    do {
                        t.given_do.push_back(term_var());
                    } while (sym(","));
                    expect_sym(")");
                } else {
                    t.given_obs.push_back(term_var());
                }
            } while (sym(","));
        }
        expect_sym(")");
        if (expectation) return make_expectation(t);
        return make_term(t);
    }

    TermVar term_var() {
        if (lex_.cur().kind != Token::Kind::Ident) throw err("expected variable");
        VarId v = resolve(lex_.cur().text);
        lex_.advance();
        TermVar out{v, std::nullopt};
        if (sym("=")) {
            const Token& t = lex_.cur();
            if (t.kind == Token::Kind::Number) {
                out.value = static_cast<int>(t.num);
                lex_.advance();
            } else if (t.kind == Token::Kind::Ident) {
                // `M = m` marks a generic occurrence; the name must match
                if (resolve(t.text) != base_var(v) && resolve(t.text) != v)
                    throw err("value variable '" + t.text + "' does not match '" + v + "'");
                lex_.advance();
            } else {
                throw err("expected value after '='");
            }
        }
        return out;
    }
};

}  // namespace

std::string render(const CausalDiagram& d, const ExprPtr& e, RenderFormat f) {
    return Renderer{d, f}.render(e);
}

ExprPtr parse_expr(const CausalDiagram& d, const std::string& text) {
    return Parser(d, text).parse();
}

}  // namespace causal
