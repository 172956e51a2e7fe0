#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "causal/graph.hpp"

namespace causal {

// A variable occurrence inside a probability term.  Without a value it is
// generic (bound by an enclosing sum or free); with one it is fixed, as in
// P(M = m | X = 0).  Primed names like "X'" are fresh sum variables sharing
// X's domain.
struct TermVar {
    VarId name;
    std::optional<int> value;

    bool operator==(const TermVar& o) const { return name == o.name && value == o.value; }
};

// population tags: "src" (default), "tgt" (starred target population), or a
// study label
struct ProbTerm {
    std::string pop = "src";
    std::vector<TermVar> outcome;
    std::vector<TermVar> given_obs;
    std::vector<TermVar> given_do;

    bool operator==(const ProbTerm& o) const {
        return pop == o.pop && outcome == o.outcome && given_obs == o.given_obs &&
               given_do == o.given_do;
    }
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    enum class Kind { Term, Sum, Product, Quotient, Difference, Expectation, Constant, Var };
    Kind kind = Kind::Term;

    ProbTerm term;                  // Term, Expectation (single-outcome)
    std::vector<VarId> sum_vars;    // Sum
    std::vector<ExprPtr> children;  // Sum:1  Product:n  Quotient:2  Difference:2
    double constant = 0.0;          // Constant
    VarId var;                      // Var (numeric value of a bound variable)

    bool operator==(const Expr& o) const;
};

ExprPtr make_term(ProbTerm t);
ExprPtr make_sum(std::vector<VarId> over, ExprPtr body);
ExprPtr make_product(std::vector<ExprPtr> fs);
ExprPtr make_quotient(ExprPtr num, ExprPtr den);
ExprPtr make_difference(ExprPtr l, ExprPtr r);
ExprPtr make_expectation(ProbTerm t);  // t.outcome must be a single generic variable
ExprPtr make_constant(double v);
ExprPtr make_var(VarId v);

// helpers for building term variable lists
std::vector<TermVar> tv(const std::vector<VarId>& names);
std::vector<TermVar> tv(const CausalDiagram& d, const VarSet& names);

struct Estimand {
    ExprPtr expr;
    bool do_free = true;
    std::set<std::string> populations_used;
};

Estimand as_estimand(const ExprPtr& e);

// strip a trailing "'" chain to find the domain-carrying base variable
VarId base_var(const VarId& name);

ExprPtr normalize(const CausalDiagram& d, const ExprPtr& e);
VarSet free_variables(const ExprPtr& e);
bool equivalent(const CausalDiagram& d, const ExprPtr& a, const ExprPtr& b);
bool expr_do_free(const ExprPtr& e);
void collect_terms(const ExprPtr& e, std::vector<const ProbTerm*>& out);

// substitute a fixed value for every generic (sum-unbound) occurrence of v
ExprPtr subst_value(const ExprPtr& e, const VarId& v, int value);
// retag every term for which `pred` holds
ExprPtr map_terms(const ExprPtr& e, const std::function<ProbTerm(const ProbTerm&)>& f);

enum class RenderFormat { text, latex, structured };
std::string render(const CausalDiagram& d, const ExprPtr& e, RenderFormat f);

// parses the structured mini-language; names resolved case-insensitively
// against the diagram (primed names resolve through their base)
ExprPtr parse_expr(const CausalDiagram& d, const std::string& text);

}  // namespace causal
