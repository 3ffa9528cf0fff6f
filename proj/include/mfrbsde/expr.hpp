#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace mfrbsde {

// Small expression language for drivers f(t,y,nu,z), obstacles h(t,y,nu) and
// terminal payoffs xi(b). Law dependence enters through the functionals
// m1 (mean of the current marginal) and am (abs-mean, equal to W1(nu, delta_0)).
//
// Grammar (documented in docs/expression-grammar.md):
//   expr   := add
//   add    := mul (('+'|'-') mul)*
//   mul    := unary (('*'|'/') unary)*
//   unary  := '-' unary | power
//   power  := atom ('^' unary)?          right-associative
//   atom   := number | variable | func '(' expr (',' expr)? ')' | '(' expr ')'
//   func   := abs | exp | log | sq | min | max
//
// Expressions are immutable after parse; evaluation is pure.

enum class Variable { T, Y, Z, B, M1, Am };

enum class UnaryOp { Neg, Abs, Exp, Log, Sq };

enum class BinaryOp { Add, Sub, Mul, Div, Pow, Min, Max };

struct EvalEnv {
    double t = 0.0;
    double y = 0.0;
    double z = 0.0;
    double b = 0.0;
    double m1 = 0.0;
    double am = 0.0;
};

class Expr {
  public:
    Expr() = default;

    static Expr literal(double value);
    static Expr variable(Variable v);
    static Expr unary(UnaryOp op, Expr child);
    static Expr binary(BinaryOp op, Expr lhs, Expr rhs);

    bool valid() const { return node_ != nullptr; }

    // Structural equality (literals compared by value).
    bool operator==(const Expr& other) const;
    bool operator!=(const Expr& other) const { return !(*this == other); }

    // True when the expression references the given variable.
    bool uses(Variable v) const;

    double eval(const EvalEnv& env) const;  // throws DomainError, never yields NaN

    std::string print() const;

    struct Node;
    const Node* node() const { return node_.get(); }

  private:
    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
};

Expr parse_expr(std::string_view src);  // throws ParseError with byte offset

inline std::string print_expr(const Expr& e) { return e.print(); }
inline double eval_expr(const Expr& e, const EvalEnv& env) { return e.eval(env); }

const char* variable_name(Variable v);

}  // namespace mfrbsde
