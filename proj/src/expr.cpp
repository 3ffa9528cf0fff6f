#include "mfrbsde/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <vector>

#include "mfrbsde/errors.hpp"

namespace mfrbsde {

struct Expr::Node {
    enum class Kind { Literal, Variable, Unary, Binary } kind;
    double value = 0.0;
    Variable var = Variable::T;
    UnaryOp uop = UnaryOp::Neg;
    BinaryOp bop = BinaryOp::Add;
    std::shared_ptr<const Node> a, b;
};

using Node = Expr::Node;

Expr Expr::literal(double value) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Literal;
    n->value = value;
    return Expr(std::move(n));
}

Expr Expr::variable(Variable v) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Variable;
    n->var = v;
    return Expr(std::move(n));
}

Expr Expr::unary(UnaryOp op, Expr child) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Unary;
    n->uop = op;
    n->a = child.node_;
    return Expr(std::move(n));
}

Expr Expr::binary(BinaryOp op, Expr lhs, Expr rhs) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Binary;
    n->bop = op;
    n->a = lhs.node_;
    n->b = rhs.node_;
    return Expr(std::move(n));
}

namespace {

bool node_equal(const Node* x, const Node* y) {
    if (x == y) return true;
    if (!x || !y) return false;
    if (x->kind != y->kind) return false;
    switch (x->kind) {
        case Node::Kind::Literal:
            return x->value == y->value;
        case Node::Kind::Variable:
            return x->var == y->var;
        case Node::Kind::Unary:
            return x->uop == y->uop && node_equal(x->a.get(), y->a.get());
        case Node::Kind::Binary:
            return x->bop == y->bop && node_equal(x->a.get(), y->a.get()) &&
                   node_equal(x->b.get(), y->b.get());
    }
    return false;
}

bool node_uses(const Node* n, Variable v) {
    if (!n) return false;
    switch (n->kind) {
        case Node::Kind::Literal: return false;
        case Node::Kind::Variable: return n->var == v;
        case Node::Kind::Unary: return node_uses(n->a.get(), v);
        case Node::Kind::Binary: return node_uses(n->a.get(), v) || node_uses(n->b.get(), v);
    }
    return false;
}

// Printing with minimal parentheses. Precedence levels:
//   1 additive, 2 multiplicative, 3 unary minus, 4 power, 5 atom.
int precedence(const Node* n) {
    switch (n->kind) {
        case Node::Kind::Literal:
        case Node::Kind::Variable:
            return 5;
        case Node::Kind::Unary:
            return n->uop == UnaryOp::Neg ? 3 : 5;  // named functions print as atoms
        case Node::Kind::Binary:
            switch (n->bop) {
                case BinaryOp::Add:
                case BinaryOp::Sub: return 1;
                case BinaryOp::Mul:
                case BinaryOp::Div: return 2;
                case BinaryOp::Pow: return 4;
                case BinaryOp::Min:
                case BinaryOp::Max: return 5;
            }
    }
    return 5;
}

std::string print_literal(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void print_node(const Node* n, std::string& out);

void print_child(const Node* child, int min_prec, std::string& out) {
    const bool parens = precedence(child) < min_prec;
    if (parens) out += '(';
    print_node(child, out);
    if (parens) out += ')';
}

void print_node(const Node* n, std::string& out) {
    switch (n->kind) {
        case Node::Kind::Literal:
            out += print_literal(n->value);
            return;
        case Node::Kind::Variable:
            out += variable_name(n->var);
            return;
        case Node::Kind::Unary:
            switch (n->uop) {
                case UnaryOp::Neg:
                    out += '-';
                    print_child(n->a.get(), 3, out);
                    return;
                case UnaryOp::Abs: out += "abs("; break;
                case UnaryOp::Exp: out += "exp("; break;
                case UnaryOp::Log: out += "log("; break;
                case UnaryOp::Sq: out += "sq("; break;
            }
            print_node(n->a.get(), out);
            out += ')';
            return;
        case Node::Kind::Binary:
            switch (n->bop) {
                case BinaryOp::Min:
                case BinaryOp::Max:
                    out += (n->bop == BinaryOp::Min) ? "min(" : "max(";
                    print_node(n->a.get(), out);
                    out += ", ";
                    print_node(n->b.get(), out);
                    out += ')';
                    return;
                case BinaryOp::Add:
                    print_child(n->a.get(), 1, out);
                    out += " + ";
                    print_child(n->b.get(), 2, out);
                    return;
                case BinaryOp::Sub:
                    print_child(n->a.get(), 1, out);
                    out += " - ";
                    print_child(n->b.get(), 2, out);
                    return;
                case BinaryOp::Mul:
                    print_child(n->a.get(), 2, out);
                    out += '*';
                    print_child(n->b.get(), 3, out);
                    return;
                case BinaryOp::Div:
                    print_child(n->a.get(), 2, out);
                    out += '/';
                    print_child(n->b.get(), 3, out);
                    return;
                case BinaryOp::Pow:
                    print_child(n->a.get(), 5, out);
                    out += '^';
                    print_child(n->b.get(), 3, out);
                    return;
            }
    }
}

double eval_node(const Node* n, const EvalEnv& env);

[[noreturn]] void domain_fail(const Node* n, const std::string& what) {
    std::string sub;
    print_node(n, sub);
    throw DomainError(what + " in subexpression '" + sub + "'");
}

double check_finite(const Node* n, double v) {
    if (!std::isfinite(v)) domain_fail(n, "non-finite result");
    return v;
}

double eval_node(const Node* n, const EvalEnv& env) {
    switch (n->kind) {
        case Node::Kind::Literal:
            return n->value;
        case Node::Kind::Variable:
            switch (n->var) {
                case Variable::T: return env.t;
                case Variable::Y: return env.y;
                case Variable::Z: return env.z;
                case Variable::B: return env.b;
                case Variable::M1: return env.m1;
                case Variable::Am: return env.am;
            }
            return 0.0;
        case Node::Kind::Unary: {
            const double a = eval_node(n->a.get(), env);
            switch (n->uop) {
                case UnaryOp::Neg: return -a;
                case UnaryOp::Abs: return std::fabs(a);
                case UnaryOp::Exp: return check_finite(n, std::exp(a));
                case UnaryOp::Log:
                    if (a <= 0.0) domain_fail(n, "log of non-positive value");
                    return std::log(a);
                case UnaryOp::Sq: return check_finite(n, a * a);
            }
            return 0.0;
        }
        case Node::Kind::Binary: {
            const double a = eval_node(n->a.get(), env);
            const double b = eval_node(n->b.get(), env);
            switch (n->bop) {
                case BinaryOp::Add: return check_finite(n, a + b);
                case BinaryOp::Sub: return check_finite(n, a - b);
                case BinaryOp::Mul: return check_finite(n, a * b);
                case BinaryOp::Div:
                    if (b == 0.0) domain_fail(n, "division by zero");
                    return check_finite(n, a / b);
                case BinaryOp::Pow: {
                    const double r = std::pow(a, b);
                    if (std::isnan(r)) domain_fail(n, "invalid power");
                    return check_finite(n, r);
                }
                case BinaryOp::Min: return std::fmin(a, b);
                case BinaryOp::Max: return std::fmax(a, b);
            }
            return 0.0;
        }
    }
    return 0.0;
}

// ---------------------------------------------------------------- parser ---

struct Parser {
    std::string_view src;
    std::size_t pos = 0;

    void skip_ws() {
        while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
    }

    bool eat(char c) {
        skip_ws();
        if (pos < src.size() && src[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos < src.size() ? src[pos] : '\0';
    }

    Expr parse() {
        Expr e = parse_add();
        skip_ws();
        if (pos != src.size())
            throw ParseError("unexpected trailing input '" + std::string(src.substr(pos)) + "'", pos);
        return e;
    }

    Expr parse_add() {
        Expr lhs = parse_mul();
        for (;;) {
            skip_ws();
            if (eat('+')) lhs = Expr::binary(BinaryOp::Add, lhs, parse_mul());
            else if (eat('-')) lhs = Expr::binary(BinaryOp::Sub, lhs, parse_mul());
            else return lhs;
        }
    }

    Expr parse_mul() {
        Expr lhs = parse_unary();
        for (;;) {
            skip_ws();
            if (eat('*')) lhs = Expr::binary(BinaryOp::Mul, lhs, parse_unary());
            else if (eat('/')) lhs = Expr::binary(BinaryOp::Div, lhs, parse_unary());
            else return lhs;
        }
    }

    Expr parse_unary() {
        if (eat('-')) return Expr::unary(UnaryOp::Neg, parse_unary());
        return parse_power();
    }

    Expr parse_power() {
        Expr base = parse_atom();
        if (eat('^')) return Expr::binary(BinaryOp::Pow, base, parse_unary());
        return base;
    }

    Expr parse_atom() {
        skip_ws();
        if (pos >= src.size()) throw ParseError("unexpected end of input", pos);
        const char c = src[pos];
        if (c == '(') {
            ++pos;
            Expr e = parse_add();
            if (!eat(')')) throw ParseError("expected ')'", pos);
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
        throw ParseError(std::string("unexpected character '") + c + "'", pos);
    }

    Expr parse_number() {
        const char* begin = src.data() + pos;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) throw ParseError("malformed number", pos);
        if (!std::isfinite(v)) throw ParseError("numeric literal out of range", pos);
        pos += static_cast<std::size_t>(end - begin);
        return Expr::literal(v);
    }

    Expr parse_ident() {
        const std::size_t start = pos;
        while (pos < src.size() &&
               (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
            ++pos;
        const std::string_view name = src.substr(start, pos - start);

        if (name == "t") return Expr::variable(Variable::T);
        if (name == "y") return Expr::variable(Variable::Y);
        if (name == "z") return Expr::variable(Variable::Z);
        if (name == "b") return Expr::variable(Variable::B);
        if (name == "m1") return Expr::variable(Variable::M1);
        if (name == "am") return Expr::variable(Variable::Am);

        std::optional<UnaryOp> uop;
        if (name == "abs") uop = UnaryOp::Abs;
        else if (name == "exp") uop = UnaryOp::Exp;
        else if (name == "log") uop = UnaryOp::Log;
        else if (name == "sq") uop = UnaryOp::Sq;
        if (uop) {
            if (!eat('(')) throw ParseError("expected '(' after function '" + std::string(name) + "'", pos);
            Expr arg = parse_add();
            if (!eat(')')) throw ParseError("expected ')'", pos);
            return Expr::unary(*uop, arg);
        }

        if (name == "min" || name == "max") {
            const BinaryOp op = (name == "min") ? BinaryOp::Min : BinaryOp::Max;
            if (!eat('(')) throw ParseError("expected '(' after function '" + std::string(name) + "'", pos);
            Expr a = parse_add();
            if (!eat(',')) throw ParseError("expected ','", pos);
            Expr b = parse_add();
            if (!eat(')')) throw ParseError("expected ')'", pos);
            return Expr::binary(op, a, b);
        }

        throw ParseError("unknown identifier '" + std::string(name) + "'", start);
    }
};

}  // namespace

bool Expr::operator==(const Expr& other) const { return node_equal(node_.get(), other.node_.get()); }

bool Expr::uses(Variable v) const { return node_uses(node_.get(), v); }

double Expr::eval(const EvalEnv& env) const {
    if (!node_) throw ContractError("eval of empty expression");
    return eval_node(node_.get(), env);
}

std::string Expr::print() const {
    if (!node_) return {};
    std::string out;
    print_node(node_.get(), out);
    return out;
}

Expr parse_expr(std::string_view src) {
    Parser p{src};
    return p.parse();
}

const char* variable_name(Variable v) {
    switch (v) {
        case Variable::T: return "t";
        case Variable::Y: return "y";
        case Variable::Z: return "z";
        case Variable::B: return "b";
        case Variable::M1: return "m1";
        case Variable::Am: return "am";
    }
    return "?";
}

}  // namespace mfrbsde
