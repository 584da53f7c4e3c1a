#include "dflow/expr.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>

#include "dflow/errors.hpp"

namespace dflow {

enum class Op { constant, time, angle, add, sub, mul, div, neg, pow, exp, log, sqrt, sin, cos, tan };

struct Expr::Node {
    Op op;
    double value = 0.0;
    std::shared_ptr<const Node> a;
    std::shared_ptr<const Node> b;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

NodePtr make(Op op, NodePtr a = nullptr, NodePtr b = nullptr, double value = 0.0) {
    auto n = std::make_shared<Expr::Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    n->value = value;
    return n;
}

NodePtr constant(double v) { return make(Op::constant, nullptr, nullptr, v); }

bool is_const(const NodePtr& n, double v) { return n->op == Op::constant && n->value == v; }

double apply_unary(Op op, double x) {
    switch (op) {
        case Op::neg: return -x;
        case Op::exp: return std::exp(x);
        case Op::log: return std::log(x);
        case Op::sqrt: return std::sqrt(x);
        case Op::sin: return std::sin(x);
        case Op::cos: return std::cos(x);
        case Op::tan: return std::tan(x);
        default: return x;
    }
}

double int_pow(double base, double exponent) {
    if (exponent == std::round(exponent) && std::abs(exponent) < 64) {
        long k = static_cast<long>(exponent);
        bool invert = k < 0;
        if (invert) k = -k;
        double result = 1.0;
        double b = base;
        while (k) {
            if (k & 1) result *= b;
            b *= b;
            k >>= 1;
        }
        return invert ? 1.0 / result : result;
    }
    return std::pow(base, exponent);
}

NodePtr add(NodePtr a, NodePtr b) {
    if (is_const(a, 0)) return b;
    if (is_const(b, 0)) return a;
    if (a->op == Op::constant && b->op == Op::constant) return constant(a->value + b->value);
    return make(Op::add, a, b);
}

NodePtr neg(NodePtr a) {
    if (a->op == Op::constant) return constant(-a->value);
    if (a->op == Op::neg) return a->a;
    return make(Op::neg, a);
}

NodePtr sub(NodePtr a, NodePtr b) {
    if (is_const(b, 0)) return a;
    if (is_const(a, 0)) return neg(b);
    if (a->op == Op::constant && b->op == Op::constant) return constant(a->value - b->value);
    return make(Op::sub, a, b);
}

NodePtr mul(NodePtr a, NodePtr b) {
    if (is_const(a, 0) || is_const(b, 0)) return constant(0);
    if (is_const(a, 1)) return b;
    if (is_const(b, 1)) return a;
    if (a->op == Op::constant && b->op == Op::constant) return constant(a->value * b->value);
    return make(Op::mul, a, b);
}

NodePtr div(NodePtr a, NodePtr b) {
    if (is_const(a, 0)) return constant(0);
    if (is_const(b, 1)) return a;
    if (a->op == Op::constant && b->op == Op::constant && b->value != 0.0)
        return constant(a->value / b->value);
    return make(Op::div, a, b);
}

NodePtr power(NodePtr base, double exponent) {
    if (exponent == 0.0) return constant(1);
    if (exponent == 1.0) return base;
    if (base->op == Op::constant) return constant(int_pow(base->value, exponent));
    return make(Op::pow, base, nullptr, exponent);
}

NodePtr unary(Op op, NodePtr a) {
    if (a->op == Op::constant) return constant(apply_unary(op, a->value));
    return make(op, a);
}

bool depends(const NodePtr& n, Op var) {
    if (!n) return false;
    if (n->op == var) return true;
    return depends(n->a, var) || depends(n->b, var);
}

NodePtr derivative(const NodePtr& n, Op var) {
    switch (n->op) {
        case Op::constant: return constant(0);
        case Op::time:
        case Op::angle: return constant(n->op == var ? 1.0 : 0.0);
        case Op::add: return add(derivative(n->a, var), derivative(n->b, var));
        case Op::sub: return sub(derivative(n->a, var), derivative(n->b, var));
        case Op::neg: return neg(derivative(n->a, var));
        case Op::mul:
            return add(mul(derivative(n->a, var), n->b), mul(n->a, derivative(n->b, var)));
        case Op::div: {
            auto da = derivative(n->a, var);
            auto db = derivative(n->b, var);
            return sub(div(da, n->b), div(mul(n->a, db), power(n->b, 2.0)));
        }
        case Op::pow:
            return mul(mul(constant(n->value), power(n->a, n->value - 1.0)), derivative(n->a, var));
        case Op::exp: return mul(n, derivative(n->a, var));
        case Op::log: return div(derivative(n->a, var), n->a);
        case Op::sqrt: return div(derivative(n->a, var), mul(constant(2), n));
        case Op::sin: return mul(unary(Op::cos, n->a), derivative(n->a, var));
        case Op::cos: return neg(mul(unary(Op::sin, n->a), derivative(n->a, var)));
        case Op::tan: return div(derivative(n->a, var), power(unary(Op::cos, n->a), 2.0));
    }
    return constant(0);
}

double evaluate(const NodePtr& n, double t, double theta) {
    switch (n->op) {
        case Op::constant: return n->value;
        case Op::time: return t;
        case Op::angle: return theta;
        case Op::add: return evaluate(n->a, t, theta) + evaluate(n->b, t, theta);
        case Op::sub: return evaluate(n->a, t, theta) - evaluate(n->b, t, theta);
        case Op::mul: return evaluate(n->a, t, theta) * evaluate(n->b, t, theta);
        case Op::div: return evaluate(n->a, t, theta) / evaluate(n->b, t, theta);
        case Op::pow: return int_pow(evaluate(n->a, t, theta), n->value);
        default: return apply_unary(n->op, evaluate(n->a, t, theta));
    }
}

void print(const NodePtr& n, std::ostringstream& os) {
    switch (n->op) {
        case Op::constant: os << n->value; return;
        case Op::time: os << "t"; return;
        case Op::angle: os << "theta"; return;
        case Op::add: os << "("; print(n->a, os); os << " + "; print(n->b, os); os << ")"; return;
        case Op::sub: os << "("; print(n->a, os); os << " - "; print(n->b, os); os << ")"; return;
        case Op::mul: os << "("; print(n->a, os); os << " * "; print(n->b, os); os << ")"; return;
        case Op::div: os << "("; print(n->a, os); os << " / "; print(n->b, os); os << ")"; return;
        case Op::neg: os << "(-"; print(n->a, os); os << ")"; return;
        case Op::pow: os << "("; print(n->a, os); os << ")^" << n->value; return;
        case Op::exp: os << "exp("; break;
        case Op::log: os << "log("; break;
        case Op::sqrt: os << "sqrt("; break;
        case Op::sin: os << "sin("; break;
        case Op::cos: os << "cos("; break;
        case Op::tan: os << "tan("; break;
    }
    print(n->a, os);
    os << ")";
}

class Parser {
public:
    Parser(std::string_view text, const std::map<std::string, Expr>& bindings)
        : text_(text), bindings_(bindings) {}

    NodePtr parse() {
        auto n = expression();
        skip_space();
        if (pos_ != text_.size()) throw ParseError("unexpected token '" + std::string(1, text_[pos_]) + "'", pos_);
        return n;
    }

private:
    std::string_view text_;
    const std::map<std::string, Expr>& bindings_;
    std::size_t pos_ = 0;

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr expression() {
        auto lhs = term();
        for (;;) {
            if (accept('+')) lhs = add(lhs, term());
            else if (accept('-')) lhs = sub(lhs, term());
            else return lhs;
        }
    }

    NodePtr term() {
        auto lhs = signed_factor();
        for (;;) {
            if (accept('*')) lhs = mul(lhs, signed_factor());
            else if (accept('/')) lhs = div(lhs, signed_factor());
            else return lhs;
        }
    }

    NodePtr signed_factor() {
        if (accept('-')) return neg(signed_factor());
        if (accept('+')) return signed_factor();
        return power_expr();
    }

    NodePtr power_expr() {
        auto base = primary();
        skip_space();
        std::size_t at = pos_;
        if (accept('^')) {
            auto exponent = signed_factor();
            if (exponent->op != Op::constant)
                throw ParseError("exponent must not depend on t or theta", at);
            if (base->op == Op::constant) return constant(std::pow(base->value, exponent->value));
            return power(base, exponent->value);
        }
        return base;
    }

    NodePtr primary() {
        skip_space();
        if (pos_ >= text_.size()) throw ParseError("unexpected end of expression", pos_);
        char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            auto inner = expression();
            if (!accept(')')) throw ParseError("expected ')'", pos_);
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        throw ParseError("unknown token '" + std::string(1, c) + "'", pos_);
    }

    NodePtr number() {
        std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) ++pos_;
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t save = pos_;
            ++pos_;
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
            if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            } else {
                pos_ = save;
            }
        }
        std::string literal(text_.substr(start, pos_ - start));
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(literal, &used);
        } catch (const std::exception&) {
            throw ParseError("malformed number '" + literal + "'", start);
        }
        if (used != literal.size()) throw ParseError("malformed number '" + literal + "'", start);
        return constant(v);
    }

    NodePtr identifier() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        std::string name(text_.substr(start, pos_ - start));
        if (name == "t") return make(Op::time);
        if (name == "theta") return make(Op::angle);
        if (name == "pi") return constant(std::numbers::pi);
        if (auto it = bindings_.find(name); it != bindings_.end()) return it->second.node();
        static const std::map<std::string, Op> functions = {
            {"exp", Op::exp}, {"log", Op::log}, {"sqrt", Op::sqrt},
            {"sin", Op::sin}, {"cos", Op::cos}, {"tan", Op::tan}};
        auto fn = functions.find(name);
        if (fn == functions.end()) throw ParseError("unknown identifier '" + name + "'", start);
        if (!accept('(')) throw ParseError("expected '(' after " + name, pos_);
        auto arg = expression();
        if (!accept(')')) throw ParseError("expected ')'", pos_);
        return unary(fn->second, arg);
    }
};

}  // namespace

Expr::Expr() : node_(constant(0)) {}
Expr::Expr(double c) : node_(constant(c)) {}
Expr::Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Expr Expr::parse(std::string_view text, const std::map<std::string, Expr>& bindings) {
    return Expr(Parser(text, bindings).parse());
}

Expr Expr::variable(Var v) { return Expr(make(v == Var::time ? Op::time : Op::angle)); }

double Expr::eval(double t, double theta) const { return evaluate(node_, t, theta); }

Expr Expr::diff(Var v) const { return Expr(derivative(node_, v == Var::time ? Op::time : Op::angle)); }

bool Expr::depends_on(Var v) const { return depends(node_, v == Var::time ? Op::time : Op::angle); }

bool Expr::is_constant() const { return node_->op == Op::constant; }

std::string Expr::str() const {
    std::ostringstream os;
    os.precision(17);
    print(node_, os);
    return os.str();
}

Expr operator+(const Expr& a, const Expr& b) { return Expr(add(a.node_, b.node_)); }
Expr operator-(const Expr& a, const Expr& b) { return Expr(sub(a.node_, b.node_)); }
Expr operator*(const Expr& a, const Expr& b) { return Expr(mul(a.node_, b.node_)); }
Expr operator/(const Expr& a, const Expr& b) { return Expr(div(a.node_, b.node_)); }
Expr operator-(const Expr& a) { return Expr(neg(a.node_)); }

namespace {

void emit(const NodePtr& n, std::vector<std::pair<int, double>>& out) {
    if (n->a) emit(n->a, out);
    if (n->b) emit(n->b, out);
    out.emplace_back(static_cast<int>(n->op), n->value);
}

}  // namespace

CompiledExpr::CompiledExpr(const Expr& e) {
    std::vector<std::pair<int, double>> flat;
    emit(e.node_, flat);
    std::size_t depth = 0;
    for (auto [op, value] : flat) {
        code_.push_back({op, value});
        switch (static_cast<Op>(op)) {
            case Op::constant:
            case Op::time:
            case Op::angle: ++depth; break;
            case Op::add:
            case Op::sub:
            case Op::mul:
            case Op::div: --depth; break;
            default: break;
        }
        depth_ = std::max(depth_, depth);
    }
}

double CompiledExpr::operator()(double t, double theta) const {
    double stack_buf[64];
    std::vector<double> heap;
    double* stack = stack_buf;
    if (depth_ > 64) {
        heap.resize(depth_);
        stack = heap.data();
    }
    std::size_t sp = 0;
    for (const auto& ins : code_) {
        switch (static_cast<Op>(ins.op)) {
            case Op::constant: stack[sp++] = ins.value; break;
            case Op::time: stack[sp++] = t; break;
            case Op::angle: stack[sp++] = theta; break;
            case Op::add: --sp; stack[sp - 1] += stack[sp]; break;
            case Op::sub: --sp; stack[sp - 1] -= stack[sp]; break;
            case Op::mul: --sp; stack[sp - 1] *= stack[sp]; break;
            case Op::div: --sp; stack[sp - 1] /= stack[sp]; break;
            case Op::pow: stack[sp - 1] = int_pow(stack[sp - 1], ins.value); break;
            default: stack[sp - 1] = apply_unary(static_cast<Op>(ins.op), stack[sp - 1]); break;
        }
    }
    return code_.empty() ? 0.0 : stack[0];
}

}  // namespace dflow
