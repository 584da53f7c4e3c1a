#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace dflow {

/// Independent variables an expression may depend on.
enum class Var { time, angle };

/// Immutable expression tree over forward time `t` and the circle angle `theta`.
///
/// The accepted grammar is a closed whitelist: numeric literals, `pi`, the
/// variables `t` and `theta`, named constants supplied by the caller, the binary
/// operators `+ - * / ^`, unary minus, and the functions `exp log sqrt sin cos tan`.
/// Exponents must not depend on a variable. Named substitutions (for example
/// `tau` bound to `T - t`) are expanded during parsing.
class Expr {
public:
    struct Node;

    Expr();
    explicit Expr(double constant);

    static Expr parse(std::string_view text, const std::map<std::string, Expr>& bindings = {});
    static Expr variable(Var v);

    double eval(double t, double theta) const;
    Expr diff(Var v) const;
    bool depends_on(Var v) const;
    bool is_constant() const;
    std::string str() const;

    friend Expr operator+(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a, const Expr& b);
    friend Expr operator*(const Expr& a, const Expr& b);
    friend Expr operator/(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a);

    const std::shared_ptr<const Node>& node() const { return node_; }

private:
    explicit Expr(std::shared_ptr<const Node> node);
    std::shared_ptr<const Node> node_;
    friend class CompiledExpr;
    friend class ExprBuilder;
};

/// Flat stack-machine form of an expression for repeated evaluation.
class CompiledExpr {
public:
    CompiledExpr() = default;
    explicit CompiledExpr(const Expr& e);
    double operator()(double t, double theta) const;

private:
    struct Instr {
        int op;
        double value;
    };
    std::vector<Instr> code_;
    std::size_t depth_ = 0;
};

}  // namespace dflow
