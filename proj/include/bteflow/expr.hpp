#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bteflow/error.hpp"

namespace bteflow {

enum class ExprKind {
  Constant,
  Ref,             // _x_k[i,j], CELL1_x_k[...], CELL2_x_k[...]
  Binding,         // bare name passed to a callback: I, vg, b, normal, ...
  Normal,          // NORMAL_k
  Dt,              // dt
  TimeDerivative,  // TIMEDERIVATIVE marker
  Surface,         // SURFACE marker
  Add,
  Mul,
  Div,
  Compare,
  Conditional,
  Call,
  Equals,
};

enum class CellSide { None, Cell1, Cell2 };
enum class CompareOp { Greater, Less, GreaterEqual, LessEqual };

struct RefData {
  std::string entity;
  int component = 1;
  std::vector<std::string> indices;
  CellSide side = CellSide::None;
};

/// Immutable symbolic expression. Nodes are shared; copying an Expr is cheap.
///
/// Products and sums are kept in a canonical flattened form (see make_add /
/// make_mul) so that rendering is deterministic and parse(render(e)) == e.
/// A product may contain at most one marker factor (SURFACE or
/// TIMEDERIVATIVE); factors before it form the prefactor and factors after
/// it form the integrand.
class Expr {
 public:
  Expr();  // constant 0

  [[nodiscard]] ExprKind kind() const noexcept;
  [[nodiscard]] double value() const;
  [[nodiscard]] const RefData& ref() const;
  [[nodiscard]] const std::string& name() const;  // Binding and Call
  [[nodiscard]] int component() const;            // Normal
  [[nodiscard]] CompareOp compare_op() const;
  [[nodiscard]] std::span<const Expr> children() const noexcept;
  [[nodiscard]] SourceSpan span() const noexcept;

  [[nodiscard]] bool is_constant(double v) const noexcept;
  [[nodiscard]] bool is_marker() const noexcept;

  static Expr constant(double v, SourceSpan span = {});
  static Expr reference(RefData ref, SourceSpan span = {});
  static Expr binding(std::string name, SourceSpan span = {});
  static Expr normal(int component, SourceSpan span = {});
  static Expr dt(SourceSpan span = {});
  static Expr time_derivative(SourceSpan span = {});
  static Expr surface(SourceSpan span = {});
  static Expr compare(CompareOp op, Expr lhs, Expr rhs, SourceSpan span = {});
  static Expr conditional(Expr test, Expr then_value, Expr else_value, SourceSpan span = {});
  static Expr call(std::string callee, std::vector<Expr> args, SourceSpan span = {});
  static Expr equals(Expr lhs, Expr rhs, SourceSpan span = {});

  struct Node;

 private:
  explicit Expr(std::shared_ptr<const Node> node);
  std::shared_ptr<const Node> node_;

  friend Expr make_node(ExprKind, std::vector<Expr>, SourceSpan);
};

// Canonicalizing constructors.
Expr make_add(std::vector<Expr> terms, SourceSpan span = {});
Expr make_mul(std::vector<Expr> factors, SourceSpan span = {});
Expr make_div(Expr numerator, Expr denominator, SourceSpan span = {});
Expr make_neg(Expr x, SourceSpan span = {});
Expr make_sub(Expr a, Expr b, SourceSpan span = {});

/// Structural identity, ignoring source spans.
[[nodiscard]] bool structurally_equal(const Expr& a, const Expr& b);

/// Additive terms of e (e itself when it is not a sum).
[[nodiscard]] std::vector<Expr> additive_terms(const Expr& e);

/// Multiplicative factors of e (e itself when it is not a product).
[[nodiscard]] std::vector<Expr> factors(const Expr& e);

[[nodiscard]] bool contains(const Expr& e, ExprKind kind);
[[nodiscard]] int count_kind(const Expr& e, ExprKind kind);
[[nodiscard]] bool references_entity(const Expr& e, const std::string& entity);

/// Applies fn to every node in pre-order.
template <class Fn>
void visit(const Expr& e, Fn&& fn) {
  fn(e);
  for (const Expr& c : e.children()) visit(c, fn);
}

/// Single-line canonical rendering (the form the parser reads back).
[[nodiscard]] std::string render(const Expr& e);

/// Shortest decimal text that round-trips to the same double.
[[nodiscard]] std::string format_number(double v);

}  // namespace bteflow
