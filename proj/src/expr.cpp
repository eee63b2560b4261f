#include "bteflow/expr.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace bteflow {

struct Expr::Node {
  ExprKind kind = ExprKind::Constant;
  double value = 0.0;
  RefData ref;
  std::string name;
  int component = 0;
  CompareOp op = CompareOp::Greater;
  std::vector<Expr> children;
  SourceSpan span;
};

namespace {

std::shared_ptr<const Expr::Node> zero_node() {
  static const auto node = std::make_shared<const Expr::Node>();
  return node;
}

}  // namespace

Expr::Expr() : node_(zero_node()) {}
Expr::Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

ExprKind Expr::kind() const noexcept { return node_->kind; }

double Expr::value() const {
  if (node_->kind != ExprKind::Constant) throw std::logic_error("Expr::value on non-constant");
  return node_->value;
}

const RefData& Expr::ref() const {
  if (node_->kind != ExprKind::Ref) throw std::logic_error("Expr::ref on non-reference");
  return node_->ref;
}

const std::string& Expr::name() const {
  if (node_->kind != ExprKind::Binding && node_->kind != ExprKind::Call)
    throw std::logic_error("Expr::name on node without a name");
  return node_->name;
}

int Expr::component() const {
  if (node_->kind != ExprKind::Normal) throw std::logic_error("Expr::component on non-normal");
  return node_->component;
}

CompareOp Expr::compare_op() const {
  if (node_->kind != ExprKind::Compare) throw std::logic_error("Expr::compare_op on non-comparison");
  return node_->op;
}

std::span<const Expr> Expr::children() const noexcept { return node_->children; }
SourceSpan Expr::span() const noexcept { return node_->span; }

bool Expr::is_constant(double v) const noexcept {
  return node_->kind == ExprKind::Constant && node_->value == v;
}

bool Expr::is_marker() const noexcept {
  return node_->kind == ExprKind::Surface || node_->kind == ExprKind::TimeDerivative;
}

Expr make_node(ExprKind kind, std::vector<Expr> children, SourceSpan span) {
  auto n = std::make_shared<Expr::Node>();
  n->kind = kind;
  n->children = std::move(children);
  n->span = span;
  return Expr(std::move(n));
}

namespace {

Expr leaf(ExprKind kind, SourceSpan span) { return make_node(kind, {}, span); }

}  // namespace

Expr Expr::constant(double v, SourceSpan span) {
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Constant;
  n->value = v == 0.0 ? 0.0 : v;  // no negative zero
  n->span = span;
  return Expr(std::move(n));
}

Expr Expr::reference(RefData ref, SourceSpan span) {
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Ref;
  n->ref = std::move(ref);
  n->span = span;
  return Expr(std::move(n));
}

Expr Expr::binding(std::string name, SourceSpan span) {
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Binding;
  n->name = std::move(name);
  n->span = span;
  return Expr(std::move(n));
}

Expr Expr::normal(int component, SourceSpan span) {
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Normal;
  n->component = component;
  n->span = span;
  return Expr(std::move(n));
}

Expr Expr::dt(SourceSpan span) { return leaf(ExprKind::Dt, span); }
Expr Expr::time_derivative(SourceSpan span) { return leaf(ExprKind::TimeDerivative, span); }
Expr Expr::surface(SourceSpan span) { return leaf(ExprKind::Surface, span); }

Expr Expr::compare(CompareOp op, Expr lhs, Expr rhs, SourceSpan span) {
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Compare;
  n->op = op;
  n->children = {std::move(lhs), std::move(rhs)};
  n->span = span;
  return Expr(std::move(n));
}

Expr Expr::conditional(Expr test, Expr then_value, Expr else_value, SourceSpan span) {
  return make_node(ExprKind::Conditional,
                   {std::move(test), std::move(then_value), std::move(else_value)}, span);
}

Expr Expr::call(std::string callee, std::vector<Expr> args, SourceSpan span) {
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Call;
  n->name = std::move(callee);
  n->children = std::move(args);
  n->span = span;
  return Expr(std::move(n));
}

Expr Expr::equals(Expr lhs, Expr rhs, SourceSpan span) {
  return make_node(ExprKind::Equals, {std::move(lhs), std::move(rhs)}, span);
}

// ---------------------------------------------------------------------------
// Canonical constructors

Expr make_add(std::vector<Expr> terms, SourceSpan span) {
  std::vector<Expr> flat;
  double constant = 0.0;
  bool have_constant = false;
  for (Expr& t : terms) {
    if (t.kind() == ExprKind::Add) {
      for (const Expr& c : t.children()) {
        if (c.kind() == ExprKind::Constant) {
          constant += c.value();
          have_constant = true;
        } else {
          flat.push_back(c);
        }
      }
    } else if (t.kind() == ExprKind::Constant) {
      constant += t.value();
      have_constant = true;
    } else {
      flat.push_back(std::move(t));
    }
  }
  if (have_constant && constant != 0.0) flat.push_back(Expr::constant(constant));
  if (flat.empty()) return Expr::constant(0.0, span);
  if (flat.size() == 1) return flat.front();
  return make_node(ExprKind::Add, std::move(flat), span);
}

Expr make_mul(std::vector<Expr> input, SourceSpan span) {
  std::vector<Expr> flat;
  for (Expr& f : input) {
    if (f.kind() == ExprKind::Mul) {
      for (const Expr& c : f.children()) flat.push_back(c);
    } else {
      flat.push_back(std::move(f));
    }
  }

  bool has_marker = false;
  bool has_div = false;
  for (const Expr& f : flat) {
    has_marker = has_marker || f.is_marker();
    has_div = has_div || f.kind() == ExprKind::Div;
  }

  // a*(n/d) -> (a*n)/d, but never across a marker: the integrand must stay whole.
  if (has_div && !has_marker) {
    std::vector<Expr> nums;
    std::vector<Expr> dens;
    for (const Expr& f : flat) {
      if (f.kind() == ExprKind::Div) {
        nums.push_back(f.children()[0]);
        dens.push_back(f.children()[1]);
      } else {
        nums.push_back(f);
      }
    }
    return make_div(make_mul(std::move(nums)), make_mul(std::move(dens)), span);
  }

  // Fold constants separately before and after the marker.
  std::vector<Expr> pre;
  std::vector<Expr> post;
  Expr marker;
  bool seen_marker = false;
  double pre_constant = 1.0;
  double post_constant = 1.0;
  for (const Expr& f : flat) {
    if (!seen_marker && f.is_marker()) {
      seen_marker = true;
      marker = f;
      continue;
    }
    if (f.kind() == ExprKind::Constant) {
      (seen_marker ? post_constant : pre_constant) *= f.value();
      continue;
    }
    (seen_marker ? post : pre).push_back(f);
  }
  if (pre_constant == 0.0 || post_constant == 0.0) return Expr::constant(0.0, span);

  std::vector<Expr> out;
  if (pre_constant != 1.0) out.push_back(Expr::constant(pre_constant));
  out.insert(out.end(), pre.begin(), pre.end());
  if (seen_marker) {
    out.push_back(marker);
    if (post_constant != 1.0) out.push_back(Expr::constant(post_constant));
    out.insert(out.end(), post.begin(), post.end());
  }
  if (out.empty()) return Expr::constant(pre_constant * post_constant, span);
  if (out.size() == 1) return out.front();
  return make_node(ExprKind::Mul, std::move(out), span);
}

Expr make_div(Expr numerator, Expr denominator, SourceSpan span) {
  if (denominator.is_constant(1.0)) return numerator;
  if (numerator.is_constant(0.0)) return Expr::constant(0.0, span);
  if (numerator.kind() == ExprKind::Constant && denominator.kind() == ExprKind::Constant)
    return Expr::constant(numerator.value() / denominator.value(), span);
  if (numerator.kind() == ExprKind::Div) {
    return make_div(numerator.children()[0],
                    make_mul({numerator.children()[1], std::move(denominator)}), span);
  }
  if (denominator.kind() == ExprKind::Div) {
    return make_div(make_mul({std::move(numerator), denominator.children()[1]}),
                    denominator.children()[0], span);
  }
  return make_node(ExprKind::Div, {std::move(numerator), std::move(denominator)}, span);
}

Expr make_neg(Expr x, SourceSpan span) {
  if (x.kind() == ExprKind::Constant) return Expr::constant(-x.value(), span);
  return make_mul({Expr::constant(-1.0), std::move(x)}, span);
}

Expr make_sub(Expr a, Expr b, SourceSpan span) {
  return make_add({std::move(a), make_neg(std::move(b))}, span);
}

// ---------------------------------------------------------------------------
// Queries

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case ExprKind::Constant:
      if (a.value() != b.value()) return false;
      break;
    case ExprKind::Ref: {
      const RefData& ra = a.ref();
      const RefData& rb = b.ref();
      if (ra.entity != rb.entity || ra.component != rb.component || ra.side != rb.side ||
          ra.indices != rb.indices)
        return false;
      break;
    }
    case ExprKind::Binding:
    case ExprKind::Call:
      if (a.name() != b.name()) return false;
      break;
    case ExprKind::Normal:
      if (a.component() != b.component()) return false;
      break;
    case ExprKind::Compare:
      if (a.compare_op() != b.compare_op()) return false;
      break;
    default:
      break;
  }
  auto ca = a.children();
  auto cb = b.children();
  if (ca.size() != cb.size()) return false;
  for (std::size_t i = 0; i < ca.size(); ++i)
    if (!structurally_equal(ca[i], cb[i])) return false;
  return true;
}

std::vector<Expr> additive_terms(const Expr& e) {
  if (e.kind() == ExprKind::Add) return {e.children().begin(), e.children().end()};
  if (e.is_constant(0.0)) return {};
  return {e};
}

std::vector<Expr> factors(const Expr& e) {
  if (e.kind() == ExprKind::Mul) return {e.children().begin(), e.children().end()};
  return {e};
}

bool contains(const Expr& e, ExprKind kind) { return count_kind(e, kind) > 0; }

int count_kind(const Expr& e, ExprKind kind) {
  int n = 0;
  visit(e, [&](const Expr& x) { n += x.kind() == kind ? 1 : 0; });
  return n;
}

bool references_entity(const Expr& e, const std::string& entity) {
  bool found = false;
  visit(e, [&](const Expr& x) {
    if (x.kind() == ExprKind::Ref && x.ref().entity == entity) found = true;
    if (x.kind() == ExprKind::Binding && x.name() == entity) found = true;
  });
  return found;
}

// ---------------------------------------------------------------------------
// Rendering

std::string format_number(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

enum Prec { kEquals = 0, kCompare = 1, kAdd = 2, kMul = 3, kAtom = 5 };

int precedence(const Expr& e) {
  switch (e.kind()) {
    case ExprKind::Equals:
      return kEquals;
    case ExprKind::Compare:
      return kCompare;
    case ExprKind::Add:
      return kAdd;
    case ExprKind::Mul:
    case ExprKind::Div:
      return kMul;
    case ExprKind::Constant:
      return e.value() < 0 ? kMul : kAtom;
    default:
      return kAtom;
  }
}

const char* compare_text(CompareOp op) {
  switch (op) {
    case CompareOp::Greater:
      return " > ";
    case CompareOp::Less:
      return " < ";
    case CompareOp::GreaterEqual:
      return " >= ";
    case CompareOp::LessEqual:
      return " <= ";
  }
  return " ? ";
}

void render_into(std::ostringstream& os, const Expr& e);

void render_paren(std::ostringstream& os, const Expr& e, bool paren) {
  if (paren) os << '(';
  render_into(os, e);
  if (paren) os << ')';
}

// Splits a leading negative sign off an additive term.
bool split_sign(const Expr& t, Expr& magnitude) {
  if (t.kind() == ExprKind::Constant && t.value() < 0) {
    magnitude = Expr::constant(-t.value());
    return true;
  }
  if (t.kind() == ExprKind::Mul) {
    auto fs = t.children();
    if (fs[0].kind() == ExprKind::Constant && fs[0].value() < 0) {
      std::vector<Expr> rest;
      if (fs[0].value() != -1.0) rest.push_back(Expr::constant(-fs[0].value()));
      rest.insert(rest.end(), fs.begin() + 1, fs.end());
      magnitude = rest.size() == 1 ? rest.front() : make_mul(std::move(rest));
      return true;
    }
  }
  if (t.kind() == ExprKind::Div) {
    Expr num_mag;
    if (split_sign(t.children()[0], num_mag)) {
      magnitude = make_div(num_mag, t.children()[1]);
      return true;
    }
  }
  return false;
}

void render_ref(std::ostringstream& os, const RefData& r) {
  switch (r.side) {
    case CellSide::None:
      os << '_';
      break;
    case CellSide::Cell1:
      os << "CELL1_";
      break;
    case CellSide::Cell2:
      os << "CELL2_";
      break;
  }
  os << r.entity << '_' << r.component;
  if (!r.indices.empty()) {
    os << '[';
    for (std::size_t i = 0; i < r.indices.size(); ++i) os << (i ? "," : "") << r.indices[i];
    os << ']';
  }
}

void render_into(std::ostringstream& os, const Expr& e) {
  switch (e.kind()) {
    case ExprKind::Constant:
      os << format_number(e.value());
      return;
    case ExprKind::Ref:
      render_ref(os, e.ref());
      return;
    case ExprKind::Binding:
      os << e.name();
      return;
    case ExprKind::Normal:
      os << "NORMAL_" << e.component();
      return;
    case ExprKind::Dt:
      os << "dt";
      return;
    case ExprKind::TimeDerivative:
      os << "TIMEDERIVATIVE";
      return;
    case ExprKind::Surface:
      os << "SURFACE";
      return;
    case ExprKind::Add: {
      bool first = true;
      for (const Expr& t : e.children()) {
        Expr mag;
        const bool negative = split_sign(t, mag);
        if (first) {
          render_paren(os, t, precedence(t) <= kAdd && t.kind() != ExprKind::Mul &&
                                  t.kind() != ExprKind::Div);
        } else {
          os << (negative ? " - " : " + ");
          const Expr& shown = negative ? mag : t;
          render_paren(os, shown, precedence(shown) <= kAdd);
        }
        first = false;
      }
      return;
    }
    case ExprKind::Mul: {
      auto fs = e.children();
      std::size_t i = 0;
      if (fs[0].is_constant(-1.0)) {
        os << '-';
        i = 1;
      }
      for (std::size_t k = i; k < fs.size(); ++k) {
        const Expr& f = fs[k];
        if (k > i) os << '*';
        const bool leading_negative_ok = (k == 0 && f.kind() == ExprKind::Constant);
        const bool paren = f.kind() == ExprKind::Div ||
                           (precedence(f) < kAtom && !leading_negative_ok);
        render_paren(os, f, paren);
      }
      return;
    }
    case ExprKind::Div: {
      const Expr& num = e.children()[0];
      const Expr& den = e.children()[1];
      render_paren(os, num, precedence(num) <= kAdd);
      os << '/';
      render_paren(os, den, precedence(den) < kAtom);
      return;
    }
    case ExprKind::Compare:
      render_paren(os, e.children()[0], precedence(e.children()[0]) <= kCompare);
      os << compare_text(e.compare_op());
      render_paren(os, e.children()[1], precedence(e.children()[1]) <= kCompare);
      return;
    case ExprKind::Conditional:
      os << "conditional(";
      render_into(os, e.children()[0]);
      os << ", ";
      render_into(os, e.children()[1]);
      os << ", ";
      render_into(os, e.children()[2]);
      os << ')';
      return;
    case ExprKind::Call: {
      os << e.name() << '(';
      bool first = true;
      for (const Expr& a : e.children()) {
        if (!first) os << ',';
        render_into(os, a);
        first = false;
      }
      os << ')';
      return;
    }
    case ExprKind::Equals:
      render_into(os, e.children()[0]);
      os << " = ";
      render_into(os, e.children()[1]);
      return;
  }
}

}  // namespace

std::string render(const Expr& e) {
  std::ostringstream os;
  render_into(os, e);
  return os.str();
}

}  // namespace bteflow
