#pragma once

#include <string>
#include <vector>

#include "bteflow/callbacks.hpp"
#include "bteflow/entities.hpp"
#include "bteflow/expr.hpp"

namespace bteflow {

enum class TimeScheme { ForwardEuler };

/// A surface-integral term split at its SURFACE marker. On boundary faces the
/// integrand is replaced by the region's flux callback; the prefactor stays.
struct SurfaceTerm {
  Expr prefactor;
  Expr integrand;
  [[nodiscard]] Expr term() const;
};

/// LHS vol / RHS vol / RHS surf buckets of an update-form equation.
struct TermSet {
  std::vector<Expr> lhs_vol;
  std::vector<Expr> rhs_vol;
  std::vector<SurfaceTerm> rhs_surf;
};

enum class BoundaryKind { Flux };

struct BoundarySpec {
  int region = 0;
  BoundaryKind kind = BoundaryKind::Flux;
  Expr call;  // ExprKind::Call of a boundary-stage callback
};

struct InitialCondition {
  enum class Kind { Constant, Table, Generator };
  Kind kind = Kind::Constant;
  double value = 0.0;
  /// Per-(direction, band) values, direction-major.
  std::vector<double> table;
  /// Generator name (e.g. "equilibrium", "random") and its numeric parameters.
  std::string generator;
  std::vector<double> params;
};

struct EquationSpec {
  std::string unknown;
  std::string input_text;
  Expr expanded;
  Expr stepped;
  TermSet terms;
  InitialCondition initial_condition;
  std::vector<BoundarySpec> boundary_specs;
  std::vector<std::string> post_step_hooks;
};

/// Canonical reference to the unknown (`_u_1` / `_I_1[d,b]`).
[[nodiscard]] Expr unknown_ref(const EntityTable& entities, const std::string& unknown);

/// Prepends the implicit `-TIMEDERIVATIVE*u` of a conservation-form input.
[[nodiscard]] Expr conservation_form(const Expr& parsed, const EntityTable& entities,
                                     const std::string& unknown);

/// Rewrites `-TIMEDERIVATIVE*u + R = 0` into the explicit update `u = u + dt*R`.
/// Right-hand references to the unknown denote previous-step values.
[[nodiscard]] Expr apply_time_integration(const Expr& expanded, TimeScheme scheme,
                                          const EntityTable& entities,
                                          const std::string& unknown);

/// Sorts the update form into LHS vol / RHS vol / RHS surf.
[[nodiscard]] TermSet classify_terms(const Expr& stepped, const std::string& unknown);

/// Recombines the buckets into a single right-hand side (reordering only).
[[nodiscard]] Expr recombine_rhs(const TermSet& terms);

/// Deterministic three-row table rendering of the buckets.
[[nodiscard]] std::string render_term_table(const TermSet& terms);

/// Parses `name(args)` boundary text into a spec, checking the callback stage.
[[nodiscard]] BoundarySpec parse_boundary_spec(int region, const std::string& text,
                                               const EntityTable& entities,
                                               const CallbackRegistry& callbacks);

/// Full frontend: parse, expand, time-integrate and classify.
[[nodiscard]] EquationSpec build_equation(const std::string& unknown, const std::string& text,
                                          const EntityTable& entities,
                                          const CallbackRegistry& callbacks,
                                          TimeScheme scheme = TimeScheme::ForwardEuler);

}  // namespace bteflow
