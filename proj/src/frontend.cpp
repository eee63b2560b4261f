#include "bteflow/frontend.hpp"

#include <sstream>

#include "bteflow/parser.hpp"

namespace bteflow {

Expr SurfaceTerm::term() const { return make_mul({prefactor, integrand}); }

Expr unknown_ref(const EntityTable& entities, const std::string& unknown) {
  const EntityDecl& decl = entities.at(unknown);
  if (decl.kind != EntityKind::Variable)
    throw ValidationError("unknown '" + unknown + "' must be a declared variable");
  RefData r;
  r.entity = unknown;
  r.indices = decl.index_refs;
  return Expr::reference(std::move(r));
}

Expr conservation_form(const Expr& parsed, const EntityTable& entities,
                       const std::string& unknown) {
  Expr td = make_mul({Expr::constant(-1.0), Expr::time_derivative(), unknown_ref(entities, unknown)});
  std::vector<Expr> terms{td};
  for (const Expr& t : additive_terms(parsed)) terms.push_back(t);
  return make_add(std::move(terms));
}

namespace {

bool has_marker(const Expr& term, ExprKind marker) {
  if (term.kind() == marker) return true;
  if (term.kind() != ExprKind::Mul) return false;
  for (const Expr& f : term.children())
    if (f.kind() == marker) return true;
  return false;
}

void check_callback_arguments(const Expr& term, const std::string& unknown) {
  visit(term, [&](const Expr& node) {
    if (node.kind() != ExprKind::Call) return;
    for (const Expr& arg : node.children()) {
      if (arg.kind() == ExprKind::Binding) continue;
      if (references_entity(arg, unknown))
        throw ParseError("unknown '" + unknown + "' appears inside a compound argument of '" +
                             node.name() + "'; pass it bare so it binds to the previous-step value",
                         arg.span());
    }
  });
}

}  // namespace

Expr apply_time_integration(const Expr& expanded, TimeScheme scheme, const EntityTable& entities,
                            const std::string& unknown) {
  if (scheme != TimeScheme::ForwardEuler) throw ValidationError("unsupported time scheme");
  const Expr u = unknown_ref(entities, unknown);

  std::vector<Expr> rest;
  int td_count = 0;
  double td_coefficient = 0.0;
  for (const Expr& term : additive_terms(expanded)) {
    if (!has_marker(term, ExprKind::TimeDerivative)) {
      rest.push_back(term);
      continue;
    }
    ++td_count;
    // Expect [c,] TIMEDERIVATIVE, u
    std::vector<Expr> fs = factors(term);
    double c = 1.0;
    std::size_t i = 0;
    if (fs[0].kind() == ExprKind::Constant) {
      c = fs[0].value();
      i = 1;
    }
    if (fs.size() != i + 2 || fs[i].kind() != ExprKind::TimeDerivative ||
        !structurally_equal(fs[i + 1], u))
      throw ParseError("TIMEDERIVATIVE must multiply the unknown '" + unknown + "' only",
                       term.span());
    td_coefficient = c;
  }
  if (td_count == 0) throw ParseError("expression has no TIMEDERIVATIVE marker", expanded.span());
  if (td_count > 1)
    throw ParseError("expression has " + std::to_string(td_count) + " TIMEDERIVATIVE markers",
                     expanded.span());

  // c*TD*u + R = 0  =>  u_new = u + dt*R/(-c)
  const double scale = -1.0 / td_coefficient;
  std::vector<Expr> rhs{u};
  for (const Expr& t : rest) {
    check_callback_arguments(t, unknown);
    rhs.push_back(make_mul({Expr::constant(scale), Expr::dt(), t}));
  }
  return Expr::equals(u, make_add(std::move(rhs)));
}

TermSet classify_terms(const Expr& stepped, const std::string& unknown) {
  if (stepped.kind() != ExprKind::Equals)
    throw ValidationError("classification requires an update form 'u = ...'");
  const Expr& lhs = stepped.children()[0];
  if (lhs.kind() != ExprKind::Ref || lhs.ref().entity != unknown ||
      lhs.ref().side != CellSide::None)
    throw ValidationError("left side of the update form must be the unknown '" + unknown + "'");

  TermSet ts;
  ts.lhs_vol.push_back(lhs);
  for (const Expr& term : additive_terms(stepped.children()[1])) {
    const bool surf = has_marker(term, ExprKind::Surface);
    if (contains(term, ExprKind::TimeDerivative))
      throw ParseError("term carries a TIMEDERIVATIVE marker after time integration",
                       term.span());
    if (!surf) {
      ts.rhs_vol.push_back(term);
      continue;
    }
    std::vector<Expr> pre;
    std::vector<Expr> post;
    bool after = false;
    for (const Expr& f : factors(term)) {
      if (f.kind() == ExprKind::Surface) {
        after = true;
        continue;
      }
      (after ? post : pre).push_back(f);
    }
    ts.rhs_surf.push_back({make_mul(std::move(pre)), make_mul(std::move(post))});
  }
  return ts;
}

Expr recombine_rhs(const TermSet& terms) {
  std::vector<Expr> all(terms.rhs_vol.begin(), terms.rhs_vol.end());
  for (const SurfaceTerm& s : terms.rhs_surf)
    all.push_back(make_mul({s.prefactor, Expr::surface(), s.integrand}));
  return make_add(std::move(all));
}

namespace {

std::vector<std::string> pretty_lines(const Expr& term) {
  std::vector<Expr> fs = factors(term);
  if (fs.back().kind() != ExprKind::Conditional) return {render(term)};
  const Expr cond = fs.back();
  fs.pop_back();
  std::string head = fs.empty() ? "conditional(" : render(make_mul(fs)) + " * conditional(";
  return {head, "  " + render(cond.children()[0]) + ",", "  " + render(cond.children()[1]) + ",",
          "  " + render(cond.children()[2]) + ")"};
}

}  // namespace

std::string render_term_table(const TermSet& terms) {
  std::ostringstream os;
  auto row = [&](const char* label, const std::string& text) {
    std::string l(label);
    l.resize(8, ' ');
    os << l << " | " << text << '\n';
  };
  row("LHS vol", render(make_add(terms.lhs_vol)));
  row("RHS vol", render(make_add(terms.rhs_vol)));
  if (terms.rhs_surf.empty()) {
    row("RHS surf", "0");
    return os.str();
  }
  bool first_term = true;
  bool first_line = true;
  for (const SurfaceTerm& s : terms.rhs_surf) {
    std::vector<std::string> lines = pretty_lines(s.term());
    if (!first_term && lines[0].rfind('-', 0) != 0) lines[0] = "+ " + lines[0];
    for (const std::string& line : lines) {
      row(first_line ? "RHS surf" : "", line);
      first_line = false;
    }
    first_term = false;
  }
  return os.str();
}

BoundarySpec parse_boundary_spec(int region, const std::string& text, const EntityTable& entities,
                                 const CallbackRegistry& callbacks) {
  Expr call = parse_expression(text, entities, &callbacks);
  if (call.kind() != ExprKind::Call)
    throw ParseError("boundary condition for region " + std::to_string(region) +
                     " must be a single callback call");
  const CallbackInfo* info = callbacks.find(call.name());
  if (info == nullptr || info->stage != CallbackStage::Boundary)
    throw ValidationError("'" + call.name() + "' is not a boundary callback");
  return BoundarySpec{region, BoundaryKind::Flux, call};
}

EquationSpec build_equation(const std::string& unknown, const std::string& text,
                            const EntityTable& entities, const CallbackRegistry& callbacks,
                            TimeScheme scheme) {
  EquationSpec spec;
  spec.unknown = unknown;
  spec.input_text = text;
  const Expr parsed = parse_expression(text, entities, &callbacks);
  if (parsed.kind() == ExprKind::Equals)
    throw ParseError("conservation-form input must not contain '='");
  spec.expanded = conservation_form(parsed, entities, unknown);
  spec.stepped = apply_time_integration(spec.expanded, scheme, entities, unknown);
  spec.terms = classify_terms(spec.stepped, unknown);
  spec.post_step_hooks = callbacks.post_step_hooks();
  return spec;
}

}  // namespace bteflow
