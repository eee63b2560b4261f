#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "bteflow/frontend.hpp"
#include "bteflow/parser.hpp"
#include "support/expr_oracle.hpp"

using namespace bteflow;
using bteflow::testing::OracleEnv;
using bteflow::testing::oracle_eval;

namespace {

EntityDecl index_decl(const std::string& name, int n, IndexRole role) {
  EntityDecl d;
  d.name = name;
  d.kind = EntityKind::Index;
  d.range = {1, n};
  d.role = role;
  return d;
}

EntityDecl var(const std::string& name, std::vector<std::string> idx = {}) {
  EntityDecl d;
  d.name = name;
  d.kind = EntityKind::Variable;
  d.index_refs = std::move(idx);
  return d;
}

EntityDecl coef(const std::string& name, std::vector<std::string> idx = {}, int components = 1) {
  EntityDecl d;
  d.name = name;
  d.kind = EntityKind::Coefficient;
  d.index_refs = std::move(idx);
  d.components = components;
  return d;
}

EntityTable advection_entities() {
  EntityTable t;
  t.add(var("u"));
  t.add(coef("k"));
  t.add(coef("b", {}, 2));
  return t;
}

EntityTable bte_entities() {
  EntityTable t;
  t.add(index_decl("d", 8, IndexRole::Direction));
  t.add(index_decl("b", 5, IndexRole::Band));
  t.add(var("I", {"d", "b"}));
  t.add(var("Io", {"b"}));
  t.add(var("beta", {"b"}));
  t.add(coef("Sx", {"d"}));
  t.add(coef("Sy", {"d"}));
  t.add(coef("vg", {"b"}));
  return t;
}

const char* kAdvectionConditional =
    "conditional(_b_1*NORMAL_1 + _b_2*NORMAL_2 > 0, (_b_1*NORMAL_1 + _b_2*NORMAL_2)*CELL1_u_1, "
    "(_b_1*NORMAL_1 + _b_2*NORMAL_2)*CELL2_u_1)";

const char* kBteConditional =
    "conditional(_Sx_1[d]*NORMAL_1 + _Sy_1[d]*NORMAL_2 > 0, "
    "(_Sx_1[d]*NORMAL_1 + _Sy_1[d]*NORMAL_2)*CELL1_I_1[d,b], "
    "(_Sx_1[d]*NORMAL_1 + _Sy_1[d]*NORMAL_2)*CELL2_I_1[d,b])";

}  // namespace

// ---------------------------------------------------------------------------
// parse_expression

TEST(ParseExpression, AdvectionReactionExpandsUpwind) {
  const EntityTable ents = advection_entities();
  const Expr e = parse_expression("-k*u - surface(upwind(b, u))", ents);
  EXPECT_EQ(render(e), std::string("-_k_1*_u_1 - SURFACE*") + kAdvectionConditional);
  EXPECT_EQ(count_kind(e, ExprKind::Surface), 1);
  EXPECT_EQ(count_kind(e, ExprKind::Conditional), 1);
}

TEST(ParseExpression, ZeroIsSingleConstant) {
  const Expr e = parse_expression("0", advection_entities());
  EXPECT_EQ(e.kind(), ExprKind::Constant);
  EXPECT_EQ(e.value(), 0.0);
  EXPECT_FALSE(contains(e, ExprKind::Surface));
}

TEST(ParseExpression, BteInputWithIndexedRefs) {
  const EntityTable ents = bte_entities();
  const Expr e = parse_expression(
      "(Io[b] - I[d,b]) / beta[b] + surface(vg[b] * upwind([Sx[d];Sy[d]], I[d,b]))", ents);
  EXPECT_EQ(render(e), std::string("(_Io_1[b] - _I_1[d,b])/_beta_1[b] + SURFACE*_vg_1[b]*") +
                           kBteConditional);
}

TEST(ParseExpression, ErrorsCarrySpans) {
  const EntityTable ents = bte_entities();
  try {
    (void)parse_expression("Io[b] + zeta", ents);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.span().begin, 8u);
    EXPECT_EQ(e.span().end, 12u);
    EXPECT_NE(std::string(e.what()).find("zeta"), std::string::npos);
  }
  EXPECT_THROW((void)parse_expression("I[d,]", ents), ParseError);
  EXPECT_THROW((void)parse_expression("I[b,d]", ents), ParseError);
  EXPECT_THROW((void)parse_expression("I", ents), ParseError);
  const EntityTable adv = advection_entities();
  try {
    (void)parse_expression("k[d]", adv);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("non-indexed"), std::string::npos);
    EXPECT_EQ(e.span().begin, 1u);
  }
  EXPECT_THROW((void)parse_expression("upwind(b)", adv), ParseError);
  EXPECT_THROW((void)parse_expression("upwind(b, u, u)", adv), ParseError);
  EXPECT_THROW((void)parse_expression("surface(surface(u))", adv), ParseError);
  EXPECT_THROW((void)parse_expression("2*(k + surface(u))", adv), ParseError);
  EXPECT_THROW((void)parse_expression("b + u", adv), ParseError);
  EXPECT_THROW((void)parse_expression("", adv), ParseError);
  EXPECT_THROW((void)parse_expression("k +", adv), ParseError);
  EXPECT_THROW((void)parse_expression("2k", adv), ParseError);
}

TEST(ParseExpression, UpwindAtZeroFluxTakesCell2) {
  const Expr e = parse_expression("upwind(b, u)", advection_entities());
  OracleEnv env;
  env.symbols = {{"_b_1", 1.0}, {"_b_2", 0.0}, {"NORMAL_1", 0.0}, {"NORMAL_2", 1.0},
                 {"CELL1_u_1", 5.0}, {"CELL2_u_1", 7.0}};
  // v.n == 0 exactly: the strict test fails and the CELL2 branch is taken (value 0*7).
  EXPECT_EQ(oracle_eval(e.children()[0], env), 0.0);
  EXPECT_EQ(oracle_eval(e, env), 0.0);
  EXPECT_TRUE(structurally_equal(e.children()[2].children()[1],
                                 parse_expression("CELL2_u_1", advection_entities())));
}

TEST(ParseExpression, UpwindCorrectnessProperty) {
  const Expr e = parse_expression("upwind(b, u)", advection_entities());
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-3.0, 3.0);
  for (int trial = 0; trial < 500; ++trial) {
    OracleEnv env;
    const double v1 = dist(rng), v2 = dist(rng), n1 = dist(rng), n2 = dist(rng);
    const double c1 = dist(rng), c2 = dist(rng);
    env.symbols = {{"_b_1", v1},      {"_b_2", v2},      {"NORMAL_1", n1},
                   {"NORMAL_2", n2}, {"CELL1_u_1", c1}, {"CELL2_u_1", c2}};
    const double vn = v1 * n1 + v2 * n2;
    EXPECT_EQ(oracle_eval(e, env), vn > 0 ? vn * c1 : vn * c2);
  }
}

// ---------------------------------------------------------------------------
// apply_time_integration

TEST(TimeIntegration, AdvectionReactionMatchesListing) {
  const EntityTable ents = advection_entities();
  const Expr expanded =
      conservation_form(parse_expression("-k*u - surface(upwind(b, u))", ents), ents, "u");
  EXPECT_EQ(render(expanded),
            std::string("-TIMEDERIVATIVE*_u_1 - _k_1*_u_1 - SURFACE*") + kAdvectionConditional);
  const Expr stepped = apply_time_integration(expanded, TimeScheme::ForwardEuler, ents, "u");
  EXPECT_EQ(render(stepped),
            std::string("_u_1 = _u_1 - dt*_k_1*_u_1 - dt*SURFACE*") + kAdvectionConditional);
}

TEST(TimeIntegration, CallbackFluxExample) {
  const EntityTable ents = advection_entities();
  CallbackRegistry cbs;
  cbs.register_callback("flux", 1, CallbackStage::Coefficient);
  const Expr expanded =
      parse_expression("-TIMEDERIVATIVE*u - k*u - SURFACE*flux(u)", ents, &cbs);
  const Expr stepped = apply_time_integration(expanded, TimeScheme::ForwardEuler, ents, "u");
  EXPECT_EQ(render(stepped), "_u_1 = _u_1 - dt*_k_1*_u_1 - dt*SURFACE*flux(u)");
}

TEST(TimeIntegration, IdentityStep) {
  const EntityTable ents = advection_entities();
  const Expr stepped = apply_time_integration(parse_expression("-TIMEDERIVATIVE*u", ents),
                                              TimeScheme::ForwardEuler, ents, "u");
  EXPECT_EQ(render(stepped), "_u_1 = _u_1");
}

TEST(TimeIntegration, BteMatchesHandRewrite) {
  const EntityTable ents = bte_entities();
  const EquationSpec spec = build_equation(
      "I", "(Io[b] - I[d,b]) / beta[b] - surface(vg[b] * upwind([Sx[d];Sy[d]], I[d,b]))", ents,
      CallbackRegistry{});
  // Forward Euler applied by hand to the finite-volume BTE:
  //   I = I0 + dt*(Io - I0)/beta - dt * vg * (S.n) * I_upwind
  const std::string expected =
      std::string("_I_1[d,b] = _I_1[d,b] + dt*(_Io_1[b] - _I_1[d,b])/_beta_1[b] - "
                  "dt*SURFACE*_vg_1[b]*") +
      kBteConditional;
  EXPECT_TRUE(structurally_equal(spec.stepped, parse_expression(expected, ents)));
  EXPECT_EQ(render(spec.stepped), expected);
}

TEST(TimeIntegration, Errors) {
  const EntityTable ents = advection_entities();
  CallbackRegistry cbs;
  cbs.register_callback("flux", 1, CallbackStage::Coefficient);
  EXPECT_THROW((void)apply_time_integration(parse_expression("-k*u", ents),
                                            TimeScheme::ForwardEuler, ents, "u"),
               ParseError);
  EXPECT_THROW(
      (void)apply_time_integration(parse_expression("-TIMEDERIVATIVE*u - TIMEDERIVATIVE*u", ents),
                                   TimeScheme::ForwardEuler, ents, "u"),
      ParseError);
  EXPECT_THROW((void)apply_time_integration(
                   parse_expression("-TIMEDERIVATIVE*u - flux(2*u)", ents, &cbs),
                   TimeScheme::ForwardEuler, ents, "u"),
               ParseError);
  EXPECT_THROW((void)apply_time_integration(parse_expression("-TIMEDERIVATIVE*k", ents),
                                            TimeScheme::ForwardEuler, ents, "u"),
               ParseError);
}

// ---------------------------------------------------------------------------
// classify_terms

TEST(ClassifyTerms, AdvectionReactionTableIsGolden) {
  const EntityTable ents = advection_entities();
  const EquationSpec spec =
      build_equation("u", "-k*u - surface(upwind(b, u))", ents, CallbackRegistry{});
  ASSERT_EQ(spec.terms.lhs_vol.size(), 1u);
  EXPECT_EQ(render(spec.terms.lhs_vol[0]), "_u_1");
  EXPECT_EQ(render(make_add(spec.terms.rhs_vol)), "_u_1 - dt*_k_1*_u_1");
  ASSERT_EQ(spec.terms.rhs_surf.size(), 1u);
  EXPECT_EQ(render(spec.terms.rhs_surf[0].term()), std::string("-dt*") + kAdvectionConditional);

  const std::string golden =
      "LHS vol  | _u_1\n"
      "RHS vol  | _u_1 - dt*_k_1*_u_1\n"
      "RHS surf | -dt * conditional(\n"
      "         |   _b_1*NORMAL_1 + _b_2*NORMAL_2 > 0,\n"
      "         |   (_b_1*NORMAL_1 + _b_2*NORMAL_2)*CELL1_u_1,\n"
      "         |   (_b_1*NORMAL_1 + _b_2*NORMAL_2)*CELL2_u_1)\n";
  EXPECT_EQ(render_term_table(spec.terms), golden);
}

TEST(ClassifyTerms, IdentityUpdate) {
  const EntityTable ents = advection_entities();
  const TermSet ts = classify_terms(parse_expression("u = u", ents), "u");
  ASSERT_EQ(ts.lhs_vol.size(), 1u);
  ASSERT_EQ(ts.rhs_vol.size(), 1u);
  EXPECT_EQ(render(ts.rhs_vol[0]), "_u_1");
  EXPECT_TRUE(ts.rhs_surf.empty());
}

TEST(ClassifyTerms, BteSurfaceTermsMatchInputMarkers) {
  const EntityTable ents = bte_entities();
  const std::string text =
      "(Io[b] - I[d,b]) * beta[b] - surface(vg[b] * upwind([Sx[d];Sy[d]], I[d,b]))";
  const EquationSpec spec = build_equation("I", text, ents, CallbackRegistry{});
  // Structural oracle: one surface bucket entry per SURFACE marker before classification,
  // each carrying exactly one upwind conditional.
  EXPECT_EQ(spec.terms.rhs_surf.size(),
            static_cast<std::size_t>(count_kind(spec.stepped, ExprKind::Surface)));
  for (const SurfaceTerm& s : spec.terms.rhs_surf) {
    EXPECT_EQ(count_kind(s.integrand, ExprKind::Conditional), 1);
    EXPECT_FALSE(contains(s.term(), ExprKind::Surface));
  }
  EXPECT_EQ(render(spec.terms.rhs_surf[0].prefactor), "-dt");
  EXPECT_EQ(render(spec.terms.rhs_surf[0].integrand),
            std::string("_vg_1[b]*") + kBteConditional);
}

TEST(ClassifyTerms, RejectsLeftoverTimeDerivative) {
  const EntityTable ents = advection_entities();
  EXPECT_THROW((void)classify_terms(parse_expression("u = u + TIMEDERIVATIVE*u", ents), "u"),
               ParseError);
  EXPECT_THROW((void)classify_terms(parse_expression("u + k", ents), "u"), ValidationError);
}

// ---------------------------------------------------------------------------
// register_callback

TEST(RegisterCallback, IsothermalCallHasEightBoundArguments) {
  const EntityTable ents = bte_entities();
  CallbackRegistry cbs;
  cbs.register_callback("isothermal", 8, CallbackStage::Boundary);
  const BoundarySpec spec =
      parse_boundary_spec(1, "isothermal(I,vg,Sx,Sy,b,d,normal,300)", ents, cbs);
  ASSERT_EQ(spec.call.kind(), ExprKind::Call);
  ASSERT_EQ(spec.call.children().size(), 8u);
  EXPECT_EQ(spec.call.children()[0].kind(), ExprKind::Binding);
  EXPECT_EQ(spec.call.children()[6].name(), "normal");
  EXPECT_EQ(spec.call.children()[7].value(), 300.0);
  EXPECT_EQ(render(spec.call), "isothermal(I,vg,Sx,Sy,b,d,normal,300)");
}

TEST(RegisterCallback, PostStepHooksKeepRegistrationOrder) {
  CallbackRegistry cbs;
  cbs.register_callback("isothermal", 8, CallbackStage::Boundary);
  cbs.register_callback("temperature_update", 0, CallbackStage::PostStep);
  cbs.register_callback("probe", 0, CallbackStage::PostStep);
  EXPECT_EQ(cbs.post_step_hooks(), (std::vector<std::string>{"temperature_update", "probe"}));
  EXPECT_THROW(cbs.register_callback("probe", 0, CallbackStage::PostStep), ValidationError);
  EXPECT_THROW(cbs.register_callback("neg", -1, CallbackStage::PostStep), ValidationError);
}

TEST(RegisterCallback, ArityMismatchNamesCallSite) {
  const EntityTable ents = bte_entities();
  CallbackRegistry cbs;
  cbs.register_callback("isothermal", 8, CallbackStage::Boundary);
  try {
    (void)parse_boundary_spec(1, "isothermal(I,vg,Sx,Sy,b,d,normal)", ents, cbs);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("isothermal"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("expects 8"), std::string::npos);
    EXPECT_EQ(e.span().begin, 0u);
  }
}

// ---------------------------------------------------------------------------
// Properties

namespace {

EntityTable mixed_entities() {
  EntityTable t = bte_entities();
  t.add(var("u"));
  t.add(coef("k"));
  t.add(coef("w", {}, 2));
  return t;
}

class ExprGen {
 public:
  explicit ExprGen(std::uint64_t seed, bool bare_calls = false)
      : rng_(seed), bare_calls_(bare_calls) {}

  std::string atom(int depth) {
    static const char* leaves[] = {"u",      "k",      "I[d,b]", "Io[b]", "beta[b]", "vg[b]",
                                   "Sx[d]",  "Sy[d]",  "2",      "0.5",   "3.25",    "1e-3",
                                   "dt",     "_k_1",   "_I_1[d,b]"};
    const int pick = uniform(0, depth > 2 ? 14 : 18);
    if (pick <= 14) return leaves[pick];
    if (pick == 15) return "(" + sum(depth + 1) + ")";
    if (pick == 16) return "flux(" + (bare_calls_ ? std::string("u") : sum(depth + 1)) + ")";
    if (pick == 17) return "conditional(" + sum(depth + 1) + " > " + sum(depth + 1) + ", " +
                           sum(depth + 1) + ", " + sum(depth + 1) + ")";
    return "-" + atom(depth + 1);
  }

  std::string product(int depth) {
    std::string s = atom(depth);
    const int n = uniform(0, 2);
    for (int i = 0; i < n; ++i) s += (uniform(0, 3) == 0 ? " / " : "*") + atom(depth);
    return s;
  }

  std::string sum(int depth) {
    std::string s = product(depth);
    const int n = depth > 2 ? 0 : uniform(0, 2);
    for (int i = 0; i < n; ++i) s += (uniform(0, 1) ? " + " : " - ") + product(depth);
    return s;
  }

  std::string top() {
    std::string s = sum(0);
    const int nsurf = uniform(0, 2);
    for (int i = 0; i < nsurf; ++i) {
      const char* op = uniform(0, 1) ? " + " : " - ";
      switch (uniform(0, 2)) {
        case 0:
          s += std::string(op) + "surface(vg[b]*upwind([Sx[d];Sy[d]], I[d,b]))";
          break;
        case 1:
          s += std::string(op) + "2*surface(upwind(w, u))";
          break;
        default:
          s += std::string(op) + "surface(" + sum(1) + ")";
      }
    }
    return s;
  }

 private:
  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  std::mt19937_64 rng_;
  bool bare_calls_;
};

}  // namespace

TEST(FrontendProperties, RenderParseRoundTrip) {
  const EntityTable ents = mixed_entities();
  CallbackRegistry cbs;
  cbs.register_callback("flux", 1, CallbackStage::Coefficient);
  ExprGen gen(12345);
  for (int trial = 0; trial < 400; ++trial) {
    const std::string text = gen.top();
    const Expr first = parse_expression(text, ents, &cbs);
    const std::string rendered = render(first);
    Expr again;
    ASSERT_NO_THROW(again = parse_expression(rendered, ents, &cbs)) << text << "\n" << rendered;
    EXPECT_TRUE(structurally_equal(first, again)) << text << "\n" << rendered << "\n"
                                                  << render(again);
    EXPECT_EQ(render(again), rendered);
  }
}

TEST(FrontendProperties, ClassificationPartitionsTheUpdate) {
  const EntityTable ents = mixed_entities();
  CallbackRegistry cbs;
  cbs.register_callback("flux", 1, CallbackStage::Coefficient);
  ExprGen gen(987, true);
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const std::string text = gen.top();
    const EquationSpec spec = build_equation("u", text, ents, cbs);
    const Expr rhs = spec.stepped.children()[1];
    const std::size_t nterms = additive_terms(rhs).size();
    EXPECT_EQ(spec.terms.rhs_vol.size() + spec.terms.rhs_surf.size(), nterms) << text;
    const Expr recombined = recombine_rhs(spec.terms);
    for (int point = 0; point < 100; ++point) {
      OracleEnv env;
      env.rng = &rng;
      const double a = oracle_eval(rhs, env);
      const double b = oracle_eval(recombined, env);
      double scale = 0.0;
      for (const Expr& t : additive_terms(rhs)) scale += std::abs(oracle_eval(t, env));
      if (!std::isfinite(a) || !std::isfinite(scale)) continue;
      EXPECT_LE(std::abs(a - b), 1e-14 * std::max(scale, 1e-300)) << text;
    }
  }
}
