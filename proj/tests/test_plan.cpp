#include <gtest/gtest.h>

#include <string>

#include "bteflow/config.hpp"
#include "bteflow/error.hpp"
#include "support/scenarios.hpp"

using namespace bteflow;
using bteflow::testing::bte_scenario;
using bteflow::testing::source_path;

namespace {

ScenarioConfig advection(int n = 4) {
  ScenarioConfig c = load_config(source_path("scenarios/advection_reaction.cfg"));
  c.mesh.nx = c.mesh.ny = n;
  c.output = {};
  return c;
}

std::set<std::string> names(std::initializer_list<const char*> l) {
  return {l.begin(), l.end()};
}

}  // namespace

TEST(LoopPlan, ParsesAxisNames) {
  const LoopPlan p = build_loop_plan({"band", "cells", "direction"});
  EXPECT_EQ(p.ordering[0], Axis::Band);
  EXPECT_EQ(p.ordering[1], Axis::Cells);
  EXPECT_EQ(p.ordering[2], Axis::Direction);
  EXPECT_EQ(p.parallel_axis(), Axis::Band);
  const LoopPlan def = build_loop_plan({});
  EXPECT_EQ(def.ordering[0], Axis::Cells);
}

TEST(LoopPlan, ResolvesIndexNamesThroughRoles) {
  const auto p = build_pipeline(bte_scenario(4, 8, 3, 1));
  const LoopPlan plan = build_loop_plan({"b", "elements", "d"}, p->entities.get());
  EXPECT_EQ(plan.ordering[0], Axis::Band);
  EXPECT_EQ(plan.ordering[2], Axis::Direction);
}

TEST(LoopPlan, RejectsBadOrderings) {
  EXPECT_THROW((void)build_loop_plan({"cells", "band"}), ValidationError);
  EXPECT_THROW((void)build_loop_plan({"cells", "band", "band"}), ValidationError);
  EXPECT_THROW((void)build_loop_plan({"cells", "band", "angle"}), ValidationError);
  EXPECT_THROW((void)build_loop_plan({"cells", "band", "d"}), ValidationError);
}

TEST(LoopPlan, AllPermutationsAreDistinct) {
  const auto plans = all_loop_plans();
  ASSERT_EQ(plans.size(), 6u);
  EXPECT_EQ(plans[0].ordering, (std::array<Axis, 3>{Axis::Cells, Axis::Direction, Axis::Band}));
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = i + 1; j < 6; ++j) EXPECT_NE(plans[i].ordering, plans[j].ordering);
}

TEST(Lower, AdvectionKernelShape) {
  const auto p = build_pipeline(advection());
  const KernelIR& k = p->sim.kernel;
  EXPECT_EQ(k.unknown, "u");
  EXPECT_EQ(k.count(IRKind::Source), 1);
  EXPECT_EQ(k.count(IRKind::FaceFlux), 1);
  EXPECT_EQ(k.count(IRKind::BoundaryFlux), 1);
  EXPECT_EQ(k.count(IRKind::WriteBack), 1);
  const std::string text = render_kernel(k);
  EXPECT_NE(text.find("source = _u_1 - dt*_k_1*_u_1"), std::string::npos) << text;
  EXPECT_NE(text.find("for face = 1:Nfaces"), std::string::npos);
  EXPECT_NE(text.find("u_new = source - dt*flux_1"), std::string::npos) << text;
}

TEST(Lower, SurfaceFreeEquationHasNoFaceLoop) {
  ScenarioConfig c = advection();
  c.equation = "-k*u";
  c.boundaries.clear();
  const auto p = build_pipeline(c);
  EXPECT_FALSE(p->sim.kernel.has_face_loop());
  EXPECT_EQ(render_kernel(p->sim.kernel).find("Nfaces"), std::string::npos);
  EXPECT_TRUE(p->sim.offload.combine_identity);
}

TEST(Lower, BteNodeCounts) {
  const auto p = build_pipeline(bte_scenario(4, 8, 3, 1));
  const KernelIR& k = p->sim.kernel;
  EXPECT_EQ(k.dof_indices, (std::vector<std::string>{"d", "b"}));
  EXPECT_EQ(k.count(IRCategory::VolumeSource), 1);
  EXPECT_EQ(k.count(IRCategory::SurfaceFlux), static_cast<int>(k.surface_terms.size()));
  EXPECT_EQ(k.count(IRKind::BoundaryFlux), 1);
  EXPECT_EQ(k.count(IRCategory::Write), 1);
  EXPECT_EQ(k.count(IRKind::LoopBegin), 4);  // cells, d, b, faces
  EXPECT_EQ(k.count(IRKind::LoopBegin), k.count(IRKind::LoopEnd));
}

TEST(Lower, LoopOrderOnlyMovesLoopHeaders) {
  ScenarioConfig c = bte_scenario(4, 8, 3, 1);
  c.loops = {"b", "cells", "d"};
  const auto p = build_pipeline(c);
  const std::string text = render_kernel(p->sim.kernel);
  const auto b = text.find("for b = 1:5"), cell = text.find("for cell"), d = text.find("for d = 1:8");
  EXPECT_LT(b, cell);
  EXPECT_LT(cell, d);
}

TEST(Lower, FaceDataInVolumeTermIsRejected) {
  ScenarioConfig c = advection();
  c.equation = "-k*u*NORMAL_1 - surface(upwind(b, u))";
  EXPECT_THROW((void)build_pipeline(c), Error);
}

TEST(Lower, UndeclaredUnknownIsRejected) {
  const auto p = build_pipeline(advection());
  EXPECT_THROW((void)lower(p->equation.terms, "v", summarize(*p->mesh), *p->entities),
               ValidationError);
}

TEST(Lower, EveryRegionNeedsOneBoundary) {
  const auto p = build_pipeline(advection());
  std::vector<BoundarySpec> three(p->equation.boundary_specs.begin(),
                                  p->equation.boundary_specs.begin() + 3);
  EXPECT_THROW((void)lower(p->equation.terms, "u", summarize(*p->mesh), *p->entities, three),
               ValidationError);
}

TEST(Lower, IsDeterministic) {
  const auto a = build_pipeline(bte_scenario(4, 8, 3, 1));
  const auto b = build_pipeline(bte_scenario(4, 8, 3, 1));
  EXPECT_TRUE(structurally_equal(a->sim.kernel, b->sim.kernel));
  EXPECT_EQ(render_plan(a->sim.offload), render_plan(b->sim.offload));
}

TEST(Split, FourByFourGridCounts) {
  const auto p = build_pipeline(advection(4));
  const MeshSummary m = summarize(*p->mesh);
  EXPECT_EQ(m.interior_faces, 24);
  EXPECT_EQ(m.boundary_faces, 16);
  const OffloadPlan& plan = p->sim.offload;
  EXPECT_FALSE(plan.combine_identity);
  EXPECT_EQ(plan.interior_kernel.count(IRCategory::Boundary), 0);
  EXPECT_EQ(plan.interior_kernel.count(IRKind::FaceFlux), 1);
  EXPECT_EQ(plan.boundary_task.count(IRKind::BoundaryFlux), 1);
  EXPECT_EQ(plan.boundary_task.count(IRKind::FaceFlux), 0);
  EXPECT_NE(render_plan(plan).find("combine: u = u_interior + u_bdry"), std::string::npos);
}

TEST(Split, PeriodicMeshCombinesByIdentity) {
  ScenarioConfig c = advection();
  c.mesh.periodic = {true, true};
  c.boundaries.clear();
  const auto p = build_pipeline(c);
  EXPECT_TRUE(p->sim.offload.combine_identity);
  EXPECT_TRUE(p->sim.offload.boundary_task.nodes.empty());
}

TEST(Split, MissingBoundaryNodesAreRejected) {
  const auto p = build_pipeline(advection());
  KernelIR stripped = p->sim.kernel;
  std::erase_if(stripped.nodes, [](const IRNode& n) { return n.category == IRCategory::Boundary; });
  EXPECT_THROW((void)split_interior_boundary(stripped, summarize(*p->mesh)), ValidationError);
}

TEST(TransferSets, BteScenario) {
  const auto p = build_pipeline(bte_scenario(4, 8, 3, 1));
  const OffloadPlan& plan = p->sim.offload;
  EXPECT_EQ(plan.to_host_per_step, names({"I"}));
  EXPECT_EQ(plan.to_device_per_step, names({"I", "Io", "beta"}));
  EXPECT_EQ(plan.once_only_transfers, names({"Sx", "Sy", "geometry", "vg"}));
  EXPECT_EQ(plan.device_writes, names({"I"}));
  EXPECT_EQ(plan.boundary_reads, names({"I", "Sx", "Sy", "vg"}));
}

TEST(TransferSets, PeriodicWithoutHooksMovesNothingPerStep) {
  ScenarioConfig c = advection();
  c.mesh.periodic = {true, true};
  c.boundaries.clear();
  const auto p = build_pipeline(c);
  EXPECT_TRUE(p->sim.offload.to_host_per_step.empty());
  EXPECT_TRUE(p->sim.offload.to_device_per_step.empty());
  EXPECT_EQ(predicted_bytes_per_step(p->sim.offload, *p->sim.layout), 0u);
}

// A host hook that reads only a scalar it owns never pulls the unknown back.
TEST(TransferSets, HookFieldsDriveTheSets) {
  const auto p = build_pipeline(bte_scenario(4, 8, 3, 1));
  OffloadPlan plan = p->sim.offload;
  plan.combine_identity = true;
  plan.boundary_reads.clear();
  HookDecl probe{"probe", {"T"}, {"T"}, false, {}};
  const OffloadPlan out = compute_transfer_sets(plan, {probe});
  EXPECT_TRUE(out.to_host_per_step.empty());
  EXPECT_TRUE(out.to_device_per_step.empty());
  HookDecl refresh{"refresh", {"T"}, {"Io"}, false, {}};
  const OffloadPlan out2 = compute_transfer_sets(plan, {refresh});
  EXPECT_EQ(out2.to_device_per_step, names({"Io"}));
  EXPECT_FALSE(out2.once_only_transfers.count("Io"));
}

TEST(TransferSets, ConcurrentWriterOfDeviceFieldIsAmbiguous) {
  const auto p = build_pipeline(bte_scenario(4, 8, 3, 1));
  HookDecl h = p->config.hooks[0];
  h.concurrent = true;
  EXPECT_THROW((void)compute_transfer_sets(p->sim.offload, {h}), ValidationError);
  HookDecl harmless{"probe", {"I"}, {"T"}, true, {}};
  EXPECT_NO_THROW((void)compute_transfer_sets(p->sim.offload, {harmless}));
}

TEST(TransferSets, PredictedBytes) {
  const auto p = build_pipeline(bte_scenario(4, 8, 3, 1));
  // I out and back (16 cells * 40 values), Io and beta in (16 * 5 each).
  const std::size_t expect = (2 * 16 * 40 + 2 * 16 * 5) * 8;
  EXPECT_EQ(predicted_bytes_per_step(p->sim.offload, *p->sim.layout), expect);
  const std::string t = render_transfers(p->sim.offload);
  EXPECT_NE(t.find("per-step to device: I, Io, beta"), std::string::npos) << t;
}
