#pragma once

#include <array>
#include <set>
#include <string>
#include <vector>

#include "bteflow/entities.hpp"
#include "bteflow/fields.hpp"
#include "bteflow/frontend.hpp"
#include "bteflow/hooks.hpp"
#include "bteflow/mesh.hpp"

namespace bteflow {

enum class Axis { Cells, Direction, Band };

[[nodiscard]] const char* axis_name(Axis a);

struct LoopPlan {
  std::array<Axis, 3> ordering{Axis::Cells, Axis::Direction, Axis::Band};
  [[nodiscard]] Axis parallel_axis() const noexcept { return ordering[0]; }
};

/// Accepts cells/elements, direction/directions, band/bands and, when an
/// entity table is given, index names resolved through their roles.
[[nodiscard]] LoopPlan build_loop_plan(const std::vector<std::string>& ordering,
                                       const EntityTable* entities = nullptr);

/// All six permutations, default first.
[[nodiscard]] std::vector<LoopPlan> all_loop_plans();

struct MeshSummary {
  int cells = 0;
  int interior_faces = 0;
  int boundary_faces = 0;
  std::vector<int> regions;
};

[[nodiscard]] MeshSummary summarize(const Mesh& mesh);

enum class IRKind {
  Comment,
  LoopBegin,
  LoopEnd,
  FetchCoefficient,
  FetchNeighbor,
  Source,
  FaceFlux,
  BoundaryFlux,
  WriteBack,
};

enum class IRCategory { None, VolumeSource, SurfaceFlux, Boundary, Write };

struct IRNode {
  IRKind kind = IRKind::Comment;
  IRCategory category = IRCategory::None;
  std::string text;
  Expr expr;
  int term = -1;      // surface term index
  int region = 0;     // boundary nodes
  std::string field;  // fetches and write-back
  bool writes_new = false;
};

/// Computation graph of one explicit step for the unknown.
struct KernelIR {
  std::string unknown;
  std::vector<std::string> dof_indices;
  std::vector<IRNode> nodes;

  // Inputs the runtime compiles.
  Expr source;
  std::vector<SurfaceTerm> surface_terms;
  std::vector<BoundarySpec> boundaries;
  /// Declared variable and coefficient names.
  std::set<std::string> field_names;

  [[nodiscard]] int count(IRCategory c) const;
  [[nodiscard]] int count(IRKind k) const;
  [[nodiscard]] bool has_face_loop() const { return count(IRKind::FaceFlux) > 0; }
};

/// Lowers classified terms into the step body: volume source, per-face flux
/// accumulation and the write-back into the unknown's new-value buffer.
[[nodiscard]] KernelIR lower(const TermSet& terms, const std::string& unknown,
                             const MeshSummary& mesh, const EntityTable& entities,
                             const std::vector<BoundarySpec>& boundaries = {},
                             const LoopPlan& loops = {});

[[nodiscard]] bool structurally_equal(const KernelIR& a, const KernelIR& b);

struct OffloadPlan {
  KernelIR interior_kernel;
  KernelIR boundary_task;
  std::set<std::string> to_device_per_step;
  std::set<std::string> to_host_per_step;
  std::set<std::string> once_only_transfers;
  /// No boundary faces: u = u_interior.
  bool combine_identity = false;

  /// Fields read by the interior kernel (including the unknown).
  std::set<std::string> device_reads;
  std::set<std::string> device_writes;
  std::set<std::string> boundary_reads;
};

/// Interior kernel: all interior-face work plus the write-back; boundary task:
/// boundary-face flux contributions only. Combine is u = u_interior + u_bdry.
[[nodiscard]] OffloadPlan split_interior_boundary(const KernelIR& kernel, const MeshSummary& mesh);

/// Fills the per-step and once-only transfer sets from the declared hook
/// reads/writes. Throws ValidationError on ambiguous ownership.
[[nodiscard]] OffloadPlan compute_transfer_sets(OffloadPlan plan,
                                                const std::vector<HookDecl>& hooks);

/// 8 bytes per value of every per-step field, both directions.
[[nodiscard]] std::size_t predicted_bytes_per_step(const OffloadPlan& plan,
                                                   const FieldLayout& layout);

[[nodiscard]] std::string render_kernel(const KernelIR& kernel);
[[nodiscard]] std::string render_plan(const OffloadPlan& plan);
[[nodiscard]] std::string render_transfers(const OffloadPlan& plan);

}  // namespace bteflow
