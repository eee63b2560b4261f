#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bteflow/fields.hpp"
#include "bteflow/hooks.hpp"
#include "bteflow/mesh.hpp"
#include "bteflow/plan.hpp"
#include "bteflow/program.hpp"

namespace bteflow {

enum class FaceSet { All, Interior, Boundary };

/// Half-open, 0-based DOF block: a cell list times direction and band ranges.
struct DofRange {
  std::span<const int> cells;
  int d_lo = 0;
  int d_hi = 1;
  int b_lo = 0;
  int b_hi = 1;
};

/// KernelIR compiled to bytecode with face geometry and bound boundary callbacks.
class CompiledKernel {
 public:
  CompiledKernel(const KernelIR& kernel, const EntityTable& entities,
                 std::shared_ptr<const FieldLayout> layout, std::shared_ptr<const Mesh> mesh,
                 double dt, const CallbackLibrary& library);

  /// Writes new unknown values for every DOF in r into `out` (unknown-sized).
  /// Interior omits boundary faces; Boundary writes only the boundary-face
  /// contribution prefactor * Σ A/V * callback.
  void run(const double* const* fields, double* out, const DofRange& r, const LoopPlan& loops,
           FaceSet faces) const;

  [[nodiscard]] int unknown_field() const noexcept { return unknown_; }
  [[nodiscard]] int directions() const noexcept { return nd_; }
  [[nodiscard]] int bands() const noexcept { return nb_; }
  [[nodiscard]] const std::vector<int>& neighbor_fields() const noexcept { return neighbor_fields_; }
  /// Cells owning at least one boundary face, ascending.
  [[nodiscard]] const std::vector<int>& boundary_cells() const noexcept { return boundary_cells_; }
  [[nodiscard]] const FieldLayout& layout() const noexcept { return *layout_; }
  [[nodiscard]] const Mesh& mesh() const noexcept { return *mesh_; }
  [[nodiscard]] double dt() const noexcept { return dt_; }

 private:
  struct CellFace {
    int face = 0;
    int neighbor = -1;
    double a_over_v = 0.0;
    double n1 = 0.0;
    double n2 = 0.0;
    const BoundaryFlux* bc = nullptr;
  };

  double dof_value(const double* const* fields, int cell, const std::array<int, kMaxSlots>& idx,
                   FaceSet faces) const;

  std::shared_ptr<const FieldLayout> layout_;
  std::shared_ptr<const Mesh> mesh_;
  double dt_ = 0.0;
  int unknown_ = -1;
  int d_slot_ = -1;
  int b_slot_ = -1;
  int nd_ = 1;
  int nb_ = 1;
  std::size_t out_cell_stride_ = 1;
  std::array<std::size_t, kMaxSlots> out_stride_{};
  Program source_;
  std::vector<Program> prefactors_;
  std::vector<Program> integrands_;
  std::vector<std::unique_ptr<BoundaryFlux>> bcs_;
  std::vector<std::size_t> face_start_;
  std::vector<CellFace> faces_;
  std::vector<int> neighbor_fields_;
  std::vector<int> boundary_cells_;
};

enum class BackendKind { Serial, CellParallel, BandParallel, OffloadSplit };

[[nodiscard]] BackendKind parse_backend_kind(const std::string& name);
[[nodiscard]] const char* backend_name(BackendKind kind);

struct BackendConfig {
  BackendKind kind = BackendKind::Serial;
  int workers = 1;         // parts for cell/band partitioning, host workers for offload
  int device_workers = 1;  // offload only
  bool async = true;       // offload: boundary task concurrent with the device kernel
  bool deterministic_reduction = true;
  LoopPlan loops;

  void validate() const;
};

struct TimingBreakdown {
  double intensity_solve = 0.0;
  double temperature_update = 0.0;
  double communication = 0.0;
  double total_wall = 0.0;
  std::size_t bytes_per_step = 0;
  std::size_t bytes_total = 0;

  [[nodiscard]] double category_sum() const {
    return intensity_solve + temperature_update + communication;
  }
  [[nodiscard]] double percent(double seconds) const;
  [[nodiscard]] std::string render_text() const;
  /// Columns category,seconds,percent,bytes_moved.
  [[nodiscard]] std::string render_csv() const;
};

enum class RunStatus { Completed, Aborted };

struct RunResult {
  FieldStore state;
  TimingBreakdown timing;
  int steps = 0;
  RunStatus status = RunStatus::Completed;
  std::string cause;
  int buffer_swaps = 0;
  std::size_t halo_values_per_step = 0;
};

/// Everything a backend needs; immutable once built and shared read-only.
struct Simulation {
  std::shared_ptr<const EntityTable> entities;
  std::shared_ptr<const Mesh> mesh;
  std::shared_ptr<const FieldLayout> layout;
  KernelIR kernel;
  OffloadPlan offload;
  std::vector<std::shared_ptr<const PostStepHook>> hooks;
  std::shared_ptr<const CompiledKernel> compiled;
  double dt = 0.0;
};

/// Lowers, splits, plans transfers, binds callbacks and compiles the kernel.
[[nodiscard]] Simulation make_simulation(const EquationSpec& equation,
                                         std::shared_ptr<const EntityTable> entities,
                                         std::shared_ptr<const Mesh> mesh, double dt,
                                         const CallbackLibrary& library,
                                         const std::vector<HookDecl>& hooks,
                                         const LoopPlan& loops = {});

/// Runs every hook's prime step on the full state.
void prime_hooks(const Simulation& sim, FieldStore& state);

struct RunOptions {
  /// Replaces the transfer sets the offload backend executes (mutation tests).
  std::optional<OffloadPlan> plan_override;
  /// Cell-parallel: skip halo exchange (mutation tests).
  bool skip_halo_exchange = false;
};

[[nodiscard]] RunResult run_simulation(const Simulation& sim, const FieldStore& initial,
                                       const BackendConfig& backend, int nsteps,
                                       const RunOptions& options = {});

struct HaloStats {
  std::size_t messages = 0;
  std::size_t values = 0;
};

/// Copies owned values of `fields` into every neighbor part's halo cells,
/// one message per interface face, ordered by part id then face id.
HaloStats exchange_halos(const Partitioning& parts, const Mesh& mesh, std::vector<FieldStore>& stores,
                         const std::vector<int>& fields);

/// part_contributions[p] holds ncells x (bands of part p) values, cell-major.
/// Returns per-cell sums over all bands in ascending band order.
[[nodiscard]] std::vector<double> reduce_across_bands(
    const Partitioning& parts, const std::vector<std::vector<double>>& part_contributions,
    int ncells);

/// Staged host<->device copies restricted to the plan's transfer sets.
class TransferChannel {
 public:
  TransferChannel(const OffloadPlan& plan, const FieldLayout& layout);

  void to_host(const FieldStore& device, FieldStore& host, const std::string& field);
  void to_device(const FieldStore& host, FieldStore& device, const std::string& field);
  void upload_once(const FieldStore& host, FieldStore& device);
  /// End-of-run copy of a device-written field; counted with the once-only bytes.
  void download_final(const FieldStore& device, FieldStore& host, const std::string& field);

  [[nodiscard]] std::size_t step_bytes() const noexcept { return step_bytes_; }
  [[nodiscard]] std::size_t total_bytes() const noexcept { return total_bytes_; }
  [[nodiscard]] std::size_t once_bytes() const noexcept { return once_bytes_; }
  void begin_step() noexcept { step_bytes_ = 0; }

 private:
  void copy(const FieldStore& from, FieldStore& to, const std::string& field);
  const OffloadPlan& plan_;
  const FieldLayout& layout_;
  std::size_t step_bytes_ = 0;
  std::size_t total_bytes_ = 0;
  std::size_t once_bytes_ = 0;
};

}  // namespace bteflow
