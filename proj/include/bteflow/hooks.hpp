#pragma once

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bteflow/callbacks.hpp"
#include "bteflow/entities.hpp"
#include "bteflow/expr.hpp"
#include "bteflow/fields.hpp"
#include "bteflow/mesh.hpp"
#include "bteflow/program.hpp"

namespace bteflow {

/// What a host callback sees for one boundary face and DOF.
struct BoundaryPoint {
  int cell = 0;
  int face = 0;
  Vec2 normal;  // outward
  Vec2 centroid;
  std::array<int, kMaxSlots> idx{};
};

/// Replacement for a surface integrand on the faces of one boundary region.
class BoundaryFlux {
 public:
  virtual ~BoundaryFlux() = default;
  [[nodiscard]] virtual double value(const double* const* fields, const BoundaryPoint& p) const = 0;
};

/// Declared post-step hook: name, field sets and free-form options.
struct HookDecl {
  std::string name;
  std::vector<std::string> reads;
  std::vector<std::string> writes;
  /// Hooks marked concurrent carry no ordering edge against the device kernel.
  bool concurrent = false;
  std::map<std::string, std::string> options;
};

/// Host-side post-processing run after every step.
///
/// Band-reducible hooks split into per-band contributions, a fixed-order
/// reduction, a per-cell finish and a per-band refresh, so band-partitioned
/// runs reproduce serial results bit for bit.
class PostStepHook {
 public:
  explicit PostStepHook(HookDecl decl) : decl_(std::move(decl)) {}
  virtual ~PostStepHook() = default;

  [[nodiscard]] const HookDecl& decl() const noexcept { return decl_; }

  virtual void apply(FieldStore& state, std::span<const int> cells) const = 0;
  /// Run once before the first step so derived fields match the initial state.
  virtual void prime(FieldStore& state, std::span<const int> cells) const { apply(state, cells); }

  [[nodiscard]] virtual bool band_reducible() const { return false; }
  [[nodiscard]] virtual int band_count() const { return 0; }
  /// out[i*band_count() + (b-1)] for cells[i] and b in [b_lo, b_hi] (1-based).
  virtual void band_contributions(const FieldStore&, std::span<const int>, int, int,
                                  double*) const {}
  /// reduced[i] is the band-summed contribution of cells[i].
  virtual void finish_cells(FieldStore&, std::span<const int>, const double*) const {}
  virtual void refresh_bands(FieldStore&, std::span<const int>, int, int) const {}

 private:
  HookDecl decl_;
};

/// Ascending-band sum shared by every backend.
[[nodiscard]] double sum_bands(const double* contributions, int nbands);

/// Field access through DOF slots, for callbacks bound to named fields.
struct SlotLoad {
  int field = -1;
  bool per_cell = true;
  std::size_t cell_stride = 0;
  std::array<std::size_t, kMaxSlots> stride{};

  [[nodiscard]] double at(const double* const* fields, int cell,
                          const std::array<int, kMaxSlots>& idx, int component = 0) const {
    std::size_t off = static_cast<std::size_t>(component);
    if (per_cell) off += static_cast<std::size_t>(cell) * cell_stride;
    for (std::size_t k = 0; k < kMaxSlots; ++k) off += static_cast<std::size_t>(idx[k]) * stride[k];
    return fields[field][off];
  }
};

struct BindContext {
  const EntityTable* entities = nullptr;
  const FieldLayout* layout = nullptr;
  const Mesh* mesh = nullptr;
  /// Index names of the unknown, in slot order.
  std::vector<std::string> slots;
  int region = 0;

  [[nodiscard]] int slot_of(const std::string& index_name) const;
  [[nodiscard]] SlotLoad bind_field(const std::string& name) const;
};

using BoundaryFactory =
    std::function<std::unique_ptr<BoundaryFlux>(const Expr& call, const BindContext& ctx)>;
using HookFactory =
    std::function<std::unique_ptr<PostStepHook>(const HookDecl& decl, const BindContext& ctx)>;

/// Registered callback implementations, looked up by name.
class CallbackLibrary {
 public:
  void add_boundary(const std::string& name, int arity, BoundaryFactory factory);
  void add_hook(const std::string& name, HookFactory factory);

  [[nodiscard]] std::unique_ptr<BoundaryFlux> make_boundary(const Expr& call,
                                                            const BindContext& ctx) const;
  [[nodiscard]] std::unique_ptr<PostStepHook> make_hook(const HookDecl& decl,
                                                        const BindContext& ctx) const;

  /// Registers every boundary callback signature with the frontend registry.
  void declare_boundaries(CallbackRegistry& registry) const;
  [[nodiscard]] bool has_hook(const std::string& name) const { return hooks_.count(name) != 0; }

 private:
  struct BoundaryEntry {
    int arity = 0;
    BoundaryFactory factory;
  };
  std::map<std::string, BoundaryEntry> boundaries_;
  std::map<std::string, HookFactory> hooks_;
};

/// Helpers for factories: argument kinds checked positionally.
[[nodiscard]] const std::string& binding_arg(const Expr& call, std::size_t i);
[[nodiscard]] double number_arg(const Expr& call, std::size_t i);

/// Callbacks that need no physics: `inflow(u, v, normal, value)` upwinds a
/// scalar against a fixed inflow value; `zero_flux()` closes a wall.
void register_generic_callbacks(CallbackLibrary& library);

}  // namespace bteflow
