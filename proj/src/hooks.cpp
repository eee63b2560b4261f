#include "bteflow/hooks.hpp"

#include <algorithm>

#include "bteflow/error.hpp"

namespace bteflow {

double sum_bands(const double* contributions, int nbands) {
  double s = 0.0;
  for (int b = 0; b < nbands; ++b) s += contributions[b];
  return s;
}

int BindContext::slot_of(const std::string& index_name) const {
  auto it = std::find(slots.begin(), slots.end(), index_name);
  if (it == slots.end())
    throw ValidationError("index '" + index_name + "' is not an index of the unknown");
  return static_cast<int>(it - slots.begin());
}

SlotLoad BindContext::bind_field(const std::string& name) const {
  const int fid = layout->find(name);
  if (fid < 0) throw ValidationError("callback argument '" + name + "' is not a field");
  const FieldInfo& f = layout->info(fid);
  SlotLoad load;
  load.field = fid;
  load.per_cell = f.per_cell;
  load.cell_stride = f.per_cell ? f.per_cell_size : 0;
  for (std::size_t k = 0; k < f.indices.size(); ++k)
    load.stride[static_cast<std::size_t>(slot_of(f.indices[k]))] += f.index_strides[k];
  return load;
}

void CallbackLibrary::add_boundary(const std::string& name, int arity, BoundaryFactory factory) {
  boundaries_[name] = {arity, std::move(factory)};
}

void CallbackLibrary::add_hook(const std::string& name, HookFactory factory) {
  hooks_[name] = std::move(factory);
}

std::unique_ptr<BoundaryFlux> CallbackLibrary::make_boundary(const Expr& call,
                                                             const BindContext& ctx) const {
  auto it = boundaries_.find(call.name());
  if (it == boundaries_.end())
    throw ValidationError("no boundary callback named '" + call.name() + "'");
  if (static_cast<int>(call.children().size()) != it->second.arity)
    throw ValidationError("boundary callback '" + call.name() + "' expects " +
                          std::to_string(it->second.arity) + " arguments");
  return it->second.factory(call, ctx);
}

std::unique_ptr<PostStepHook> CallbackLibrary::make_hook(const HookDecl& decl,
                                                         const BindContext& ctx) const {
  auto it = hooks_.find(decl.name);
  if (it == hooks_.end()) throw ValidationError("no post-step hook named '" + decl.name + "'");
  return it->second(decl, ctx);
}

void CallbackLibrary::declare_boundaries(CallbackRegistry& registry) const {
  for (const auto& [name, entry] : boundaries_)
    if (registry.find(name) == nullptr)
      registry.register_callback(name, entry.arity, CallbackStage::Boundary);
}

const std::string& binding_arg(const Expr& call, std::size_t i) {
  const Expr& a = call.children()[i];
  if (a.kind() != ExprKind::Binding)
    throw ValidationError("argument " + std::to_string(i + 1) + " of '" + call.name() +
                          "' must be a bare name");
  return a.name();
}

double number_arg(const Expr& call, std::size_t i) {
  const Expr& a = call.children()[i];
  if (a.kind() != ExprKind::Constant)
    throw ValidationError("argument " + std::to_string(i + 1) + " of '" + call.name() +
                          "' must be a number");
  return a.value();
}

namespace {

class InflowFlux final : public BoundaryFlux {
 public:
  InflowFlux(SlotLoad u, SlotLoad v, double inflow) : u_(u), v_(v), inflow_(inflow) {}
  double value(const double* const* fields, const BoundaryPoint& p) const override {
    const double vn = v_.at(fields, p.cell, p.idx, 0) * p.normal.x +
                      v_.at(fields, p.cell, p.idx, 1) * p.normal.y;
    return vn > 0 ? vn * u_.at(fields, p.cell, p.idx) : vn * inflow_;
  }

 private:
  SlotLoad u_;
  SlotLoad v_;
  double inflow_;
};

class ZeroFlux final : public BoundaryFlux {
 public:
  double value(const double* const*, const BoundaryPoint&) const override { return 0.0; }
};

}  // namespace

void register_generic_callbacks(CallbackLibrary& library) {
  library.add_boundary("inflow", 4, [](const Expr& call, const BindContext& ctx) {
    const SlotLoad v = ctx.bind_field(binding_arg(call, 1));
    if (ctx.layout->info(v.field).components != 2)
      throw ValidationError("inflow: velocity '" + binding_arg(call, 1) + "' must be a vector");
    if (binding_arg(call, 2) != "normal")
      throw ValidationError("inflow: third argument must be 'normal'");
    return std::make_unique<InflowFlux>(ctx.bind_field(binding_arg(call, 0)), v,
                                        number_arg(call, 3));
  });
  library.add_boundary("zero_flux", 0, [](const Expr&, const BindContext&) {
    return std::make_unique<ZeroFlux>();
  });
}

}  // namespace bteflow
