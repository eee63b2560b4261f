#include "bteflow/runtime.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <future>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "bteflow/error.hpp"

namespace bteflow {

CompiledKernel::CompiledKernel(const KernelIR& kernel, const EntityTable& entities,
                               std::shared_ptr<const FieldLayout> layout,
                               std::shared_ptr<const Mesh> mesh, double dt,
                               const CallbackLibrary& library)
    : layout_(std::move(layout)), mesh_(std::move(mesh)), dt_(dt) {
  unknown_ = layout_->id(kernel.unknown);
  const FieldInfo& u = layout_->info(unknown_);
  if (!u.per_cell || u.components != 1)
    throw ValidationError("unknown '" + kernel.unknown + "' must be a scalar-valued cell variable");
  if (kernel.dof_indices.size() > static_cast<std::size_t>(kMaxSlots))
    throw ValidationError("unknown '" + kernel.unknown + "' has too many indices");
  for (std::size_t k = 0; k < kernel.dof_indices.size(); ++k) {
    const EntityDecl& idx = entities.at(kernel.dof_indices[k]);
    if (!idx.role)
      throw ValidationError("index '" + idx.name + "' of the unknown needs a direction or band role");
    if (*idx.role == IndexRole::Direction) {
      if (d_slot_ >= 0) throw ValidationError("unknown has two direction indices");
      d_slot_ = static_cast<int>(k);
      nd_ = u.extents[k];
    } else {
      if (b_slot_ >= 0) throw ValidationError("unknown has two band indices");
      b_slot_ = static_cast<int>(k);
      nb_ = u.extents[k];
    }
    out_stride_[k] = u.index_strides[k];
  }
  out_cell_stride_ = u.per_cell_size;

  ProgramContext vol{layout_.get(), kernel.dof_indices, dt_, false};
  ProgramContext face{layout_.get(), kernel.dof_indices, dt_, true};
  source_ = Program::compile(kernel.source, vol);
  for (const SurfaceTerm& s : kernel.surface_terms) {
    prefactors_.push_back(Program::compile(s.prefactor, vol));
    integrands_.push_back(Program::compile(s.integrand, face));
    visit(s.integrand, [&](const Expr& n) {
      if (n.kind() == ExprKind::Ref && n.ref().side == CellSide::Cell2) {
        const int fid = layout_->id(n.ref().entity);
        if (std::find(neighbor_fields_.begin(), neighbor_fields_.end(), fid) ==
            neighbor_fields_.end())
          neighbor_fields_.push_back(fid);
      }
    });
  }

  std::vector<const BoundaryFlux*> by_region;
  if (!kernel.surface_terms.empty()) {
    for (const BoundarySpec& spec : kernel.boundaries) {
      BindContext ctx{&entities, layout_.get(), mesh_.get(), kernel.dof_indices, spec.region};
      bcs_.push_back(library.make_boundary(spec.call, ctx));
      if (spec.region >= static_cast<int>(by_region.size()))
        by_region.resize(static_cast<std::size_t>(spec.region) + 1, nullptr);
      by_region[static_cast<std::size_t>(spec.region)] = bcs_.back().get();
    }
  }

  const int ncells = mesh_->num_cells();
  face_start_.assign(static_cast<std::size_t>(ncells) + 1, 0);
  for (int c = 0; c < ncells; ++c) {
    bool on_boundary = false;
    for (int f : mesh_->cell_faces(c)) {
      const Face& face_data = mesh_->face(f);
      CellFace cf;
      cf.face = f;
      cf.neighbor = mesh_->neighbor(f, c);
      cf.a_over_v = face_data.area / mesh_->volume(c);
      const Vec2 n = mesh_->outward_normal(f, c);
      cf.n1 = n.x;
      cf.n2 = n.y;
      if (face_data.is_boundary()) {
        on_boundary = true;
        if (!integrands_.empty()) {
          const auto r = static_cast<std::size_t>(face_data.region);
          cf.bc = r < by_region.size() ? by_region[r] : nullptr;
          if (cf.bc == nullptr)
            throw ValidationError("boundary region " + std::to_string(face_data.region) +
                                  " has no boundary callback");
        }
      }
      faces_.push_back(cf);
    }
    face_start_[static_cast<std::size_t>(c) + 1] = faces_.size();
    if (on_boundary) boundary_cells_.push_back(c);
  }
}

double CompiledKernel::dof_value(const double* const* fields, int cell,
                                 const std::array<int, kMaxSlots>& idx, FaceSet faces) const {
  EvalPoint p;
  p.cell = cell;
  p.idx = idx;
  double v = faces == FaceSet::Boundary ? 0.0 : source_.eval(fields, p);
  const std::size_t lo = face_start_[static_cast<std::size_t>(cell)];
  const std::size_t hi = face_start_[static_cast<std::size_t>(cell) + 1];
  for (std::size_t k = 0; k < integrands_.size(); ++k) {
    if (faces == FaceSet::Boundary && k != 0) continue;
    double flux = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const CellFace& cf = faces_[i];
      if (cf.neighbor < 0) {
        if (faces == FaceSet::Interior || k != 0) continue;
        BoundaryPoint bp;
        bp.cell = cell;
        bp.face = cf.face;
        bp.normal = {cf.n1, cf.n2};
        bp.centroid = mesh_->face(cf.face).centroid;
        bp.idx = idx;
        flux += cf.a_over_v * cf.bc->value(fields, bp);
      } else {
        if (faces == FaceSet::Boundary) continue;
        p.neighbor = cf.neighbor;
        p.n1 = cf.n1;
        p.n2 = cf.n2;
        flux += cf.a_over_v * integrands_[k].eval(fields, p);
      }
    }
    p.neighbor = -1;
    v += prefactors_[k].eval(fields, p) * flux;
  }
  return v;
}

void CompiledKernel::run(const double* const* fields, double* out, const DofRange& r,
                         const LoopPlan& loops, FaceSet faces) const {
  auto extent = [&](Axis a) {
    switch (a) {
      case Axis::Cells: return static_cast<int>(r.cells.size());
      case Axis::Direction: return r.d_hi - r.d_lo;
      case Axis::Band: return r.b_hi - r.b_lo;
    }
    return 0;
  };
  const std::array<Axis, 3>& o = loops.ordering;
  const int n0 = extent(o[0]), n1 = extent(o[1]), n2 = extent(o[2]);
  std::array<int, 3> pos{};  // cell position, direction, band by Axis value
  for (int i0 = 0; i0 < n0; ++i0) {
    pos[static_cast<std::size_t>(o[0])] = i0;
    for (int i1 = 0; i1 < n1; ++i1) {
      pos[static_cast<std::size_t>(o[1])] = i1;
      for (int i2 = 0; i2 < n2; ++i2) {
        pos[static_cast<std::size_t>(o[2])] = i2;
        const int cell = r.cells[static_cast<std::size_t>(pos[0])];
        std::array<int, kMaxSlots> idx{};
        if (d_slot_ >= 0) idx[static_cast<std::size_t>(d_slot_)] = r.d_lo + pos[1];
        if (b_slot_ >= 0) idx[static_cast<std::size_t>(b_slot_)] = r.b_lo + pos[2];
        std::size_t off = static_cast<std::size_t>(cell) * out_cell_stride_;
        for (std::size_t k = 0; k < kMaxSlots; ++k)
          off += static_cast<std::size_t>(idx[k]) * out_stride_[k];
        out[off] = dof_value(fields, cell, idx, faces);
      }
    }
  }
}

BackendKind parse_backend_kind(const std::string& name) {
  if (name == "serial") return BackendKind::Serial;
  if (name == "cell_parallel") return BackendKind::CellParallel;
  if (name == "band_parallel") return BackendKind::BandParallel;
  if (name == "offload_split") return BackendKind::OffloadSplit;
  throw ValidationError("unknown backend '" + name +
                        "' (expected serial, cell_parallel, band_parallel or offload_split)");
}

const char* backend_name(BackendKind kind) {
  switch (kind) {
    case BackendKind::Serial: return "serial";
    case BackendKind::CellParallel: return "cell_parallel";
    case BackendKind::BandParallel: return "band_parallel";
    case BackendKind::OffloadSplit: return "offload_split";
  }
  return "?";
}

void BackendConfig::validate() const {
  if (workers < 1) throw ValidationError("backend: workers must be at least 1");
  if (kind == BackendKind::OffloadSplit && device_workers < 1)
    throw ValidationError("backend: offload_split needs at least one device worker");
  if (!deterministic_reduction)
    throw ValidationError("backend: deterministic reduction cannot be disabled");
}

double TimingBreakdown::percent(double seconds) const {
  const double total = category_sum();
  return total > 0.0 ? 100.0 * seconds / total : 0.0;
}

std::string TimingBreakdown::render_text() const {
  std::ostringstream os;
  os << std::left << std::setw(20) << "category" << std::right << std::setw(14) << "seconds"
     << std::setw(10) << "percent" << std::setw(16) << "bytes_moved" << '\n';
  auto row = [&](const char* name, double s, std::size_t bytes) {
    os << std::left << std::setw(20) << name << std::right << std::fixed << std::setprecision(6)
       << std::setw(14) << s << std::setprecision(2) << std::setw(10) << percent(s)
       << std::setw(16) << bytes << '\n';
  };
  row("intensity_solve", intensity_solve, 0);
  row("temperature_update", temperature_update, 0);
  row("communication", communication, bytes_total);
  os << std::left << std::setw(20) << "total_wall" << std::right << std::fixed
     << std::setprecision(6) << std::setw(14) << total_wall << '\n';
  return os.str();
}

std::string TimingBreakdown::render_csv() const {
  std::ostringstream os;
  os << "category,seconds,percent,bytes_moved\n";
  os << std::setprecision(9);
  os << "intensity_solve," << intensity_solve << ',' << percent(intensity_solve) << ",0\n";
  os << "temperature_update," << temperature_update << ',' << percent(temperature_update)
     << ",0\n";
  os << "communication," << communication << ',' << percent(communication) << ',' << bytes_total
     << '\n';
  return os.str();
}

Simulation make_simulation(const EquationSpec& equation, std::shared_ptr<const EntityTable> entities,
                           std::shared_ptr<const Mesh> mesh, double dt,
                           const CallbackLibrary& library, const std::vector<HookDecl>& hooks,
                           const LoopPlan& loops) {
  if (!(dt > 0.0)) throw ValidationError("time step must be positive");
  Simulation sim;
  sim.entities = entities;
  sim.mesh = mesh;
  sim.dt = dt;
  sim.layout = std::make_shared<FieldLayout>(*entities, mesh->num_cells());
  const MeshSummary summary = summarize(*mesh);
  sim.kernel = lower(equation.terms, equation.unknown, summary, *entities,
                     equation.boundary_specs, loops);
  sim.offload = compute_transfer_sets(split_interior_boundary(sim.kernel, summary), hooks);
  BindContext ctx{entities.get(), sim.layout.get(), mesh.get(), sim.kernel.dof_indices, 0};
  for (const HookDecl& decl : hooks) {
    for (const auto* set : {&decl.reads, &decl.writes})
      for (const std::string& f : *set)
        if (sim.layout->find(f) < 0)
          throw ValidationError("hook '" + decl.name + "' declares unknown field '" + f + "'");
    sim.hooks.push_back(library.make_hook(decl, ctx));
  }
  sim.compiled =
      std::make_shared<CompiledKernel>(sim.kernel, *entities, sim.layout, mesh, dt, library);
  return sim;
}

void prime_hooks(const Simulation& sim, FieldStore& state) {
  std::vector<int> all(static_cast<std::size_t>(sim.mesh->num_cells()));
  std::iota(all.begin(), all.end(), 0);
  for (const auto& h : sim.hooks) h->prime(state, all);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <class Fn>
void parallel_for(int n, Fn&& fn) {
  if (n <= 1) {
    if (n == 1) fn(0);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(n) - 1);
  for (int i = 1; i < n; ++i)
    threads.emplace_back([&, i] {
      try {
        fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    });
  try {
    fn(0);
  } catch (...) {
    errors[0] = std::current_exception();
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<std::span<const int>> chunks(const std::vector<int>& cells, int n) {
  std::vector<std::span<const int>> out;
  const std::size_t total = cells.size();
  for (int k = 0; k < n; ++k) {
    const std::size_t lo = total * static_cast<std::size_t>(k) / static_cast<std::size_t>(n);
    const std::size_t hi = total * static_cast<std::size_t>(k + 1) / static_cast<std::size_t>(n);
    out.emplace_back(cells.data() + lo, hi - lo);
  }
  return out;
}

// First non-finite cell of the unknown among `cells`, or -1.
int first_non_finite(const FieldStore& s, int field, std::span<const int> cells) {
  for (int c : cells)
    for (double v : s.cell_slice(field, c))
      if (!std::isfinite(v)) return c;
  return -1;
}

std::vector<int> all_cells(const Mesh& mesh) {
  std::vector<int> v(static_cast<std::size_t>(mesh.num_cells()));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

void abort_run(RunResult& r, int step, const std::string& field, int cell) {
  r.status = RunStatus::Aborted;
  r.cause = "non-finite value in '" + field + "' at step " + std::to_string(step) + " (cell " +
            std::to_string(cell) + ")";
}

RunResult run_serial(const Simulation& sim, const FieldStore& initial, const BackendConfig& be,
                     int nsteps) {
  const CompiledKernel& k = *sim.compiled;
  const int u = k.unknown_field();
  RunResult r{initial, {}, 0, RunStatus::Completed, {}, 0, 0};
  FieldStore& s = r.state;
  std::vector<double> next(s.field(u).size());
  const std::vector<int> cells = all_cells(*sim.mesh);
  const DofRange range{cells, 0, k.directions(), 0, k.bands()};
  for (int step = 1; step <= nsteps; ++step) {
    auto t0 = Clock::now();
    k.run(s.pointers().data(), next.data(), range, be.loops, FaceSet::All);
    s.swap_field(u, next);
    ++r.buffer_swaps;
    r.timing.intensity_solve += seconds_since(t0);
    t0 = Clock::now();
    for (const auto& h : sim.hooks) h->apply(s, cells);
    r.timing.temperature_update += seconds_since(t0);
    if (int bad = first_non_finite(s, u, cells); bad >= 0) {
      abort_run(r, step, sim.kernel.unknown, bad);
      return r;
    }
    r.steps = step;
  }
  return r;
}

RunResult run_cell_parallel(const Simulation& sim, const FieldStore& initial,
                            const BackendConfig& be, int nsteps, const RunOptions& opt) {
  const CompiledKernel& k = *sim.compiled;
  const Mesh& mesh = *sim.mesh;
  const int u = k.unknown_field();
  const Partitioning parts = partition_cells(mesh, be.workers);
  const int np = parts.nparts;

  std::vector<FieldStore> stores(static_cast<std::size_t>(np), initial);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int p = 0; p < np; ++p) {
    std::vector<char> visible(static_cast<std::size_t>(mesh.num_cells()), 0);
    for (int c : parts.owned[p]) visible[static_cast<std::size_t>(c)] = 1;
    for (int c : parts.halo[p]) visible[static_cast<std::size_t>(c)] = 1;
    FieldStore& s = stores[static_cast<std::size_t>(p)];
    for (int f = 0; f < sim.layout->num_fields(); ++f) {
      if (!sim.layout->info(f).per_cell) continue;
      for (int c = 0; c < mesh.num_cells(); ++c)
        if (!visible[static_cast<std::size_t>(c)])
          for (double& v : s.cell_slice(f, c)) v = nan;
    }
  }
  std::vector<std::vector<double>> next;
  for (const FieldStore& s : stores) next.emplace_back(s.field(u).begin(), s.field(u).end());

  RunResult r{initial, {}, 0, RunStatus::Completed, {}, 0, 0};
  for (int step = 1; step <= nsteps; ++step) {
    auto t0 = Clock::now();
    parallel_for(np, [&](int p) {
      FieldStore& s = stores[static_cast<std::size_t>(p)];
      const DofRange range{parts.owned[p], 0, k.directions(), 0, k.bands()};
      k.run(s.pointers().data(), next[static_cast<std::size_t>(p)].data(), range, be.loops,
            FaceSet::All);
      s.swap_field(u, next[static_cast<std::size_t>(p)]);
    });
    ++r.buffer_swaps;
    r.timing.intensity_solve += seconds_since(t0);
    t0 = Clock::now();
    parallel_for(np, [&](int p) {
      for (const auto& h : sim.hooks) h->apply(stores[static_cast<std::size_t>(p)], parts.owned[p]);
    });
    r.timing.temperature_update += seconds_since(t0);
    t0 = Clock::now();
    if (!opt.skip_halo_exchange) {
      const HaloStats hs = exchange_halos(parts, mesh, stores, k.neighbor_fields());
      r.halo_values_per_step = hs.values;
      r.timing.bytes_per_step = hs.values * sizeof(double);
      r.timing.bytes_total += r.timing.bytes_per_step;
    }
    r.timing.communication += seconds_since(t0);
    for (int p = 0; p < np; ++p)
      if (int bad = first_non_finite(stores[static_cast<std::size_t>(p)], u, parts.owned[p]);
          bad >= 0) {
        abort_run(r, step, sim.kernel.unknown, bad);
        nsteps = step;  // gather the partial state below
        break;
      }
    if (r.status == RunStatus::Aborted) break;
    r.steps = step;
  }

  for (int f = 0; f < sim.layout->num_fields(); ++f) {
    if (!sim.layout->info(f).per_cell) continue;
    for (int p = 0; p < np; ++p)
      for (int c : parts.owned[p]) {
        const auto src = stores[static_cast<std::size_t>(p)].cell_slice(f, c);
        std::copy(src.begin(), src.end(), r.state.cell_slice(f, c).begin());
      }
  }
  return r;
}

RunResult run_band_parallel(const Simulation& sim, const FieldStore& initial,
                            const BackendConfig& be, int nsteps) {
  const CompiledKernel& k = *sim.compiled;
  const int u = k.unknown_field();
  const int nb = k.bands();
  const Partitioning parts = partition_bands(nb, be.workers);
  const int np = parts.nparts;
  const std::vector<int> cells = all_cells(*sim.mesh);
  const int ncells = static_cast<int>(cells.size());

  RunResult r{initial, {}, 0, RunStatus::Completed, {}, 0, 0};
  FieldStore& s = r.state;
  std::vector<double> next(s.field(u).size());
  for (int step = 1; step <= nsteps; ++step) {
    auto t0 = Clock::now();
    const auto ptrs = s.pointers();
    parallel_for(np, [&](int p) {
      const auto [lo, hi] = parts.band_ranges[static_cast<std::size_t>(p)];
      const DofRange range{cells, 0, k.directions(), lo - 1, hi};
      k.run(ptrs.data(), next.data(), range, be.loops, FaceSet::All);
    });
    s.swap_field(u, next);
    ++r.buffer_swaps;
    r.timing.intensity_solve += seconds_since(t0);

    for (const auto& h : sim.hooks) {
      if (!h->band_reducible() || h->band_count() != nb) {
        t0 = Clock::now();
        h->apply(s, cells);
        r.timing.temperature_update += seconds_since(t0);
        continue;
      }
      t0 = Clock::now();
      std::vector<std::vector<double>> contrib(static_cast<std::size_t>(np));
      parallel_for(np, [&](int p) {
        const auto [lo, hi] = parts.band_ranges[static_cast<std::size_t>(p)];
        const int width = hi - lo + 1;
        std::vector<double> full(static_cast<std::size_t>(ncells) * nb);
        h->band_contributions(s, cells, lo, hi, full.data());
        auto& mine = contrib[static_cast<std::size_t>(p)];
        mine.resize(static_cast<std::size_t>(ncells) * width);
        for (int c = 0; c < ncells; ++c)
          for (int j = 0; j < width; ++j)
            mine[static_cast<std::size_t>(c) * width + j] =
                full[static_cast<std::size_t>(c) * nb + (lo - 1 + j)];
      });
      r.timing.temperature_update += seconds_since(t0);
      t0 = Clock::now();
      const std::vector<double> reduced = reduce_across_bands(parts, contrib, ncells);
      r.timing.bytes_per_step = static_cast<std::size_t>(ncells) * nb * sizeof(double);
      r.timing.bytes_total += r.timing.bytes_per_step;
      r.timing.communication += seconds_since(t0);
      t0 = Clock::now();
      h->finish_cells(s, cells, reduced.data());
      parallel_for(np, [&](int p) {
        const auto [lo, hi] = parts.band_ranges[static_cast<std::size_t>(p)];
        h->refresh_bands(s, cells, lo, hi);
      });
      r.timing.temperature_update += seconds_since(t0);
    }
    if (int bad = first_non_finite(s, u, cells); bad >= 0) {
      abort_run(r, step, sim.kernel.unknown, bad);
      return r;
    }
    r.steps = step;
  }
  return r;
}

RunResult run_offload(const Simulation& sim, const FieldStore& initial, const BackendConfig& be,
                      int nsteps, const RunOptions& opt) {
  const CompiledKernel& k = *sim.compiled;
  const int u = k.unknown_field();
  const OffloadPlan& plan = opt.plan_override ? *opt.plan_override : sim.offload;
  const std::vector<int> cells = all_cells(*sim.mesh);
  const std::vector<int>& bcells = k.boundary_cells();
  const auto device_chunks = chunks(cells, be.device_workers);
  const auto host_chunks = chunks(bcells, be.workers);

  RunResult r{initial, {}, 0, RunStatus::Completed, {}, 0, 0};
  FieldStore& host = r.state;
  FieldStore device(sim.layout);
  TransferChannel channel(plan, *sim.layout);
  channel.upload_once(host, device);

  std::vector<double> device_next(host.field(u).size());
  std::vector<double> bdry(host.field(u).size(), 0.0);
  const bool boundary_work = !plan.combine_identity && !bcells.empty();

  for (int step = 1; step <= nsteps; ++step) {
    channel.begin_step();
    auto t0 = Clock::now();
    const auto dptr = device.pointers();
    const auto hptr = host.pointers();
    auto device_job = [&] {
      parallel_for(be.device_workers, [&](int w) {
        const DofRange range{device_chunks[static_cast<std::size_t>(w)], 0, k.directions(), 0,
                             k.bands()};
        k.run(dptr.data(), device_next.data(), range, be.loops, FaceSet::Interior);
      });
    };
    auto host_job = [&] {
      if (!boundary_work) return;
      parallel_for(be.workers, [&](int w) {
        const DofRange range{host_chunks[static_cast<std::size_t>(w)], 0, k.directions(), 0,
                             k.bands()};
        k.run(hptr.data(), bdry.data(), range, be.loops, FaceSet::Boundary);
      });
    };
    if (be.async) {
      auto device_done = std::async(std::launch::async, device_job);
      std::exception_ptr host_error;
      try {
        host_job();
      } catch (...) {
        host_error = std::current_exception();
      }
      device_done.get();
      if (host_error) std::rethrow_exception(host_error);
    } else {
      device_job();
      host_job();
    }
    device.swap_field(u, device_next);
    ++r.buffer_swaps;
    r.timing.intensity_solve += seconds_since(t0);

    t0 = Clock::now();
    for (const std::string& f : plan.to_host_per_step) channel.to_host(device, host, f);
    r.timing.communication += seconds_since(t0);

    t0 = Clock::now();
    if (boundary_work) {
      std::span<double> hu = host.field(u);
      const FieldInfo& info = sim.layout->info(u);
      for (int c : bcells) {
        const std::size_t base = static_cast<std::size_t>(c) * info.per_cell_size;
        for (std::size_t j = 0; j < info.per_cell_size; ++j) hu[base + j] += bdry[base + j];
      }
    }
    r.timing.intensity_solve += seconds_since(t0);

    t0 = Clock::now();
    for (const auto& h : sim.hooks) h->apply(host, cells);
    r.timing.temperature_update += seconds_since(t0);

    t0 = Clock::now();
    for (const std::string& f : plan.to_device_per_step) channel.to_device(host, device, f);
    r.timing.communication += seconds_since(t0);
    r.timing.bytes_per_step = channel.step_bytes();
    r.timing.bytes_total = channel.total_bytes();

    if (int bad = first_non_finite(host, u, cells); bad >= 0) {
      abort_run(r, step, sim.kernel.unknown, bad);
      break;
    }
    r.steps = step;
  }
  for (const std::string& f : plan.device_writes)
    if (!plan.to_host_per_step.count(f)) channel.download_final(device, host, f);
  return r;
}

}  // namespace

RunResult run_simulation(const Simulation& sim, const FieldStore& initial,
                         const BackendConfig& backend, int nsteps, const RunOptions& options) {
  backend.validate();
  if (nsteps < 0) throw ValidationError("nsteps must be non-negative");
  if (&initial.layout() != sim.layout.get() && initial.layout().num_fields() != sim.layout->num_fields())
    throw ValidationError("initial state does not match the simulation's field layout");
  const auto t0 = Clock::now();
  RunResult r{initial, {}, 0, RunStatus::Completed, {}, 0, 0};
  if (nsteps > 0) {
    try {
      switch (backend.kind) {
        case BackendKind::Serial: r = run_serial(sim, initial, backend, nsteps); break;
        case BackendKind::CellParallel:
          r = run_cell_parallel(sim, initial, backend, nsteps, options);
          break;
        case BackendKind::BandParallel: r = run_band_parallel(sim, initial, backend, nsteps); break;
        case BackendKind::OffloadSplit: r = run_offload(sim, initial, backend, nsteps, options); break;
      }
    } catch (const RuntimeFailure& e) {
      r.status = RunStatus::Aborted;
      r.cause = e.what();
    }
  }
  r.timing.total_wall = nsteps > 0 ? seconds_since(t0) : 0.0;
  return r;
}

HaloStats exchange_halos(const Partitioning& parts, const Mesh& mesh, std::vector<FieldStore>& stores,
                         const std::vector<int>& fields) {
  if (parts.strategy != PartitionStrategy::Cell)
    throw ValidationError("exchange_halos needs a cell partitioning");
  if (static_cast<int>(stores.size()) != parts.nparts)
    throw RuntimeFailure("halo exchange: store count does not match part count");
  HaloStats stats;
  for (int p = 0; p < parts.nparts; ++p) {
    std::vector<int> across;
    for (int f : parts.interface_faces[p]) {
      const Face& face = mesh.face(f);
      across.push_back(parts.cell_part[face.cell1] == p ? face.cell2 : face.cell1);
    }
    std::sort(across.begin(), across.end());
    across.erase(std::unique(across.begin(), across.end()), across.end());
    if (across != parts.halo[p])
      throw RuntimeFailure("halo size mismatch for part " + std::to_string(p) + ": " +
                           std::to_string(parts.halo[p].size()) + " listed, " +
                           std::to_string(across.size()) + " on interface faces");
  }
  for (int p = 0; p < parts.nparts; ++p) {
    for (int f : parts.interface_faces[p]) {
      const Face& face = mesh.face(f);
      const int other = parts.cell_part[face.cell1] == p ? face.cell2 : face.cell1;
      const int owner = parts.cell_part[other];
      for (int fid : fields) {
        const auto src = stores[static_cast<std::size_t>(owner)].cell_slice(fid, other);
        auto dst = stores[static_cast<std::size_t>(p)].cell_slice(fid, other);
        std::copy(src.begin(), src.end(), dst.begin());
        stats.values += src.size();
      }
      ++stats.messages;
    }
  }
  return stats;
}

std::vector<double> reduce_across_bands(const Partitioning& parts,
                                        const std::vector<std::vector<double>>& part_contributions,
                                        int ncells) {
  if (parts.strategy != PartitionStrategy::Band)
    throw ValidationError("reduce_across_bands needs a band partitioning");
  if (static_cast<int>(part_contributions.size()) != parts.nparts)
    throw RuntimeFailure("band reduction: expected contributions from " +
                         std::to_string(parts.nparts) + " parts");
  const int nb = parts.band_ranges.back().second;
  for (int p = 0; p < parts.nparts; ++p) {
    const auto [lo, hi] = parts.band_ranges[static_cast<std::size_t>(p)];
    if (part_contributions[static_cast<std::size_t>(p)].size() !=
        static_cast<std::size_t>(ncells) * static_cast<std::size_t>(hi - lo + 1))
      throw RuntimeFailure("band reduction: missing contribution from part " + std::to_string(p));
  }
  std::vector<double> out(static_cast<std::size_t>(ncells));
  std::vector<double> row(static_cast<std::size_t>(nb));
  for (int c = 0; c < ncells; ++c) {
    for (int p = 0; p < parts.nparts; ++p) {
      const auto [lo, hi] = parts.band_ranges[static_cast<std::size_t>(p)];
      const int width = hi - lo + 1;
      const auto& pc = part_contributions[static_cast<std::size_t>(p)];
      for (int j = 0; j < width; ++j)
        row[static_cast<std::size_t>(lo - 1 + j)] = pc[static_cast<std::size_t>(c) * width + j];
    }
    out[static_cast<std::size_t>(c)] = sum_bands(row.data(), nb);
  }
  return out;
}

TransferChannel::TransferChannel(const OffloadPlan& plan, const FieldLayout& layout)
    : plan_(plan), layout_(layout) {}

void TransferChannel::copy(const FieldStore& from, FieldStore& to, const std::string& field) {
  const int id = layout_.id(field);
  const auto src = from.field(id);
  auto dst = to.field(id);
  std::copy(src.begin(), src.end(), dst.begin());
  const std::size_t bytes = src.size() * sizeof(double);
  step_bytes_ += bytes;
  total_bytes_ += bytes;
}

void TransferChannel::to_host(const FieldStore& device, FieldStore& host, const std::string& field) {
  if (!plan_.to_host_per_step.count(field))
    throw std::logic_error("transfer of '" + field + "' to host is absent from the plan");
  copy(device, host, field);
}

void TransferChannel::to_device(const FieldStore& host, FieldStore& device,
                                const std::string& field) {
  if (!plan_.to_device_per_step.count(field))
    throw std::logic_error("transfer of '" + field + "' to device is absent from the plan");
  copy(host, device, field);
}

void TransferChannel::download_final(const FieldStore& device, FieldStore& host,
                                     const std::string& field) {
  const int id = layout_.id(field);
  const auto src = device.field(id);
  auto dst = host.field(id);
  std::copy(src.begin(), src.end(), dst.begin());
  once_bytes_ += src.size() * sizeof(double);
}

void TransferChannel::upload_once(const FieldStore& host, FieldStore& device) {
  for (int id = 0; id < layout_.num_fields(); ++id) {
    const auto src = host.field(id);
    auto dst = device.field(id);
    std::copy(src.begin(), src.end(), dst.begin());
    once_bytes_ += src.size() * sizeof(double);
  }
}

}  // namespace bteflow
