#include "bteflow/plan.hpp"

#include <algorithm>
#include <sstream>

#include "bteflow/error.hpp"

namespace bteflow {

const char* axis_name(Axis a) {
  switch (a) {
    case Axis::Cells: return "cells";
    case Axis::Direction: return "direction";
    case Axis::Band: return "band";
  }
  return "?";
}

LoopPlan build_loop_plan(const std::vector<std::string>& ordering, const EntityTable* entities) {
  if (ordering.empty()) return {};
  if (ordering.size() != 3)
    throw ValidationError("loop ordering must name cells, direction and band exactly once");
  LoopPlan plan;
  std::array<bool, 3> seen{};
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string& name = ordering[i];
    Axis a;
    if (name == "cells" || name == "cell" || name == "elements") a = Axis::Cells;
    else if (name == "direction" || name == "directions") a = Axis::Direction;
    else if (name == "band" || name == "bands") a = Axis::Band;
    else if (const EntityDecl* d = entities ? entities->find(name) : nullptr;
             d != nullptr && d->kind == EntityKind::Index && d->role)
      a = *d->role == IndexRole::Direction ? Axis::Direction : Axis::Band;
    else
      throw ValidationError("unknown loop axis '" + name + "'");
    if (seen[static_cast<std::size_t>(a)])
      throw ValidationError(std::string("duplicate loop axis '") + axis_name(a) + "'");
    seen[static_cast<std::size_t>(a)] = true;
    plan.ordering[i] = a;
  }
  return plan;
}

std::vector<LoopPlan> all_loop_plans() {
  std::array<Axis, 3> axes{Axis::Cells, Axis::Direction, Axis::Band};
  std::vector<LoopPlan> out;
  do {
    out.push_back(LoopPlan{axes});
  } while (std::next_permutation(axes.begin(), axes.end()));
  return out;
}

MeshSummary summarize(const Mesh& mesh) {
  return {mesh.num_cells(), mesh.interior_face_count(), mesh.boundary_face_count(),
          mesh.boundary_regions()};
}

int KernelIR::count(IRCategory c) const {
  return static_cast<int>(
      std::count_if(nodes.begin(), nodes.end(), [c](const IRNode& n) { return n.category == c; }));
}

int KernelIR::count(IRKind k) const {
  return static_cast<int>(
      std::count_if(nodes.begin(), nodes.end(), [k](const IRNode& n) { return n.kind == k; }));
}

namespace {

void collect_refs(const Expr& e, std::vector<std::string>& out, bool neighbor_only) {
  visit(e, [&](const Expr& n) {
    if (n.kind() != ExprKind::Ref) return;
    if (neighbor_only && n.ref().side != CellSide::Cell2) return;
    if (std::find(out.begin(), out.end(), n.ref().entity) == out.end())
      out.push_back(n.ref().entity);
  });
}

void check_volume_term(const Expr& e) {
  visit(e, [&](const Expr& n) {
    const bool face_data = n.kind() == ExprKind::Normal ||
                           (n.kind() == ExprKind::Ref && n.ref().side != CellSide::None);
    if (face_data)
      throw ValidationError("volume-source term '" + render(e) + "' references face-located data '" +
                            render(n) + "'");
  });
}

void check_entities(const Expr& e, const EntityTable& entities) {
  visit(e, [&](const Expr& n) {
    if (n.kind() != ExprKind::Ref) return;
    const EntityDecl* d = entities.find(n.ref().entity);
    if (d == nullptr ||
        (d->kind != EntityKind::Variable && d->kind != EntityKind::Coefficient))
      throw ValidationError("unresolved entity reference '" + render(n) + "'");
  });
}

std::string ref_text(const std::string& name, const EntityTable& entities) {
  const EntityDecl& d = entities.at(name);
  std::string s = name;
  if (!d.index_refs.empty()) {
    s += "[";
    for (std::size_t i = 0; i < d.index_refs.size(); ++i) s += (i ? "," : "") + d.index_refs[i];
    s += "]";
  }
  return s;
}

IRNode node(IRKind kind, IRCategory cat, std::string text) {
  IRNode n;
  n.kind = kind;
  n.category = cat;
  n.text = std::move(text);
  return n;
}

}  // namespace

KernelIR lower(const TermSet& terms, const std::string& unknown, const MeshSummary& mesh,
               const EntityTable& entities, const std::vector<BoundarySpec>& boundaries,
               const LoopPlan& loops) {
  const EntityDecl* u = entities.find(unknown);
  if (u == nullptr || u->kind != EntityKind::Variable)
    throw ValidationError("unknown '" + unknown + "' is not a declared variable");

  KernelIR k;
  k.unknown = unknown;
  k.dof_indices = u->index_refs;
  k.surface_terms = terms.rhs_surf;
  k.boundaries = boundaries;
  for (const EntityDecl& d : entities.all())
    if (d.kind == EntityKind::Variable || d.kind == EntityKind::Coefficient)
      k.field_names.insert(d.name);

  for (const Expr& t : terms.rhs_vol) {
    check_volume_term(t);
    check_entities(t, entities);
  }
  for (const SurfaceTerm& s : terms.rhs_surf) {
    check_volume_term(s.prefactor);
    check_entities(s.prefactor, entities);
    check_entities(s.integrand, entities);
  }
  k.source = terms.rhs_vol.empty() ? Expr::constant(0.0) : make_add(terms.rhs_vol);

  const bool surface = !terms.rhs_surf.empty();
  const bool walls = surface && mesh.boundary_faces > 0;
  if (walls) {
    for (std::size_t i = 1; i < terms.rhs_surf.size(); ++i)
      if (!structurally_equal(terms.rhs_surf[i].prefactor, terms.rhs_surf[0].prefactor))
        throw ValidationError(
            "surface terms with different prefactors cannot share a boundary flux callback");
    for (int region : mesh.regions) {
      const auto n = std::count_if(boundaries.begin(), boundaries.end(),
                                   [region](const BoundarySpec& b) { return b.region == region; });
      if (n != 1)
        throw ValidationError("boundary region " + std::to_string(region) + " has " +
                              std::to_string(n) + " boundary specs; exactly one is required");
    }
  }

  const std::string dof = ref_text(unknown, entities);
  k.nodes.push_back(node(IRKind::Comment, IRCategory::None, "step body for " + dof));
  int depth = 0;
  for (Axis a : loops.ordering) {
    std::string text;
    if (a == Axis::Cells) {
      text = "for cell = 1:Ncells";
    } else {
      const IndexRole role = a == Axis::Direction ? IndexRole::Direction : IndexRole::Band;
      const EntityDecl* idx = nullptr;
      for (const std::string& name : u->index_refs)
        if (entities.at(name).role == role) idx = &entities.at(name);
      if (idx == nullptr) continue;
      text = "for " + idx->name + " = " + std::to_string(idx->range.first) + ":" +
             std::to_string(idx->range.second);
    }
    k.nodes.push_back(node(IRKind::LoopBegin, IRCategory::None, text));
    ++depth;
  }

  std::vector<std::string> fetched;
  collect_refs(k.source, fetched, false);
  for (const SurfaceTerm& s : terms.rhs_surf) collect_refs(s.prefactor, fetched, false);
  for (const std::string& f : fetched) {
    if (f == unknown) continue;
    IRNode n = node(IRKind::FetchCoefficient, IRCategory::None, "fetch " + ref_text(f, entities));
    n.field = f;
    k.nodes.push_back(n);
  }
  {
    IRNode n = node(IRKind::Source, IRCategory::VolumeSource, "source = " + render(k.source));
    n.expr = k.source;
    k.nodes.push_back(n);
  }

  if (surface) {
    for (std::size_t i = 0; i < terms.rhs_surf.size(); ++i)
      k.nodes.push_back(
          node(IRKind::Comment, IRCategory::None, "flux_" + std::to_string(i + 1) + " = 0"));
    k.nodes.push_back(node(IRKind::LoopBegin, IRCategory::None, "for face = 1:Nfaces"));
    std::vector<std::string> neighbors;
    for (const SurfaceTerm& s : terms.rhs_surf) collect_refs(s.integrand, neighbors, true);
    for (const std::string& f : neighbors) {
      IRNode n =
          node(IRKind::FetchNeighbor, IRCategory::None, "fetch neighbor " + ref_text(f, entities));
      n.field = f;
      k.nodes.push_back(n);
    }
    for (std::size_t i = 0; i < terms.rhs_surf.size(); ++i) {
      IRNode n = node(IRKind::FaceFlux, IRCategory::SurfaceFlux,
                      "flux_" + std::to_string(i + 1) + " += A/V * " +
                          render(terms.rhs_surf[i].integrand) +
                          (walls ? " [except boundaries]" : ""));
      n.expr = terms.rhs_surf[i].integrand;
      n.term = static_cast<int>(i);
      k.nodes.push_back(n);
    }
    if (walls) {
      IRNode n = node(IRKind::BoundaryFlux, IRCategory::Boundary,
                      "flux_1 += A/V * boundary_flux(region) [boundary faces only]");
      n.term = 0;
      k.nodes.push_back(n);
      std::vector<BoundarySpec> sorted = boundaries;
      std::sort(sorted.begin(), sorted.end(),
                [](const BoundarySpec& a, const BoundarySpec& b) { return a.region < b.region; });
      for (const BoundarySpec& b : sorted) {
        IRNode c = node(IRKind::Comment, IRCategory::Boundary,
                        "region " + std::to_string(b.region) + ": " + render(b.call));
        c.region = b.region;
        c.expr = b.call;
        k.nodes.push_back(c);
      }
    }
    k.nodes.push_back(node(IRKind::LoopEnd, IRCategory::None, "end"));
  }

  std::string write = unknown + "_new = source";
  for (std::size_t i = 0; i < terms.rhs_surf.size(); ++i) {
    const std::string pre = render(terms.rhs_surf[i].prefactor);
    const std::string flux = "flux_" + std::to_string(i + 1);
    if (pre == "1") write += " + " + flux;
    else if (pre == "-1") write += " - " + flux;
    else if (pre.front() == '-') write += " - " + pre.substr(1) + "*" + flux;
    else write += " + " + pre + "*" + flux;
  }
  IRNode wb = node(IRKind::WriteBack, IRCategory::Write, write);
  wb.field = unknown;
  wb.writes_new = true;
  k.nodes.push_back(wb);
  for (int i = 0; i < depth; ++i) k.nodes.push_back(node(IRKind::LoopEnd, IRCategory::None, "end"));
  return k;
}

bool structurally_equal(const KernelIR& a, const KernelIR& b) {
  if (a.unknown != b.unknown || a.dof_indices != b.dof_indices ||
      a.nodes.size() != b.nodes.size() || !structurally_equal(a.source, b.source) ||
      a.surface_terms.size() != b.surface_terms.size())
    return false;
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    const IRNode& x = a.nodes[i];
    const IRNode& y = b.nodes[i];
    if (x.kind != y.kind || x.category != y.category || x.text != y.text || x.term != y.term ||
        x.region != y.region || x.field != y.field || x.writes_new != y.writes_new ||
        !structurally_equal(x.expr, y.expr))
      return false;
  }
  return true;
}

OffloadPlan split_interior_boundary(const KernelIR& kernel, const MeshSummary& mesh) {
  if (kernel.count(IRCategory::SurfaceFlux) > 0 && mesh.boundary_faces > 0 &&
      kernel.count(IRKind::BoundaryFlux) == 0)
    throw ValidationError("kernel has surface-flux nodes but no boundary nodes while the mesh has " +
                          std::to_string(mesh.boundary_faces) + " boundary faces");

  OffloadPlan plan;
  plan.combine_identity = mesh.boundary_faces == 0 || kernel.count(IRKind::BoundaryFlux) == 0;

  plan.interior_kernel = kernel;
  plan.interior_kernel.nodes.clear();
  for (const IRNode& n : kernel.nodes)
    if (n.category != IRCategory::Boundary) plan.interior_kernel.nodes.push_back(n);

  KernelIR& task = plan.boundary_task;
  task.unknown = kernel.unknown;
  task.dof_indices = kernel.dof_indices;
  task.surface_terms = kernel.surface_terms;
  task.boundaries = kernel.boundaries;
  task.field_names = kernel.field_names;
  task.source = Expr::constant(0.0);
  if (!plan.combine_identity) {
    auto add = [&](IRKind kind, IRCategory cat, std::string text) {
      IRNode n;
      n.kind = kind;
      n.category = cat;
      n.text = std::move(text);
      task.nodes.push_back(n);
      return &task.nodes.back();
    };
    add(IRKind::Comment, IRCategory::None, "boundary task (host)");
    add(IRKind::LoopBegin, IRCategory::None, "for face in boundary faces");
    const std::string pre = render(kernel.surface_terms.at(0).prefactor);
    for (const IRNode& n : kernel.nodes)
      if (n.category == IRCategory::Boundary) {
        IRNode copy = n;
        if (copy.kind == IRKind::BoundaryFlux)
          copy.text = kernel.unknown + "_bdry[cell] += " + pre + " * A/V * boundary_flux(region)";
        task.nodes.push_back(copy);
      }
    add(IRKind::LoopEnd, IRCategory::None, "end");
    add(IRKind::Comment, IRCategory::None,
        "combine: " + kernel.unknown + " = " + kernel.unknown + "_interior + " + kernel.unknown +
            "_bdry");
  }

  auto gather = [&](const Expr& e) {
    visit(e, [&](const Expr& n) {
      if (n.kind() == ExprKind::Ref) plan.device_reads.insert(n.ref().entity);
    });
  };
  gather(kernel.source);
  for (const SurfaceTerm& s : kernel.surface_terms) {
    gather(s.prefactor);
    gather(s.integrand);
  }
  plan.device_reads.insert(kernel.unknown);
  plan.device_writes.insert(kernel.unknown);
  if (!plan.combine_identity)
    for (const BoundarySpec& b : kernel.boundaries)
      for (const Expr& arg : b.call.children())
        if (arg.kind() == ExprKind::Binding && kernel.field_names.count(arg.name()))
          plan.boundary_reads.insert(arg.name());
  return plan;
}

OffloadPlan compute_transfer_sets(OffloadPlan plan, const std::vector<HookDecl>& hooks) {
  const std::string& u = plan.interior_kernel.unknown;
  std::set<std::string> host_reads = plan.boundary_reads;
  std::set<std::string> host_writes;
  if (!plan.combine_identity) {
    host_reads.insert(u);
    host_writes.insert(u);
  }
  for (const HookDecl& h : hooks) {
    host_reads.insert(h.reads.begin(), h.reads.end());
    host_writes.insert(h.writes.begin(), h.writes.end());
    if (h.concurrent)
      for (const std::string& w : h.writes)
        if (plan.device_writes.count(w) || plan.device_reads.count(w))
          throw ValidationError("ambiguous ownership: hook '" + h.name + "' writes '" + w +
                                "' concurrently with the device kernel");
  }
  plan.to_host_per_step.clear();
  plan.to_device_per_step.clear();
  plan.once_only_transfers.clear();
  for (const std::string& f : plan.device_writes)
    if (host_reads.count(f)) plan.to_host_per_step.insert(f);
  for (const std::string& f : host_writes)
    if (plan.device_reads.count(f)) plan.to_device_per_step.insert(f);
  for (const std::string& f : plan.device_reads)
    if (!plan.to_device_per_step.count(f)) plan.once_only_transfers.insert(f);
  plan.once_only_transfers.insert("geometry");
  return plan;
}

std::size_t predicted_bytes_per_step(const OffloadPlan& plan, const FieldLayout& layout) {
  std::size_t values = 0;
  for (const auto* set : {&plan.to_host_per_step, &plan.to_device_per_step})
    for (const std::string& f : *set) values += layout.info(layout.id(f)).size(layout.num_cells());
  return values * sizeof(double);
}

std::string render_kernel(const KernelIR& kernel) {
  std::ostringstream os;
  int depth = 0;
  for (const IRNode& n : kernel.nodes) {
    if (n.kind == IRKind::LoopEnd) --depth;
    os << std::string(static_cast<std::size_t>(2 * std::max(depth, 0)), ' ');
    if (n.kind == IRKind::Comment) os << "# ";
    os << n.text << '\n';
    if (n.kind == IRKind::LoopBegin) ++depth;
  }
  return os.str();
}

namespace {

std::string join(const std::set<std::string>& s) {
  if (s.empty()) return "(none)";
  std::string out;
  for (const std::string& x : s) out += (out.empty() ? "" : ", ") + x;
  return out;
}

}  // namespace

std::string render_transfers(const OffloadPlan& plan) {
  std::ostringstream os;
  os << "per-step to host:   " << join(plan.to_host_per_step) << '\n';
  os << "per-step to device: " << join(plan.to_device_per_step) << '\n';
  os << "once only:          " << join(plan.once_only_transfers) << '\n';
  return os.str();
}

std::string render_plan(const OffloadPlan& plan) {
  std::ostringstream os;
  os << "== interior kernel (device) ==\n" << render_kernel(plan.interior_kernel);
  os << "== boundary task (host) ==\n";
  if (plan.boundary_task.nodes.empty()) os << "# no boundary faces; combine is identity\n";
  else os << render_kernel(plan.boundary_task);
  os << "== transfers ==\n" << render_transfers(plan);
  return os.str();
}

}  // namespace bteflow
