#include "bteflow/entities.hpp"

#include <array>

#include "bteflow/error.hpp"

namespace bteflow {

bool is_reserved_name(const std::string& name) {
  static const std::array<const char*, 10> reserved = {
      "dt",        "SURFACE", "TIMEDERIVATIVE", "surface", "upwind",
      "conditional", "normal", "x",            "y",       "NORMAL"};
  for (const char* r : reserved)
    if (name == r) return true;
  return name.rfind("CELL1_", 0) == 0 || name.rfind("CELL2_", 0) == 0 ||
         name.rfind("NORMAL_", 0) == 0 || (!name.empty() && name.front() == '_');
}

void EntityTable::add(EntityDecl decl) {
  if (decl.name.empty()) throw ValidationError("entity with empty name");
  if (is_reserved_name(decl.name))
    throw ValidationError("entity name '" + decl.name + "' is reserved");
  if (by_name_.count(decl.name))
    throw ValidationError("entity '" + decl.name + "' declared more than once");

  if (decl.kind == EntityKind::Index) {
    if (decl.range.first != 1 || decl.range.second < 1)
      throw ValidationError("index '" + decl.name + "' must have range [1, n] with n >= 1");
    if (!decl.index_refs.empty())
      throw ValidationError("index '" + decl.name + "' cannot itself be indexed");
  }
  for (const std::string& idx : decl.index_refs) {
    const EntityDecl* ref = find(idx);
    if (ref == nullptr || ref->kind != EntityKind::Index)
      throw ValidationError("entity '" + decl.name + "' is indexed by '" + idx +
                            "', which is not a declared index");
  }
  decl.shape = decl.index_refs.empty() ? ValueShape::Scalar : ValueShape::IndexedArray;
  if (decl.components < 1 || decl.components > 2)
    throw ValidationError("entity '" + decl.name + "' must have 1 or 2 components");

  by_name_[decl.name] = decls_.size();
  decls_.push_back(std::move(decl));
}

const EntityDecl* EntityTable::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : &decls_[it->second];
}

const EntityDecl& EntityTable::at(const std::string& name) const {
  const EntityDecl* d = find(name);
  if (d == nullptr) throw ValidationError("unknown entity '" + name + "'");
  return *d;
}

int EntityTable::extent(const std::string& index_name) const {
  const EntityDecl& d = at(index_name);
  if (d.kind != EntityKind::Index) throw ValidationError("'" + index_name + "' is not an index");
  return d.range.second - d.range.first + 1;
}

const EntityDecl* EntityTable::index_with_role(IndexRole role) const {
  for (const EntityDecl& d : decls_)
    if (d.kind == EntityKind::Index && d.role == role) return &d;
  return nullptr;
}

}  // namespace bteflow
