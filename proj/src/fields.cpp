#include "bteflow/fields.hpp"

#include "bteflow/error.hpp"

namespace bteflow {

FieldLayout::FieldLayout(const EntityTable& entities, int ncells) : ncells_(ncells) {
  for (const EntityDecl& d : entities.all()) {
    if (d.kind != EntityKind::Variable && d.kind != EntityKind::Coefficient) continue;
    FieldInfo f;
    f.name = d.name;
    f.kind = d.kind;
    f.per_cell = d.kind == EntityKind::Variable;
    f.indices = d.index_refs;
    f.components = d.components;
    for (const std::string& idx : d.index_refs) f.extents.push_back(entities.extent(idx));
    f.index_strides.assign(f.extents.size(), 0);
    std::size_t stride = static_cast<std::size_t>(f.components);
    for (std::size_t k = f.extents.size(); k-- > 0;) {
      f.index_strides[k] = stride;
      stride *= static_cast<std::size_t>(f.extents[k]);
    }
    f.per_cell_size = stride;
    fields_.push_back(std::move(f));
  }
}

int FieldLayout::find(const std::string& name) const {
  for (std::size_t i = 0; i < fields_.size(); ++i)
    if (fields_[i].name == name) return static_cast<int>(i);
  return -1;
}

int FieldLayout::id(const std::string& name) const {
  const int i = find(name);
  if (i < 0) throw ValidationError("no field named '" + name + "'");
  return i;
}

std::size_t FieldLayout::offset(int field, int cell, std::span<const int> idx,
                                int component) const {
  const FieldInfo& f = fields_.at(field);
  std::size_t off = f.per_cell ? static_cast<std::size_t>(cell) * f.per_cell_size : 0;
  for (std::size_t k = 0; k < idx.size() && k < f.index_strides.size(); ++k)
    off += static_cast<std::size_t>(idx[k]) * f.index_strides[k];
  return off + static_cast<std::size_t>(component);
}

FieldStore::FieldStore(std::shared_ptr<const FieldLayout> layout) : layout_(std::move(layout)) {
  for (const FieldInfo& f : layout_->all()) data_.emplace_back(f.size(layout_->num_cells()), 0.0);
}

void FieldStore::swap_field(int id, std::vector<double>& other) {
  std::vector<double>& mine = data_.at(id);
  if (mine.size() != other.size())
    throw RuntimeFailure("buffer swap for '" + layout_->info(id).name + "' with mismatched size");
  mine.swap(other);
}

std::vector<const double*> FieldStore::pointers() const {
  std::vector<const double*> p;
  p.reserve(data_.size());
  for (const auto& d : data_) p.push_back(d.data());
  return p;
}

std::span<double> FieldStore::cell_slice(int id, int cell) {
  const FieldInfo& f = layout_->info(id);
  if (!f.per_cell) return data_.at(id);
  return std::span<double>(data_.at(id)).subspan(static_cast<std::size_t>(cell) * f.per_cell_size,
                                                 f.per_cell_size);
}

std::span<const double> FieldStore::cell_slice(int id, int cell) const {
  const FieldInfo& f = layout_->info(id);
  if (!f.per_cell) return data_.at(id);
  return std::span<const double>(data_.at(id))
      .subspan(static_cast<std::size_t>(cell) * f.per_cell_size, f.per_cell_size);
}

}  // namespace bteflow
