#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bteflow/entities.hpp"

namespace bteflow {

/// Storage description of one variable or coefficient.
///
/// Variables are stored per cell; coefficients are global arrays. Values are
/// laid out [cell][index...][component], row-major over the declared index
/// list.
struct FieldInfo {
  std::string name;
  EntityKind kind = EntityKind::Variable;
  bool per_cell = true;
  std::vector<std::string> indices;
  std::vector<int> extents;
  int components = 1;
  std::vector<std::size_t> index_strides;
  std::size_t per_cell_size = 1;  // values per cell (or total for global fields)

  [[nodiscard]] std::size_t size(int ncells) const {
    return per_cell ? per_cell_size * static_cast<std::size_t>(ncells) : per_cell_size;
  }
};

class FieldLayout {
 public:
  FieldLayout(const EntityTable& entities, int ncells);

  [[nodiscard]] int num_cells() const noexcept { return ncells_; }
  [[nodiscard]] int num_fields() const noexcept { return static_cast<int>(fields_.size()); }
  [[nodiscard]] const FieldInfo& info(int id) const { return fields_.at(id); }
  [[nodiscard]] const std::vector<FieldInfo>& all() const noexcept { return fields_; }

  /// Field id by name, or -1.
  [[nodiscard]] int find(const std::string& name) const;
  /// Field id by name; throws ValidationError when absent.
  [[nodiscard]] int id(const std::string& name) const;

  [[nodiscard]] std::size_t offset(int field, int cell, std::span<const int> idx,
                                   int component = 0) const;

 private:
  int ncells_ = 0;
  std::vector<FieldInfo> fields_;
};

/// One copy of every field's values.
class FieldStore {
 public:
  explicit FieldStore(std::shared_ptr<const FieldLayout> layout);

  [[nodiscard]] const FieldLayout& layout() const noexcept { return *layout_; }
  [[nodiscard]] std::shared_ptr<const FieldLayout> layout_ptr() const noexcept { return layout_; }

  [[nodiscard]] std::span<double> field(int id) { return data_.at(id); }
  [[nodiscard]] std::span<const double> field(int id) const { return data_.at(id); }
  [[nodiscard]] std::span<double> field(const std::string& name) { return field(layout_->id(name)); }
  [[nodiscard]] std::span<const double> field(const std::string& name) const {
    return field(layout_->id(name));
  }

  /// Exchanges a field's buffer with `other` (same size); the double-buffer swap.
  void swap_field(int id, std::vector<double>& other);

  /// Data pointers indexed by field id, for compiled programs.
  [[nodiscard]] std::vector<const double*> pointers() const;

  /// Per-cell slice [cell*per_cell_size, (cell+1)*per_cell_size).
  [[nodiscard]] std::span<double> cell_slice(int id, int cell);
  [[nodiscard]] std::span<const double> cell_slice(int id, int cell) const;

  [[nodiscard]] bool operator==(const FieldStore& other) const { return data_ == other.data_; }

 private:
  std::shared_ptr<const FieldLayout> layout_;
  std::vector<std::vector<double>> data_;
};

}  // namespace bteflow
