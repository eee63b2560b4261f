#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace bteflow {

enum class EntityKind { Variable, Coefficient, Index, Callback };
enum class ValueShape { Scalar, IndexedArray };
enum class Location { Cell, Face };

/// Which runtime axis an index entity enumerates.
enum class IndexRole { Direction, Band };

/// A declared symbol: variable, coefficient, index or callback name.
struct EntityDecl {
  std::string name;
  EntityKind kind = EntityKind::Variable;
  ValueShape shape = ValueShape::Scalar;
  Location location = Location::Cell;
  std::vector<std::string> index_refs;
  /// Inclusive [lo, hi]; indices only.
  std::pair<int, int> range{1, 1};
  std::optional<IndexRole> role;
  /// Vector-valued coefficients (e.g. an advection velocity) have 2 components.
  int components = 1;
  /// Literal coefficient values, or empty when `source` names a provider.
  std::vector<double> values;
  /// Named value provider, e.g. "directions.x" or "bands.vg".
  std::string source;
};

class EntityTable {
 public:
  /// Throws ValidationError on duplicates, undeclared index references or bad ranges.
  void add(EntityDecl decl);

  [[nodiscard]] const EntityDecl* find(const std::string& name) const;
  [[nodiscard]] const EntityDecl& at(const std::string& name) const;
  [[nodiscard]] bool contains(const std::string& name) const { return find(name) != nullptr; }

  /// Declarations in insertion order.
  [[nodiscard]] const std::vector<EntityDecl>& all() const noexcept { return decls_; }

  /// Number of values an index enumerates (hi - lo + 1).
  [[nodiscard]] int extent(const std::string& index_name) const;

  /// Index entity carrying the given role, if declared.
  [[nodiscard]] const EntityDecl* index_with_role(IndexRole role) const;

 private:
  std::vector<EntityDecl> decls_;
  std::map<std::string, std::size_t> by_name_;
};

/// Names the parser reserves; they can never be declared as entities.
[[nodiscard]] bool is_reserved_name(const std::string& name);

}  // namespace bteflow
