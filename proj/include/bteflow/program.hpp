#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "bteflow/expr.hpp"
#include "bteflow/fields.hpp"

namespace bteflow {

inline constexpr int kMaxSlots = 3;

/// Where a compiled expression is evaluated: the owning cell, the cell across
/// the current face (or -1), the outward face normal and the DOF index values
/// (0-based, one per slot of the unknown's index list).
struct EvalPoint {
  int cell = 0;
  int neighbor = -1;
  double n1 = 0.0;
  double n2 = 0.0;
  std::array<int, kMaxSlots> idx{};
};

struct ProgramContext {
  const FieldLayout* layout = nullptr;
  /// Index names of the unknown, in slot order.
  std::vector<std::string> slots;
  double dt = 0.0;
  /// CELL1/CELL2 references and NORMAL_k are legal only in face programs.
  bool face_program = false;
};

/// Stack bytecode for one expression; sums and products fold left to right
/// exactly as written, so evaluation order is fixed by the expression.
class Program {
 public:
  static Program compile(const Expr& e, const ProgramContext& ctx);

  [[nodiscard]] double eval(const double* const* fields, const EvalPoint& p) const;

  [[nodiscard]] std::size_t size() const noexcept { return code_.size(); }
  /// Field ids loaded, each once, in first-use order.
  [[nodiscard]] const std::vector<int>& fields_read() const noexcept { return fields_read_; }
  [[nodiscard]] bool reads_neighbor() const noexcept { return reads_neighbor_; }

 private:
  enum class Op : std::uint8_t { Const, Load, Normal, Add, Mul, Div, Cmp, JumpIfFalse, Jump };
  struct Instr {
    Op op = Op::Const;
    int arg = 0;
    double value = 0.0;
  };
  struct Load {
    bool per_cell = true;
    bool neighbor = false;
    int field = 0;
    std::size_t cell_stride = 0;
    std::size_t base = 0;
    std::array<std::size_t, kMaxSlots> stride{};
  };

  void emit(const Expr& e, const ProgramContext& ctx, int depth);

  std::vector<Instr> code_;
  std::vector<Load> loads_;
  std::vector<int> fields_read_;
  bool reads_neighbor_ = false;
  int max_depth_ = 0;
};

}  // namespace bteflow
