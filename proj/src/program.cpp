#include "bteflow/program.hpp"

#include <algorithm>

namespace bteflow {

namespace {

constexpr int kStackSize = 64;

}  // namespace

Program Program::compile(const Expr& e, const ProgramContext& ctx) {
  Program p;
  p.emit(e, ctx, 1);
  if (p.max_depth_ > kStackSize) throw ValidationError("expression nests too deeply to compile");
  return p;
}

void Program::emit(const Expr& e, const ProgramContext& ctx, int depth) {
  max_depth_ = std::max(max_depth_, depth);
  switch (e.kind()) {
    case ExprKind::Constant:
      code_.push_back({Op::Const, 0, e.value()});
      return;
    case ExprKind::Dt:
      code_.push_back({Op::Const, 0, ctx.dt});
      return;
    case ExprKind::Normal:
      if (!ctx.face_program)
        throw ValidationError("NORMAL_" + std::to_string(e.component()) +
                              " is face-located data and cannot appear in a volume term");
      code_.push_back({Op::Normal, e.component(), 0.0});
      return;
    case ExprKind::Ref: {
      const RefData& r = e.ref();
      if (r.side != CellSide::None && !ctx.face_program)
        throw ValidationError("'" + render(e) +
                              "' is face-located data and cannot appear in a volume term");
      const int fid = ctx.layout->find(r.entity);
      if (fid < 0) throw ValidationError("no storage for entity '" + r.entity + "'");
      const FieldInfo& f = ctx.layout->info(fid);
      if (r.component < 1 || r.component > f.components)
        throw ValidationError("component " + std::to_string(r.component) + " of '" + r.entity +
                              "' is out of range");
      if (r.indices.size() != f.indices.size())
        throw ValidationError("'" + r.entity + "' expects " + std::to_string(f.indices.size()) +
                              " indices");
      Load load;
      load.per_cell = f.per_cell;
      load.neighbor = r.side == CellSide::Cell2;
      load.field = fid;
      load.cell_stride = f.per_cell ? f.per_cell_size : 0;
      load.base = static_cast<std::size_t>(r.component - 1);
      for (std::size_t k = 0; k < r.indices.size(); ++k) {
        auto it = std::find(ctx.slots.begin(), ctx.slots.end(), r.indices[k]);
        if (it == ctx.slots.end())
          throw ValidationError("index '" + r.indices[k] + "' in '" + render(e) +
                                "' is not an index of the unknown");
        load.stride[static_cast<std::size_t>(it - ctx.slots.begin())] += f.index_strides[k];
      }
      if (load.neighbor && !load.per_cell)
        throw ValidationError("'" + render(e) + "' reads a global field from a neighbor cell");
      reads_neighbor_ = reads_neighbor_ || load.neighbor;
      if (std::find(fields_read_.begin(), fields_read_.end(), fid) == fields_read_.end())
        fields_read_.push_back(fid);
      loads_.push_back(load);
      code_.push_back({Op::Load, static_cast<int>(loads_.size() - 1), 0.0});
      return;
    }
    case ExprKind::Add:
    case ExprKind::Mul: {
      const auto kids = e.children();
      for (std::size_t i = 0; i < kids.size(); ++i) emit(kids[i], ctx, depth + static_cast<int>(i));
      code_.push_back(
          {e.kind() == ExprKind::Add ? Op::Add : Op::Mul, static_cast<int>(kids.size()), 0.0});
      return;
    }
    case ExprKind::Div:
      emit(e.children()[0], ctx, depth);
      emit(e.children()[1], ctx, depth + 1);
      code_.push_back({Op::Div, 0, 0.0});
      return;
    case ExprKind::Compare:
      emit(e.children()[0], ctx, depth);
      emit(e.children()[1], ctx, depth + 1);
      code_.push_back({Op::Cmp, static_cast<int>(e.compare_op()), 0.0});
      return;
    case ExprKind::Conditional: {
      emit(e.children()[0], ctx, depth);
      const std::size_t jf = code_.size();
      code_.push_back({Op::JumpIfFalse, 0, 0.0});
      emit(e.children()[1], ctx, depth);
      const std::size_t j = code_.size();
      code_.push_back({Op::Jump, 0, 0.0});
      code_[jf].arg = static_cast<int>(code_.size());
      emit(e.children()[2], ctx, depth);
      code_[j].arg = static_cast<int>(code_.size());
      return;
    }
    case ExprKind::Call:
      throw ValidationError("callback '" + e.name() +
                            "' cannot run inside a kernel expression; callbacks run on the host");
    case ExprKind::Binding:
      throw ValidationError("bare name '" + e.name() + "' is only valid as a callback argument");
    case ExprKind::TimeDerivative:
    case ExprKind::Surface:
    case ExprKind::Equals:
      throw ValidationError("marker or update node reached the kernel compiler: " + render(e));
  }
}

double Program::eval(const double* const* fields, const EvalPoint& p) const {
  double stack[kStackSize];
  int top = 0;
  const std::size_t n = code_.size();
  for (std::size_t pc = 0; pc < n; ++pc) {
    const Instr& in = code_[pc];
    switch (in.op) {
      case Op::Const:
        stack[top++] = in.value;
        break;
      case Op::Load: {
        const Load& l = loads_[static_cast<std::size_t>(in.arg)];
        std::size_t off = l.base;
        if (l.per_cell)
          off += static_cast<std::size_t>(l.neighbor ? p.neighbor : p.cell) * l.cell_stride;
        for (int k = 0; k < kMaxSlots; ++k)
          off += static_cast<std::size_t>(p.idx[static_cast<std::size_t>(k)]) *
                 l.stride[static_cast<std::size_t>(k)];
        stack[top++] = fields[l.field][off];
        break;
      }
      case Op::Normal:
        stack[top++] = in.arg == 1 ? p.n1 : p.n2;
        break;
      case Op::Add: {
        double s = 0.0;
        for (int i = top - in.arg; i < top; ++i) s += stack[i];
        top -= in.arg;
        stack[top++] = s;
        break;
      }
      case Op::Mul: {
        double s = 1.0;
        for (int i = top - in.arg; i < top; ++i) s *= stack[i];
        top -= in.arg;
        stack[top++] = s;
        break;
      }
      case Op::Div: {
        const double b = stack[--top];
        stack[top - 1] /= b;
        break;
      }
      case Op::Cmp: {
        const double b = stack[--top];
        const double a = stack[top - 1];
        bool r = false;
        switch (static_cast<CompareOp>(in.arg)) {
          case CompareOp::Greater: r = a > b; break;
          case CompareOp::Less: r = a < b; break;
          case CompareOp::GreaterEqual: r = a >= b; break;
          case CompareOp::LessEqual: r = a <= b; break;
        }
        stack[top - 1] = r ? 1.0 : 0.0;
        break;
      }
      case Op::JumpIfFalse:
        if (stack[--top] == 0.0) pc = static_cast<std::size_t>(in.arg) - 1;
        break;
      case Op::Jump:
        pc = static_cast<std::size_t>(in.arg) - 1;
        break;
    }
  }
  return top > 0 ? stack[top - 1] : 0.0;
}

}  // namespace bteflow
