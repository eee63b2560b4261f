#pragma once

#include <string_view>

#include "bteflow/callbacks.hpp"
#include "bteflow/entities.hpp"
#include "bteflow/expr.hpp"

namespace bteflow {

/// Parses conservation-form equation text against the declared entities.
///
/// Accepts the user grammar (`I[d,b]`, `surface(...)`, `upwind(v, u)`,
/// registered callbacks) as well as the canonical rendering produced by
/// render(), so render(parse(t)) always reparses to the same tree.
/// `upwind(v, u)` expands to
/// `conditional(v.n > 0, (v.n)*CELL1_u, (v.n)*CELL2_u)`.
///
/// Throws ParseError carrying the offending source span.
[[nodiscard]] Expr parse_expression(std::string_view text, const EntityTable& entities,
                                    const CallbackRegistry* callbacks = nullptr);

}  // namespace bteflow
