#include "bteflow/parser.hpp"

#include <cctype>
#include <charconv>
#include <string>
#include <vector>

namespace bteflow {

namespace {

enum class Tok {
  Number,
  Ident,
  Plus,
  Minus,
  Star,
  Slash,
  LParen,
  RParen,
  LBracket,
  RBracket,
  Comma,
  Semicolon,
  Greater,
  Less,
  GreaterEqual,
  LessEqual,
  Assign,
  End,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  double number = 0.0;
  SourceSpan span;
};

std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < src.size()) {
    const char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Token t;
    t.span.begin = i;
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      std::size_t j = i;
      while (j < src.size() && (std::isdigit(static_cast<unsigned char>(src[j])) || src[j] == '.'))
        ++j;
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
        if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
          while (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) ++k;
          j = k;
        }
      }
      t.kind = Tok::Number;
      t.text = std::string(src.substr(i, j - i));
      auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
      if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size())
        throw ParseError("malformed number '" + t.text + "'", {i, j});
      if (j < src.size() && (std::isalpha(static_cast<unsigned char>(src[j])) || src[j] == '_'))
        throw ParseError("identifier cannot start with a digit", {i, j + 1});
      i = j;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_'))
        ++j;
      t.kind = Tok::Ident;
      t.text = std::string(src.substr(i, j - i));
      i = j;
    } else {
      auto two = [&](char next) { return i + 1 < src.size() && src[i + 1] == next; };
      switch (c) {
        case '+': t.kind = Tok::Plus; break;
        case '-': t.kind = Tok::Minus; break;
        case '*': t.kind = Tok::Star; break;
        case '/': t.kind = Tok::Slash; break;
        case '(': t.kind = Tok::LParen; break;
        case ')': t.kind = Tok::RParen; break;
        case '[': t.kind = Tok::LBracket; break;
        case ']': t.kind = Tok::RBracket; break;
        case ',': t.kind = Tok::Comma; break;
        case ';': t.kind = Tok::Semicolon; break;
        case '=': t.kind = Tok::Assign; break;
        case '>':
          t.kind = two('=') ? Tok::GreaterEqual : Tok::Greater;
          break;
        case '<':
          t.kind = two('=') ? Tok::LessEqual : Tok::Less;
          break;
        default:
          throw ParseError(std::string("unexpected character '") + c + "'", {i, i + 1});
      }
      const std::size_t len = (t.kind == Tok::GreaterEqual || t.kind == Tok::LessEqual) ? 2 : 1;
      t.text = std::string(src.substr(i, len));
      i += len;
    }
    t.span.end = i;
    out.push_back(std::move(t));
  }
  Token end;
  end.kind = Tok::End;
  end.span = {src.size(), src.size()};
  out.push_back(end);
  return out;
}

SourceSpan join(SourceSpan a, SourceSpan b) { return {a.begin, b.end}; }

// Tags every variable reference in e with the given cell side.
Expr with_side(const Expr& e, CellSide side, const EntityTable& entities) {
  switch (e.kind()) {
    case ExprKind::Ref: {
      RefData r = e.ref();
      const EntityDecl* d = entities.find(r.entity);
      if (d != nullptr && d->kind == EntityKind::Variable) r.side = side;
      return Expr::reference(std::move(r), e.span());
    }
    case ExprKind::Add: {
      std::vector<Expr> c;
      for (const Expr& x : e.children()) c.push_back(with_side(x, side, entities));
      return make_add(std::move(c), e.span());
    }
    case ExprKind::Mul: {
      std::vector<Expr> c;
      for (const Expr& x : e.children()) c.push_back(with_side(x, side, entities));
      return make_mul(std::move(c), e.span());
    }
    case ExprKind::Div:
      return make_div(with_side(e.children()[0], side, entities),
                      with_side(e.children()[1], side, entities), e.span());
    case ExprKind::Compare:
      return Expr::compare(e.compare_op(), with_side(e.children()[0], side, entities),
                           with_side(e.children()[1], side, entities), e.span());
    case ExprKind::Conditional:
      return Expr::conditional(with_side(e.children()[0], side, entities),
                               with_side(e.children()[1], side, entities),
                               with_side(e.children()[2], side, entities), e.span());
    default:
      return e;
  }
}

class Parser {
 public:
  Parser(std::string_view text, const EntityTable& entities, const CallbackRegistry* callbacks)
      : tokens_(tokenize(text)), entities_(entities), callbacks_(callbacks) {}

  Expr parse_top() {
    if (peek().kind == Tok::End) throw ParseError("empty expression", peek().span);
    Expr lhs = parse_compare();
    if (peek().kind == Tok::Assign) {
      const Token eq = next();
      Expr rhs = parse_compare();
      lhs = Expr::equals(lhs, rhs, join(lhs.span(), rhs.span()));
      (void)eq;
    }
    if (peek().kind != Tok::End)
      throw ParseError("unexpected '" + peek().text + "'", peek().span);
    return lhs;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
  }
  Token next() { return tokens_[pos_ < tokens_.size() - 1 ? pos_++ : pos_]; }

  Token expect(Tok kind, const char* what) {
    if (peek().kind != kind)
      throw ParseError(std::string("expected ") + what + " but found '" +
                           (peek().kind == Tok::End ? std::string("end of input") : peek().text) +
                           "'",
                       peek().span);
    return next();
  }

  Expr parse_compare() {
    Expr lhs = parse_additive();
    CompareOp op;
    switch (peek().kind) {
      case Tok::Greater: op = CompareOp::Greater; break;
      case Tok::Less: op = CompareOp::Less; break;
      case Tok::GreaterEqual: op = CompareOp::GreaterEqual; break;
      case Tok::LessEqual: op = CompareOp::LessEqual; break;
      default: return lhs;
    }
    next();
    Expr rhs = parse_additive();
    return Expr::compare(op, lhs, rhs, join(lhs.span(), rhs.span()));
  }

  Expr parse_additive() {
    Expr acc = parse_term();
    std::vector<Expr> terms{acc};
    SourceSpan span = acc.span();
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      const bool minus = next().kind == Tok::Minus;
      Expr t = parse_term();
      span = join(span, t.span());
      terms.push_back(minus ? make_neg(t, t.span()) : t);
    }
    if (terms.size() == 1) return terms.front();
    return make_add(std::move(terms), span);
  }

  Expr parse_term() {
    Expr acc = parse_unary();
    while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
      const bool div = next().kind == Tok::Slash;
      Expr rhs = parse_unary();
      const SourceSpan span = join(acc.span(), rhs.span());
      acc = div ? make_div(acc, rhs, span) : make_mul({acc, rhs}, span);
    }
    return acc;
  }

  Expr parse_unary() {
    if (peek().kind == Tok::Minus) {
      const Token m = next();
      Expr x = parse_unary();
      return make_neg(x, join(m.span, x.span()));
    }
    if (peek().kind == Tok::Plus) {
      next();
      return parse_unary();
    }
    return parse_primary();
  }

  Expr parse_primary() {
    const Token t = peek();
    switch (t.kind) {
      case Tok::Number:
        next();
        return Expr::constant(t.number, t.span);
      case Tok::LParen: {
        next();
        Expr inner = parse_compare();
        expect(Tok::RParen, "')'");
        return inner;
      }
      case Tok::Ident:
        return parse_identifier();
      case Tok::LBracket:
        throw ParseError("vector literal is only allowed as the first argument of upwind", t.span);
      case Tok::End:
        throw ParseError("unexpected end of expression", t.span);
      default:
        throw ParseError("unexpected '" + t.text + "'", t.span);
    }
  }

  std::vector<std::string> parse_index_list(const Token& owner) {
    std::vector<std::string> names;
    const Token open = expect(Tok::LBracket, "'['");
    while (true) {
      if (peek().kind != Tok::Ident)
        throw ParseError("malformed index list on '" + owner.text + "'",
                         join(open.span, peek().span));
      names.push_back(next().text);
      if (peek().kind == Tok::Comma) {
        next();
        continue;
      }
      if (peek().kind == Tok::RBracket) {
        next();
        break;
      }
      throw ParseError("malformed index list on '" + owner.text + "'",
                       join(open.span, peek().span));
    }
    return names;
  }

  Expr make_ref(const Token& tok, std::string entity, int component, CellSide side,
                bool allow_unindexed) {
    const EntityDecl* decl = entities_.find(entity);
    if (decl == nullptr) throw ParseError("unknown identifier '" + entity + "'", tok.span);
    if (decl->kind == EntityKind::Index)
      throw ParseError("index '" + entity + "' cannot be used as a value", tok.span);
    if (decl->kind == EntityKind::Callback)
      throw ParseError("callback '" + entity + "' must be called with arguments", tok.span);
    if (component < 1 || component > decl->components)
      throw ParseError("component " + std::to_string(component) + " out of range for '" +
                           entity + "'",
                       tok.span);
    SourceSpan span = tok.span;
    std::vector<std::string> indices;
    if (peek().kind == Tok::LBracket) {
      const std::size_t begin = peek().span.begin;
      indices = parse_index_list(tok);
      span.end = tokens_[pos_ - 1].span.end;
      if (decl->index_refs.empty())
        throw ParseError("index applied to non-indexed entity '" + entity + "'",
                         {begin, span.end});
      if (indices != decl->index_refs) {
        std::string want;
        for (const auto& n : decl->index_refs) want += (want.empty() ? "" : ",") + n;
        throw ParseError("malformed index list on '" + entity + "': expected [" + want + "]",
                         {begin, span.end});
      }
    } else if (!decl->index_refs.empty() && !allow_unindexed) {
      std::string want;
      for (const auto& n : decl->index_refs) want += (want.empty() ? "" : ",") + n;
      throw ParseError("entity '" + entity + "' requires index list [" + want + "]", tok.span);
    }
    RefData r;
    r.entity = std::move(entity);
    r.component = component;
    r.indices = std::move(indices);
    r.side = side;
    return Expr::reference(std::move(r), span);
  }

  // Splits "name_k" into (name, k); returns false when there is no numeric suffix.
  static bool split_component(const std::string& s, std::string& name, int& comp) {
    const auto pos = s.rfind('_');
    if (pos == std::string::npos || pos == 0 || pos + 1 >= s.size()) return false;
    const std::string digits = s.substr(pos + 1);
    for (char ch : digits)
      if (!std::isdigit(static_cast<unsigned char>(ch))) return false;
    name = s.substr(0, pos);
    comp = std::stoi(digits);
    return true;
  }

  Expr parse_identifier() {
    const Token tok = next();
    const std::string& id = tok.text;

    if (id == "dt") return Expr::dt(tok.span);
    if (id == "SURFACE") return Expr::surface(tok.span);
    if (id == "TIMEDERIVATIVE") return Expr::time_derivative(tok.span);
    if (id.rfind("NORMAL_", 0) == 0) {
      std::string rest = id.substr(7);
      if (rest != "1" && rest != "2")
        throw ParseError("normal component must be 1 or 2", tok.span);
      return Expr::normal(std::stoi(rest), tok.span);
    }
    if (id.rfind("CELL1_", 0) == 0 || id.rfind("CELL2_", 0) == 0) {
      std::string name;
      int comp = 0;
      if (!split_component(id.substr(6), name, comp))
        throw ParseError("malformed cell-side reference '" + id + "'", tok.span);
      return make_ref(tok, name, comp, id[4] == '1' ? CellSide::Cell1 : CellSide::Cell2, false);
    }
    if (id.front() == '_') {
      std::string name;
      int comp = 0;
      if (!split_component(id.substr(1), name, comp))
        throw ParseError("malformed canonical reference '" + id + "'", tok.span);
      return make_ref(tok, name, comp, CellSide::None, false);
    }

    if (peek().kind == Tok::LParen) {
      if (id == "surface") return parse_surface(tok);
      if (id == "upwind") return parse_upwind(tok);
      if (id == "conditional") return parse_conditional(tok);
      return parse_call(tok);
    }

    const EntityDecl* decl = entities_.find(id);
    if (decl == nullptr) throw ParseError("unknown identifier '" + id + "'", tok.span);
    if (decl->components > 1)
      throw ParseError("vector entity '" + id + "' needs a component (e.g. _" + id + "_1)",
                       tok.span);
    return make_ref(tok, id, 1, CellSide::None, false);
  }

  std::vector<Expr> parse_args(const Token& callee, bool bindings) {
    std::vector<Expr> args;
    expect(Tok::LParen, "'('");
    if (peek().kind == Tok::RParen) {
      next();
      return args;
    }
    while (true) {
      if (bindings && peek().kind == Tok::Ident &&
          (peek(1).kind == Tok::Comma || peek(1).kind == Tok::RParen) &&
          (!is_reserved_name(peek().text) || peek().text == "normal" || peek().text == "x" ||
           peek().text == "y")) {
        const Token name = next();
        const EntityDecl* decl = entities_.find(name.text);
        const bool builtin = name.text == "normal" || name.text == "x" || name.text == "y";
        if (decl == nullptr && !builtin)
          throw ParseError("unknown identifier '" + name.text + "' in call to '" + callee.text +
                               "'",
                           name.span);
        args.push_back(Expr::binding(name.text, name.span));
      } else {
        args.push_back(parse_compare());
      }
      if (peek().kind == Tok::Comma) {
        next();
        continue;
      }
      expect(Tok::RParen, "',' or ')'");
      break;
    }
    return args;
  }

  Expr parse_surface(const Token& tok) {
    expect(Tok::LParen, "'('");
    ++surface_depth_;
    if (surface_depth_ > 1) throw ParseError("surface(...) cannot be nested", tok.span);
    Expr inner = parse_compare();
    --surface_depth_;
    const Token close = expect(Tok::RParen, "')'");
    if (contains(inner, ExprKind::Surface))
      throw ParseError("surface(...) cannot be nested", tok.span);
    return make_mul({Expr::surface(tok.span), inner}, join(tok.span, close.span));
  }

  Expr parse_upwind(const Token& tok) {
    expect(Tok::LParen, "'('");
    Expr v1;
    Expr v2;
    if (peek().kind == Tok::LBracket) {
      const Token open = next();
      std::vector<Expr> comps{parse_compare()};
      while (peek().kind == Tok::Semicolon) {
        next();
        comps.push_back(parse_compare());
      }
      const Token close = expect(Tok::RBracket, "']'");
      if (comps.size() != 2)
        throw ParseError("upwind expects a 2-component vector, got " +
                             std::to_string(comps.size()),
                         join(open.span, close.span));
      v1 = comps[0];
      v2 = comps[1];
    } else if (peek().kind == Tok::Ident && entities_.find(peek().text) != nullptr &&
               entities_.find(peek().text)->components == 2) {
      const Token vt = next();
      v1 = make_ref(vt, vt.text, 1, CellSide::None, false);
      v2 = make_ref(vt, vt.text, 2, CellSide::None, false);
    } else {
      throw ParseError("upwind expects a vector ([a;b] or a 2-component entity) as first argument",
                       peek().span);
    }
    if (peek().kind != Tok::Comma)
      throw ParseError("upwind expects 2 arguments (vector, value)", join(tok.span, peek().span));
    next();
    Expr u = parse_compare();
    if (peek().kind != Tok::RParen)
      throw ParseError("upwind expects 2 arguments (vector, value)", join(tok.span, peek().span));
    const Token close = next();
    const SourceSpan span = join(tok.span, close.span);

    Expr vn = make_add({make_mul({v1, Expr::normal(1)}), make_mul({v2, Expr::normal(2)})});
    return Expr::conditional(Expr::compare(CompareOp::Greater, vn, Expr::constant(0.0)),
                             make_mul({vn, with_side(u, CellSide::Cell1, entities_)}),
                             make_mul({vn, with_side(u, CellSide::Cell2, entities_)}), span);
  }

  Expr parse_conditional(const Token& tok) {
    std::vector<Expr> args = parse_args(tok, false);
    if (args.size() != 3)
      throw ParseError("conditional expects 3 arguments, got " + std::to_string(args.size()),
                       tok.span);
    return Expr::conditional(args[0], args[1], args[2], tok.span);
  }

  Expr parse_call(const Token& tok) {
    const CallbackInfo* info = callbacks_ ? callbacks_->find(tok.text) : nullptr;
    if (info == nullptr)
      throw ParseError("unknown callback or operator '" + tok.text + "'", tok.span);
    std::vector<Expr> args = parse_args(tok, true);
    const SourceSpan span = join(tok.span, tokens_[pos_ - 1].span);
    if (static_cast<int>(args.size()) != info->arity)
      throw ParseError("callback '" + tok.text + "' expects " + std::to_string(info->arity) +
                           " arguments, got " + std::to_string(args.size()),
                       span);
    return Expr::call(tok.text, std::move(args), span);
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  const EntityTable& entities_;
  const CallbackRegistry* callbacks_;
  int surface_depth_ = 0;
};

// Markers may only be factors of top-level additive terms.
void check_marker_placement(const Expr& e, bool allowed) {
  if (e.is_marker() && !allowed)
    throw ParseError("surface(...) and TIMEDERIVATIVE must appear as top-level additive terms",
                     e.span());
  for (const Expr& c : e.children()) check_marker_placement(c, false);
}

void check_top(const Expr& root) {
  auto check_sum = [](const Expr& side) {
    for (const Expr& term : additive_terms(side)) {
      if (term.is_marker()) continue;
      if (term.kind() == ExprKind::Mul) {
        int markers = 0;
        for (const Expr& f : term.children()) {
          if (f.is_marker()) {
            ++markers;
            continue;
          }
          check_marker_placement(f, false);
        }
        if (markers > 1)
          throw ParseError("a term may carry at most one SURFACE/TIMEDERIVATIVE marker",
                           term.span());
      } else {
        check_marker_placement(term, false);
      }
    }
  };
  if (root.kind() == ExprKind::Equals) {
    check_sum(root.children()[0]);
    check_sum(root.children()[1]);
  } else {
    check_sum(root);
  }
}

}  // namespace

Expr parse_expression(std::string_view text, const EntityTable& entities,
                      const CallbackRegistry* callbacks) {
  Parser p(text, entities, callbacks);
  Expr e = p.parse_top();
  check_top(e);
  return e;
}

}  // namespace bteflow
