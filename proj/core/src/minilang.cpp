#include "cleaner/minilang.hpp"

#include <array>
#include <cctype>
#include <cstdlib>

namespace cleaner::minilang {

namespace {

constexpr size_t kMaxStatements = 16;

struct ParseError {
  size_t position;
  std::string expected;
};

// Recursive-descent parser over raw bytes. Spaces and tabs are skipped
// between tokens; statements are ';'-separated.
class Parser {
 public:
  explicit Parser(std::string_view source) : src_(source) {}

  ParseResult parse_program() {
    try {
      Program program;
      program.source = std::string(src_);
      program.statements.push_back(parse_statement());
      skip_space();
      while (!at_end()) {
        expect(';');
        if (program.statements.size() >= kMaxStatements) {
          throw ParseError{pos_, "at most 16 statements"};
        }
        program.statements.push_back(parse_statement());
        skip_space();
      }
      if (program.statements.back().assign_to) {
        throw ParseError{pos_, "a final bare expression"};
      }
      return program;
    } catch (const ParseError& e) {
      return ParseFailure{e.position, e.expected};
    }
  }

 private:
  bool at_end() const { return pos_ >= src_.size(); }
  char peek() const { return at_end() ? '\0' : src_[pos_]; }

  void skip_space() {
    while (!at_end() && (src_[pos_] == ' ' || src_[pos_] == '\t')) ++pos_;
  }

  void expect(char c) {
    skip_space();
    if (peek() != c) throw ParseError{pos_, std::string("'") + c + "'"};
    ++pos_;
  }

  Statement parse_statement() {
    skip_space();
    // Lookahead: a single lowercase letter followed by '=' is an assignment.
    if (!at_end() && is_var(src_[pos_])) {
      size_t probe = pos_ + 1;
      while (probe < src_.size() && (src_[probe] == ' ' || src_[probe] == '\t')) ++probe;
      if (probe < src_.size() && src_[probe] == '=') {
        const char name = src_[pos_];
        pos_ = probe + 1;
        Statement stmt;
        stmt.assign_to = name;
        stmt.expr = parse_expression();
        return stmt;
      }
    }
    Statement stmt;
    stmt.expr = parse_expression();
    return stmt;
  }

  ExprPtr parse_expression() {
    ExprPtr lhs = parse_term();
    for (;;) {
      skip_space();
      const char c = peek();
      if (c != '+' && c != '-') return lhs;
      ++pos_;
      ExprPtr rhs = parse_term();
      lhs = make_binary(c == '+' ? BinaryOp::kAdd : BinaryOp::kSub, std::move(lhs),
                        std::move(rhs));
    }
  }

  ExprPtr parse_term() {
    ExprPtr lhs = parse_unary();
    for (;;) {
      skip_space();
      const char c = peek();
      BinaryOp op;
      if (c == '*') op = BinaryOp::kMul;
      else if (c == '/') op = BinaryOp::kDiv;
      else if (c == '%') op = BinaryOp::kMod;
      else return lhs;
      ++pos_;
      ExprPtr rhs = parse_unary();
      lhs = make_binary(op, std::move(lhs), std::move(rhs));
    }
  }

  ExprPtr parse_unary() {
    skip_space();
    if (peek() == '-') {
      ++pos_;
      auto expr = std::make_unique<Expr>();
      expr->node = Negate{parse_unary()};
      return expr;
    }
    return parse_primary();
  }

  ExprPtr parse_primary() {
    skip_space();
    const char c = peek();
    if (c == '(') {
      ++pos_;
      ExprPtr inner = parse_expression();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) return parse_integer();
    if (is_var(c)) {
      ++pos_;
      auto expr = std::make_unique<Expr>();
      expr->node = VarRef{c};
      return expr;
    }
    throw ParseError{pos_, "an integer, a variable, '-' or '('"};
  }

  ExprPtr parse_integer() {
    const size_t start = pos_;
    int64_t value = 0;
    while (!at_end() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
      const int digit = src_[pos_] - '0';
      if (value > (INT64_MAX - digit) / 10) {
        throw ParseError{start, "an integer literal within the 64-bit range"};
      }
      value = value * 10 + digit;
      ++pos_;
    }
    auto expr = std::make_unique<Expr>();
    expr->node = Literal{value};
    return expr;
  }

  static bool is_var(char c) { return c >= 'a' && c <= 'z'; }
  static ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs) {
    auto expr = std::make_unique<Expr>();
    expr->node = Binary{op, std::move(lhs), std::move(rhs)};
    return expr;
  }

  std::string_view src_;
  size_t pos_ = 0;
};

char op_char(BinaryOp op) {
  switch (op) {
    case BinaryOp::kAdd: return '+';
    case BinaryOp::kSub: return '-';
    case BinaryOp::kMul: return '*';
    case BinaryOp::kDiv: return '/';
    case BinaryOp::kMod: return '%';
  }
  std::abort();
}

// Evaluation faults leave through this exception and are converted to
// Observations at the execute boundary.
struct EvalFault {
  ErrorKind kind;
  std::string message;
};

class Evaluator {
 public:
  explicit Evaluator(const ExecLimits& limits) : limits_(limits) { env_.fill(std::nullopt); }

  int64_t eval(const Expr& expr) {
    tick();
    if (const auto* lit = std::get_if<Literal>(&expr.node)) {
      return bounded(lit->value, std::to_string(lit->value));
    }
    if (const auto* var = std::get_if<VarRef>(&expr.node)) {
      const auto& slot = env_[static_cast<size_t>(var->name - 'a')];
      if (!slot) {
        throw EvalFault{ErrorKind::kUndefinedVariable,
                        std::string("undefined variable '") + var->name + "'"};
      }
      return *slot;
    }
    if (const auto* neg = std::get_if<Negate>(&expr.node)) {
      const int64_t v = eval(*neg->operand);
      if (v == INT64_MIN) throw overflow("-", v, std::nullopt);
      return bounded(-v, "-" + std::to_string(v));
    }
    const auto& bin = std::get<Binary>(expr.node);
    const int64_t lhs = eval(*bin.lhs);
    const int64_t rhs = eval(*bin.rhs);
    return apply(bin.op, lhs, rhs);
  }

  void assign(char name, int64_t value) { env_[static_cast<size_t>(name - 'a')] = value; }

 private:
  void tick() {
    if (++steps_ > limits_.max_steps) {
      throw EvalFault{ErrorKind::kStepLimit,
                      "step limit of " + std::to_string(limits_.max_steps) + " exceeded"};
    }
  }

  EvalFault overflow(std::string_view op, int64_t lhs, std::optional<int64_t> rhs) const {
    std::string msg = "overflow evaluating ";
    if (rhs) {
      msg += std::to_string(lhs) + " " + std::string(op) + " " + std::to_string(*rhs);
    } else {
      msg += std::string(op) + std::to_string(lhs);
    }
    return EvalFault{ErrorKind::kOverflow, std::move(msg)};
  }

  int64_t bounded(int64_t value, const std::string& rendering) {
    if (value > limits_.max_abs_value || value < -limits_.max_abs_value) {
      throw EvalFault{ErrorKind::kOverflow, "overflow evaluating " + rendering};
    }
    return value;
  }

  int64_t apply(BinaryOp op, int64_t lhs, int64_t rhs) {
    const std::string op_str(1, op_char(op));
    int64_t result = 0;
    switch (op) {
      case BinaryOp::kAdd:
        if (__builtin_add_overflow(lhs, rhs, &result)) throw overflow(op_str, lhs, rhs);
        break;
      case BinaryOp::kSub:
        if (__builtin_sub_overflow(lhs, rhs, &result)) throw overflow(op_str, lhs, rhs);
        break;
      case BinaryOp::kMul:
        if (__builtin_mul_overflow(lhs, rhs, &result)) throw overflow(op_str, lhs, rhs);
        break;
      case BinaryOp::kDiv:
      case BinaryOp::kMod:
        if (rhs == 0) {
          throw EvalFault{ErrorKind::kDivisionByZero,
                          "division by zero evaluating " + std::to_string(lhs) + " " +
                              op_str + " 0"};
        }
        if (lhs == INT64_MIN && rhs == -1) throw overflow(op_str, lhs, rhs);
        // Division truncates toward zero; modulo follows the dividend's sign.
        result = op == BinaryOp::kDiv ? lhs / rhs : lhs % rhs;
        break;
    }
    return bounded(result, std::to_string(lhs) + " " + op_str + " " + std::to_string(rhs));
  }

  const ExecLimits& limits_;
  std::array<std::optional<int64_t>, 26> env_;
  int64_t steps_ = 0;
};

void render(const Expr& expr, std::string& out) {
  if (const auto* lit = std::get_if<Literal>(&expr.node)) {
    out += std::to_string(lit->value);
  } else if (const auto* var = std::get_if<VarRef>(&expr.node)) {
    out += var->name;
  } else if (const auto* neg = std::get_if<Negate>(&expr.node)) {
    out += "(-";
    render(*neg->operand, out);
    out += ')';
  } else {
    const auto& bin = std::get<Binary>(expr.node);
    out += '(';
    render(*bin.lhs, out);
    out += ' ';
    out += op_char(bin.op);
    out += ' ';
    render(*bin.rhs, out);
    out += ')';
  }
}

}  // namespace

std::string ParseFailure::message() const {
  return "parse error at position " + std::to_string(position) + ": expected " + expected;
}

ParseResult parse(std::string_view source) { return Parser(source).parse_program(); }

std::string to_string(const Expr& expr) {
  std::string out;
  render(expr, out);
  return out;
}

std::string to_string(const Program& program) {
  std::string out;
  for (size_t i = 0; i < program.statements.size(); ++i) {
    if (i > 0) out += "; ";
    const Statement& stmt = program.statements[i];
    if (stmt.assign_to) {
      out += *stmt.assign_to;
      out += " = ";
    }
    render(*stmt.expr, out);
  }
  return out;
}

Observation execute(const Program& program, const ExecLimits& limits) {
  Evaluator evaluator(limits);
  try {
    int64_t last = 0;
    for (const Statement& stmt : program.statements) {
      last = evaluator.eval(*stmt.expr);
      if (stmt.assign_to) evaluator.assign(*stmt.assign_to, last);
    }
    return Observation::success(last);
  } catch (const EvalFault& fault) {
    return Observation::failure(fault.kind, fault.message);
  }
}

Observation run(std::string_view source, const ExecLimits& limits) {
  ParseResult result = parse(source);
  if (const auto* failure = std::get_if<ParseFailure>(&result)) {
    return Observation::failure(ErrorKind::kParse, failure->message());
  }
  return execute(std::get<Program>(result), limits);
}

}  // namespace cleaner::minilang
