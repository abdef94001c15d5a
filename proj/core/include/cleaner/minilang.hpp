#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cleaner/trajectory.hpp"

namespace cleaner::minilang {

// Execution bounds that make the interpreter total: every program either
// produces a value or a deterministic error.
struct ExecLimits {
  int64_t max_steps = 10000;
  int64_t max_abs_value = int64_t{1} << 62;
};

enum class BinaryOp { kAdd, kSub, kMul, kDiv, kMod };

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Literal { int64_t value; };
struct VarRef { char name; };
struct Negate { ExprPtr operand; };
struct Binary { BinaryOp op; ExprPtr lhs; ExprPtr rhs; };

struct Expr {
  std::variant<Literal, VarRef, Negate, Binary> node;
};

// Statements are `x = <expr>` assignments or a bare expression; the last
// statement must be a bare expression and at most 16 statements are allowed.
struct Statement {
  std::optional<char> assign_to;
  ExprPtr expr;
};

struct Program {
  std::vector<Statement> statements;
  std::string source;
};

struct ParseFailure {
  size_t position = 0;    // byte offset into the source
  std::string expected;   // what the parser was looking for
  std::string message() const;
};

using ParseResult = std::variant<Program, ParseFailure>;

ParseResult parse(std::string_view source);

// Canonical rendering of the parsed program (normalized whitespace, explicit
// statement separators). parse(to_string(p)) reproduces the same shape.
std::string to_string(const Program& program);
std::string to_string(const Expr& expr);

Observation execute(const Program& program, const ExecLimits& limits);

// parse + execute; a parse failure becomes Observation failure(Parse).
Observation run(std::string_view source, const ExecLimits& limits = {});

}  // namespace cleaner::minilang
