#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "cleaner/minilang.hpp"
#include "cleaner/rng.hpp"

using namespace cleaner;
using namespace cleaner::minilang;

TEST_CASE("parse accepts the grammar") {
  auto result = parse("2+3");
  REQUIRE(std::holds_alternative<Program>(result));
  CHECK(std::get<Program>(result).statements.size() == 1);

  result = parse("x = 4; x*x");
  REQUIRE(std::holds_alternative<Program>(result));
  const Program& program = std::get<Program>(result);
  REQUIRE(program.statements.size() == 2);
  CHECK(program.statements[0].assign_to == 'x');
  CHECK(!program.statements[1].assign_to);
  CHECK(to_string(program) == "x = 4; (x * x)");

  // Pretty-print round trip keeps the shape.
  auto reparsed = parse(to_string(program));
  REQUIRE(std::holds_alternative<Program>(reparsed));
  CHECK(to_string(std::get<Program>(reparsed)) == to_string(program));
}

TEST_CASE("parse failures carry position and expectation") {
  auto result = parse("");
  REQUIRE(std::holds_alternative<ParseFailure>(result));
  CHECK(std::get<ParseFailure>(result).position == 0);

  result = parse("((");
  REQUIRE(std::holds_alternative<ParseFailure>(result));

  result = parse("x = 4");  // assignment cannot be the final statement
  REQUIRE(std::holds_alternative<ParseFailure>(result));
  CHECK(std::get<ParseFailure>(result).expected == "a final bare expression");

  result = parse("2+");
  REQUIRE(std::holds_alternative<ParseFailure>(result));
  CHECK(std::get<ParseFailure>(result).position == 2);

  // 17 statements exceed the limit.
  std::string too_many;
  for (int i = 0; i < 16; ++i) too_many += "a = 1; ";
  too_many += "a";
  REQUIRE(std::holds_alternative<ParseFailure>(parse(too_many)));
  std::string at_limit;
  for (int i = 0; i < 15; ++i) at_limit += "a = 1; ";
  at_limit += "a";
  CHECK(std::holds_alternative<Program>(parse(at_limit)));
}

TEST_CASE("execute evaluates and reports deterministic faults") {
  const ExecLimits limits;
  CHECK(run("2+3", limits) == Observation::success(5));
  CHECK(run("x = 6; x*7", limits) == Observation::success(42));

  const Observation div0 = run("1/0", limits);
  CHECK(div0.error_kind == ErrorKind::kDivisionByZero);
  CHECK(!div0.value.has_value());

  const Observation undef = run("y + 1", limits);
  CHECK(undef.error_kind == ErrorKind::kUndefinedVariable);
  CHECK(undef.message.find('y') != std::string::npos);

  const Observation mod0 = run("a = 2; a % 0", limits);
  CHECK(mod0.error_kind == ErrorKind::kDivisionByZero);

  const Observation bad = run("((", limits);
  CHECK(bad.error_kind == ErrorKind::kParse);
  CHECK(!bad.message.empty());
}

TEST_CASE("division truncates toward zero, modulo follows the dividend") {
  CHECK(run("7/2") == Observation::success(3));
  CHECK(run("-7/2") == Observation::success(-3));
  CHECK(run("7/-2") == Observation::success(-3));
  CHECK(run("-7/-2") == Observation::success(3));
  CHECK(run("7%3") == Observation::success(1));
  CHECK(run("-7%3") == Observation::success(-1));
  CHECK(run("7%-3") == Observation::success(1));
}

TEST_CASE("limits produce StepLimit and Overflow") {
  ExecLimits tight;
  tight.max_steps = 3;
  const Observation steps = run("1+2+3+4+5", tight);
  CHECK(steps.error_kind == ErrorKind::kStepLimit);

  ExecLimits small;
  small.max_abs_value = 100;
  CHECK(run("10*10", small) == Observation::success(100));
  const Observation over = run("10*11", small);
  CHECK(over.error_kind == ErrorKind::kOverflow);
  CHECK(over.message.find("10 * 11") != std::string::npos);

  // Large literals themselves are intermediate values.
  const Observation literal = run("101", small);
  CHECK(literal.error_kind == ErrorKind::kOverflow);

  // Beyond the 64-bit range the parser rejects the literal.
  const Observation huge = run("99999999999999999999");
  CHECK(huge.error_kind == ErrorKind::kParse);

  // int64 overflow is caught even when max_abs_value allows the magnitude.
  ExecLimits max_range;
  max_range.max_abs_value = INT64_MAX;
  const Observation wrap = run("4611686018427387904*4", max_range);
  CHECK(wrap.error_kind == ErrorKind::kOverflow);
}

TEST_CASE("unary minus and precedence") {
  CHECK(run("-3+5") == Observation::success(2));
  CHECK(run("2+3*4") == Observation::success(14));
  CHECK(run("(2+3)*4") == Observation::success(20));
  CHECK(run("--5") == Observation::success(5));
}

TEST_CASE("determinism: identical source yields identical observations") {
  RandomStream rng(0xfeed);
  const char charset[] = "0123456789abcxyz+-*/%()=; ";
  for (int i = 0; i < 500; ++i) {
    const int len = static_cast<int>(rng.next_int(0, 30));
    std::string source(static_cast<size_t>(len), ' ');
    for (char& c : source) {
      c = charset[rng.next_int(0, static_cast<int64_t>(sizeof(charset)) - 2)];
    }
    const Observation first = run(source);
    const Observation second = run(source);
    CHECK(first == second);
  }
}

TEST_CASE("totality: arbitrary bytes never escape the observation channel") {
  RandomStream rng(0xf022);
  for (int i = 0; i < 2000; ++i) {
    const int len = static_cast<int>(rng.next_int(0, 40));
    std::string source(static_cast<size_t>(len), ' ');
    for (char& c : source) c = static_cast<char>(rng.next_int(0, 255));
    const Observation obs = run(source);
    if (!obs.ok()) {
      CHECK(obs.error_kind.has_value());
      CHECK(!obs.message.empty());
    }
  }
}

TEST_CASE("purity: no state leaks between runs") {
  CHECK(run("x = 41; x+1") == Observation::success(42));
  // x must not survive into a fresh run.
  const Observation after = run("x+1");
  CHECK(after.error_kind == ErrorKind::kUndefinedVariable);
}
