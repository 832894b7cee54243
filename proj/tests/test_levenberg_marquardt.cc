#include <cmath>
#include <regex>
#include <string>
#include <vector>

#include "doctest.h"
#include "focuscal/error.h"
#include "focuscal/levenberg_marquardt.h"

using namespace focuscal;

namespace {

FunctionProblem Rosenbrock() {
  return FunctionProblem(
      2, 2,
      [](const Eigen::VectorXd& x) {
        Eigen::VectorXd r(2);
        r << 10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0];
        return r;
      },
      [](const Eigen::VectorXd& x) {
        Eigen::MatrixXd j(2, 2);
        j << -20.0 * x[0], 10.0, -1.0, 0.0;
        return j;
      });
}

}  // namespace

TEST_CASE("linear residual converges within two iterations") {
  const Eigen::VectorXd target = (Eigen::VectorXd(3) << 1.5, -2.0, 300.0).finished();
  FunctionProblem problem(
      3, 3, [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(x - target); },
      [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Identity(3, 3); });
  const Eigen::VectorXd start = Eigen::VectorXd::Zero(3);

  SolverOptions two;
  two.max_iterations = 2;
  const SolverResult r2 = LevenbergMarquardt(problem, start, two);
  CHECK(r2.summary.iterations <= 2);
  CHECK((r2.parameters - target).norm() <= 1e-6 * target.norm());

  const SolverResult full = LevenbergMarquardt(problem, start, SolverOptions{});
  CHECK(full.summary.converged());
  CHECK((full.parameters - target).norm() <= 1e-12 * target.norm());
}

TEST_CASE("Rosenbrock from the standard start") {
  const FunctionProblem problem = Rosenbrock();
  const Eigen::VectorXd start = (Eigen::VectorXd(2) << -1.2, 1.0).finished();
  const SolverResult r = LevenbergMarquardt(problem, start, SolverOptions{});
  CHECK(r.summary.converged());
  CHECK(r.summary.final_objective < 1e-12);
  CHECK(std::abs(r.parameters[0] - 1.0) < 1e-6);
  CHECK(std::abs(r.parameters[1] - 1.0) < 1e-6);
  for (size_t i = 1; i < r.summary.objective_history.size(); ++i) {
    CHECK(r.summary.objective_history[i] <= r.summary.objective_history[i - 1]);
  }
}

TEST_CASE("numeric Jacobian option reaches the same minimum") {
  const FunctionProblem problem = Rosenbrock();
  SolverOptions opts;
  opts.numeric_jacobian = true;
  const Eigen::VectorXd start = (Eigen::VectorXd(2) << -1.2, 1.0).finished();
  const SolverResult r = LevenbergMarquardt(problem, start, opts);
  CHECK(r.summary.final_objective < 1e-12);
}

TEST_CASE("zero residual start terminates immediately") {
  const FunctionProblem problem = Rosenbrock();
  const Eigen::VectorXd start = (Eigen::VectorXd(2) << 1.0, 1.0).finished();
  std::vector<std::string> lines;
  const SolverResult r = LevenbergMarquardt(
      problem, start, SolverOptions{},
      [&](const std::string& line) { lines.push_back(line); });
  CHECK(r.summary.iterations == 0);
  CHECK(r.summary.accepted_steps == 0);
  CHECK(r.summary.termination == Termination::kGradientTolerance);
  CHECK(r.parameters == start);
  CHECK(lines.empty());
}

TEST_CASE("iteration cap reports non-convergence") {
  const FunctionProblem problem = Rosenbrock();
  SolverOptions opts;
  opts.max_iterations = 1;
  const Eigen::VectorXd start = (Eigen::VectorXd(2) << -1.2, 1.0).finished();
  const SolverResult r = LevenbergMarquardt(problem, start, opts);
  CHECK_FALSE(r.summary.converged());
  CHECK(r.summary.termination == Termination::kMaxIterations);
  CHECK(TerminationName(r.summary.termination) == "max_iterations");
}

TEST_CASE("log lines have a parsable prefix") {
  const FunctionProblem problem = Rosenbrock();
  std::vector<std::string> lines;
  const Eigen::VectorXd start = (Eigen::VectorXd(2) << -1.2, 1.0).finished();
  const SolverResult r =
      LevenbergMarquardt(problem, start, SolverOptions{},
                         [&](const std::string& line) { lines.push_back(line); });
  REQUIRE(static_cast<int>(lines.size()) == r.summary.iterations);
  const std::regex pattern(R"(^LM it=(\d+) obj=(\S+) lambda=(\S+) accepted=([01])$)");
  int accepted = 0;
  for (size_t i = 0; i < lines.size(); ++i) {
    std::smatch m;
    REQUIRE(std::regex_match(lines[i], m, pattern));
    CHECK(std::stoi(m[1]) == static_cast<int>(i + 1));
    CHECK(std::isfinite(std::stod(m[2])));
    accepted += m[4] == "1";
  }
  CHECK(accepted == r.summary.accepted_steps);
}

TEST_CASE("steps into an invalid region are rejected, not fatal") {
  // Residual undefined for x < 0; the solver must back off.
  FunctionProblem problem(1, 1, [](const Eigen::VectorXd& x) {
    if (x[0] <= 0.0) Throw(ErrorCode::kNonPositiveDepth, "negative");
    Eigen::VectorXd r(1);
    r << std::log(x[0]) - std::log(0.01);
    return r;
  });
  const SolverResult r =
      LevenbergMarquardt(problem, Eigen::VectorXd::Constant(1, 5.0), SolverOptions{});
  CHECK(r.summary.converged());
  CHECK(r.parameters[0] == doctest::Approx(0.01).epsilon(1e-8));
}

TEST_CASE("non-finite Jacobian is a linear algebra failure") {
  FunctionProblem problem(
      1, 1, [](const Eigen::VectorXd& x) { return Eigen::VectorXd(x); },
      [](const Eigen::VectorXd&) {
        return Eigen::MatrixXd::Constant(1, 1, std::nan(""));
      });
  try {
    LevenbergMarquardt(problem, Eigen::VectorXd::Ones(1), SolverOptions{});
    FAIL("expected LinearAlgebraFailure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kLinearAlgebraFailure);
  }
}

TEST_CASE("solver options are validated") {
  const FunctionProblem problem = Rosenbrock();
  SolverOptions bad;
  bad.damping_increase = 1.0;
  CHECK_THROWS_AS(LevenbergMarquardt(problem, Eigen::VectorXd::Zero(2), bad), Error);
  SolverOptions negative;
  negative.gradient_tolerance = -1.0;
  CHECK_THROWS_AS(LevenbergMarquardt(problem, Eigen::VectorXd::Zero(2), negative), Error);
  CHECK_THROWS_AS(
      LevenbergMarquardt(problem, Eigen::VectorXd::Zero(3), SolverOptions{}), Error);
}
