#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace focuscal {

struct SolverOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-10;
  double step_tolerance = 1e-12;
  double initial_damping = 1e-3;
  double damping_increase = 10.0;
  double damping_decrease = 10.0;
  // Replace analytic Jacobians by central differences. Test use only.
  bool numeric_jacobian = false;

  void Validate() const;
};

enum class Termination {
  kGradientTolerance,
  kStepTolerance,
  kMaxIterations,
};

std::string_view TerminationName(Termination t);

struct SolverSummary {
  Termination termination = Termination::kMaxIterations;
  int iterations = 0;       // accepted + rejected steps
  int accepted_steps = 0;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  // Objective after each accepted step, starting with the initial value.
  std::vector<double> objective_history;

  bool converged() const { return termination != Termination::kMaxIterations; }
};

// Nonlinear least squares problem: minimize |r(x)|^2.
class LeastSquaresProblem {
 public:
  virtual ~LeastSquaresProblem() = default;

  virtual Eigen::Index NumParameters() const = 0;
  virtual Eigen::Index NumResiduals() const = 0;
  virtual Eigen::VectorXd Residuals(const Eigen::VectorXd& x) const = 0;
  // Central differences unless overridden.
  virtual Eigen::MatrixXd Jacobian(const Eigen::VectorXd& x) const;
};

Eigen::MatrixXd NumericJacobian(const LeastSquaresProblem& problem,
                                const Eigen::VectorXd& x);

// Wraps plain callables.
class FunctionProblem : public LeastSquaresProblem {
 public:
  using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
  using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

  FunctionProblem(Eigen::Index num_parameters, Eigen::Index num_residuals,
                  ResidualFn residuals, JacobianFn jacobian = {});

  Eigen::Index NumParameters() const override { return num_parameters_; }
  Eigen::Index NumResiduals() const override { return num_residuals_; }
  Eigen::VectorXd Residuals(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd Jacobian(const Eigen::VectorXd& x) const override;

 private:
  Eigen::Index num_parameters_;
  Eigen::Index num_residuals_;
  ResidualFn residuals_;
  JacobianFn jacobian_;
};

struct SolverResult {
  Eigen::VectorXd parameters;
  SolverSummary summary;
};

using LogSink = std::function<void(const std::string&)>;

// Damped Gauss-Newton with Marquardt scaling. Jacobian columns are scaled
// to unit norm before each solve. Each attempted step emits one line
//   LM it=<n> obj=<v> lambda=<v> accepted=<0|1>
// to `log`. Throws LinearAlgebraFailure when the damped normal equations
// cannot be solved at any damping.
SolverResult LevenbergMarquardt(const LeastSquaresProblem& problem,
                                Eigen::VectorXd initial,
                                const SolverOptions& options,
                                const LogSink& log = {});

}  // namespace focuscal
