#include "focuscal/levenberg_marquardt.h"

#include <cmath>
#include <cstdio>
#include <limits>
#include <utility>

#include <Eigen/Cholesky>

#include "focuscal/error.h"

namespace focuscal {

namespace {

constexpr double kMaxDamping = 1e32;

std::string FormatLogLine(int iteration, double objective, double lambda,
                          bool accepted) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "LM it=%d obj=%.12g lambda=%.6g accepted=%d",
                iteration, objective, lambda, accepted ? 1 : 0);
  return buf;
}

// Residuals at a trial point. Steps that leave the model's domain (a point
// behind the camera, a distortion inverse that diverges) count as failures.
bool TryResiduals(const LeastSquaresProblem& problem, const Eigen::VectorXd& x,
                  Eigen::VectorXd* residuals) {
  try {
    *residuals = problem.Residuals(x);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kNonPositiveDepth ||
        e.code() == ErrorCode::kNoConvergence) {
      return false;
    }
    throw;
  }
  return residuals->allFinite();
}

}  // namespace

void SolverOptions::Validate() const {
  if (max_iterations < 1 || !(gradient_tolerance > 0.0) ||
      !(step_tolerance > 0.0) || !(initial_damping > 0.0) ||
      !(damping_increase > 1.0) || !(damping_decrease > 1.0)) {
    Throw(ErrorCode::kInvalidArgument, "invalid solver options");
  }
}

std::string_view TerminationName(Termination t) {
  switch (t) {
    case Termination::kGradientTolerance:
      return "gradient_tolerance";
    case Termination::kStepTolerance:
      return "step_tolerance";
    case Termination::kMaxIterations:
      return "max_iterations";
  }
  return "unknown";
}

Eigen::MatrixXd LeastSquaresProblem::Jacobian(const Eigen::VectorXd& x) const {
  return NumericJacobian(*this, x);
}

Eigen::MatrixXd NumericJacobian(const LeastSquaresProblem& problem,
                                const Eigen::VectorXd& x) {
  Eigen::MatrixXd jac(problem.NumResiduals(), x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
    probe[j] = x[j] + h;
    const Eigen::VectorXd plus = problem.Residuals(probe);
    probe[j] = x[j] - h;
    const Eigen::VectorXd minus = problem.Residuals(probe);
    probe[j] = x[j];
    jac.col(j) = (plus - minus) / (2.0 * h);
  }
  return jac;
}

FunctionProblem::FunctionProblem(Eigen::Index num_parameters,
                                 Eigen::Index num_residuals,
                                 ResidualFn residuals, JacobianFn jacobian)
    : num_parameters_(num_parameters),
      num_residuals_(num_residuals),
      residuals_(std::move(residuals)),
      jacobian_(std::move(jacobian)) {}

Eigen::VectorXd FunctionProblem::Residuals(const Eigen::VectorXd& x) const {
  return residuals_(x);
}

Eigen::MatrixXd FunctionProblem::Jacobian(const Eigen::VectorXd& x) const {
  if (jacobian_) return jacobian_(x);
  return NumericJacobian(*this, x);
}

SolverResult LevenbergMarquardt(const LeastSquaresProblem& problem,
                                Eigen::VectorXd initial,
                                const SolverOptions& options,
                                const LogSink& log) {
  options.Validate();
  if (initial.size() != problem.NumParameters()) {
    Throw(ErrorCode::kInvalidArgument, "parameter vector size mismatch");
  }

  SolverResult result;
  SolverSummary& summary = result.summary;
  Eigen::VectorXd x = std::move(initial);

  Eigen::VectorXd r;
  if (!TryResiduals(problem, x, &r)) {
    Throw(ErrorCode::kInvalidArgument,
          "residuals are not defined at the initial point");
  }
  double objective = r.squaredNorm();
  summary.initial_objective = objective;
  summary.objective_history.push_back(objective);

  const Eigen::Index n = x.size();
  Eigen::MatrixXd jac;
  Eigen::VectorXd scale(n);
  Eigen::MatrixXd normal;
  Eigen::VectorXd gradient;

  // Rebuilds the scaled normal equations at x; returns true when the scaled
  // gradient already satisfies the tolerance.
  auto linearize = [&]() {
    jac = options.numeric_jacobian ? NumericJacobian(problem, x)
                                   : problem.Jacobian(x);
    if (jac.rows() != r.size() || jac.cols() != n || !jac.allFinite()) {
      Throw(ErrorCode::kLinearAlgebraFailure, "invalid Jacobian");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      const double norm = jac.col(j).norm();
      scale[j] = norm > 0.0 ? norm : 1.0;
    }
    const Eigen::MatrixXd scaled = jac * scale.cwiseInverse().asDiagonal();
    normal = scaled.transpose() * scaled;
    gradient = scaled.transpose() * r;
    return n == 0 || gradient.lpNorm<Eigen::Infinity>() <=
                         options.gradient_tolerance;
  };

  double lambda = options.initial_damping;
  bool done = linearize();
  if (done) summary.termination = Termination::kGradientTolerance;

  while (!done && summary.iterations < options.max_iterations) {
    Eigen::MatrixXd damped = normal;
    damped.diagonal().array() += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
    Eigen::VectorXd scaled_step;
    bool solved = ldlt.info() == Eigen::Success && ldlt.isPositive();
    if (solved) {
      scaled_step = ldlt.solve(-gradient);
      solved = scaled_step.allFinite();
    }
    if (!solved) {
      lambda *= options.damping_increase;
      if (lambda > kMaxDamping) {
        Throw(ErrorCode::kLinearAlgebraFailure,
              "damped normal equations are not solvable");
      }
      continue;
    }

    const double scaled_x_norm = (scale.asDiagonal() * x).norm();
    if (scaled_step.norm() <=
        options.step_tolerance * (scaled_x_norm + options.step_tolerance)) {
      summary.termination = Termination::kStepTolerance;
      done = true;
      break;
    }

    const Eigen::VectorXd candidate =
        x + scale.cwiseInverse().asDiagonal() * scaled_step;
    Eigen::VectorXd candidate_r;
    const bool valid = TryResiduals(problem, candidate, &candidate_r);
    const double candidate_objective =
        valid ? candidate_r.squaredNorm()
              : std::numeric_limits<double>::infinity();
    const bool accepted = candidate_objective < objective;
    ++summary.iterations;

    if (accepted) {
      x = candidate;
      r = std::move(candidate_r);
      objective = candidate_objective;
      ++summary.accepted_steps;
      summary.objective_history.push_back(objective);
      lambda = std::max(lambda / options.damping_decrease, 1e-15);
    } else {
      lambda *= options.damping_increase;
    }
    if (log) log(FormatLogLine(summary.iterations, objective, lambda, accepted));

    if (accepted) {
      if (linearize()) {
        summary.termination = Termination::kGradientTolerance;
        done = true;
      }
    } else if (lambda > kMaxDamping) {
      // No descent is possible even for vanishing steps.
      summary.termination = Termination::kStepTolerance;
      done = true;
    }
  }

  summary.final_objective = objective;
  result.parameters = std::move(x);
  return result;
}

}  // namespace focuscal
