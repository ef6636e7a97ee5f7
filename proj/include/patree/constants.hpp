#pragma once

// Malthusian parameter, depth constant c_f = 1/Q_f and the height constant
// c*_f = 1/(lambda_f * kappa_f) with kappa_f = sup_{lambda > lambda_f} J(lambda),
// J(lambda) = -log m(lambda) / lambda.

#include <string>
#include <utility>
#include <vector>

#include "patree/attach.hpp"
#include "patree/series.hpp"

namespace patree {

struct DepthSolution {
  double lambda_f = 0.0;
  double q_f = 0.0;
  double c_f = 0.0;
  double lambda_lo = 0.0;
  double lambda_hi = 0.0;
  int iterations = 0;
  double residual = 0.0;      // |m(lambda_f) - 1|
  double mprime_neg = 0.0;    // -m'(lambda_f)
  double q_err = 0.0;         // safety-doubling estimate for q_f
  std::size_t n_used = 0;
};

struct HeightSolution {
  double lambda_f = 0.0;
  double lambda_star = 0.0;
  double kappa = 0.0;
  double r_f = 0.0;
  double c_star = 0.0;
  double stationarity_residual = 0.0;  // |log m + lambda * (-m')/m| at lambda_star
  int local_maxima = 1;                // seen on the coarse pre-scan
  std::vector<std::string> warnings;
};

struct MalthusianRoot {
  double lambda = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  int iterations = 0;
  double residual = 0.0;
  double mprime_neg = 0.0;
  std::size_t n_used = 0;
};

MalthusianRoot solve_malthusian(FunctionSamples& fs, const TruncationConfig& cfg);
double malthusian(const AttachmentFunction& fn, const TruncationConfig& cfg = {});
DepthSolution depth_constant(const AttachmentFunction& fn, const TruncationConfig& cfg = {});

/// J(lambda). Throws DomainError when lambda lies below lambda_f, detected as
/// m(lambda) > 1.
double speed_objective(const AttachmentFunction& fn, double lambda, const TruncationConfig& cfg = {});

HeightSolution height_speed(const AttachmentFunction& fn, const TruncationConfig& cfg = {});
/// Same, reusing samples and a known Malthusian parameter.
HeightSolution height_speed(FunctionSamples& fs, double lambda_f, const TruncationConfig& cfg);

/// Principal branch of the Lambert W function.
double lambert_w(double x);

std::pair<DepthSolution, HeightSolution> affine_closed_form(double delta);

}  // namespace patree
