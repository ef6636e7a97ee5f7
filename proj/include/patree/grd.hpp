#pragma once

// Diagnostics along the multiplicative interpolation f_theta = g^(1-theta) f^theta
// between two GRD-ordered attachment functions: gauge normalisation, product
// weight profiles, the quadratic tail form of dQ/dtheta, the tilted root law
// used for the height constant, and path-level monotonicity checks.

#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "patree/attach.hpp"
#include "patree/series.hpp"

namespace patree {

constexpr std::size_t kFullTable = std::numeric_limits<std::size_t>::max();

enum class ProfileMode { DepthGauged, HeightTilted };

/// Per-index arrays for k = 0..K. Totals cover the whole series including the
/// part beyond K.
struct ProfileTable {
  ProfileMode mode = ProfileMode::DepthGauged;
  double param = 0.0;   // theta or s
  double lambda = 1.0;
  double a_prime = 0.0;
  double mass = 1.0;    // m(lambda)
  std::size_t K = 0;
  std::size_t n_used = 0;
  bool tail = false;

  std::vector<double> alpha;    // 1/(f(k) + lambda)
  std::vector<double> r;        // sum_{n>k} A_n
  std::vector<double> w;        // alpha_k r_k (depth) or lambda c_k T_k (height)
  std::vector<double> b;        // log h(k) + a'
  std::vector<double> s;        // sum_{j<k} alpha_j
  std::vector<double> W;        // sum_{j>=k} alpha_j r_j
  std::vector<double> C;        // s_k + W_k / r_k (depth mode)

  // Height mode.
  std::vector<double> T;        // P(N > k)
  std::vector<double> c;
  std::vector<double> d;        // 1/lambda - c_k
  std::vector<double> q;        // P(N = k+1 | N > k)
  std::vector<double> mu;       // E[S | N > k]
  std::vector<double> M;        // mu_k - E[S]
  std::vector<double> M_tilde;  // M_k - d_k
  std::vector<double> R_cond;   // E[sum_{j=k+1}^{N-1} c_j | N > k+1], k = 0..K-1

  double weight_total = 0.0;    // sum_k w_k
  double bw_total = 0.0;        // sum_k b_k w_k
  double abs_bw_total = 0.0;    // sum_k |b_k| w_k
  double mean_S = 0.0;          // E[S] (height mode)
};

struct QPrime {
  double value_double_sum = 0.0;
  double value_Ck_form = 0.0;   // sum_k b_k w_k (C_k + alpha_k)
  double ck_sum = 0.0;          // sum_k b_k w_k C_k
  double diagonal = 0.0;        // sum_k b_k alpha_k w_k
  double mismatch = 0.0;        // relative gap between the two values
};

struct GaugedFamily {
  AttachmentFunction g = AttachmentFunction::constant(1.0);
  AttachmentFunction f = AttachmentFunction::constant(1.0);
  double theta = 0.0;
  double lambda_theta = 0.0;
  AttachmentFunction f_theta = AttachmentFunction::constant(1.0);
  AttachmentFunction f_star = AttachmentFunction::constant(1.0);  // f_theta / lambda_theta
  double u_theta = 0.0;       // sum_k log h(k) w_k
  double q_theta = 0.0;       // sum_k w_k
  double a_prime = 0.0;       // -u_theta / q_theta
  double malthus_residual = 0.0;    // |m_{f_star}(1) - 1|
  double centering_residual = 0.0;  // |sum b_k w_k| / sum |b_k| w_k, summed over k
  std::shared_ptr<const ProfileTable> table;  // full depth-gauged table
  QPrime q_prime;                             // both representations, unchecked
};

/// Throws CenteringFailure when the k-side centering sum disagrees with the
/// n-side construction beyond 1e-8, or the gauge misses the root by 1e-10.
GaugedFamily gauge(const AttachmentFunction& g, const AttachmentFunction& f, double theta,
                   const TruncationConfig& cfg = {});

/// The gauged table cut to k <= K.
ProfileTable profile(const GaugedFamily& family, std::size_t K = kFullTable);

/// dQ_theta/dtheta. Throws RepresentationMismatch when the two forms differ by
/// more than 1e-8 relative.
QPrime q_prime(const GaugedFamily& family);
QPrime q_prime(const AttachmentFunction& g, const AttachmentFunction& f, double theta,
               std::size_t K = kFullTable, const TruncationConfig& cfg = {});

/// Root-law profile of f_s at lambda, with b_k using the depth gauge a'(s).
/// Throws DomainError when lambda < lambda_s.
ProfileTable height_profile(const GaugedFamily& family, double lambda, std::size_t K = kFullTable,
                            const TruncationConfig& cfg = {});
ProfileTable height_profile(const AttachmentFunction& g, const AttachmentFunction& f, double s,
                            double lambda, std::size_t K = kFullTable,
                            const TruncationConfig& cfg = {});

double score_mean_U(const ProfileTable& p);
double weighted_mean_bbar(const ProfileTable& p);
double bbar_lambda_derivative(const ProfileTable& p);

double score_mean_U(const AttachmentFunction& g, const AttachmentFunction& f, double s,
                    double lambda, std::size_t K = kFullTable, const TruncationConfig& cfg = {});
double weighted_mean_bbar(const AttachmentFunction& g, const AttachmentFunction& f, double s,
                          double lambda, std::size_t K = kFullTable,
                          const TruncationConfig& cfg = {});
double bbar_lambda_derivative(const AttachmentFunction& g, const AttachmentFunction& f, double s,
                              double lambda, std::size_t K = kFullTable,
                              const TruncationConfig& cfg = {});

struct OneStepReport {
  std::vector<double> residuals;            // q_k R_{k+1} - (c_k - c_{k+1})
  std::vector<double> increment_residuals;  // (mu_{k+1} - mu_k) - q_k R_{k+1}
  double max_increment_residual = 0.0;
  std::optional<std::size_t> K0;            // first index after which every residual is >= 0
};

OneStepReport one_step_report(const ProfileTable& p);
OneStepReport one_step_report(const AttachmentFunction& g, const AttachmentFunction& f, double s,
                              double lambda, std::size_t K = kFullTable,
                              const TruncationConfig& cfg = {});

struct ChebyshevBound {
  double lower_bound = 0.0;
  double actual = 0.0;
  bool holds = true;
};

/// Throws PreconditionViolation when a is not centred against w, a is not
/// nondecreasing, c is not nondecreasing from K0 on, or |c_k| > C_bound below K0.
ChebyshevBound chebyshev_bound(const std::vector<double>& a, const std::vector<double>& c,
                               const std::vector<double>& w, std::size_t K0, double C_bound);

struct WeightDecay {
  double max_ratio = 0.0;  // max of log w_k / k^(1-rho) over the upper half of the table
  bool decays = false;
};

WeightDecay weight_decay(const ProfileTable& p, double rho);

struct PathPoint {
  double param = 0.0;
  double lambda = 0.0;
  double lambda_star = 0.0;     // height paths
  double value = 0.0;           // Q_theta or R_s
  double constant = 0.0;        // c_theta = 1/Q or c*_s = 1/R
  double derivative = 0.0;      // q_prime or the two-point R'_s
  double derivative_alt = 0.0;  // C_k form or the b-bar form
  double derivative_fd = 0.0;   // finite-difference slope
  double centering_residual = 0.0;
  double representation_residual = 0.0;
  double fd_residual = 0.0;
  bool refined = false;         // inserted by local refinement
  std::string error;            // non-empty when the solver failed at this point
};

struct PathVerdict {
  bool monotone = true;
  std::size_t index = 0;    // first violating point when not monotone
  double magnitude = 0.0;
};

struct PathReport {
  std::vector<PathPoint> points;
  PathVerdict verdict;
  std::size_t failures = 0;
  bool outside_rv = false;  // some endpoint lacks a sublinear regular-variation index
  std::vector<std::string> warnings;
};

constexpr double kPathSlack = 1e-9;

/// Evenly spaced grid on [0, 1].
std::vector<double> unit_grid(std::size_t points);

PathReport depth_path(const AttachmentFunction& g, const AttachmentFunction& f,
                      const std::vector<double>& grid, const TruncationConfig& cfg = {});
PathReport height_path(const AttachmentFunction& g, const AttachmentFunction& f,
                       const std::vector<double>& grid, const TruncationConfig& cfg = {});

}  // namespace patree
