#pragma once

// Product weights A_n(lambda) = prod_{i<n} f(i)/(f(i)+lambda), the Laplace
// transform m(lambda) = sum_{n>=1} A_n, its derivative and tail sums.
//
// Terms are summed directly until they are negligible or until the per-step
// decay log(1+lambda/f(n)) becomes small; past that point the remainder is
// integrated as a continuum (midpoint Euler-Maclaurin in log-index).

#include <cstddef>
#include <functional>
#include <vector>

#include "patree/attach.hpp"

namespace patree {

struct TruncationConfig {
  double rel_tol = 1e-12;
  double abs_tol = 1e-300;
  std::size_t max_terms = 10'000'000;
  bool safety_doubling = true;
  /// Index after which slowly decaying series switch to the continuum tail.
  std::size_t tail_handoff = 65536;

  void validate() const;
};

struct SeriesResult {
  double value = 0.0;
  std::size_t n_used = 0;
  double err_estimate = 0.0;
  bool converged = true;
};

struct WeightPrefix {
  std::vector<double> log_A;  // log_A[n] for n = 0..N
  double lambda = 0.0;
  double tail_mass = 0.0;     // estimate of sum_{n>N} A_n
  double tail_err = 0.0;
};

/// Cached values f(0), f(1), ... of one attachment function. Not thread safe;
/// each caller owns its own instance.
class FunctionSamples {
 public:
  explicit FunctionSamples(AttachmentFunction fn) : fn_(std::move(fn)) {}

  const AttachmentFunction& fn() const { return fn_; }
  double operator[](std::size_t k) {
    if (k >= values_.size()) extend(k);
    return values_[k];
  }

 private:
  void extend(std::size_t k);
  AttachmentFunction fn_;
  std::vector<double> values_;
};

/// Directly summed part of the series at one lambda.
struct DirectTable {
  double lambda = 0.0;
  std::vector<double> A;      // A_n for n = 0..N (left empty by laplace_pair)
  std::size_t N = 0;          // last directly summed index
  double A_last = 1.0;        // A_N
  bool has_tail = false;      // true when terms n > N are left to the continuum tail
  bool hit_max_terms = false;
};

/// log A_n for n = 0..N, accumulated in log space.
std::vector<double> log_weights(FunctionSamples& fs, const DirectTable& t);

/// Continuum tail for sums sum_{n>N} A_n P(G_n), where G_n = sum_{j<n} g(j)
/// is a vector of cumulative sums.
struct TailSpec {
  int dim = 0;
  int n_out = 1;
  /// g(j) at real index j. G holds the running state at the midpoint x = j + 1/2,
  /// i.e. approximately G_j + g(j)/2.
  std::function<void(double j, const double* G, double* dG)> increment;
  /// Integrand monomials at state G (absolute values, not relative to N).
  std::function<void(const double* G, double* out)> outputs;
};

/// Throws DivergentSeries when m(lambda) is infinite, judged by the
/// asymptotic per-step exponent x*log(1+lambda/f(x)) at very large x.
void check_convergence_abscissa(const AttachmentFunction& fn, double lambda);

DirectTable build_direct_table(FunctionSamples& fs, double lambda, const TruncationConfig& cfg,
                               std::size_t handoff);

/// Returns sum_{n>=N+1} A_n * outputs(G_n) for each output, given
/// G_{N+1} = G_start. scale[i] is the size of the matching direct partial sum
/// and sets the stopping threshold. Returns zeros when the table has no tail.
std::vector<double> tail_moments(FunctionSamples& fs, const DirectTable& t, const TailSpec& spec,
                                 const std::vector<double>& G_start,
                                 const std::vector<double>& scale);

/// m(lambda) and -m'(lambda) from one table.
struct LaplacePair {
  double m = 0.0;
  double mprime_neg = 0.0;
  std::size_t n_used = 0;
  bool tail = false;
};
LaplacePair laplace_pair(FunctionSamples& fs, double lambda, const TruncationConfig& cfg,
                         std::size_t handoff);

WeightPrefix product_weights(const AttachmentFunction& fn, double lambda, std::size_t N);
SeriesResult laplace_m(const AttachmentFunction& fn, double lambda, const TruncationConfig& cfg = {});
SeriesResult laplace_m_prime_neg(const AttachmentFunction& fn, double lambda,
                                 const TruncationConfig& cfg = {});
/// r_i = sum_{n>i} A_n for i = 0..i_max, including the prefix's tail_mass.
std::vector<double> tails(const WeightPrefix& weights, std::size_t i_max);
/// Truncated prefix with tail_mass filled in from the series tail.
WeightPrefix weights_with_tail(const AttachmentFunction& fn, double lambda,
                               const TruncationConfig& cfg = {});
double telescoping_residual(const AttachmentFunction& fn, double lambda, std::size_t m);

}  // namespace patree
