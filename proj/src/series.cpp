#include "patree/series.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "patree/errors.hpp"
#include "patree/numeric.hpp"

namespace patree {

namespace {

constexpr double kNegligible = 1e-30;     // direct terms below this fraction of the sum are dropped
constexpr double kHandoffDecay = 1e-3;    // per-step decay below which the continuum tail takes over
constexpr double kTailStop = 1e-18;
constexpr double kFarIndex = 1e300;

void check_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw DomainError("lambda must be positive and finite, got " + std::to_string(lambda));
}

// log(1 + lambda/f(x)) evaluated without forming f(x).
double decay_at(const AttachmentFunction& fn, double log_lambda, double x) {
  return std::log1p(std::exp(log_lambda - fn.log_at(x)));
}

}  // namespace

void TruncationConfig::validate() const {
  if (!(rel_tol > 0.0)) throw DomainError("rel_tol must be positive");
  if (!(abs_tol > 0.0)) throw DomainError("abs_tol must be positive");
  if (max_terms < 8) throw DomainError("max_terms must be at least 8");
  if (tail_handoff < 8) throw DomainError("tail_handoff must be at least 8");
}

void FunctionSamples::extend(std::size_t k) {
  const std::size_t want = std::max(k + 1, values_.size() * 2);
  values_.reserve(want);
  for (std::size_t i = values_.size(); i < want; ++i) values_.push_back(fn_(i));
}

void check_convergence_abscissa(const AttachmentFunction& fn, double lambda) {
  check_lambda(lambda);
  double lf;
  try {
    lf = fn.log_at(kFarIndex);
  } catch (const NonPositiveValue&) {
    return;  // value errors surface on evaluation at integer points
  }
  if (std::isnan(lf)) return;
  const double nu = kFarIndex * std::log1p(std::exp(std::log(lambda) - lf));
  if (!(nu > 1.0))
    throw DivergentSeries("m(lambda) diverges at lambda=" + std::to_string(lambda) +
                          ": terms decay no faster than n^-" + std::to_string(nu));
}

namespace {

// Walks n = 1, 2, ... applying the stopping rules; visit(n, A_n, c_{n-1})
// sees every retained term, with c_j = 1/(f(j)+lambda).
template <class Visit>
DirectTable walk_terms(FunctionSamples& fs, double lambda, const TruncationConfig& cfg,
                       std::size_t handoff, Visit&& visit) {
  check_convergence_abscissa(fs.fn(), lambda);
  DirectTable t;
  t.lambda = lambda;
  double sum = 0.0;  // only steers the stopping rule
  double a = 1.0;
  double f = fs[0];
  for (std::size_t n = 1;; ++n) {
    const double c = 1.0 / (f + lambda);
    a *= f * c;
    visit(n, a, c);
    sum += a;
    t.N = n;
    t.A_last = a;
    if (a <= kNegligible * sum || a < cfg.abs_tol) return t;
    f = fs[n];
    if (n >= handoff && lambda <= kHandoffDecay * f) {
      t.has_tail = true;
      return t;
    }
    if (n >= cfg.max_terms) {
      t.has_tail = true;
      t.hit_max_terms = true;
      return t;
    }
  }
}

}  // namespace

DirectTable build_direct_table(FunctionSamples& fs, double lambda, const TruncationConfig& cfg,
                               std::size_t handoff) {
  std::vector<double> A{1.0};
  A.reserve(std::min<std::size_t>(handoff + 2, 1 << 20));
  DirectTable t = walk_terms(fs, lambda, cfg, handoff,
                             [&A](std::size_t, double a, double) { A.push_back(a); });
  t.A = std::move(A);
  return t;
}

std::vector<double> log_weights(FunctionSamples& fs, const DirectTable& t) {
  std::vector<double> la(t.N + 1);
  la[0] = 0.0;
  for (std::size_t n = 1; n <= t.N; ++n) la[n] = la[n - 1] - std::log1p(t.lambda / fs[n - 1]);
  return la;
}

std::vector<double> tail_moments(FunctionSamples& fs, const DirectTable& t, const TailSpec& spec,
                                 const std::vector<double>& G_start,
                                 const std::vector<double>& scale) {
  const int d = spec.dim;
  const int q = spec.n_out;
  std::vector<double> result(static_cast<std::size_t>(q), 0.0);
  if (!t.has_tail) return result;

  const AttachmentFunction& fn = fs.fn();
  const double log_lambda = std::log(t.lambda);
  const double n0 = static_cast<double>(t.N + 1);
  const double x0 = n0 - 0.5;
  const double L0 = std::log(t.A_last) - std::log1p(t.lambda / fs[t.N]);

  // State layout: [L - L0, G - G_start (dim), integrals (n_out)].
  const int size = 1 + d + q;
  std::vector<double> y(static_cast<std::size_t>(size), 0.0);
  std::vector<double> gabs(static_cast<std::size_t>(d)), dg(static_cast<std::size_t>(d)),
      out(static_cast<std::size_t>(q));

  auto absolute = [&](const double* rel) {
    for (int i = 0; i < d; ++i) gabs[i] = G_start[i] + rel[i];
  };

  {
    const double jq = n0 - 0.75;
    y[0] = 0.5 * decay_at(fn, log_lambda, jq);
    if (d > 0) {
      absolute(y.data() + 1);
      spec.increment(jq, gabs.data(), dg.data());
      for (int i = 0; i < d; ++i) y[1 + i] = -0.5 * dg[i];
    }
  }

  double nu_last = 0.0;
  auto deriv = [&](double tt, const std::vector<double>& s, std::vector<double>& ds) {
    const double x = x0 * std::exp(tt);
    const double j = x - 0.5;
    const double ph = decay_at(fn, log_lambda, j);
    nu_last = x * ph;
    absolute(s.data() + 1);
    if (d > 0) spec.increment(j, gabs.data(), dg.data());
    spec.outputs(gabs.data(), out.data());
    ds[0] = -x * ph;
    for (int i = 0; i < d; ++i) ds[1 + i] = x * dg[i];
    const double e = x * std::exp(s[0]);
    for (int i = 0; i < q; ++i) ds[1 + d + i] = e * out[i];
  };

  std::vector<double> scale_rel(static_cast<std::size_t>(q));
  for (int i = 0; i < q; ++i) {
    const double sc = i < static_cast<int>(scale.size()) ? std::fabs(scale[i]) : 0.0;
    scale_rel[i] = std::min(sc * std::exp(std::min(-L0, 700.0)), 1e300);
  }

  const double t_max = std::log(kFarIndex / x0);
  std::vector<double> k1(size), k2(size), k3(size), k4(size), tmp(size);
  double tt = 0.0;
  std::size_t steps = 0;
  for (;;) {
    deriv(tt, y, k1);
    const double nu = nu_last;
    // Remaining share of each output, estimated as rate / (nu - 1) against the
    // accumulated total; the loop stops once every share is negligible.
    double share = std::numeric_limits<double>::infinity();
    if (nu > 1.0) {
      share = 0.0;
      for (int i = 0; i < q; ++i) {
        const double total = std::fabs(y[1 + d + i]) + scale_rel[i];
        const double rem = std::fabs(k1[1 + d + i]) / (nu - 1.0);
        share = std::max(share, total > 0.0 ? rem / total : (rem > 0.0 ? 1.0 : 0.0));
      }
      if (share <= kTailStop) break;
    }
    if (tt >= t_max || ++steps > 20'000'000) {
      if (!(nu > 1.0))
        throw DivergentSeries("series tail does not decay at lambda=" + std::to_string(t.lambda));
      for (int i = 0; i < q; ++i) y[1 + d + i] += k1[1 + d + i] / (nu - 1.0);
      break;
    }
    // Fixed resolution while the tail still matters, then longer steps as the
    // remaining share (and with it the quadrature error) shrinks.
    double h = std::min(1.0 / 64.0, 0.25 / std::max(nu, 1e-300));
    if (share < 1.0) h = std::min(h * std::pow(1e-3 / share, 0.25), 0.5 / nu);
    for (int i = 0; i < size; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    deriv(tt + 0.5 * h, tmp, k2);
    for (int i = 0; i < size; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    deriv(tt + 0.5 * h, tmp, k3);
    for (int i = 0; i < size; ++i) tmp[i] = y[i] + h * k3[i];
    deriv(tt + h, tmp, k4);
    for (int i = 0; i < size; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    tt += h;
  }
  const double e0 = std::exp(L0);
  for (int i = 0; i < q; ++i) result[i] = y[1 + d + i] * e0;
  return result;
}

LaplacePair laplace_pair(FunctionSamples& fs, double lambda, const TruncationConfig& cfg,
                         std::size_t handoff) {
  // Blocks of plain sums feed the compensated totals.
  CompensatedSum m, mp;
  double S = 0.0, bm = 0.0, bmp = 0.0;
  const DirectTable t = walk_terms(fs, lambda, cfg, handoff, [&](std::size_t n, double a, double c) {
    S += c;
    bm += a;
    bmp += a * S;
    if ((n & 63) == 0) {
      m += bm;
      mp += bmp;
      bm = bmp = 0.0;
    }
  });
  m += bm;
  mp += bmp;
  LaplacePair p;
  p.n_used = t.N;
  p.tail = t.has_tail;
  if (t.has_tail) {
    const AttachmentFunction& fn = fs.fn();
    TailSpec spec;
    spec.dim = 1;
    spec.n_out = 2;
    spec.increment = [&fn, lambda](double j, const double*, double* dG) {
      dG[0] = 1.0 / (fn.at(j) + lambda);
    };
    spec.outputs = [](const double* G, double* o) {
      o[0] = 1.0;
      o[1] = G[0];
    };
    const double S_next = S + 1.0 / (fs[t.N] + lambda);
    const auto tail = tail_moments(fs, t, spec, {S_next}, {m.value(), mp.value()});
    m += tail[0];
    mp += tail[1];
  }
  p.m = m.value();
  p.mprime_neg = mp.value();
  return p;
}

namespace {

// Last-term bound for a series whose terms decay at least geometrically.
double last_term_bound(const DirectTable& t) {
  if (t.N < 2) return t.A[t.N];
  const double ratio = t.A[t.N] / t.A[t.N - 1];
  if (!(ratio < 1.0)) return t.A[t.N];
  return t.A[t.N] * ratio / (1.0 - ratio);
}

template <class Pick>
SeriesResult series_value(const AttachmentFunction& fn, double lambda, const TruncationConfig& cfg,
                          Pick pick) {
  cfg.validate();
  check_lambda(lambda);
  FunctionSamples fs(fn);
  const LaplacePair p = laplace_pair(fs, lambda, cfg, cfg.tail_handoff);
  SeriesResult r;
  r.value = pick(p);
  r.n_used = p.n_used;
  if (p.tail && cfg.safety_doubling) {
    const LaplacePair p2 = laplace_pair(fs, lambda, cfg, 2 * cfg.tail_handoff);
    r.err_estimate = std::fabs(pick(p2) - r.value);
  } else if (p.tail) {
    r.err_estimate = r.value * kHandoffDecay * kHandoffDecay;
  } else {
    const DirectTable t = build_direct_table(fs, lambda, cfg, cfg.tail_handoff);
    r.err_estimate = last_term_bound(t) * std::max(1.0, std::fabs(r.value));
  }
  r.converged = r.err_estimate <= std::max(cfg.rel_tol * std::fabs(r.value), cfg.abs_tol) * 1e4;
  return r;
}

}  // namespace

SeriesResult laplace_m(const AttachmentFunction& fn, double lambda, const TruncationConfig& cfg) {
  return series_value(fn, lambda, cfg, [](const LaplacePair& p) { return p.m; });
}

SeriesResult laplace_m_prime_neg(const AttachmentFunction& fn, double lambda,
                                 const TruncationConfig& cfg) {
  return series_value(fn, lambda, cfg, [](const LaplacePair& p) { return p.mprime_neg; });
}

WeightPrefix product_weights(const AttachmentFunction& fn, double lambda, std::size_t N) {
  check_lambda(lambda);
  if (N < 1) throw DomainError("product_weights needs N >= 1");
  WeightPrefix w;
  w.lambda = lambda;
  w.log_A.resize(N + 1);
  w.log_A[0] = 0.0;
  for (std::size_t n = 1; n <= N; ++n) w.log_A[n] = w.log_A[n - 1] - std::log1p(lambda / fn(n - 1));
  return w;
}

WeightPrefix weights_with_tail(const AttachmentFunction& fn, double lambda,
                               const TruncationConfig& cfg) {
  cfg.validate();
  FunctionSamples fs(fn);
  const DirectTable t = build_direct_table(fs, lambda, cfg, cfg.tail_handoff);
  WeightPrefix w;
  w.lambda = lambda;
  w.log_A = log_weights(fs, t);
  if (t.has_tail) {
    TailSpec spec;
    spec.dim = 0;
    spec.n_out = 1;
    spec.increment = [](double, const double*, double*) {};
    spec.outputs = [](const double*, double* o) { o[0] = 1.0; };
    CompensatedSum direct;
    for (std::size_t n = 1; n <= t.N; ++n) direct += t.A[n];
    w.tail_mass = tail_moments(fs, t, spec, {}, {direct.value()})[0];
    w.tail_err = w.tail_mass * kHandoffDecay * kHandoffDecay;
  } else {
    w.tail_mass = 0.0;
    w.tail_err = last_term_bound(t);
  }
  return w;
}

std::vector<double> tails(const WeightPrefix& weights, std::size_t i_max) {
  const std::size_t N = weights.log_A.size() - 1;
  if (i_max > N) throw DomainError("tails: i_max beyond the weight prefix");
  std::vector<double> r(N + 1);
  CompensatedSum acc;
  acc += weights.tail_mass;
  r[N] = acc.value();
  for (std::size_t i = N; i-- > 0;) {
    acc += std::exp(weights.log_A[i + 1]);
    r[i] = acc.value();
  }
  r.resize(i_max + 1);
  return r;
}

double telescoping_residual(const AttachmentFunction& fn, double lambda, std::size_t m) {
  check_lambda(lambda);
  CompensatedSum lhs;
  double A = 1.0;
  for (std::size_t n = 0; n <= m; ++n) {
    const double f = fn(n);
    lhs += lambda / (f + lambda) * A;
    A *= f / (f + lambda);
  }
  return std::fabs(lhs.value() - (1.0 - A));
}

}  // namespace patree
