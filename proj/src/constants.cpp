#include "patree/constants.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "patree/errors.hpp"

namespace patree {

namespace {

constexpr int kBracketBudget = 200;
constexpr double kRootTol = 1e-12;
constexpr double kGoldenWidth = 1e-7;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Eval {
  double m = kInf;
  double mp = kInf;
  std::size_t n = 0;
  bool finite() const { return std::isfinite(m); }
};

Eval eval_m(FunctionSamples& fs, double lambda, const TruncationConfig& cfg) {
  try {
    const auto p = laplace_pair(fs, lambda, cfg, cfg.tail_handoff);
    return {p.m, p.mprime_neg, p.n_used};
  } catch (const DivergentSeries&) {
    return {};
  }
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

MalthusianRoot solve_malthusian(FunctionSamples& fs, const TruncationConfig& cfg) {
  cfg.validate();
  double lo = 1.0, hi = 1.0;
  Eval e_lo, e_hi;
  Eval e = eval_m(fs, 1.0, cfg);
  MalthusianRoot root;
  auto exact = [&root](double x, const Eval& ev) {
    if (!ev.finite() || std::fabs(ev.m - 1.0) >= kRootTol) return false;
    root.lambda = root.lo = root.hi = x;
    root.residual = std::fabs(ev.m - 1.0);
    root.mprime_neg = ev.mp;
    root.n_used = ev.n;
    return true;
  };
  if (exact(1.0, e)) return root;
  if (!e.finite() || e.m > 1.0) {
    e_lo = e;
    int i = 0;
    for (;;) {
      hi *= 2.0;
      e_hi = eval_m(fs, hi, cfg);
      if (exact(hi, e_hi)) return root;
      if (e_hi.finite() && e_hi.m < 1.0) break;
      lo = hi;
      e_lo = e_hi;
      if (++i >= kBracketBudget)
        throw NoMalthusianRoot("m(lambda) stays above 1 or infinite up to lambda=" + fmt(hi));
    }
  } else {
    e_hi = e;
    int i = 0;
    for (;;) {
      lo *= 0.5;
      e_lo = eval_m(fs, lo, cfg);
      if (exact(lo, e_lo)) return root;
      if (!e_lo.finite() || e_lo.m > 1.0) break;
      hi = lo;
      e_hi = e_lo;
      if (++i >= kBracketBudget)
        throw NoMalthusianRoot("m(lambda) stays below 1 down to lambda=" + fmt(lo));
    }
  }

  // Safeguarded Newton on 1 - 1/m(lambda), which is exactly linear for affine f.
  double x = hi;
  Eval ex = e_hi;
  int it = 0;
  for (; it < 400; ++it) {
    if (std::fabs(ex.m - 1.0) < kRootTol) break;
    double next = x + ex.m * (ex.m - 1.0) / ex.mp;
    if (!(next > lo && next < hi)) next = (hi > 4.0 * lo) ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    if (next <= lo || next >= hi) break;  // bracket exhausted at machine resolution
    x = next;
    ex = eval_m(fs, x, cfg);
    if (!ex.finite() || ex.m > 1.0) {
      lo = x;
      e_lo = ex;
    } else {
      hi = x;
      e_hi = ex;
    }
    if (!ex.finite()) {
      x = hi;
      ex = e_hi;
    }
  }
  if (!e_lo.finite() && std::fabs(ex.m - 1.0) >= kRootTol && (hi - lo) <= 1e-14 * hi)
    throw NoMalthusianRoot("m(lambda) jumps from infinity to " + fmt(e_hi.m) +
                           " < 1 at the convergence abscissa near lambda=" + fmt(hi));
  if (!ex.finite())
    throw NoMalthusianRoot("no finite m(lambda) > 1 found near lambda=" + fmt(hi));
  root.lambda = x;
  root.lo = lo;
  root.hi = hi;
  root.iterations = it;
  root.residual = std::fabs(ex.m - 1.0);
  root.mprime_neg = ex.mp;
  root.n_used = ex.n;
  return root;
}

double malthusian(const AttachmentFunction& fn, const TruncationConfig& cfg) {
  FunctionSamples fs(fn);
  return solve_malthusian(fs, cfg).lambda;
}

DepthSolution depth_constant(const AttachmentFunction& fn, const TruncationConfig& cfg) {
  FunctionSamples fs(fn);
  const MalthusianRoot r = solve_malthusian(fs, cfg);
  if (r.mprime_neg > 1.0 / cfg.rel_tol || !std::isfinite(r.mprime_neg))
    throw DegenerateDerivative("-m'(lambda_f) = " + fmt(r.mprime_neg) + " exceeds 1/rel_tol");
  DepthSolution d;
  d.lambda_f = r.lambda;
  d.q_f = r.lambda * r.mprime_neg;
  d.c_f = 1.0 / d.q_f;
  d.lambda_lo = r.lo;
  d.lambda_hi = r.hi;
  d.iterations = r.iterations;
  d.residual = r.residual;
  d.mprime_neg = r.mprime_neg;
  d.n_used = r.n_used;
  if (cfg.safety_doubling) {
    const auto p2 = laplace_pair(fs, r.lambda, cfg, 2 * cfg.tail_handoff);
    d.q_err = std::fabs(r.lambda * p2.mprime_neg - d.q_f);
    if (d.q_err > 1e-6 * d.q_f)
      throw DegenerateDerivative("-m'(lambda_f) unstable under doubling: " + fmt(d.q_f) + " vs " +
                                 fmt(r.lambda * p2.mprime_neg));
  }
  return d;
}

double speed_objective(const AttachmentFunction& fn, double lambda, const TruncationConfig& cfg) {
  cfg.validate();
  FunctionSamples fs(fn);
  const auto p = laplace_pair(fs, lambda, cfg, cfg.tail_handoff);
  if (p.m > 1.0 + kRootTol)
    throw DomainError("speed objective needs lambda > lambda_f; m(" + fmt(lambda) + ") = " + fmt(p.m));
  return -std::log(p.m) / lambda;
}

namespace {

struct JEval {
  double j;
  double m;
  double mp;
};

JEval eval_j(FunctionSamples& fs, double lambda, const TruncationConfig& cfg) {
  const auto p = laplace_pair(fs, lambda, cfg, cfg.tail_handoff);
  return {-std::log(p.m) / lambda, p.m, p.mprime_neg};
}

// lambda^2 J'(lambda); positive left of the maximiser.
double stationarity(const JEval& e, double lambda) {
  return std::log(e.m) + lambda * e.mp / e.m;
}

}  // namespace

HeightSolution height_speed(FunctionSamples& fs, double lambda_f, const TruncationConfig& cfg) {
  HeightSolution h;
  h.lambda_f = lambda_f;

  // Geometric expansion until J has decreased over two consecutive points.
  std::vector<double> grid{lambda_f};
  std::vector<double> js{0.0};
  double step = 0.25 * lambda_f;
  int decreases = 0;
  for (int i = 0; decreases < 2; ++i) {
    if (i >= kBracketBudget)
      throw NoInteriorMaximum("J(lambda) still increasing at lambda=" + fmt(grid.back()));
    const double x = lambda_f + step;
    step *= 2.0;
    const double j = eval_j(fs, x, cfg).j;
    decreases = (j < js.back()) ? decreases + 1 : 0;
    grid.push_back(x);
    js.push_back(j);
  }
  const double upper = grid.back();

  // Coarse pre-scan on (lambda_f, upper], uniform in log(lambda - lambda_f).
  constexpr int kScan = 64;
  const double span_lo = std::log(1e-3 * (upper - lambda_f));
  const double span_hi = std::log(upper - lambda_f);
  std::vector<double> sx(kScan), sj(kScan);
  for (int i = 0; i < kScan; ++i) {
    sx[i] = lambda_f + std::exp(span_lo + (span_hi - span_lo) * i / (kScan - 1));
    sj[i] = eval_j(fs, sx[i], cfg).j;
  }
  int best = 0, maxima = 0;
  for (int i = 0; i < kScan; ++i) {
    if (sj[i] > sj[best]) best = i;
    const bool left = (i == 0) || sj[i] > sj[i - 1];
    const bool right = (i == kScan - 1) || sj[i] >= sj[i + 1];
    if (left && right) ++maxima;
  }
  if (best == kScan - 1)
    throw NoInteriorMaximum("J(lambda) maximal at the scan boundary lambda=" + fmt(sx[best]));
  h.local_maxima = maxima;
  if (maxima > 1)
    h.warnings.push_back("J has " + std::to_string(maxima) +
                         " local maxima on the coarse scan; using the largest");

  // Golden-section refinement. J is flat at its maximum, so the bracket is
  // only narrowed to where J differences are still resolvable; the
  // stationarity polish below finishes the job.
  double a = best == 0 ? lambda_f : sx[best - 1];
  double b = sx[best + 1];
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double jc = eval_j(fs, c, cfg).j, jd = eval_j(fs, d, cfg).j;
  while (b - a > kGoldenWidth * b) {
    if (jc >= jd) {
      b = d;
      d = c;
      jd = jc;
      c = b - gr * (b - a);
      jc = eval_j(fs, c, cfg).j;
    } else {
      a = c;
      c = d;
      jc = jd;
      d = a + gr * (b - a);
      jd = eval_j(fs, d, cfg).j;
    }
  }
  double x = 0.5 * (a + b);

  // J is flat at its maximum, so polish on the stationarity condition.
  {
    double w = std::max(b - a, 1e-12 * x);
    double l = x - w, r = x + w;
    JEval el = eval_j(fs, l, cfg), er = eval_j(fs, r, cfg);
    double fl = stationarity(el, l), fr = stationarity(er, r);
    for (int k = 0; k < 20 && fl * fr > 0.0; ++k) {
      w *= 4.0;
      l = std::max(x - w, 0.5 * (x + lambda_f));
      r = x + w;
      el = eval_j(fs, l, cfg);
      er = eval_j(fs, r, cfg);
      fl = stationarity(el, l);
      fr = stationarity(er, r);
    }
    if (fl > 0.0 && fr < 0.0) {
      int side = 0;
      for (int k = 0; k < 100 && r - l > 1e-15 * r; ++k) {
        const double m = (l * fr - r * fl) / (fr - fl);
        const JEval em = eval_j(fs, m, cfg);
        const double fm = stationarity(em, m);
        if (fm == 0.0) {
          l = r = m;
          break;
        }
        if (fm > 0.0) {
          l = m;
          fl = fm;
          if (side == -1) fr *= 0.5;
          side = -1;
        } else {
          r = m;
          fr = fm;
          if (side == 1) fl *= 0.5;
          side = 1;
        }
      }
      x = std::fabs(fl) < std::fabs(fr) ? l : r;
    } else {
      h.warnings.push_back("stationarity condition has no sign change near the golden-section maximiser");
    }
  }

  const JEval ex = eval_j(fs, x, cfg);
  h.lambda_star = x;
  h.kappa = ex.j;
  h.r_f = lambda_f * h.kappa;
  h.c_star = 1.0 / h.r_f;
  h.stationarity_residual = std::fabs(stationarity(ex, x));
  if (!(h.lambda_star > lambda_f && h.kappa > 0.0))
    throw NoInteriorMaximum("maximiser " + fmt(x) + " not above lambda_f=" + fmt(lambda_f));
  return h;
}

HeightSolution height_speed(const AttachmentFunction& fn, const TruncationConfig& cfg) {
  FunctionSamples fs(fn);
  const MalthusianRoot r = solve_malthusian(fs, cfg);
  return height_speed(fs, r.lambda, cfg);
}

double lambert_w(double x) {
  constexpr double em1 = 0.36787944117144233;  // 1/e
  if (std::isnan(x) || x < -em1 - 1e-17) throw DomainError("lambert_w needs x >= -1/e, got " + fmt(x));
  if (x == 0.0) return 0.0;
  if (x <= -em1) return -1.0;
  if (std::isinf(x)) return x;

  double w;
  if (x < -0.25) {
    const double p = std::sqrt(2.0 * (std::exp(1.0) * x + 1.0));
    w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
  } else if (x < 3.0) {
    w = std::log1p(x);
    if (x > 0.5) w *= 0.75;
  } else {
    const double l1 = std::log(x);
    const double l2 = std::log(l1);
    w = l1 - l2 + l2 / l1;
  }

  if (x > 1e200) {
    // Newton on w + log w = log x avoids overflowing exp(w).
    const double lx = std::log(x);
    for (int i = 0; i < 100; ++i) {
      const double dw = (w + std::log(w) - lx) / (1.0 + 1.0 / w);
      w -= dw;
      if (std::fabs(dw) <= 1e-16 * std::fabs(w)) break;
    }
    return w;
  }
  for (int i = 0; i < 100; ++i) {
    const double ew = std::exp(w);
    const double f = w * ew - x;
    const double wp1 = w + 1.0;
    const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
    const double dw = f / denom;
    w -= dw;
    if (std::fabs(dw) <= 4e-16 * std::fabs(w) || !std::isfinite(dw)) break;
  }
  return w;
}

std::pair<DepthSolution, HeightSolution> affine_closed_form(double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw DomainError("affine closed form needs delta > 0, got " + fmt(delta));
  DepthSolution d;
  d.lambda_f = delta + 1.0;
  d.q_f = (delta + 1.0) / delta;
  d.c_f = delta / (delta + 1.0);
  d.lambda_lo = d.lambda_hi = d.lambda_f;
  d.mprime_neg = d.q_f / d.lambda_f;
  HeightSolution h;
  const double w = lambert_w(1.0 / (delta * std::exp(1.0)));
  h.lambda_f = d.lambda_f;
  h.kappa = w;
  h.lambda_star = 1.0 + 1.0 / w;
  h.r_f = (delta + 1.0) * w;
  h.c_star = 1.0 / h.r_f;
  return {d, h};
}

}  // namespace patree
