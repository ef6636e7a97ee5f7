#include "patree/grd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "patree/constants.hpp"
#include "patree/errors.hpp"
#include "patree/numeric.hpp"
#include "patree/parallel.hpp"

namespace patree {

namespace {

constexpr double kMalthusTol = 1e-10;
constexpr double kCenteringTol = 1e-8;
constexpr double kRepresentationTol = 1e-8;
constexpr double kDepthFdStep = 1e-4;
constexpr double kLambdaSlack = 1e-12;

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

double log_h(const AttachmentFunction& g, const AttachmentFunction& f, std::size_t k) {
  return f.log_value(k) - g.log_value(k);
}

struct Built {
  ProfileTable p;
  QPrime qp;
};

// Sums beyond the direct table, all of the form sum_{n>N} A_n P(G_n).
struct TailSums {
  double r = 0.0;   // r_N
  double Sc = 0.0;  // sum_{k>N} c_k r_k
  double P = 0.0;   // sum_{k>N} b_k c_k r_k
  double Pa = 0.0;  // sum_{k>N} |b_k| c_k r_k
  double X = 0.0;   // double-sum terms with j > N
  double Y = 0.0;   // sum_{k>N} b_k c_k r_k (s_k + c_k)
  double Z = 0.0;   // sum_{k>N} b_k c_k W_k
  double V = 0.0;   // sum_{n>N} A_n S_n
  double D = 0.0;   // sum_{k>N} b_k c_k^2 r_k
};

Built build(FunctionSamples& fs, const DirectTable& t, const AttachmentFunction& g,
            const AttachmentFunction& f, double ap, ProfileMode mode, double param) {
  const double lam = t.lambda;
  const std::size_t N = t.N;
  const std::vector<double>& A = t.A;

  std::vector<double> c(N + 1), b(N + 1), s(N + 2), B(N + 2);
  s[0] = B[0] = 0.0;
  for (std::size_t k = 0; k <= N; ++k) {
    c[k] = 1.0 / (fs[k] + lam);
    b[k] = log_h(g, f, k) + ap;
    s[k + 1] = s[k] + c[k];
    B[k + 1] = B[k] + b[k] * c[k];
  }

  TailSums ts;
  if (t.has_tail) {
    double mass = 0.0, S1 = 0.0, Bab = 0.0, BabS = 0.0, ba = 0.0;
    for (std::size_t n = 1; n <= N; ++n) {
      ba += std::fabs(b[n - 1]) * c[n - 1];
      mass += A[n];
      S1 += A[n] * s[n];
      Bab += A[n] * ba;
      BabS += A[n] * ba * s[n];
    }
    const AttachmentFunction& fn = fs.fn();
    TailSpec spec;
    spec.dim = 9;
    spec.n_out = 9;
    spec.increment = [&](double j, const double* G, double* dG) {
      const double cj = 1.0 / (fn.at(j) + lam);
      const double bj = f.log_at(j) - g.log_at(j) + ap;
      dG[0] = cj;
      dG[1] = bj * cj;
      dG[2] = bj * cj;
      dG[3] = cj;
      dG[4] = std::fabs(bj) * cj;
      dG[5] = cj * (G[1] + bj * G[0] + bj * cj);
      dG[6] = bj * cj * (G[0] + 0.5 * cj);
      dG[7] = cj * (G[2] + 0.5 * bj * cj);
      dG[8] = bj * cj * cj;
    };
    spec.outputs = [](const double* G, double* o) {
      o[0] = 1.0;
      o[1] = G[3];
      o[2] = G[2];
      o[3] = G[4];
      o[4] = G[5];
      o[5] = G[6];
      o[6] = G[7];
      o[7] = G[0];
      o[8] = G[8];
    };
    const std::vector<double> start{s[N + 1], B[N + 1], 0, 0, 0, 0, 0, 0, 0};
    const std::vector<double> scale{mass, S1, Bab, Bab, BabS, BabS, BabS, S1, Bab};
    const auto o = tail_moments(fs, t, spec, start, scale);
    ts = {o[0], o[1], o[2], o[3], o[4], o[5], o[6], o[7], o[8]};
  } else {
    // Terms past N are below 1e-30 of the total; a geometric continuation
    // keeps r_N positive so that ratios stay defined at the end of the table.
    const double rho = fs[N] * c[N];
    ts.r = A[N] * rho / (1.0 - rho);
    ts.Sc = c[N] * ts.r * rho / (1.0 - rho);
    ts.P = b[N] * ts.Sc;
    ts.Pa = std::fabs(b[N]) * ts.Sc;
    ts.V = s[N + 1] * ts.r + ts.Sc;
  }

  std::vector<double> r(N + 1), R(N + 2), V(N + 1);
  r[N] = ts.r;
  V[N] = ts.V;
  for (std::size_t k = N; k-- > 0;) {
    r[k] = A[k + 1] + r[k + 1];
    V[k] = A[k + 1] * s[k + 1] + V[k + 1];
  }
  R[N + 1] = ts.Sc;
  for (std::size_t k = N + 1; k-- > 0;) R[k] = c[k] * r[k] + R[k + 1];
  const double m = r[0];

  CompensatedSum bw, abw, dbl, ck, diag;
  for (std::size_t k = 0; k <= N; ++k) {
    const double cr = c[k] * r[k];
    bw += b[k] * cr;
    abw += std::fabs(b[k]) * cr;
    dbl += cr * (B[k + 1] + b[k] * s[k + 1]);
    ck += b[k] * c[k] * (r[k] * s[k] + R[k]);
    diag += b[k] * c[k] * cr;
  }
  bw += ts.P;
  abw += ts.Pa;
  dbl += ts.X;
  ck += ts.Y - ts.D + ts.Z;
  diag += ts.D;

  Built out;
  ProfileTable& p = out.p;
  p.mode = mode;
  p.param = param;
  p.lambda = lam;
  p.a_prime = ap;
  p.mass = m;
  p.K = N;
  p.n_used = N;
  p.tail = t.has_tail;
  const double norm = mode == ProfileMode::DepthGauged ? 1.0 : lam / m;
  p.weight_total = R[0] * norm;
  p.bw_total = bw.value() * norm;
  p.abs_bw_total = abw.value() * norm;
  p.mean_S = R[0] / m;

  p.alpha = c;
  p.c = c;
  p.b = b;
  p.r = r;
  p.s.assign(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(N + 1));
  p.W.assign(R.begin(), R.begin() + static_cast<std::ptrdiff_t>(N + 1));
  p.w.resize(N + 1);
  p.C.resize(N + 1);
  p.T.resize(N + 1);
  p.d.resize(N + 1);
  p.q.resize(N + 1);
  p.mu.resize(N + 1);
  p.M.resize(N + 1);
  p.M_tilde.resize(N + 1);
  p.R_cond.resize(N);
  const double A_next = A[N] * fs[N] * c[N];
  for (std::size_t k = 0; k <= N; ++k) {
    p.w[k] = c[k] * r[k] * norm;
    p.C[k] = s[k] + R[k] / r[k];
    p.T[k] = r[k] / m;
    p.d[k] = 1.0 / lam - c[k];
    p.q[k] = (k < N ? A[k + 1] : A_next) / r[k];
    p.mu[k] = V[k] / r[k];
    p.M[k] = p.mu[k] - p.mean_S;
    p.M_tilde[k] = p.M[k] - p.d[k];
    if (k < N) p.R_cond[k] = R[k + 1] / r[k + 1];
  }

  out.qp.value_double_sum = dbl.value();
  out.qp.ck_sum = ck.value();
  out.qp.diagonal = diag.value();
  out.qp.value_Ck_form = out.qp.ck_sum + out.qp.diagonal;
  out.qp.mismatch = rel_diff(out.qp.value_double_sum, out.qp.value_Ck_form);
  return out;
}

void truncate(ProfileTable& p, std::size_t K) {
  if (K >= p.K) return;
  const std::size_t n = K + 1;
  for (auto* v : {&p.alpha, &p.r, &p.w, &p.b, &p.s, &p.W, &p.C, &p.T, &p.c, &p.d, &p.q, &p.mu,
                  &p.M, &p.M_tilde})
    v->resize(n);
  p.R_cond.resize(K);
  p.K = K;
}

void check_theta(double theta, const char* name) {
  if (!(theta >= 0.0 && theta <= 1.0))
    throw DomainError(std::string(name) + " must lie in [0, 1], got " + fmt(theta));
}

}  // namespace

GaugedFamily gauge(const AttachmentFunction& g, const AttachmentFunction& f, double theta,
                   const TruncationConfig& cfg) {
  cfg.validate();
  check_theta(theta, "theta");
  GaugedFamily fam;
  fam.g = g;
  fam.f = f;
  fam.theta = theta;
  fam.f_theta = interpolate(g, f, theta);
  {
    FunctionSamples fs(fam.f_theta);
    fam.lambda_theta = solve_malthusian(fs, cfg).lambda;
  }
  fam.f_star = scale(fam.f_theta, 1.0 / fam.lambda_theta);

  FunctionSamples fs(fam.f_star);
  const DirectTable t = build_direct_table(fs, 1.0, cfg, cfg.tail_handoff);

  // n-side sums: sum_n A_n S_n and sum_n A_n U_n with U_n = sum_{k<n} log h(k) c_k.
  CompensatedSum m, q, u;
  double S = 0.0, U = 0.0;
  for (std::size_t n = 1; n <= t.N; ++n) {
    const double c = 1.0 / (fs[n - 1] + 1.0);
    S += c;
    U += log_h(g, f, n - 1) * c;
    m += t.A[n];
    q += t.A[n] * S;
    u += t.A[n] * U;
  }
  if (t.has_tail) {
    const AttachmentFunction& fn = fam.f_star;
    TailSpec spec;
    spec.dim = 2;
    spec.n_out = 3;
    spec.increment = [&](double j, const double*, double* dG) {
      const double c = 1.0 / (fn.at(j) + 1.0);
      dG[0] = c;
      dG[1] = (f.log_at(j) - g.log_at(j)) * c;
    };
    spec.outputs = [](const double* G, double* o) {
      o[0] = 1.0;
      o[1] = G[0];
      o[2] = G[1];
    };
    const double c = 1.0 / (fs[t.N] + 1.0);
    const auto o = tail_moments(fs, t, spec, {S + c, U + log_h(g, f, t.N) * c},
                                {m.value(), q.value(), std::fabs(u.value())});
    m += o[0];
    q += o[1];
    u += o[2];
  }
  fam.malthus_residual = std::fabs(m.value() - 1.0);
  fam.q_theta = q.value();
  fam.u_theta = u.value();
  fam.a_prime = -fam.u_theta / fam.q_theta;
  if (fam.malthus_residual > kMalthusTol)
    throw CenteringFailure("gauge misses the Malthusian root: |m(1) - 1| = " +
                           fmt(fam.malthus_residual));

  Built built = build(fs, t, g, f, fam.a_prime, ProfileMode::DepthGauged, theta);
  const ProfileTable& p = built.p;
  fam.centering_residual = p.abs_bw_total > 0.0 ? std::fabs(p.bw_total) / p.abs_bw_total : 0.0;
  if (fam.centering_residual > kCenteringTol)
    throw CenteringFailure("centering residual " + fmt(fam.centering_residual) +
                           " exceeds tolerance at theta=" + fmt(theta));
  fam.q_prime = built.qp;
  fam.table = std::make_shared<const ProfileTable>(std::move(built.p));
  return fam;
}

ProfileTable profile(const GaugedFamily& family, std::size_t K) {
  ProfileTable p = *family.table;
  truncate(p, K);
  return p;
}

QPrime q_prime(const GaugedFamily& family) {
  const QPrime& qp = family.q_prime;
  const double scale = std::max(std::fabs(qp.value_double_sum), std::fabs(qp.value_Ck_form));
  if (std::fabs(qp.value_double_sum - qp.value_Ck_form) > kRepresentationTol * scale)
    throw RepresentationMismatch("Q' representations disagree at theta=" + fmt(family.theta) +
                                 ": " + fmt(qp.value_double_sum) + " vs " +
                                 fmt(qp.value_Ck_form));
  return qp;
}

QPrime q_prime(const AttachmentFunction& g, const AttachmentFunction& f, double theta,
               std::size_t K, const TruncationConfig& cfg) {
  GaugedFamily fam = gauge(g, f, theta, cfg);
  if (K < fam.table->K) {
    // Recompute the sums from the cut table; the neglected part is reported as mismatch.
    const ProfileTable p = profile(fam, K);
    CompensatedSum dbl, ck, diag;
    double Bc = 0.0;
    for (std::size_t j = 0; j <= K; ++j) {
      Bc += p.b[j] * p.alpha[j];
      const double wj = p.w[j];
      dbl += wj * (Bc + p.b[j] * (p.s[j] + p.alpha[j]));
      ck += p.b[j] * wj * p.C[j];
      diag += p.b[j] * p.alpha[j] * wj;
    }
    fam.q_prime.value_double_sum = dbl.value();
    fam.q_prime.ck_sum = ck.value();
    fam.q_prime.diagonal = diag.value();
    fam.q_prime.value_Ck_form = ck.value() + diag.value();
    fam.q_prime.mismatch = rel_diff(dbl.value(), fam.q_prime.value_Ck_form);
  }
  return q_prime(fam);
}

ProfileTable height_profile(const GaugedFamily& family, double lambda, std::size_t K,
                            const TruncationConfig& cfg) {
  cfg.validate();
  if (!(lambda >= family.lambda_theta * (1.0 - kLambdaSlack)))
    throw DomainError("lambda=" + fmt(lambda) + " lies below the Malthusian parameter " +
                      fmt(family.lambda_theta));
  FunctionSamples fs(family.f_theta);
  const DirectTable t = build_direct_table(fs, lambda, cfg, cfg.tail_handoff);
  Built built = build(fs, t, family.g, family.f, family.a_prime, ProfileMode::HeightTilted,
                      family.theta);
  truncate(built.p, K);
  return std::move(built.p);
}

ProfileTable height_profile(const AttachmentFunction& g, const AttachmentFunction& f, double s,
                            double lambda, std::size_t K, const TruncationConfig& cfg) {
  return height_profile(gauge(g, f, s, cfg), lambda, K, cfg);
}

double score_mean_U(const ProfileTable& p) { return p.bw_total; }

double weighted_mean_bbar(const ProfileTable& p) { return p.bw_total / p.weight_total; }

double bbar_lambda_derivative(const ProfileTable& p) {
  const double bbar = weighted_mean_bbar(p);
  CompensatedSum acc;
  for (std::size_t k = 0; k <= p.K; ++k) acc += (p.b[k] - bbar) * p.w[k] * p.M_tilde[k];
  return -acc.value() / p.weight_total;
}

double score_mean_U(const AttachmentFunction& g, const AttachmentFunction& f, double s,
                    double lambda, std::size_t K, const TruncationConfig& cfg) {
  return score_mean_U(height_profile(g, f, s, lambda, K, cfg));
}

double weighted_mean_bbar(const AttachmentFunction& g, const AttachmentFunction& f, double s,
                          double lambda, std::size_t K, const TruncationConfig& cfg) {
  return weighted_mean_bbar(height_profile(g, f, s, lambda, K, cfg));
}

double bbar_lambda_derivative(const AttachmentFunction& g, const AttachmentFunction& f, double s,
                              double lambda, std::size_t K, const TruncationConfig& cfg) {
  return bbar_lambda_derivative(height_profile(g, f, s, lambda, K, cfg));
}

OneStepReport one_step_report(const ProfileTable& p) {
  OneStepReport rep;
  const std::size_t K = p.K;
  rep.residuals.resize(K);
  rep.increment_residuals.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double step = p.q[k] * p.R_cond[k];
    rep.residuals[k] = step - (p.c[k] - p.c[k + 1]);
    rep.increment_residuals[k] = (p.mu[k + 1] - p.mu[k]) - step;
    rep.max_increment_residual =
        std::max(rep.max_increment_residual, std::fabs(rep.increment_residuals[k]));
  }
  std::size_t k0 = K;
  while (k0 > 0 && rep.residuals[k0 - 1] >= 0.0) --k0;
  if (K == 0 || k0 < K) rep.K0 = k0;
  return rep;
}

OneStepReport one_step_report(const AttachmentFunction& g, const AttachmentFunction& f, double s,
                              double lambda, std::size_t K, const TruncationConfig& cfg) {
  return one_step_report(height_profile(g, f, s, lambda, K, cfg));
}

ChebyshevBound chebyshev_bound(const std::vector<double>& a, const std::vector<double>& c,
                               const std::vector<double>& w, std::size_t K0, double C_bound) {
  const std::size_t n = a.size();
  if (c.size() != n || w.size() != n)
    throw PreconditionViolation("chebyshev_bound: sequences differ in length");
  CompensatedSum aw, abs_aw, acw, prefix;
  double scale = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!(w[k] >= 0.0)) throw PreconditionViolation("chebyshev_bound: negative weight");
    aw += a[k] * w[k];
    abs_aw += std::fabs(a[k]) * w[k];
    acw += a[k] * c[k] * w[k];
    scale += std::fabs(a[k] * c[k]) * w[k];
    if (k < K0) prefix += std::fabs(a[k]) * w[k];
  }
  if (std::fabs(aw.value()) > kCenteringTol * abs_aw.value())
    throw PreconditionViolation("chebyshev_bound: a is not centred against w");
  for (std::size_t k = 1; k < n; ++k) {
    if (a[k] < a[k - 1]) throw PreconditionViolation("chebyshev_bound: a is not nondecreasing");
    if (k > K0 && c[k] < c[k - 1])
      throw PreconditionViolation("chebyshev_bound: c decreases at k=" + std::to_string(k));
  }
  for (std::size_t k = 0; k < std::min(K0, n); ++k)
    if (std::fabs(c[k]) > C_bound)
      throw PreconditionViolation("chebyshev_bound: |c_k| exceeds C_bound below K0");
  ChebyshevBound out;
  out.lower_bound = -C_bound * prefix.value();
  out.actual = acw.value();
  out.holds = out.actual >= out.lower_bound - 1e-12 * scale;
  return out;
}

WeightDecay weight_decay(const ProfileTable& p, double rho) {
  WeightDecay out;
  out.max_ratio = -std::numeric_limits<double>::infinity();
  const std::size_t lo = std::max<std::size_t>(1, p.K / 2);
  for (std::size_t k = lo; k <= p.K; ++k) {
    if (!(p.w[k] > 0.0)) continue;
    out.max_ratio =
        std::max(out.max_ratio, std::log(p.w[k]) / std::pow(static_cast<double>(k), 1.0 - rho));
  }
  out.decays = out.max_ratio < 0.0;
  return out;
}

std::vector<double> unit_grid(std::size_t points) {
  if (points < 2) throw DomainError("grid needs at least 2 points");
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i)
    grid[i] = static_cast<double>(i) / static_cast<double>(points - 1);
  grid.back() = 1.0;
  return grid;
}

namespace {

void check_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw DomainError("empty grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    check_theta(grid[i], "grid point");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw DomainError("grid must be strictly increasing");
  }
}

double q_theta_at(const AttachmentFunction& g, const AttachmentFunction& f, double theta,
                  const TruncationConfig& cfg) {
  return depth_constant(interpolate(g, f, theta), cfg).q_f;
}

PathPoint depth_point(const AttachmentFunction& g, const AttachmentFunction& f, double theta,
                      const TruncationConfig& cfg) {
  PathPoint pt;
  pt.param = theta;
  try {
    const GaugedFamily fam = gauge(g, f, theta, cfg);
    pt.lambda = fam.lambda_theta;
    pt.value = fam.q_theta;
    pt.constant = 1.0 / fam.q_theta;
    pt.centering_residual = fam.centering_residual;
    pt.derivative = fam.q_prime.value_double_sum;
    pt.derivative_alt = fam.q_prime.value_Ck_form;
    pt.representation_residual = fam.q_prime.mismatch;
    const double e = kDepthFdStep;
    if (theta - e < 0.0) {
      pt.derivative_fd = (-3.0 * fam.q_theta + 4.0 * q_theta_at(g, f, theta + e, cfg) -
                          q_theta_at(g, f, theta + 2 * e, cfg)) / (2 * e);
    } else if (theta + e > 1.0) {
      pt.derivative_fd = (3.0 * fam.q_theta - 4.0 * q_theta_at(g, f, theta - e, cfg) +
                          q_theta_at(g, f, theta - 2 * e, cfg)) / (2 * e);
    } else {
      pt.derivative_fd =
          (q_theta_at(g, f, theta + e, cfg) - q_theta_at(g, f, theta - e, cfg)) / (2 * e);
    }
    pt.fd_residual = rel_diff(pt.derivative, pt.derivative_fd);
    q_prime(fam);
  } catch (const Error& err) {
    pt.error = std::string(to_string(err.kind())) + ": " + err.what();
  }
  return pt;
}

PathPoint height_point(const AttachmentFunction& g, const AttachmentFunction& f, double s,
                       const TruncationConfig& cfg) {
  PathPoint pt;
  pt.param = s;
  try {
    const GaugedFamily fam = gauge(g, f, s, cfg);
    FunctionSamples fs(fam.f_theta);
    const HeightSolution hs = height_speed(fs, fam.lambda_theta, cfg);
    pt.lambda = fam.lambda_theta;
    pt.lambda_star = hs.lambda_star;
    pt.value = hs.r_f;
    pt.constant = hs.c_star;
    const ProfileTable p0 = height_profile(fam, fam.lambda_theta, kFullTable, cfg);
    const ProfileTable p1 = height_profile(fam, hs.lambda_star, kFullTable, cfg);
    pt.centering_residual = p0.abs_bw_total > 0 ? std::fabs(p0.bw_total) / p0.abs_bw_total : 0.0;
    pt.derivative = hs.kappa * score_mean_U(p0) / p0.mean_S -
                    fam.lambda_theta / hs.lambda_star * score_mean_U(p1);
    pt.derivative_alt = hs.r_f * (weighted_mean_bbar(p0) - weighted_mean_bbar(p1));
    pt.representation_residual = rel_diff(pt.derivative, pt.derivative_alt);
  } catch (const Error& err) {
    pt.error = std::string(to_string(err.kind())) + ": " + err.what();
  }
  return pt;
}

template <class Eval>
std::vector<PathPoint> evaluate(const std::vector<double>& params, Eval eval) {
  std::vector<PathPoint> pts(params.size());
  parallel_for(params.size(), [&](std::size_t i) { pts[i] = eval(params[i]); });
  return pts;
}

// Inserts midpoints next to near-violations, |value step| < 10 * slack or negative.
template <class Eval>
void refine(std::vector<PathPoint>& pts, Eval eval) {
  std::vector<double> mids;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (!pts[i].error.empty() || !pts[i - 1].error.empty()) continue;
    if (pts[i].value - pts[i - 1].value < 10.0 * kPathSlack)
      mids.push_back(0.5 * (pts[i].param + pts[i - 1].param));
  }
  if (mids.empty()) return;
  std::vector<PathPoint> extra = evaluate(mids, eval);
  for (auto& p : extra) p.refined = true;
  pts.insert(pts.end(), extra.begin(), extra.end());
  std::sort(pts.begin(), pts.end(),
            [](const PathPoint& a, const PathPoint& b) { return a.param < b.param; });
}

void judge(PathReport& rep, bool check_derivative) {
  const PathPoint* prev = nullptr;
  for (std::size_t i = 0; i < rep.points.size(); ++i) {
    const PathPoint& p = rep.points[i];
    if (!p.error.empty()) {
      ++rep.failures;
      rep.warnings.push_back("solver failed at " + fmt(p.param) + ": " + p.error);
      continue;
    }
    double drop = 0.0;
    if (prev != nullptr) drop = prev->value - p.value;
    if (check_derivative) drop = std::max(drop, -p.derivative);
    if (drop > kPathSlack && rep.verdict.monotone) {
      rep.verdict.monotone = false;
      rep.verdict.index = i;
      rep.verdict.magnitude = drop;
    }
    prev = &p;
  }
}

// Derivative at xs[i] of the interpolating polynomial through up to five
// neighbouring points.
double lagrange_slope(const std::vector<double>& xs, const std::vector<double>& ys, std::size_t i) {
  const std::size_t n = xs.size();
  const std::size_t width = std::min<std::size_t>(5, n);
  std::size_t lo = i >= width / 2 ? i - width / 2 : 0;
  lo = std::min(lo, n - width);
  const double x = xs[i];
  double slope = 0.0;
  for (std::size_t j = lo; j < lo + width; ++j) {
    // d/dx of the j-th Lagrange basis polynomial at x.
    double dl = 0.0;
    for (std::size_t m = lo; m < lo + width; ++m) {
      if (m == j) continue;
      double term = 1.0 / (xs[j] - xs[m]);
      for (std::size_t l = lo; l < lo + width; ++l)
        if (l != j && l != m) term *= (x - xs[l]) / (xs[j] - xs[l]);
      dl += term;
    }
    slope += ys[j] * dl;
  }
  return slope;
}

}  // namespace

PathReport depth_path(const AttachmentFunction& g, const AttachmentFunction& f,
                      const std::vector<double>& grid, const TruncationConfig& cfg) {
  cfg.validate();
  check_grid(grid);
  auto eval = [&](double theta) { return depth_point(g, f, theta, cfg); };
  PathReport rep;
  rep.points = evaluate(grid, eval);
  refine(rep.points, eval);
  judge(rep, true);
  return rep;
}

PathReport height_path(const AttachmentFunction& g, const AttachmentFunction& f,
                       const std::vector<double>& grid, const TruncationConfig& cfg) {
  cfg.validate();
  check_grid(grid);
  auto eval = [&](double s) { return height_point(g, f, s, cfg); };
  PathReport rep;
  rep.points = evaluate(grid, eval);
  refine(rep.points, eval);

  const auto rv_ok = [](const AttachmentFunction& fn) {
    const auto rho = fn.rv_index();
    return rho.has_value() && *rho < 1.0;
  };
  rep.outside_rv = !rv_ok(g) || !rv_ok(f);
  if (rep.outside_rv)
    rep.warnings.push_back("extrapolated instance: an endpoint lies outside the sublinear "
                           "regular-variation regime");

  std::vector<std::size_t> ok;
  for (std::size_t i = 0; i < rep.points.size(); ++i)
    if (rep.points[i].error.empty()) ok.push_back(i);
  std::vector<double> xs, ys;
  for (std::size_t i : ok) {
    xs.push_back(rep.points[i].param);
    ys.push_back(rep.points[i].value);
  }
  if (ok.size() >= 2) {
    for (std::size_t j = 0; j < ok.size(); ++j) {
      PathPoint& p = rep.points[ok[j]];
      p.derivative_fd = lagrange_slope(xs, ys, j);
      p.fd_residual = rel_diff(p.derivative, p.derivative_fd);
    }
  }
  for (std::size_t j = 1; j < ok.size(); ++j) {
    const PathPoint& a = rep.points[ok[j - 1]];
    const PathPoint& b = rep.points[ok[j]];
    if (std::fabs(b.lambda_star - a.lambda_star) > 0.1 * a.lambda_star)
      rep.warnings.push_back("lambda* jumps by more than 10% between s=" + fmt(a.param) +
                             " and s=" + fmt(b.param));
  }
  judge(rep, false);
  return rep;
}

}  // namespace patree
