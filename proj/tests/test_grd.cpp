#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "patree/attach.hpp"
#include "patree/constants.hpp"
#include "patree/errors.hpp"
#include "patree/grd.hpp"

using namespace patree;

namespace {

const AttachmentFunction kConst = AttachmentFunction::constant(1.0);
const AttachmentFunction kAffine = AttachmentFunction::affine(1.0);

double rel(double a, double b) { return std::fabs(a - b) / std::max(std::fabs(b), 1e-300); }

struct Pair {
  const char* g;
  const char* f;
};

// GRD pairs (f dominates g) used throughout.
const Pair kPairs[] = {
    {"const:1", "affine:1"},      {"power:0.3", "power:0.7"}, {"const:1", "power:0.5"},
    {"power:0.2", "power:0.8"},   {"const:1", "power:0.6"},   {"affine:2", "affine:0.5"},
    {"const:1", "table:[1,1.5,2,2.2],tail=hold"},
};

double log_m(const AttachmentFunction& f, double lambda) {
  return std::log(laplace_m(f, lambda).value);
}

}  // namespace

TEST_CASE("gauge on the uniform/affine pair") {
  const auto f0 = gauge(kConst, kAffine, 0.0);
  CHECK(f0.lambda_theta == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f0.q_theta == doctest::Approx(1.0).epsilon(1e-10));
  for (std::size_t k = 0; k < 30; ++k) CHECK(f0.f_star(k) == doctest::Approx(1.0).epsilon(1e-12));
  const auto p = profile(f0, 30);
  for (std::size_t k = 0; k <= 30; ++k)
    CHECK(rel(p.w[k], std::ldexp(1.0, -int(k) - 1)) < 1e-12);

  const auto f1 = gauge(kConst, kAffine, 1.0);
  CHECK(f1.lambda_theta == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f1.q_theta == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("equal endpoints give a flat gauge") {
  for (double theta : {0.0, 0.4, 1.0}) {
    const auto fam = gauge(kAffine, kAffine, theta);
    CHECK(fam.a_prime == 0.0);
    const auto p = profile(fam, 50);
    for (double b : p.b) CHECK(b == 0.0);
    CHECK(fam.q_prime.value_double_sum == 0.0);
    CHECK(fam.q_prime.value_Ck_form == 0.0);
  }
}

TEST_CASE("uniform gauged profile") {
  const auto p = profile(gauge(kConst, kConst, 0.5), 40);
  for (std::size_t k = 0; k <= 40; ++k) CHECK(rel(p.C[k], k / 2.0 + 1.0) < 1e-12);
  CHECK(p.s[0] == 0.0);
  CHECK(rel(p.C[0], p.W[0] / p.r[0]) < 1e-15);
  CHECK(rel(p.r[0], p.mass) < 1e-12);
}

TEST_CASE("gauge invariants across the pair suite") {
  for (const auto& pr : kPairs) {
    const auto g = parse_function(pr.g);
    const auto f = parse_function(pr.f);
    for (double theta : {0.0, 0.3, 0.7, 1.0}) {
      CAPTURE(pr.g);
      CAPTURE(pr.f);
      CAPTURE(theta);
      const auto fam = gauge(g, f, theta);
      CHECK(fam.malthus_residual < 1e-10);
      CHECK(fam.centering_residual < 1e-8);
      const auto& p = *fam.table;
      CHECK(rel(p.weight_total, fam.q_theta) < 1e-8);
      double worst_c = 0.0;
      for (std::size_t k = 0; k <= p.K; ++k) {
        REQUIRE(p.w[k] >= 0.0);
        if (k > 0) {
          REQUIRE(p.b[k] >= p.b[k - 1]);
          REQUIRE(p.r[k] <= p.r[k - 1]);
          worst_c = std::min(worst_c, p.C[k] - p.C[k - 1]);
        }
      }
      CHECK(worst_c >= -1e-12);
      const auto q = fam.q_prime;
      CHECK(q.mismatch < 1e-8);
      CHECK(std::fabs(q.ck_sum + q.diagonal - q.value_Ck_form) <=
            1e-12 * (1.0 + std::fabs(q.value_Ck_form)));
    }
  }
}

TEST_CASE("q prime matches the finite difference of Q") {
  for (const auto& pr : kPairs) {
    const auto g = parse_function(pr.g);
    const auto f = parse_function(pr.f);
    const double theta = 0.5, eps = 1e-4;
    const double fd = (depth_constant(interpolate(g, f, theta + eps)).q_f -
                       depth_constant(interpolate(g, f, theta - eps)).q_f) /
                      (2.0 * eps);
    const auto q = q_prime(g, f, theta);
    CAPTURE(pr.f);
    CHECK(q.value_double_sum >= 0.0);
    CHECK(rel(q.value_double_sum, fd) < 1e-4);
    CHECK(rel(q.value_Ck_form, fd) < 1e-4);
  }
}

TEST_CASE("the C_k sum alone misses the diagonal term") {
  const auto q = q_prime(kConst, kAffine, 0.5);
  CHECK(q.value_double_sum == doctest::Approx(0.697082).epsilon(1e-6));
  CHECK(std::fabs(q.diagonal) > 1e-2);
  CHECK(rel(q.ck_sum, q.value_double_sum) > 1e-2);
}

TEST_CASE("truncated tables") {
  const auto fam = gauge(kConst, kAffine, 0.5);
  const auto p = profile(fam, 10);
  CHECK(p.K == 10);
  CHECK(p.w.size() == 11);
  CHECK(p.weight_total == fam.table->weight_total);
}

TEST_CASE("geometric root law") {
  const auto p = height_profile(kConst, kConst, 0.3, 1.0, 40);
  CHECK(p.mode == ProfileMode::HeightTilted);
  for (std::size_t k = 0; k + 1 <= 40; ++k) {
    CAPTURE(k);
    CHECK(rel(p.T[k], std::ldexp(1.0, -int(k))) < 1e-12);
    CHECK(p.q[k] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p.c[k] == 0.5);
    CHECK(p.d[k] == 0.5);
    CHECK(std::fabs(p.M[k] - k / 2.0) < 1e-10);
  }
  CHECK(p.mean_S == doctest::Approx(1.0).epsilon(1e-12));
  const auto r = one_step_report(p);
  for (std::size_t k = 0; k < r.residuals.size(); ++k)
    CHECK(std::fabs(r.residuals[k] - 0.5) < 1e-10);
  REQUIRE(r.K0.has_value());
  CHECK(*r.K0 == 0);
  CHECK(r.max_increment_residual < 1e-10);
}

TEST_CASE("height profile domain") {
  const auto fam = gauge(kConst, kAffine, 0.5);
  CHECK_THROWS_AS(height_profile(fam, 0.9 * fam.lambda_theta), DomainError);
  CHECK_NOTHROW(height_profile(fam, fam.lambda_theta));
}

TEST_CASE("score identities") {
  for (const auto& pr : kPairs) {
    const auto g = parse_function(pr.g);
    const auto f = parse_function(pr.f);
    const double s = 0.4;
    const auto fam = gauge(g, f, s);
    const auto hs = height_speed(fam.f_theta);
    for (double lambda : {fam.lambda_theta * 1.3, 0.5 * (fam.lambda_theta + hs.lambda_star),
                          hs.lambda_star}) {
      CAPTURE(pr.f);
      CAPTURE(lambda);
      const auto p = height_profile(fam, lambda);
      CHECK(rel(p.weight_total, lambda * p.mean_S) < 1e-10);

      const double el = 1e-5 * lambda;
      const double fd_S = -(log_m(fam.f_theta, lambda + el) - log_m(fam.f_theta, lambda - el)) /
                          (2.0 * el);
      CHECK(rel(p.mean_S, fd_S) < 1e-5);

      // The gauged family is f_s scaled by lambda_s0 / lambda_s, so b carries a'(s).
      const double es = 1e-4;
      auto gauged_log_m = [&](double t) {
        const auto ft = interpolate(g, f, t);
        return log_m(scale(ft, fam.lambda_theta / malthusian(ft)), lambda);
      };
      const double fd_U = (gauged_log_m(s + es) - gauged_log_m(s - es)) / (2.0 * es);
      const double U = score_mean_U(p);
      CHECK(std::fabs(U - fd_U) <= 1e-4 * std::max(std::fabs(fd_U), p.abs_bw_total));
      CHECK(weighted_mean_bbar(p) == doctest::Approx(U / p.weight_total));
    }
    CHECK(std::fabs(score_mean_U(height_profile(fam, fam.lambda_theta))) <
          1e-8 * fam.table->abs_bw_total);
  }
}

TEST_CASE("weighted mean of b") {
  const auto fam = gauge(kAffine, kAffine, 0.5);
  for (double lambda : {2.0, 3.0, 4.0}) {
    CHECK(weighted_mean_bbar(height_profile(fam, lambda)) == 0.0);
    CHECK(bbar_lambda_derivative(height_profile(fam, lambda)) == 0.0);
  }
  const auto mixed = gauge(kConst, kAffine, 0.5);
  CHECK(std::fabs(weighted_mean_bbar(height_profile(mixed, mixed.lambda_theta))) < 1e-8);
  const auto hs = height_speed(mixed.f_theta);
  CHECK(weighted_mean_bbar(height_profile(mixed, mixed.lambda_theta)) >=
        weighted_mean_bbar(height_profile(mixed, hs.lambda_star)) - 1e-6);
}

TEST_CASE("b-bar lambda derivative") {
  for (const auto& pr : kPairs) {
    const auto g = parse_function(pr.g);
    const auto f = parse_function(pr.f);
    const auto fam = gauge(g, f, 0.5);
    const auto hs = height_speed(fam.f_theta);
    for (double t : {0.2, 0.6, 1.0}) {
      const double lambda = fam.lambda_theta + t * (hs.lambda_star - fam.lambda_theta);
      const double eps = 1e-5 * lambda;
      const double fd = (weighted_mean_bbar(height_profile(fam, lambda + eps)) -
                         weighted_mean_bbar(height_profile(fam, lambda - eps))) /
                        (2.0 * eps);
      const double d = bbar_lambda_derivative(height_profile(fam, lambda));
      CAPTURE(pr.f);
      CAPTURE(lambda);
      CHECK(std::fabs(d - fd) <= 1e-5 * std::fabs(fd) + 1e-9);
    }
  }
  const auto g = AttachmentFunction::power(0.3), f = AttachmentFunction::power(0.7);
  const auto fam = gauge(g, f, 0.5);
  const auto hs = height_speed(fam.f_theta);
  for (double t = 0.05; t < 1.0; t += 0.1) {
    const double lambda = fam.lambda_theta + t * (hs.lambda_star - fam.lambda_theta);
    CHECK(bbar_lambda_derivative(height_profile(fam, lambda)) <= 1e-6);
  }
}

TEST_CASE("increment identity across families") {
  for (const auto& pr : kPairs) {
    const auto g = parse_function(pr.g);
    const auto f = parse_function(pr.f);
    for (double s : {0.0, 0.5, 1.0}) {
      const auto fam = gauge(g, f, s);
      const auto hs = height_speed(fam.f_theta);
      for (double lambda : {fam.lambda_theta, hs.lambda_star}) {
        const auto r = one_step_report(height_profile(fam, lambda));
        CAPTURE(pr.f);
        CAPTURE(s);
        CHECK(r.max_increment_residual < 1e-10);
      }
    }
  }
}

TEST_CASE("corrected shift is eventually nondecreasing for power 0.5") {
  const auto f = AttachmentFunction::power(0.5);
  const auto fam = gauge(f, f, 0.5);
  const auto hs = height_speed(f);
  const auto p = height_profile(fam, hs.lambda_star);
  const auto r = one_step_report(p);
  REQUIRE(r.K0.has_value());
  MESSAGE("K0 = " << *r.K0);
  CHECK(*r.K0 < p.K);
  for (std::size_t k = *r.K0; k + 1 <= p.K && k + 1 < p.M_tilde.size(); ++k)
    CHECK(p.M_tilde[k + 1] - p.M_tilde[k] >= -1e-12);
}

TEST_CASE("weight decay in sublinear instances") {
  for (double rho : {0.2, 0.5, 0.8}) {
    const auto f = AttachmentFunction::power(rho);
    const auto fam = gauge(f, f, 0.5);
    const auto hs = height_speed(f);
    CAPTURE(rho);
    CHECK(weight_decay(height_profile(fam, hs.lambda_star), rho).decays);
    CHECK(weight_decay(height_profile(fam, fam.lambda_theta), rho).max_ratio < 0.0);
  }
}

TEST_CASE("chebyshev bound examples") {
  const std::vector<double> w = {0.5, 0.3, 0.2};
  const auto zero = chebyshev_bound({0.0, 0.0, 0.0}, {1.0, 2.0, 3.0}, w, 1, 5.0);
  CHECK(zero.lower_bound == 0.0);
  CHECK(zero.actual == 0.0);
  const auto full = chebyshev_bound({-0.5, 0.5, 0.5}, {-1.0, 0.0, 4.0}, {0.5, 0.25, 0.25}, 0, 0.0);
  CHECK(full.actual >= 0.0);
  CHECK(full.holds);
  CHECK_THROWS_AS(chebyshev_bound({1.0, 1.0}, {0.0, 1.0}, {0.5, 0.5}, 0, 1.0),
                  PreconditionViolation);
  CHECK_THROWS_AS(chebyshev_bound({1.0, -1.0}, {0.0, 1.0}, {0.5, 0.5}, 0, 1.0),
                  PreconditionViolation);
  CHECK_THROWS_AS(chebyshev_bound({-1.0, 1.0}, {1.0, 0.0}, {0.5, 0.5}, 0, 1.0),
                  PreconditionViolation);
  CHECK_THROWS_AS(chebyshev_bound({-1.0, 1.0}, {3.0, 4.0}, {0.5, 0.5}, 1, 1.0),
                  PreconditionViolation);
}

TEST_CASE("chebyshev bound on random centred monotone instances") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  int violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng() % 60;
    std::vector<double> a(n), c(n), w(n);
    for (auto& x : w) x = 0.01 + u(rng);
    for (auto& x : a) x = z(rng);
    for (auto& x : c) x = z(rng);
    std::sort(a.begin(), a.end());
    std::sort(c.begin(), c.end());
    double aw = 0.0, W = 0.0;
    for (std::size_t k = 0; k < n; ++k) aw += a[k] * w[k], W += w[k];
    for (auto& x : a) x -= aw / W;
    const std::size_t K0 = rng() % (n + 1);
    double C = 0.0;
    for (std::size_t k = 0; k < K0; ++k) C = std::max(C, std::fabs(c[k]));
    const auto r = chebyshev_bound(a, c, w, K0, C);
    if (!r.holds || r.actual < r.lower_bound) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("chebyshev bound fails when only the tail of c is monotone") {
  const double C = 3.0;
  const auto r = chebyshev_bound({-1.0, 1.0}, {C, -C}, {1.0, 1.0}, 1, C);
  CHECK(r.actual == doctest::Approx(-2.0 * C));
  CHECK(r.lower_bound == doctest::Approx(-C));
  CHECK_FALSE(r.holds);
}

TEST_CASE("depth path on the uniform/affine pair") {
  const auto rep = depth_path(kConst, kAffine, unit_grid(11));
  REQUIRE(rep.points.size() >= 11);
  CHECK(rep.verdict.monotone);
  CHECK(rep.failures == 0);
  CHECK(rep.points.front().value == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(rep.points.back().value == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(rep.points.front().constant == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(rep.points.back().constant == doctest::Approx(0.5).epsilon(1e-9));
  for (std::size_t i = 1; i < rep.points.size(); ++i) {
    CHECK(rep.points[i].param > rep.points[i - 1].param);
    CHECK(rep.points[i].constant <= rep.points[i - 1].constant + 1e-12);
  }
}

TEST_CASE("flat paths") {
  const auto f = AttachmentFunction::power(0.4);
  const auto d = depth_path(f, f, unit_grid(5));
  const auto h = height_path(f, f, unit_grid(5));
  CHECK(d.verdict.monotone);
  CHECK(h.verdict.monotone);
  for (const auto& p : d.points) {
    CHECK(rel(p.value, d.points.front().value) < 1e-12);
    CHECK(p.derivative == 0.0);
  }
  for (const auto& p : h.points) {
    CHECK(rel(p.value, h.points.front().value) < 1e-12);
    CHECK(std::fabs(p.derivative) < 1e-12);
  }
}

TEST_CASE("reversed pair is flagged") {
  const auto rep = depth_path(kAffine, kConst, unit_grid(6));
  CHECK_FALSE(rep.verdict.monotone);
  CHECK(rep.verdict.magnitude > 0.0);
}

TEST_CASE("height path endpoints on the uniform/affine pair") {
  const auto rep = height_path(kConst, kAffine, unit_grid(5));
  CHECK(rep.verdict.monotone);
  CHECK(rep.outside_rv);
  CHECK(rep.points.front().value == doctest::Approx(1.0 / std::numbers::e).epsilon(1e-9));
  CHECK(rep.points.back().value ==
        doctest::Approx(2.0 * lambert_w(1.0 / std::numbers::e)).epsilon(1e-8));
  CHECK(rep.points.back().constant == doctest::Approx(1.7955607).epsilon(1e-7));
}

TEST_CASE("path constants are scale invariant") {
  const auto g = AttachmentFunction::power(0.3), f = AttachmentFunction::power(0.7);
  const auto grid = unit_grid(5);
  const auto d = depth_path(g, f, grid);
  const auto ds = depth_path(scale(g, 3.0), scale(f, 3.0), grid);
  const auto h = height_path(g, f, grid);
  const auto hs = height_path(scale(g, 0.25), scale(f, 0.25), grid);
  REQUIRE(d.points.size() == ds.points.size());
  REQUIRE(h.points.size() == hs.points.size());
  for (std::size_t i = 0; i < d.points.size(); ++i) {
    CHECK(rel(ds.points[i].constant, d.points[i].constant) < 1e-10);
    CHECK(rel(ds.points[i].lambda, 3.0 * d.points[i].lambda) < 1e-10);
  }
  for (std::size_t i = 0; i < h.points.size(); ++i)
    CHECK(rel(hs.points[i].constant, h.points[i].constant) < 1e-9);
}

TEST_CASE("unit grid") {
  const auto g = unit_grid(21);
  CHECK(g.size() == 21);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == 1.0);
  CHECK_THROWS(unit_grid(1));
}
