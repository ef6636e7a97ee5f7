#include <doctest.h>

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <map>

#include "patree/attach.hpp"
#include "patree/errors.hpp"
#include "patree/simulate.hpp"

using namespace patree;

namespace {

const AttachmentFunction kConst = AttachmentFunction::constant(1.0);
const AttachmentFunction kAffine = AttachmentFunction::affine(1.0);

// Probability of one attachment history under the recursion.
double history_probability(const AttachmentFunction& fn, const std::vector<std::uint32_t>& parent) {
  std::vector<std::size_t> children(parent.size(), 0);
  double p = 1.0;
  for (std::size_t v = 1; v < parent.size(); ++v) {
    double total = 0.0;
    for (std::size_t i = 0; i < v; ++i) total += fn(children[i]);
    p *= fn(children[parent[v]]) / total;
    ++children[parent[v]];
  }
  return p;
}

void enumerate(std::vector<std::uint32_t>& parent, std::size_t v,
               std::vector<std::vector<std::uint32_t>>& out) {
  if (v == parent.size()) {
    out.push_back(parent);
    return;
  }
  for (std::uint32_t i = 0; i < v; ++i) {
    parent[v] = i;
    enumerate(parent, v + 1, out);
  }
}

}  // namespace

TEST_CASE("philox known answers") {
  using B = Philox4x64::Block;
  CHECK(Philox4x64::block({0, 0, 0, 0}, {0, 0}) ==
        B{0x16554d9eca36314cULL, 0xdb20fe9d672d0fdcULL, 0xd7e772cee186176bULL,
          0x7e68b68aec7ba23bULL});
  CHECK(Philox4x64::block({0x243f6a8885a308d3ULL, 0x13198a2e03707344ULL, 0xa4093822299f31d0ULL,
                           0x082efa98ec4e6c89ULL},
                          {0x452821e638d01377ULL, 0xbe5466cf34e90c6cULL}) ==
        B{0xa528f45403e61d95ULL, 0x38c72dbd566e9788ULL, 0xa5a1610e72fd18b5ULL,
          0x57bd43b5e52b7fe6ULL});
  Philox4x64 rng(12345);
  CHECK(rng.next_u64() == 0xa5792c0a0ed6a560ULL);
  CHECK(rng.next_u64() == 0xc63666ba8b756514ULL);
  CHECK(rng.next_u64() == 0xc953e311f634209dULL);
  CHECK(rng.next_u64() == 0x28db5404d83fac91ULL);
}

TEST_CASE("uniform range") {
  Philox4x64 rng(1);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  CHECK(std::fabs(sum / 100000 - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / 100000));
}

TEST_CASE("fenwick") {
  Fenwick fw;
  std::vector<double> w = {1.0, 2.0, 0.5, 4.0, 3.0, 1.5, 2.5};
  for (double x : w) fw.push_back(x);
  CHECK(fw.size() == w.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(fw.prefix(i) == doctest::Approx(acc));
    CHECK(fw.find(acc + 0.25 * w[i]) == i);
    acc += w[i];
  }
  fw.add(2, 1.0);
  CHECK(fw.prefix(3) == doctest::Approx(4.5));
  w[2] += 1.0;
  Fenwick rebuilt;
  rebuilt.rebuild(w);
  for (std::size_t i = 0; i <= w.size(); ++i) CHECK(rebuilt.prefix(i) == doctest::Approx(fw.prefix(i)));
  CHECK(fw.find(1e9) == w.size() - 1);
}

TEST_CASE("small trees") {
  const auto t1 = grow(kConst, 1, 5);
  CHECK(t1.n == 1);
  CHECK(t1.depth[0] == 0);
  CHECK(height(t1) == 0);
  const auto t2 = grow(kAffine, 2, 5);
  CHECK(t2.parent[1] == 0);
  CHECK(insertion_depth(t2) == 1);
  CHECK(height(t2) == 1);
  CHECK_THROWS_AS(grow(kConst, 0, 1), DomainError);
}

TEST_CASE("star and path shapes") {
  // Occupied vertices dominate in the first table, childless ones in the second.
  const auto star = grow(AttachmentFunction::table({1e-200, 1.0}), 50, 3);
  CHECK(insertion_depth(star) == 1);
  CHECK(height(star) == 1);
  CHECK(star.children[0] == 49);
  const auto path = grow(AttachmentFunction::table({1.0, 1e-300}), 40, 3);
  CHECK(insertion_depth(path) == 39);
  CHECK(height(path) == 39);
}

TEST_CASE("determinism and structure") {
  for (const char* spec : {"const:1", "affine:1", "power:0.5", "table:[1,1.5,2,2.2],tail=hold"}) {
    const auto fn = parse_function(spec);
    const auto a = grow(fn, 5000, 77);
    const auto b = grow(fn, 5000, 77);
    CHECK(a.parent == b.parent);
    CHECK(a.depth == b.depth);
    std::vector<std::uint32_t> count(a.n, 0);
    std::uint64_t total_children = 0;
    for (std::size_t v = 1; v < a.n; ++v) {
      REQUIRE(a.parent[v] < v);
      REQUIRE(a.depth[v] == a.depth[a.parent[v]] + 1);
      ++count[a.parent[v]];
    }
    for (std::size_t v = 0; v < a.n; ++v) total_children += a.children[v];
    CHECK(count == a.children);
    CHECK(total_children == a.n - 1);
    CHECK(a.depth[0] == 0);
  }
}

TEST_CASE("weight index drift after a million insertions") {
  for (const auto& fn : {kAffine, AttachmentFunction::power(0.5)}) {
    const auto t = grow(fn, 1000000, 4242);
    CHECK(t.weight_drift(fn) < 1e-6);
  }
}

TEST_CASE("attachment histories follow the recursion") {
  for (const char* spec : {"const:1", "affine:1", "power:0.5", "table:[1,3,2],tail=hold"}) {
    const auto fn = parse_function(spec);
    for (std::size_t n = 3; n <= 6; ++n) {
      std::vector<std::uint32_t> parent(n, 0);
      std::vector<std::vector<std::uint32_t>> histories;
      enumerate(parent, 1, histories);
      std::map<std::vector<std::uint32_t>, std::size_t> index;
      for (std::size_t i = 0; i < histories.size(); ++i) index[histories[i]] = i;
      const std::size_t seeds = 100000;
      std::vector<double> observed(histories.size(), 0.0);
      for (std::size_t s = 0; s < seeds; ++s) ++observed[index.at(grow(fn, n, s).parent)];
      double chi2 = 0.0;
      for (std::size_t i = 0; i < histories.size(); ++i) {
        const double expected = seeds * history_probability(fn, histories[i]);
        chi2 += (observed[i] - expected) * (observed[i] - expected) / expected;
      }
      const double df = static_cast<double>(histories.size() - 1);
      const double p = boost::math::gamma_q(df / 2.0, chi2 / 2.0);
      CAPTURE(spec);
      CAPTURE(n);
      CAPTURE(chi2);
      CHECK(p > 1e-6);
    }
  }
}

TEST_CASE("exact expected depth") {
  CHECK(std::fabs(exact_expected_depth(kConst, 4) - 11.0 / 6.0) < 1e-12);
  CHECK(std::fabs(exact_expected_depth(kAffine, 3) - 4.0 / 3.0) < 1e-12);
  for (const auto& fn : {kConst, kAffine, AttachmentFunction::power(0.3)})
    CHECK(exact_expected_depth(fn, 2) == 1.0);
  double harmonic = 0.0;
  for (std::size_t n = 2; n <= 8; ++n) {
    harmonic += 1.0 / (n - 1.0);
    CHECK(std::fabs(exact_expected_depth(kConst, n) - harmonic) < 1e-12);
  }
  CHECK_THROWS_AS(exact_expected_depth(kConst, 1), DomainError);
  CHECK_THROWS_AS(exact_expected_depth(kConst, 10), DomainError);
}

TEST_CASE("exact expected depth by history enumeration") {
  for (const char* spec : {"affine:1", "power:0.5", "table:[1,3,2],tail=hold"}) {
    const auto fn = parse_function(spec);
    for (std::size_t n = 2; n <= 6; ++n) {
      std::vector<std::uint32_t> parent(n, 0);
      std::vector<std::vector<std::uint32_t>> histories;
      enumerate(parent, 1, histories);
      double e = 0.0;
      for (const auto& h : histories) {
        std::size_t d = 0;
        for (std::uint32_t v = static_cast<std::uint32_t>(n - 1); v != 0; v = h[v]) ++d;
        e += history_probability(fn, h) * d;
      }
      CHECK(std::fabs(exact_expected_depth(fn, n) - e) < 1e-13);
    }
  }
}

TEST_CASE("monte carlo agrees with the oracle") {
  for (const auto& fn : {kConst, kAffine}) {
    for (std::size_t n : {4, 7}) {
      const auto s = monte_carlo(fn, n, 1000000, 31337);
      const double log_n = std::log(static_cast<double>(n));
      const double exact = exact_expected_depth(fn, n);
      CAPTURE(n);
      CHECK(std::fabs(s.mean_D_over_logn * log_n - exact) < 4.0 * s.stderr_D * log_n);
    }
  }
}

TEST_CASE("monte carlo summary is reproducible") {
  const auto a = monte_carlo(kAffine, 500, 40, 9);
  const auto b = monte_carlo(kAffine, 500, 40, 9);
  CHECK(a.mean_D_over_logn == b.mean_D_over_logn);
  CHECK(a.stderr_H == b.stderr_H);
  CHECK(a.reps == 40);
  CHECK(a.seed_base == 9);
  CHECK(a.stderr_D >= 0.0);
  CHECK_THROWS_AS(monte_carlo(kAffine, 1, 5, 0), DomainError);
  CHECK_THROWS_AS(monte_carlo(kAffine, 10, 0, 0), DomainError);
}

TEST_CASE("finite-n ordering at oracle scale") {
  const std::pair<const char*, const char*> pairs[] = {
      {"const:1", "affine:1"}, {"power:0.3", "power:0.7"}, {"const:1", "power:0.5"},
      {"power:0.2", "power:0.8"}, {"const:1", "power:0.6"}, {"affine:2", "affine:0.5"},
  };
  for (const auto& [gs, fs] : pairs) {
    const auto g = parse_function(gs), f = parse_function(fs);
    for (std::size_t n = 2; n <= 7; ++n) {
      CAPTURE(fs);
      CAPTURE(n);
      CHECK(exact_expected_depth(f, n) <= exact_expected_depth(g, n) + 1e-12);
    }
  }
}

TEST_CASE("root law sampler") {
  const std::size_t count = 1000000;
  const auto h = sample_root_law(kConst, 1.0, count, 5);
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t n = 1; n < h.counts.size(); ++n) {
    sum += static_cast<double>(n) * h.counts[n];
    sum2 += static_cast<double>(n) * n * h.counts[n];
  }
  const double mean = sum / count;
  const double se = std::sqrt((sum2 / count - mean * mean) / count);
  CHECK(std::fabs(mean - 2.0) < 3.0 * se);
  CHECK(h.overflow == 0);
  CHECK(h.overflow_mass < 1e-9);

  const auto a = sample_root_law(kAffine, 3.0, count, 6);
  const double p1 = static_cast<double>(a.counts[1]) / count;
  CHECK(std::fabs(p1 - 0.5) < 4.0 * std::sqrt(0.25 / count));
  CHECK_THROWS_AS(sample_root_law(kAffine, 0.5, 10, 1), DivergentSeries);
}
