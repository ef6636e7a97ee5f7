#include "patree/simulate.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "patree/errors.hpp"
#include "patree/numeric.hpp"
#include "patree/parallel.hpp"

namespace patree {

namespace {

constexpr std::uint64_t kM0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kM1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kW0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kW1 = 0xBB67AE8584CAA73BULL;

// Recompute the running total and the index from scratch this often.
constexpr std::size_t kRebuildEvery = 1 << 18;

__extension__ typedef unsigned __int128 u128;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
  const u128 p = static_cast<u128>(a) * b;
  hi = static_cast<std::uint64_t>(p >> 64);
  lo = static_cast<std::uint64_t>(p);
}

}  // namespace

Philox4x64::Block Philox4x64::block(Block x, Key k) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kW0;
      k[1] += kW1;
    }
    std::uint64_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, x[0], hi0, lo0);
    mulhilo(kM1, x[2], hi1, lo1);
    x = {hi1 ^ x[1] ^ k[0], lo1, hi0 ^ x[3] ^ k[1], lo0};
  }
  return x;
}

std::uint64_t Philox4x64::next_u64() {
  if (used_ == 4) {
    for (auto& word : counter_)
      if (++word != 0) break;
    buffer_ = block(counter_, key_);
    used_ = 0;
  }
  return buffer_[used_++];
}

void Fenwick::push_back(double w) {
  if (tree_.empty()) tree_.push_back(0.0);
  const std::size_t i = tree_.size();  // 1-based position of the new entry
  // Node i covers (i - lowbit(i), i]; gather the already stored children.
  double v = w;
  const std::size_t low = i & (~i + 1);
  for (std::size_t step = 1; step < low; step <<= 1) v += tree_[i - step];
  tree_.push_back(v);
}

void Fenwick::add(std::size_t i, double delta) {
  for (std::size_t j = i + 1; j < tree_.size(); j += j & (~j + 1)) tree_[j] += delta;
}

double Fenwick::prefix(std::size_t count) const {
  double s = 0.0;
  for (std::size_t j = count; j > 0; j -= j & (~j + 1)) s += tree_[j];
  return s;
}

std::size_t Fenwick::find(double u) const {
  const std::size_t n = size();
  std::size_t pos = 0;
  for (std::size_t step = std::bit_floor(n); step > 0; step >>= 1) {
    const std::size_t next = pos + step;
    if (next <= n && tree_[next] <= u) {
      pos = next;
      u -= tree_[next];
    }
  }
  return std::min(pos, n - 1);
}

void Fenwick::rebuild(const std::vector<double>& weights) {
  tree_.assign(weights.size() + 1, 0.0);
  for (std::size_t i = 1; i <= weights.size(); ++i) {
    tree_[i] += weights[i - 1];
    const std::size_t parent = i + (i & (~i + 1));
    if (parent <= weights.size()) tree_[parent] += tree_[i];
  }
}

double TreeState::weight_drift(const AttachmentFunction& fn) const {
  CompensatedSum s;
  for (std::size_t i = 0; i < n; ++i) s += fn(children[i]);
  return std::fabs(total_weight - s.value()) / s.value();
}

TreeState grow(const AttachmentFunction& fn, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw DomainError("tree size must be at least 1");
  FunctionSamples fv(fn);
  Philox4x64 rng(seed);
  TreeState t;
  t.parent.reserve(n);
  t.depth.reserve(n);
  t.children.reserve(n);
  t.weight_index.reserve(n);
  auto add_vertex = [&](std::uint32_t parent, std::uint32_t depth) {
    t.parent.push_back(parent);
    t.depth.push_back(depth);
    t.children.push_back(0);
    const double w0 = fv[0];
    t.weight_index.push_back(w0);
    t.total_weight += w0;
    ++t.n;
    t.max_depth = std::max(t.max_depth, depth);
  };
  add_vertex(0, 0);
  for (std::size_t m = 2; m <= n; ++m) {
    const std::size_t i = t.weight_index.find(rng.uniform() * t.total_weight);
    const std::uint32_t k = t.children[i]++;
    const double delta = fv[k + 1] - fv[k];
    t.weight_index.add(i, delta);
    t.total_weight += delta;
    add_vertex(static_cast<std::uint32_t>(i), t.depth[i] + 1);
    if (m % kRebuildEvery == 0) {
      std::vector<double> w(t.n);
      CompensatedSum total;
      for (std::size_t v = 0; v < t.n; ++v) {
        w[v] = fv[t.children[v]];
        total += w[v];
      }
      t.weight_index.rebuild(w);
      t.total_weight = total.value();
    }
  }
  return t;
}

std::size_t insertion_depth(const TreeState& tree) { return tree.depth.at(tree.n - 1); }

std::size_t height(const TreeState& tree) { return tree.max_depth; }

namespace {

// Pairwise sum in index order, independent of how the values were produced.
double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

void mean_stderr(const std::vector<double>& x, double& mean, double& se) {
  const std::size_t n = x.size();
  mean = pairwise_sum(x.data(), n) / static_cast<double>(n);
  if (n < 2) {
    se = 0.0;
    return;
  }
  std::vector<double> dev(n);
  for (std::size_t i = 0; i < n; ++i) dev[i] = (x[i] - mean) * (x[i] - mean);
  const double var = pairwise_sum(dev.data(), n) / static_cast<double>(n - 1);
  se = std::sqrt(var / static_cast<double>(n));
}

}  // namespace

SimSummary monte_carlo(const AttachmentFunction& fn, std::size_t n, std::size_t reps,
                       std::uint64_t seed_base) {
  if (n < 2) throw DomainError("monte_carlo needs n >= 2");
  if (reps < 1) throw DomainError("monte_carlo needs reps >= 1");
  const double log_n = std::log(static_cast<double>(n));
  std::vector<double> D(reps), H(reps);
  parallel_for(reps, [&](std::size_t i) {
    const TreeState t = grow(fn, n, seed_base + i);
    D[i] = static_cast<double>(insertion_depth(t)) / log_n;
    H[i] = static_cast<double>(height(t)) / log_n;
  });
  SimSummary s;
  s.n = n;
  s.reps = reps;
  s.seed_base = seed_base;
  mean_stderr(D, s.mean_D_over_logn, s.stderr_D);
  mean_stderr(H, s.mean_H_over_logn, s.stderr_H);
  return s;
}

namespace {

struct Enumerator {
  std::size_t n;
  std::vector<double> fval;
  std::vector<std::uint32_t> children, depth;

  // Expected depth of vertex n given the first `size` vertices.
  double expect(std::size_t size) {
    double total = 0.0;
    for (std::size_t i = 0; i < size; ++i) total += fval[children[i]];
    double e = 0.0;
    for (std::size_t i = 0; i < size; ++i) {
      const double p = fval[children[i]] / total;
      if (size + 1 == n) {
        e += p * (depth[i] + 1.0);
        continue;
      }
      ++children[i];
      depth[size] = depth[i] + 1;
      children[size] = 0;
      e += p * expect(size + 1);
      --children[i];
    }
    return e;
  }
};

}  // namespace

double exact_expected_depth(const AttachmentFunction& fn, std::size_t n) {
  if (n < 2 || n > 9)
    throw DomainError("exact_expected_depth enumerates (n-1)! histories and needs 2 <= n <= 9");
  Enumerator en{n, {}, std::vector<std::uint32_t>(n, 0), std::vector<std::uint32_t>(n, 0)};
  for (std::size_t k = 0; k < n; ++k) en.fval.push_back(fn(k));
  return en.expect(1);
}

RootLawHistogram sample_root_law(const AttachmentFunction& fn, double lambda, std::size_t count,
                                 std::uint64_t seed, const TruncationConfig& cfg) {
  cfg.validate();
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be positive");
  FunctionSamples fs(fn);
  const DirectTable t = build_direct_table(fs, lambda, cfg, cfg.tail_handoff);
  const std::size_t N = t.N;

  std::vector<double> cdf(N + 1, 0.0);
  CompensatedSum acc;
  for (std::size_t n = 1; n <= N; ++n) {
    acc += t.A[n];
    cdf[n] = acc.value();
  }
  double rest = 0.0;
  if (t.has_tail) {
    TailSpec spec;
    spec.dim = 0;
    spec.n_out = 1;
    spec.increment = [](double, const double*, double*) {};
    spec.outputs = [](const double*, double* o) { o[0] = 1.0; };
    rest = tail_moments(fs, t, spec, {}, {acc.value()})[0];
  }
  const double m = acc.value() + rest;
  for (auto& v : cdf) v /= m;

  RootLawHistogram h;
  h.counts.assign(N + 1, 0);
  h.overflow_mass = rest / m;
  Philox4x64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const double u = rng.uniform();
    if (u >= cdf[N]) {
      ++h.overflow;
      continue;
    }
    const auto it = std::upper_bound(cdf.begin() + 1, cdf.end(), u);
    ++h.counts[static_cast<std::size_t>(it - cdf.begin())];
  }
  return h;
}

}  // namespace patree
