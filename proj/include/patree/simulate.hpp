#pragma once

// Discrete preferential-attachment tree growth: vertex m joins as a child of
// vertex i with probability f(children(i)) / sum_j f(children(j)).

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "patree/attach.hpp"
#include "patree/series.hpp"

namespace patree {

/// Philox4x64-10 counter-based generator (Salmon et al. 2011). Replica i of a
/// Monte Carlo run with seed base S uses key {S + i, 0} and a counter that
/// starts at zero; the output stream equals numpy.random.Philox with the same
/// key.
class Philox4x64 {
 public:
  using Block = std::array<std::uint64_t, 4>;
  using Key = std::array<std::uint64_t, 2>;

  explicit Philox4x64(std::uint64_t seed, std::uint64_t stream = 0) : key_{seed, stream} {}

  static Block block(Block counter, Key key);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

 private:
  Key key_;
  Block counter_{};
  Block buffer_{};
  int used_ = 4;
};

/// Prefix sums over per-vertex weights with point updates and weighted
/// selection in O(log n).
class Fenwick {
 public:
  void reserve(std::size_t n) { tree_.reserve(n + 1); }
  std::size_t size() const { return tree_.empty() ? 0 : tree_.size() - 1; }
  void push_back(double w);
  void add(std::size_t i, double delta);
  double prefix(std::size_t count) const;  // sum of the first count weights
  /// Smallest i with prefix(i + 1) > u, clamped to the last index.
  std::size_t find(double u) const;
  void rebuild(const std::vector<double>& weights);

 private:
  std::vector<double> tree_;  // 1-based
};

/// Vertices are stored 0-based: index 0 is the root (vertex 1).
struct TreeState {
  std::vector<std::uint32_t> parent;    // parent[0] is unused
  std::vector<std::uint32_t> depth;
  std::vector<std::uint32_t> children;
  Fenwick weight_index;
  double total_weight = 0.0;
  std::size_t n = 0;
  std::uint32_t max_depth = 0;

  /// |total_weight - sum_i f(children[i])| / total, with the sum recomputed.
  double weight_drift(const AttachmentFunction& fn) const;
};

struct SimSummary {
  std::size_t n = 0;
  std::size_t reps = 0;
  double mean_D_over_logn = 0.0;
  double stderr_D = 0.0;
  double mean_H_over_logn = 0.0;
  double stderr_H = 0.0;
  std::uint64_t seed_base = 0;
};

TreeState grow(const AttachmentFunction& fn, std::size_t n, std::uint64_t seed);
std::size_t insertion_depth(const TreeState& tree);
std::size_t height(const TreeState& tree);

/// Replica i uses seed seed_base + i. Replicas run on PA_THREADS workers; the
/// summary does not depend on the worker count.
SimSummary monte_carlo(const AttachmentFunction& fn, std::size_t n, std::size_t reps,
                       std::uint64_t seed_base);

/// E[D_n] by enumerating all (n-1)! attachment histories, 2 <= n <= 9.
double exact_expected_depth(const AttachmentFunction& fn, std::size_t n);

struct RootLawHistogram {
  std::vector<std::uint64_t> counts;  // counts[n] for n = 1..N; counts[0] stays 0
  std::uint64_t overflow = 0;         // draws beyond the table
  double overflow_mass = 0.0;         // P(N > table end)
};

/// Draws N with P(N = n) = A_n(lambda) / m(lambda) by inverse CDF.
RootLawHistogram sample_root_law(const AttachmentFunction& fn, double lambda, std::size_t count,
                                 std::uint64_t seed, const TruncationConfig& cfg = {});

}  // namespace patree
