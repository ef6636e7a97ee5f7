#pragma once

// Attachment functions f : N0 -> (0, inf) and their growth-ratio algebra.

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace patree {

enum class FunctionKind { Constant, Affine, PowerShift, Tabulated, Scaled, Interpolated };

/// How a finite table is continued past its last entry.
struct TailRule {
  enum class Kind { HoldLast, ExtendAffine, ExtendPower };
  Kind kind = Kind::HoldLast;
  double param = 0.0;  // slope for ExtendAffine, exponent for ExtendPower

  static TailRule hold() { return {}; }
  static TailRule extend_affine(double slope) { return {Kind::ExtendAffine, slope}; }
  static TailRule extend_power(double rho) { return {Kind::ExtendPower, rho}; }
};

/// Immutable handle to an attachment function. Copies share the underlying
/// expression tree, so passing by value is cheap and thread safe.
class AttachmentFunction {
 public:
  struct Node;

  static AttachmentFunction constant(double c);
  /// k + delta
  static AttachmentFunction affine(double delta);
  /// (k + shift)^rho
  static AttachmentFunction power(double rho, double shift = 1.0);
  static AttachmentFunction table(std::vector<double> values, TailRule tail = TailRule::hold());
  static AttachmentFunction scaled(AttachmentFunction base, double c);
  /// g(k) * (f(k)/g(k))^theta, evaluated in log space.
  static AttachmentFunction interpolated(AttachmentFunction g, AttachmentFunction f, double theta);

  FunctionKind kind() const;
  const Node& node() const { return *node_; }

  /// f(k). Throws NonPositiveValue when the value is not a positive finite number.
  double operator()(std::size_t k) const;
  double log_value(std::size_t k) const;

  /// Smooth extension to real arguments x >= 0. Tables interpolate linearly
  /// inside the table and follow their tail rule beyond it.
  double at(double x) const;
  double log_at(double x) const;

  /// Declared regular-variation index, if any. Defaults come from the kind
  /// (constant: 0, power: rho when rho < 1, ...) and can be overridden.
  std::optional<double> rv_index() const;
  AttachmentFunction with_rv_index(std::optional<double> rho) const;

  bool same_as(const AttachmentFunction& other) const { return node_ == other.node_; }

 private:
  explicit AttachmentFunction(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

namespace fn {
struct Constant {
  double c;
};
struct Affine {
  double delta;
};
struct PowerShift {
  double rho;
  double shift;
};
struct Tabulated {
  std::vector<double> values;
  TailRule tail;
};
struct Scaled {
  AttachmentFunction base;
  double c;
};
struct Interpolated {
  AttachmentFunction g;
  AttachmentFunction f;
  double theta;
};
}  // namespace fn

struct AttachmentFunction::Node {
  std::variant<fn::Constant, fn::Affine, fn::PowerShift, fn::Tabulated, fn::Scaled,
               fn::Interpolated>
      body;
  std::optional<double> rv_index;
  bool rv_overridden = false;
};

double eval(const AttachmentFunction& fn, std::size_t k);

/// f(k+1) / f(k)
double growth_ratio(const AttachmentFunction& fn, std::size_t k);

AttachmentFunction interpolate(const AttachmentFunction& g, const AttachmentFunction& f,
                               double theta);
AttachmentFunction scale(const AttachmentFunction& fn, double c);

struct GrdVerdict {
  enum class Kind { Dominates, Fails, AnalyticDominates };
  Kind kind = Kind::Dominates;
  std::size_t first_violation = 0;  // meaningful for Fails
  /// Set when a hold-last table was checked past its end, where the verdict
  /// compares constant ratios only.
  bool tail_extended = false;

  bool dominates() const { return kind != Kind::Fails; }
};

std::string to_string(const GrdVerdict& v);

inline constexpr std::size_t kDefaultGrdPrefix = 100000;

/// Growth-ratio dominance f >=_GR g. Closed-form rules are tried first; the
/// fallback checks f(k+1)/f(k) >= g(k+1)/g(k) for k < k_max, which certifies
/// the order on that prefix only.
GrdVerdict is_grd_dominant(const AttachmentFunction& f, const AttachmentFunction& g,
                           std::size_t k_max = kDefaultGrdPrefix);

/// Returns the first k < k_max with f(k+1) < f(k), or nullopt.
std::optional<std::size_t> first_decrease(const AttachmentFunction& fn, std::size_t k_max);

/// True when the expression tree contains a table (hold-last or otherwise)
/// shorter than k_max.
bool uses_table_tail(const AttachmentFunction& fn, std::size_t k_max);

// Text grammar:
//   const:1.0   affine:0.5   power:0.3,shift=1   table:[1,1.5,2],tail=hold
//   table:[1,2],tail=affine(0.5)   table:[1,2],tail=power(0.3)
//   scale:2,fn=affine:1   interp:theta=0.25,g=const:1,f=affine:1   (θ= also accepted)
// Any spec may carry ",rv=<index>" and nested specs may be parenthesised.
AttachmentFunction parse_function(std::string_view text);
std::string to_spec(const AttachmentFunction& fn);

nlohmann::json to_json(const AttachmentFunction& fn);
AttachmentFunction function_from_json(const nlohmann::json& j);

}  // namespace patree
