#include "patree/attach.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <type_traits>

#include "patree/errors.hpp"

namespace patree {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string num(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw DomainError(std::string(what) + " must be finite, got " + num(x));
}

double checked(double v, double x) {
  if (!(v > 0.0) || std::isnan(v))
    throw NonPositiveValue("attachment function is " + num(v) + " at k=" + num(x));
  return v;
}

std::optional<double> default_rv(const AttachmentFunction::Node& n);

double table_log_at(const fn::Tabulated& t, double x) {
  const std::size_t len = t.values.size();
  const double last = static_cast<double>(len - 1);
  if (x <= last) {
    const auto i = static_cast<std::size_t>(std::floor(x));
    const double frac = x - static_cast<double>(i);
    if (frac == 0.0 || i + 1 >= len) return std::log(t.values[i]);
    return std::log(t.values[i] + frac * (t.values[i + 1] - t.values[i]));
  }
  const double vl = t.values.back();
  switch (t.tail.kind) {
    case TailRule::Kind::HoldLast:
      return std::log(vl);
    case TailRule::Kind::ExtendAffine:
      return std::log(checked(vl + t.tail.param * (x - last), x));
    case TailRule::Kind::ExtendPower:
      return std::log(vl) + t.tail.param * std::log((x + 1.0) / static_cast<double>(len));
  }
  return std::log(vl);
}

double log_at_impl(const AttachmentFunction::Node& n, double x) {
  return std::visit(
      Overloaded{
          [](const fn::Constant& c) { return std::log(c.c); },
          [x](const fn::Affine& a) { return std::log(x + a.delta); },
          [x](const fn::PowerShift& p) { return p.rho * std::log(x + p.shift); },
          [x](const fn::Tabulated& t) { return table_log_at(t, x); },
          [x](const fn::Scaled& s) { return std::log(s.c) + s.base.log_at(x); },
          [x](const fn::Interpolated& ip) {
            if (ip.theta == 0.0) return ip.g.log_at(x);
            if (ip.theta == 1.0) return ip.f.log_at(x);
            const double lg = ip.g.log_at(x);
            return lg + ip.theta * (ip.f.log_at(x) - lg);
          },
      },
      n.body);
}

double at_impl(const AttachmentFunction::Node& n, double x) {
  return std::visit(
      Overloaded{
          [](const fn::Constant& c) { return c.c; },
          [x](const fn::Affine& a) { return x + a.delta; },
          [x](const fn::PowerShift& p) { return std::pow(x + p.shift, p.rho); },
          [x](const fn::Tabulated& t) {
            const double last = static_cast<double>(t.values.size() - 1);
            if (x <= last) {
              const auto i = static_cast<std::size_t>(std::floor(x));
              const double frac = x - static_cast<double>(i);
              if (frac == 0.0 || i + 1 >= t.values.size()) return t.values[i];
              return t.values[i] + frac * (t.values[i + 1] - t.values[i]);
            }
            if (t.tail.kind == TailRule::Kind::HoldLast) return t.values.back();
            if (t.tail.kind == TailRule::Kind::ExtendAffine)
              return t.values.back() + t.tail.param * (x - last);
            return t.values.back() *
                   std::pow((x + 1.0) / static_cast<double>(t.values.size()), t.tail.param);
          },
          [x](const fn::Scaled& s) { return s.c * s.base.at(x); },
          [x](const fn::Interpolated& ip) {
            if (ip.theta == 0.0) return ip.g.at(x);
            if (ip.theta == 1.0) return ip.f.at(x);
            const double lg = ip.g.log_at(x);
            return std::exp(lg + ip.theta * (ip.f.log_at(x) - lg));
          },
      },
      n.body);
}

std::optional<double> default_rv(const AttachmentFunction::Node& n) {
  return std::visit(
      Overloaded{
          [](const fn::Constant&) -> std::optional<double> { return 0.0; },
          [](const fn::Affine&) -> std::optional<double> { return std::nullopt; },
          [](const fn::PowerShift& p) -> std::optional<double> {
            if (p.rho >= 0.0 && p.rho < 1.0) return p.rho;
            return std::nullopt;
          },
          [](const fn::Tabulated& t) -> std::optional<double> {
            switch (t.tail.kind) {
              case TailRule::Kind::HoldLast:
                return 0.0;
              case TailRule::Kind::ExtendAffine:
                if (t.tail.param == 0.0) return 0.0;
                return std::nullopt;
              case TailRule::Kind::ExtendPower:
                if (t.tail.param >= 0.0 && t.tail.param < 1.0) return t.tail.param;
                return std::nullopt;
            }
            return std::nullopt;
          },
          [](const fn::Scaled& s) -> std::optional<double> { return s.base.rv_index(); },
          [](const fn::Interpolated& ip) -> std::optional<double> {
            if (ip.theta == 0.0) return ip.g.rv_index();
            if (ip.theta == 1.0) return ip.f.rv_index();
            auto rg = ip.g.rv_index();
            auto rf = ip.f.rv_index();
            if (rg && rf) return (1.0 - ip.theta) * *rg + ip.theta * *rf;
            return std::nullopt;
          },
      },
      n.body);
}

AttachmentFunction::Node make_node(decltype(AttachmentFunction::Node::body) body) {
  AttachmentFunction::Node n{std::move(body), std::nullopt, false};
  n.rv_index = default_rv(n);
  return n;
}

}  // namespace

AttachmentFunction AttachmentFunction::constant(double c) {
  require_finite(c, "constant c");
  if (c <= 0.0) throw NonPositiveValue("constant attachment needs c > 0, got " + num(c));
  return AttachmentFunction(std::make_shared<const Node>(make_node(fn::Constant{c})));
}

AttachmentFunction AttachmentFunction::affine(double delta) {
  require_finite(delta, "affine delta");
  if (delta <= 0.0) throw NonPositiveValue("affine attachment needs delta > 0, got " + num(delta));
  return AttachmentFunction(std::make_shared<const Node>(make_node(fn::Affine{delta})));
}

AttachmentFunction AttachmentFunction::power(double rho, double shift) {
  require_finite(rho, "power rho");
  require_finite(shift, "power shift");
  if (shift <= 0.0) throw NonPositiveValue("power attachment needs shift > 0, got " + num(shift));
  return AttachmentFunction(std::make_shared<const Node>(make_node(fn::PowerShift{rho, shift})));
}

AttachmentFunction AttachmentFunction::table(std::vector<double> values, TailRule tail) {
  if (values.empty()) throw DomainError("table attachment needs at least one value");
  for (double v : values) {
    require_finite(v, "table value");
    if (v <= 0.0) throw NonPositiveValue("table attachment value " + num(v) + " is not positive");
  }
  require_finite(tail.param, "tail parameter");
  return AttachmentFunction(
      std::make_shared<const Node>(make_node(fn::Tabulated{std::move(values), tail})));
}

AttachmentFunction AttachmentFunction::scaled(AttachmentFunction base, double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("scale factor must be > 0, got " + num(c));
  return AttachmentFunction(std::make_shared<const Node>(make_node(fn::Scaled{std::move(base), c})));
}

AttachmentFunction AttachmentFunction::interpolated(AttachmentFunction g, AttachmentFunction f,
                                                    double theta) {
  if (!(theta >= 0.0 && theta <= 1.0))
    throw DomainError("interpolation theta must lie in [0,1], got " + num(theta));
  return AttachmentFunction(std::make_shared<const Node>(
      make_node(fn::Interpolated{std::move(g), std::move(f), theta})));
}

FunctionKind AttachmentFunction::kind() const {
  return static_cast<FunctionKind>(node_->body.index());
}

double AttachmentFunction::operator()(std::size_t k) const {
  const double x = static_cast<double>(k);
  const double v = at_impl(*node_, x);
  if (!std::isfinite(v)) throw NonPositiveValue("attachment function is not finite at k=" + num(x));
  return checked(v, x);
}

double AttachmentFunction::log_value(std::size_t k) const {
  return log_at(static_cast<double>(k));
}

double AttachmentFunction::at(double x) const { return checked(at_impl(*node_, x), x); }

double AttachmentFunction::log_at(double x) const {
  const double v = log_at_impl(*node_, x);
  if (std::isnan(v) || v == -std::numeric_limits<double>::infinity())
    throw NonPositiveValue("attachment function is not positive at k=" + num(x));
  return v;
}

std::optional<double> AttachmentFunction::rv_index() const { return node_->rv_index; }

AttachmentFunction AttachmentFunction::with_rv_index(std::optional<double> rho) const {
  if (rho && !(*rho >= 0.0 && *rho < 1.0))
    throw DomainError("rv_index must lie in [0,1), got " + num(*rho));
  Node n{node_->body, rho, true};
  return AttachmentFunction(std::make_shared<const Node>(std::move(n)));
}

double eval(const AttachmentFunction& fn, std::size_t k) { return fn(k); }

double growth_ratio(const AttachmentFunction& fn, std::size_t k) {
  return fn(k + 1) / fn(k);
}

AttachmentFunction interpolate(const AttachmentFunction& g, const AttachmentFunction& f,
                               double theta) {
  return AttachmentFunction::interpolated(g, f, theta);
}

AttachmentFunction scale(const AttachmentFunction& fn, double c) {
  return AttachmentFunction::scaled(fn, c);
}

// ---------------------------------------------------------------------------
// GRD order

namespace {

const AttachmentFunction& unwrap_scale(const AttachmentFunction& fn) {
  const AttachmentFunction* p = &fn;
  while (auto* s = std::get_if<fn::Scaled>(&p->node().body)) p = &s->base;
  return *p;
}

bool known_nondecreasing(const AttachmentFunction& fn) {
  const auto& u = unwrap_scale(fn);
  return std::visit(
      Overloaded{
          [](const fn::Constant&) { return true; },
          [](const fn::Affine&) { return true; },
          [](const fn::PowerShift& p) { return p.rho >= 0.0; },
          [](const fn::Tabulated&) { return false; },
          [](const fn::Scaled&) { return false; },
          [](const fn::Interpolated& ip) {
            return known_nondecreasing(ip.g) && known_nondecreasing(ip.f);
          },
      },
      u.node().body);
}

bool same_structure(const AttachmentFunction& a, const AttachmentFunction& b) {
  if (a.same_as(b)) return true;
  return to_spec(a) == to_spec(b);
}

bool analytic_dominates(const AttachmentFunction& f0, const AttachmentFunction& g0) {
  const auto& f = unwrap_scale(f0);
  const auto& g = unwrap_scale(g0);
  const auto& fb = f.node().body;
  const auto& gb = g.node().body;

  if (std::holds_alternative<fn::Constant>(gb)) return known_nondecreasing(f);
  if (auto* fa = std::get_if<fn::Affine>(&fb)) {
    if (auto* ga = std::get_if<fn::Affine>(&gb)) return fa->delta <= ga->delta;
  }
  if (auto* fp = std::get_if<fn::PowerShift>(&fb)) {
    if (auto* gp = std::get_if<fn::PowerShift>(&gb))
      return fp->shift == gp->shift && fp->rho >= gp->rho;
  }
  // Points on one interpolation path are ordered by theta when the
  // endpoints are.
  auto* fi = std::get_if<fn::Interpolated>(&fb);
  auto* gi = std::get_if<fn::Interpolated>(&gb);
  if (fi && gi && same_structure(fi->g, gi->g) && same_structure(fi->f, gi->f))
    return fi->theta >= gi->theta && analytic_dominates(fi->f, fi->g);
  if (fi && same_structure(fi->g, g)) return analytic_dominates(fi->f, fi->g);
  if (gi && same_structure(gi->f, f)) return analytic_dominates(gi->f, gi->g);
  return false;
}

}  // namespace

bool uses_table_tail(const AttachmentFunction& fn, std::size_t k_max) {
  return std::visit(
      Overloaded{
          [k_max](const fn::Tabulated& t) { return t.values.size() <= k_max; },
          [k_max](const fn::Scaled& s) { return uses_table_tail(s.base, k_max); },
          [k_max](const fn::Interpolated& ip) {
            return uses_table_tail(ip.g, k_max) || uses_table_tail(ip.f, k_max);
          },
          [](const auto&) { return false; },
      },
      fn.node().body);
}

GrdVerdict is_grd_dominant(const AttachmentFunction& f, const AttachmentFunction& g,
                           std::size_t k_max) {
  GrdVerdict v;
  v.tail_extended = uses_table_tail(f, k_max) || uses_table_tail(g, k_max);
  if (analytic_dominates(f, g)) {
    v.kind = GrdVerdict::Kind::AnalyticDominates;
    return v;
  }
  // Compare log increments; the slack absorbs rounding when both ratios are
  // equal in exact arithmetic.
  constexpr double slack = 1e-12;
  double lf = f.log_value(0), lg = g.log_value(0);
  for (std::size_t k = 0; k < k_max; ++k) {
    const double lf1 = f.log_value(k + 1), lg1 = g.log_value(k + 1);
    if ((lf1 - lf) < (lg1 - lg) - slack) {
      v.kind = GrdVerdict::Kind::Fails;
      v.first_violation = k;
      return v;
    }
    lf = lf1;
    lg = lg1;
  }
  v.kind = GrdVerdict::Kind::Dominates;
  return v;
}

std::string to_string(const GrdVerdict& v) {
  std::string s;
  switch (v.kind) {
    case GrdVerdict::Kind::Dominates: s = "Dominates"; break;
    case GrdVerdict::Kind::AnalyticDominates: s = "AnalyticDominates"; break;
    case GrdVerdict::Kind::Fails: s = "Fails(k=" + std::to_string(v.first_violation) + ")"; break;
  }
  if (v.tail_extended) s += " [tail-extended verdict]";
  return s;
}

std::optional<std::size_t> first_decrease(const AttachmentFunction& fn, std::size_t k_max) {
  double prev = fn(0);
  for (std::size_t k = 0; k < k_max; ++k) {
    const double next = fn(k + 1);
    if (next < prev * (1.0 - 1e-14)) return k;
    prev = next;
  }
  return std::nullopt;
}

}  // namespace patree
