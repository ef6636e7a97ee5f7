#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <string>

#include "patree/attach.hpp"
#include "patree/errors.hpp"

namespace patree {

namespace {

std::string fmt(double x) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  AttachmentFunction parse_all() {
    auto fn = parse_spec();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return fn;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& why) const {
    throw ParseError("cannot parse attachment function '" + std::string(s_) + "' at offset " +
                     std::to_string(pos_) + ": " + why);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(std::string_view tok) {
    skip_ws();
    if (s_.substr(pos_, tok.size()) == tok) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }

  void expect(std::string_view tok) {
    if (!accept(tok)) fail("expected '" + std::string(tok) + "'");
  }

  // Lookahead for ",key=" without consuming on mismatch.
  bool accept_option(std::string_view key) {
    const std::size_t save = pos_;
    if (accept(",") && accept(key) && accept("=")) return true;
    pos_ = save;
    return false;
  }

  double number() {
    skip_ws();
    std::size_t end = pos_;
    while (end < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[end])) ||
                               s_[end] == '.' || s_[end] == 'e' || s_[end] == 'E' ||
                               s_[end] == '+' || s_[end] == '-'))
      ++end;
    if (end == pos_) fail("expected a number");
    const std::string tok(s_.substr(pos_, end - pos_));
    char* stop = nullptr;
    const double v = std::strtod(tok.c_str(), &stop);
    if (stop != tok.c_str() + tok.size() || !std::isfinite(v)) fail("bad number '" + tok + "'");
    pos_ = end;
    return v;
  }

  AttachmentFunction with_rv(AttachmentFunction fn) {
    if (accept_option("rv")) {
      if (accept("none")) return fn.with_rv_index(std::nullopt);
      return fn.with_rv_index(number());
    }
    return fn;
  }

  AttachmentFunction parse_spec() {
    if (accept("(")) {
      auto inner = parse_spec();
      expect(")");
      return with_rv(inner);
    }
    if (accept("const:")) return with_rv(AttachmentFunction::constant(number()));
    if (accept("affine:")) return with_rv(AttachmentFunction::affine(number()));
    if (accept("power:")) {
      const double rho = number();
      double shift = 1.0;
      if (accept_option("shift")) shift = number();
      return with_rv(AttachmentFunction::power(rho, shift));
    }
    if (accept("table:")) {
      expect("[");
      std::vector<double> values{number()};
      while (accept(",")) values.push_back(number());
      expect("]");
      TailRule tail;
      if (accept_option("tail")) {
        if (accept("hold")) {
          tail = TailRule::hold();
        } else if (accept("affine(")) {
          tail = TailRule::extend_affine(number());
          expect(")");
        } else if (accept("power(")) {
          tail = TailRule::extend_power(number());
          expect(")");
        } else {
          fail("tail must be hold, affine(slope) or power(rho)");
        }
      }
      return with_rv(AttachmentFunction::table(std::move(values), tail));
    }
    if (accept("scale:")) {
      accept("c=");
      const double c = number();
      if (!accept_option("fn")) fail("expected ',fn=<spec>'");
      auto base = parse_spec();
      return with_rv(AttachmentFunction::scaled(base, c));
    }
    if (accept("interp:")) {
      if (!accept("theta=") && !accept("\xCE\xB8=")) fail("expected 'theta='");
      const double theta = number();
      if (!accept_option("g")) fail("expected ',g=<spec>'");
      auto g = parse_spec();
      if (!accept_option("f")) fail("expected ',f=<spec>'");
      auto f = parse_spec();
      return with_rv(AttachmentFunction::interpolated(g, f, theta));
    }
    fail("unknown kind; expected const, affine, power, table, scale or interp");
  }
};

bool composite(const AttachmentFunction& fn) {
  return fn.kind() == FunctionKind::Scaled || fn.kind() == FunctionKind::Interpolated;
}

std::string rv_suffix(const AttachmentFunction& fn) {
  if (!fn.node().rv_overridden) return {};
  return ",rv=" + (fn.rv_index() ? fmt(*fn.rv_index()) : std::string("none"));
}

std::string body_spec(const AttachmentFunction& fn);

std::string nested(const AttachmentFunction& fn) {
  if (composite(fn) || fn.node().rv_overridden) return "(" + to_spec(fn) + ")";
  return body_spec(fn);
}

std::string body_spec(const AttachmentFunction& fn) {
  const auto& b = fn.node().body;
  if (auto* c = std::get_if<fn::Constant>(&b)) return "const:" + fmt(c->c);
  if (auto* a = std::get_if<fn::Affine>(&b)) return "affine:" + fmt(a->delta);
  if (auto* p = std::get_if<fn::PowerShift>(&b))
    return "power:" + fmt(p->rho) + ",shift=" + fmt(p->shift);
  if (auto* t = std::get_if<fn::Tabulated>(&b)) {
    std::string s = "table:[";
    for (std::size_t i = 0; i < t->values.size(); ++i) {
      if (i) s += ",";
      s += fmt(t->values[i]);
    }
    s += "],tail=";
    switch (t->tail.kind) {
      case TailRule::Kind::HoldLast: s += "hold"; break;
      case TailRule::Kind::ExtendAffine: s += "affine(" + fmt(t->tail.param) + ")"; break;
      case TailRule::Kind::ExtendPower: s += "power(" + fmt(t->tail.param) + ")"; break;
    }
    return s;
  }
  if (auto* sc = std::get_if<fn::Scaled>(&b)) return "scale:" + fmt(sc->c) + ",fn=" + nested(sc->base);
  const auto& ip = std::get<fn::Interpolated>(b);
  return "interp:theta=" + fmt(ip.theta) + ",g=" + nested(ip.g) + ",f=" + nested(ip.f);
}

const char* tail_name(TailRule::Kind k) {
  switch (k) {
    case TailRule::Kind::HoldLast: return "hold";
    case TailRule::Kind::ExtendAffine: return "affine";
    case TailRule::Kind::ExtendPower: return "power";
  }
  return "hold";
}

double jnum(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number())
    throw ParseError(std::string("attachment function JSON needs numeric field '") + key + "'");
  return j.at(key).get<double>();
}

}  // namespace

AttachmentFunction parse_function(std::string_view text) { return Parser(text).parse_all(); }

std::string to_spec(const AttachmentFunction& fn) {
  if (fn.node().rv_overridden && composite(fn)) return "(" + body_spec(fn) + ")" + rv_suffix(fn);
  return body_spec(fn) + rv_suffix(fn);
}

nlohmann::json to_json(const AttachmentFunction& fn) {
  nlohmann::json j;
  const auto& b = fn.node().body;
  if (auto* c = std::get_if<fn::Constant>(&b)) {
    j["kind"] = "const";
    j["c"] = c->c;
  } else if (auto* a = std::get_if<fn::Affine>(&b)) {
    j["kind"] = "affine";
    j["delta"] = a->delta;
  } else if (auto* p = std::get_if<fn::PowerShift>(&b)) {
    j["kind"] = "power";
    j["rho"] = p->rho;
    j["shift"] = p->shift;
  } else if (auto* t = std::get_if<fn::Tabulated>(&b)) {
    j["kind"] = "table";
    j["values"] = t->values;
    j["tail_rule"] = tail_name(t->tail.kind);
    if (t->tail.kind != TailRule::Kind::HoldLast) j["tail_param"] = t->tail.param;
  } else if (auto* sc = std::get_if<fn::Scaled>(&b)) {
    j["kind"] = "scale";
    j["c"] = sc->c;
    j["base"] = to_json(sc->base);
  } else {
    const auto& ip = std::get<fn::Interpolated>(b);
    j["kind"] = "interp";
    j["theta"] = ip.theta;
    j["g"] = to_json(ip.g);
    j["f"] = to_json(ip.f);
  }
  j["rv_index"] = fn.rv_index() ? nlohmann::json(*fn.rv_index()) : nlohmann::json(nullptr);
  return j;
}

AttachmentFunction function_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
    throw ParseError("attachment function JSON needs a string 'kind'");
  const auto kind = j.at("kind").get<std::string>();
  AttachmentFunction fn = [&] {
    if (kind == "const") return AttachmentFunction::constant(jnum(j, "c"));
    if (kind == "affine") return AttachmentFunction::affine(jnum(j, "delta"));
    if (kind == "power")
      return AttachmentFunction::power(jnum(j, "rho"), j.contains("shift") ? jnum(j, "shift") : 1.0);
    if (kind == "table") {
      if (!j.contains("values") || !j.at("values").is_array())
        throw ParseError("table JSON needs a 'values' array");
      auto values = j.at("values").get<std::vector<double>>();
      TailRule tail;
      const auto rule = j.value("tail_rule", std::string("hold"));
      if (rule == "affine") tail = TailRule::extend_affine(jnum(j, "tail_param"));
      else if (rule == "power") tail = TailRule::extend_power(jnum(j, "tail_param"));
      else if (rule != "hold") throw ParseError("unknown tail_rule '" + rule + "'");
      return AttachmentFunction::table(std::move(values), tail);
    }
    if (kind == "scale") return AttachmentFunction::scaled(function_from_json(j.at("base")), jnum(j, "c"));
    if (kind == "interp")
      return AttachmentFunction::interpolated(function_from_json(j.at("g")),
                                              function_from_json(j.at("f")), jnum(j, "theta"));
    throw ParseError("unknown attachment function kind '" + kind + "'");
  }();
  if (j.contains("rv_index")) {
    const auto& rv = j.at("rv_index");
    std::optional<double> want;
    if (rv.is_number()) want = rv.get<double>();
    else if (!rv.is_null()) throw ParseError("rv_index must be a number or null");
    if (want != fn.rv_index()) fn = fn.with_rv_index(want);
  }
  return fn;
}

}  // namespace patree
