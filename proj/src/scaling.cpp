#include "regionboot/scaling.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "regionboot/dist.hpp"
#include "regionboot/error.hpp"

namespace regionboot {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Truncated power series in h, enough terms for derivatives up to order 6.
struct Series {
  static constexpr int kTerms = kMaxPsiDerivative + 1;
  std::array<double, kTerms> c{};

  Series operator*(const Series& o) const {
    Series r;
    for (int i = 0; i < kTerms; ++i) {
      for (int j = 0; i + j < kTerms; ++j) r.c[i + j] += c[i] * o.c[j];
    }
    return r;
  }

  // Requires c[0] != 0.
  Series reciprocal() const {
    Series r;
    r.c[0] = 1.0 / c[0];
    for (int n = 1; n < kTerms; ++n) {
      double s = 0.0;
      for (int k = 1; k <= n; ++k) s += c[k] * r.c[n - k];
      r.c[n] = -s / c[0];
    }
    return r;
  }
};

double factorial(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

std::size_t beta_count(const ModelSpec& spec) {
  return spec.kind == PsiKind::Poly ? static_cast<std::size_t>(spec.degree) + 1 : 3;
}

// psi(s) from a raw coefficient array; NaN outside the domain.
inline double psi_raw(PsiKind kind, const double* beta, std::size_t nb, double sigma2) {
  if (kind == PsiKind::Poly) {
    double v = 0.0;
    for (std::size_t k = nb; k-- > 0;) v = v * sigma2 + beta[k];
    return v;
  }
  if (!(sigma2 > 0.0)) return kNaN;
  const double den = 1.0 + beta[2] * (std::sqrt(sigma2) - 1.0);
  if (!(den > 0.0)) return kNaN;
  return beta[0] + beta[1] * sigma2 / den;
}

// Values of psi1 and psi2 at sigma2 for a model (psi2 unused for two-region).
struct PsiPair {
  double psi1;
  double psi2;
};

inline PsiPair psi_pair(const ScalingModel& model, double sigma2) {
  const ModelSpec& spec = model.spec;
  const double* p = model.params.data();
  const std::size_t nb = beta_count(spec);
  const double psi1 = psi_raw(spec.kind, p, nb, sigma2);
  switch (spec.shape) {
    case Shape::TwoRegion: return {psi1, kNaN};
    case Shape::ThreeSameDir: {
      const double d = p[nb];
      return {psi1, d - psi1};
    }
    case Shape::ThreeOppDir: {
      const double d = p[nb];
      return {psi1, d - 2.0 * p[0] + psi1};
    }
  }
  return {kNaN, kNaN};
}

inline bool feasible(const ScalingModel& model) {
  const ModelSpec& spec = model.spec;
  for (double v : model.params) {
    if (!std::isfinite(v)) return false;
  }
  const std::size_t nb = beta_count(spec);
  if (spec.three_region()) {
    const double d = model.params[nb];
    if (!(d > 0.0) || !(model.params[0] > -d / 2.0)) return false;
  }
  if (spec.drho && !(model.params.back() > 0.0)) return false;
  return true;
}

}  // namespace

PsiFamily PsiFamily::poly(std::vector<double> coefficients) {
  if (coefficients.size() < 2) throw ConfigError("poly psi needs at least b0 and b1");
  return PsiFamily{PsiKind::Poly, std::move(coefficients)};
}

PsiFamily PsiFamily::singular(double b0, double b1, double b2) {
  return PsiFamily{PsiKind::Singular, {b0, b1, b2}};
}

double PsiFamily::value(double sigma2) const {
  const double v = psi_raw(kind, beta.data(), beta.size(), sigma2);
  if (std::isnan(v)) {
    std::ostringstream msg;
    msg << "psi: sigma2 = " << sigma2 << " is outside the domain of the singular family";
    throw InvalidParameter(msg.str());
  }
  return v;
}

double psi_derivative(const PsiFamily& psi, int order, double at_sigma2) {
  if (order < 0 || order > kMaxPsiDerivative) {
    throw ConfigError("psi_derivative: order must lie in [0, 6]");
  }
  if (psi.kind == PsiKind::Poly) {
    double v = 0.0;
    for (std::size_t k = psi.beta.size(); k-- > static_cast<std::size_t>(order);) {
      double falling = 1.0;
      for (int j = 0; j < order; ++j) falling *= static_cast<double>(k) - j;
      v = v * at_sigma2 + psi.beta[k] * falling;
    }
    return v;
  }
  if (psi.beta.size() != 3) throw ConfigError("singular psi needs exactly b0, b1, b2");
  const double t0 = at_sigma2;
  if (!(t0 > 0.0)) throw InvalidParameter("psi_derivative: singular family needs sigma2 > 0");
  const double b2 = psi.beta[2];
  // sigma(t0 + h) = sqrt(t0) (1 + h/t0)^(1/2), expanded in h.
  Series sigma;
  double binom = 1.0;
  for (int j = 0; j < Series::kTerms; ++j) {
    sigma.c[j] = std::sqrt(t0) * binom * std::pow(t0, -j);
    binom *= (0.5 - j) / (j + 1.0);
  }
  Series den;
  for (int j = 0; j < Series::kTerms; ++j) den.c[j] = b2 * sigma.c[j];
  den.c[0] += 1.0 - b2;
  if (!(den.c[0] > 0.0)) throw InvalidParameter("psi_derivative: at a pole of the singular family");
  Series num;
  num.c[0] = t0;
  num.c[1] = 1.0;
  const Series ratio = num * den.reciprocal();
  const double coef = psi.beta[1] * ratio.c[order] * factorial(order);
  return order == 0 ? psi.beta[0] + coef : coef;
}

RhoCorrection rho_correction(const PsiFamily& psi, double m) {
  const double b1 = psi.beta.at(1);
  if (psi.kind == PsiKind::Poly) return {0.0, b1, m};
  const double b2 = psi.beta.at(2);
  return {b1 * b2 * (3.0 - 2.0 * b2), b1 * (b2 - 1.0) * (b2 - 1.0), m};
}

double delta_rho(const RhoCorrection& corr, double sigma, double tau) {
  const double rho = sigma / tau;
  const double A = corr.A;
  const double B = corr.B;
  return -(A * A * rho * (1.0 - rho) + 2.0 * B * B * rho * (tau * tau - sigma * sigma) +
           2.0 * A * B * sigma * (1.0 - rho * rho)) /
         (2.0 * corr.m);
}

ModelSpec ModelSpec::parse(const std::string& text) {
  ModelSpec spec;
  std::string rest = text;
  auto fail = [&](const std::string& why) {
    throw ConfigError("model '" + text + "': " + why);
  };
  if (rest.rfind("3same.", 0) == 0) {
    spec.shape = Shape::ThreeSameDir;
    rest = rest.substr(6);
  } else if (rest.rfind("3opp.", 0) == 0) {
    spec.shape = Shape::ThreeOppDir;
    rest = rest.substr(5);
  }
  const std::string suffix = "+drho";
  if (rest.size() >= suffix.size() && rest.compare(rest.size() - suffix.size(), suffix.size(), suffix) == 0) {
    spec.drho = true;
    rest.resize(rest.size() - suffix.size());
  }
  std::string fixes;
  if (const auto open = rest.find('['); open != std::string::npos) {
    if (rest.back() != ']') fail("unterminated '['");
    fixes = rest.substr(open + 1, rest.size() - open - 2);
    rest.resize(open);
  }
  if (rest == "sing") {
    spec.kind = PsiKind::Singular;
  } else if (rest.rfind("poly", 0) == 0 && rest.size() > 4) {
    spec.kind = PsiKind::Poly;
    try {
      std::size_t used = 0;
      spec.degree = std::stoi(rest.substr(4), &used);
      if (used != rest.size() - 4) fail("bad polynomial degree");
    } catch (const std::logic_error&) {
      fail("bad polynomial degree");
    }
    if (spec.degree < 1 || spec.degree > kMaxPsiDerivative) fail("degree must lie in [1, 6]");
  } else {
    fail("unknown family (expected poly<q> or sing)");
  }
  if (spec.shape == Shape::ThreeSameDir && !(spec.kind == PsiKind::Poly && spec.degree == 1)) {
    fail("3same. is defined for poly1 only");
  }
  if (spec.shape == Shape::ThreeOppDir && spec.kind != PsiKind::Singular) {
    fail("3opp. is defined for sing only");
  }
  if (spec.drho && spec.three_region()) fail("+drho applies to two-region models only");

  const auto names = spec.param_names();
  std::size_t start = 0;
  while (start < fixes.size()) {
    const std::size_t comma = std::min(fixes.find(',', start), fixes.size());
    const std::string item = fixes.substr(start, comma - start);
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos) fail("fixed parameter needs name=value");
    const std::string key = item.substr(0, eq);
    if (std::find(names.begin(), names.end(), key) == names.end()) fail("no parameter '" + key + "'");
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(item.substr(eq + 1), &used);
      if (used != item.size() - eq - 1) fail("bad value for '" + key + "'");
    } catch (const std::logic_error&) {
      fail("bad value for '" + key + "'");
    }
    for (const auto& [k, v] : spec.fixed) {
      if (k == key) fail("parameter '" + key + "' fixed twice");
    }
    spec.fixed.emplace_back(key, value);
    start = comma + 1;
  }
  if (spec.free_count() == 0) fail("every parameter is fixed");

  // Canonical name.
  std::ostringstream name;
  if (spec.shape == Shape::ThreeSameDir) name << "3same.";
  if (spec.shape == Shape::ThreeOppDir) name << "3opp.";
  name << (spec.kind == PsiKind::Singular ? std::string("sing") : "poly" + std::to_string(spec.degree));
  if (!spec.fixed.empty()) {
    name << '[';
    for (std::size_t i = 0; i < spec.fixed.size(); ++i) {
      name << (i ? "," : "") << spec.fixed[i].first << '=' << spec.fixed[i].second;
    }
    name << ']';
  }
  if (spec.drho) name << "+drho";
  spec.name = name.str();
  return spec;
}

std::vector<std::string> ModelSpec::param_names() const {
  std::vector<std::string> names;
  const std::size_t nb = beta_count(*this);
  for (std::size_t k = 0; k < nb; ++k) names.push_back("b" + std::to_string(k));
  if (three_region()) names.emplace_back("d");
  if (drho) names.emplace_back("m");
  return names;
}

std::vector<std::string> ModelSpec::free_param_names() const {
  std::vector<std::string> out;
  for (auto& n : param_names()) {
    if (!fixed_value(n)) out.push_back(n);
  }
  return out;
}

std::size_t ModelSpec::free_count() const {
  return param_names().size() - fixed.size();
}

std::optional<double> ModelSpec::fixed_value(const std::string& param) const {
  for (const auto& [k, v] : fixed) {
    if (k == param) return v;
  }
  return std::nullopt;
}

std::vector<ModelSpec> model_set(const std::string& name) {
  std::vector<std::string> names;
  if (name == "shell-h1") {
    names = {"poly1+drho", "poly1"};
  } else if (name == "shell-h0") {
    names = {"3same.poly1"};
  } else if (name == "halfspace") {
    names = {"poly1", "poly1[b1=0]"};
  } else if (name == "cone-two") {
    names = {"sing+drho", "sing",       "sing[b2=0]+drho", "sing[b2=0]",
             "sing[b2=1]+drho", "sing[b2=1]", "sing[b1=0,b2=0]"};
  } else if (name == "cone") {
    names = {"sing+drho",  "sing",       "sing[b2=0]+drho",  "sing[b2=0]",
             "sing[b2=1]+drho", "sing[b2=1]", "sing[b1=0,b2=0]",  "3opp.sing",
             "3opp.sing[b2=0]", "3opp.sing[b2=1]", "3opp.sing[b1=0,b2=0]"};
  } else {
    throw ConfigError("unknown model set '" + name + "'");
  }
  std::vector<ModelSpec> out;
  for (const auto& n : names) out.push_back(ModelSpec::parse(n));
  return out;
}

std::vector<ModelSpec> parse_model_list(const std::string& text) {
  std::vector<ModelSpec> out;
  std::size_t start = 0;
  int depth = 0;
  std::string item;
  auto flush = [&] {
    if (item.empty()) return;
    try {
      auto set = model_set(item);
      out.insert(out.end(), set.begin(), set.end());
    } catch (const ConfigError&) {
      out.push_back(ModelSpec::parse(item));
    }
    item.clear();
  };
  for (; start < text.size(); ++start) {
    const char ch = text[start];
    if (ch == '[') ++depth;
    if (ch == ']') --depth;
    if (ch == ',' && depth == 0) {
      flush();
    } else if (ch != ' ') {
      item.push_back(ch);
    }
  }
  flush();
  if (out.empty()) throw ConfigError("empty model list");
  return out;
}

ScalingModel ScalingModel::from_free(const ModelSpec& spec, std::span<const double> free_values) {
  if (free_values.size() != spec.free_count()) {
    throw ConfigError("model '" + spec.name + "': expected " + std::to_string(spec.free_count()) +
                      " free parameters");
  }
  ScalingModel model{spec, {}};
  std::size_t next = 0;
  for (const auto& n : spec.param_names()) {
    const auto fixed = spec.fixed_value(n);
    model.params.push_back(fixed ? *fixed : free_values[next++]);
  }
  return model;
}

double ScalingModel::param(const std::string& name) const {
  const auto names = spec.param_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return params.at(i);
  }
  throw ConfigError("model '" + spec.name + "' has no parameter '" + name + "'");
}

PsiFamily ScalingModel::psi() const {
  const std::size_t nb = beta_count(spec);
  return PsiFamily{spec.kind, std::vector<double>(params.begin(), params.begin() + nb)};
}

PsiFamily ScalingModel::psi2() const {
  const std::size_t nb = beta_count(spec);
  const double d = params.at(nb);
  switch (spec.shape) {
    case Shape::ThreeSameDir: return PsiFamily::poly({d - params[0], -params[1]});
    case Shape::ThreeOppDir: return PsiFamily::singular(d - params[0], params[1], params[2]);
    case Shape::TwoRegion: break;
  }
  throw ConfigError("psi2 is defined for three-region models only");
}

std::optional<RhoCorrection> ScalingModel::correction() const {
  if (!spec.drho) return std::nullopt;
  return rho_correction(psi(), params.back());
}

void ScalingModel::check() const {
  if (params.size() != spec.param_names().size()) {
    throw InvalidParameter("model '" + spec.name + "': wrong parameter count");
  }
  if (!feasible(*this)) {
    std::ostringstream msg;
    msg << "model '" << spec.name << "': parameters outside the constraint set (";
    const auto names = spec.param_names();
    for (std::size_t i = 0; i < names.size(); ++i) msg << (i ? ", " : "") << names[i] << '=' << params[i];
    msg << ')';
    throw InvalidParameter(msg.str());
  }
}

namespace detail {

double marginal_raw(const ScalingModel& model, double sigma2) {
  if (!feasible(model)) return kNaN;
  const double sigma = std::sqrt(sigma2);
  const PsiPair p = psi_pair(model, sigma2);
  if (model.spec.shape == Shape::TwoRegion) return dist::std_normal_cdf(-p.psi1 / sigma);
  return 1.0 - dist::std_normal_cdf(-p.psi1 / sigma) - dist::std_normal_cdf(-p.psi2 / sigma);
}

double joint_raw(const ScalingModel& model, double sigma2, double tau2) {
  if (!feasible(model) || !(tau2 > sigma2) || !(sigma2 > 0.0)) return kNaN;
  const double sigma = std::sqrt(sigma2);
  const double tau = std::sqrt(tau2);
  double rho = sigma / tau;
  if (model.spec.drho) {
    const double* b = model.params.data();
    const RhoCorrection corr =
        model.spec.kind == PsiKind::Poly
            ? RhoCorrection{0.0, b[1], model.params.back()}
            : RhoCorrection{b[1] * b[2] * (3.0 - 2.0 * b[2]), b[1] * (b[2] - 1.0) * (b[2] - 1.0),
                            model.params.back()};
    rho += delta_rho(corr, sigma, tau);
  }
  if (!std::isfinite(rho)) return kNaN;
  rho = dist::clamp_correlation(rho);
  const PsiPair ps = psi_pair(model, sigma2);
  const PsiPair pt = psi_pair(model, tau2);
  if (model.spec.shape == Shape::TwoRegion) {
    return dist::bivariate_normal_cdf(-ps.psi1 / sigma, -pt.psi1 / tau, rho);
  }
  const double z1 = ps.psi1 / sigma;
  const double w1 = pt.psi1 / tau;
  const double z2 = -ps.psi2 / sigma;
  const double w2 = -pt.psi2 / tau;
  if (std::isnan(z1) || std::isnan(w1) || std::isnan(z2) || std::isnan(w2) || z2 > z1 || w2 > w1) {
    return kNaN;
  }
  return dist::bivariate_rectangle_prob({z1, w1, z2, w2, rho});
}

}  // namespace detail

double marginal_prob(const ScalingModel& model, double sigma2) {
  if (!(sigma2 > 0.0)) throw ConfigError("marginal_prob: sigma2 must be > 0");
  model.check();
  const double f = detail::marginal_raw(model, sigma2);
  if (std::isnan(f)) {
    throw InvalidParameter("model '" + model.spec.name + "': psi undefined at sigma2 = " +
                           std::to_string(sigma2));
  }
  return std::clamp(f, detail::kProbFloor, 1.0 - detail::kProbFloor);
}

double joint_prob(const ScalingModel& model, double sigma2, double tau2) {
  if (!(sigma2 > 0.0 && tau2 > sigma2)) throw ConfigError("joint_prob: need tau2 > sigma2 > 0");
  model.check();
  const double g = detail::joint_raw(model, sigma2, tau2);
  if (std::isnan(g)) {
    throw InvalidParameter("model '" + model.spec.name +
                           "': inconsistent psi values (empty rectangle or pole) at sigma2 = " +
                           std::to_string(sigma2));
  }
  return g;
}

nlohmann::json model_to_json(const ScalingModel& model) {
  nlohmann::json params = nlohmann::json::object();
  const auto names = model.spec.param_names();
  for (std::size_t i = 0; i < names.size(); ++i) params[names[i]] = model.params.at(i);
  nlohmann::json fixed = nlohmann::json::array();
  for (const auto& [k, v] : model.spec.fixed) fixed.push_back(k);
  return {{"family", model.spec.name}, {"params", params}, {"fixed", fixed}};
}

}  // namespace regionboot
