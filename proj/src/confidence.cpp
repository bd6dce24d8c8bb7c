#include "regionboot/confidence.hpp"

#include <algorithm>
#include <cmath>

#include "regionboot/dist.hpp"
#include "regionboot/error.hpp"

namespace regionboot {

namespace {

nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json ConfidenceReport::to_json() const {
  nlohmann::json j{{"p_one_sided", opt(p_one_sided)},
                   {"p1", opt(p1)},
                   {"p2", opt(p2)},
                   {"p_two_sided", opt(p_two_sided)},
                   {"pi_bayes", opt(pi_bayes)},
                   {"pi_clamped", pi_clamped},
                   {"k", k},
                   {"sigma0_sq", sigma0_sq},
                   {"model", model}};
  if (has_tails()) j["p_s1"] = p_sided(*this, 1.0);
  return j;
}

double p_extrapolate_exact(const PsiFamily& psi) {
  if (psi.kind != PsiKind::Poly) {
    throw UnsupportedOracle("p_extrapolate_exact: the singular family has no value at sigma2 = -1");
  }
  return dist::std_normal_cdf(-psi.value(-1.0));
}

double p_taylor(const PsiFamily& psi, int k, double sigma0_sq) {
  if (k < 1 || k > kMaxPsiDerivative + 1) throw ConfigError("p_taylor: k must lie in [1, 7]");
  if (!(sigma0_sq > 0.0)) throw ConfigError("p_taylor: sigma0_sq must be > 0");
  const double h = -1.0 - sigma0_sq;
  double sum = 0.0;
  double coef = 1.0;  // h^j / j!
  for (int j = 0; j < k; ++j) {
    sum += coef * psi_derivative(psi, j, sigma0_sq);
    coef *= h / (j + 1.0);
  }
  return dist::std_normal_cdf(-sum);
}

double p_from_psi(const PsiFamily& psi, int k, double sigma0_sq) {
  return psi.kind == PsiKind::Poly ? p_extrapolate_exact(psi) : p_taylor(psi, k, sigma0_sq);
}

ConfidenceReport combine_tails(double p1, double p2) {
  ConfidenceReport r;
  r.p1 = p1;
  r.p2 = p2;
  r.p_two_sided = 1.0 - std::abs(p1 - p2);
  const double pi = 1.0 - (p1 + p2);
  r.pi_unclamped = pi;
  r.pi_bayes = std::clamp(pi, 0.0, 1.0);
  r.pi_clamped = *r.pi_bayes != pi;
  return r;
}

ConfidenceReport combine_three_region(const ScalingModel& model, int k, double sigma0_sq) {
  if (!model.spec.three_region()) {
    throw ConfigError("combine_three_region: '" + model.spec.name + "' is a two-region model");
  }
  model.check();
  // Sign convention: Phi(-psi1/sigma) is the bootstrap probability of H1,
  // so p1 = Phi(-psi1(-1)) is the p-value of H1, and likewise for H2.
  ConfidenceReport r = combine_tails(p_from_psi(model.psi(), k, sigma0_sq),
                                     p_from_psi(model.psi2(), k, sigma0_sq));
  r.k = k;
  r.sigma0_sq = sigma0_sq;
  r.model = model.spec.name;
  return r;
}

double p_sided(const ConfidenceReport& report, double s) {
  if (!report.has_tails()) throw ConfigError("p_sided: report has no p1/p2 tails");
  const double pi = report.pi_unclamped.value_or(1.0 - (*report.p1 + *report.p2));
  const double two = report.p_two_sided.value_or(1.0 - std::abs(*report.p1 - *report.p2));
  const double t = s / 2.0;
  return std::clamp((1.0 - t) * pi + t * two, 0.0, 1.0);
}

ConfidenceReport exact_slab_p_values(double y_last, double d) {
  if (!(d > 0.0)) throw ConfigError("exact_slab_p_values: d must be > 0");
  ConfidenceReport r = combine_tails(dist::std_normal_cdf(y_last), dist::std_normal_cdf(-d - y_last));
  r.p_one_sided = dist::std_normal_cdf(-y_last);
  r.model = "exact";
  return r;
}

ConfidenceReport report_from_model(const ScalingModel& model, int k, double sigma0_sq) {
  if (model.spec.three_region()) return combine_three_region(model, k, sigma0_sq);
  model.check();
  ConfidenceReport r;
  r.p_one_sided = p_from_psi(model.psi(), k, sigma0_sq);
  r.k = k;
  r.sigma0_sq = sigma0_sq;
  r.model = model.spec.name;
  return r;
}

}  // namespace regionboot
