#include "regionboot/fit.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "regionboot/dist.hpp"
#include "regionboot/error.hpp"
#include "regionboot/nelder_mead.hpp"

namespace regionboot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline double xlogp(std::int64_t count, double p) {
  if (count == 0) return 0.0;
  return static_cast<double>(count) * std::log(std::max(p, detail::kProbFloor));
}

double logistic(double u) {
  return 1.0 / (1.0 + std::exp(-u));
}

double logit(double p) {
  p = std::clamp(p, 1e-12, 1.0 - 1e-12);
  return std::log(p / (1.0 - p));
}

double scale_bound(const MultiscaleCounts& counts, bool upper) {
  double lo = kInf, hi = 0.0;
  for (const ScaleCounts& s : counts.scales) {
    lo = std::min(lo, s.sigma2);
    hi = std::max({hi, s.sigma2, s.tau2});
  }
  return std::sqrt(upper ? hi : lo);
}

}  // namespace

double loglik_one_step(const ScalingModel& model, const MultiscaleCounts& counts) {
  double ll = 0.0;
  for (const ScaleCounts& s : counts.scales) {
    const double f = detail::marginal_raw(model, s.sigma2);
    if (std::isnan(f)) return -kInf;
    const double fc = std::clamp(f, detail::kProbFloor, 1.0 - detail::kProbFloor);
    ll += xlogp(s.C, fc) + xlogp(s.B - s.C, 1.0 - fc);
  }
  return ll;
}

double loglik_two_step(const ScalingModel& model, const MultiscaleCounts& counts) {
  if (counts.mode != CountMode::TwoStep) {
    throw ConfigError("loglik_two_step: counts are one-step");
  }
  double ll = 0.0;
  for (const ScaleCounts& s : counts.scales) {
    const double fs = detail::marginal_raw(model, s.sigma2);
    const double ft = detail::marginal_raw(model, s.tau2);
    const double g = detail::joint_raw(model, s.sigma2, s.tau2);
    if (std::isnan(fs) || std::isnan(ft) || std::isnan(g)) return -kInf;
    ll += xlogp(s.E, g) + xlogp(s.C - s.E, fs - g) + xlogp(s.D - s.E, ft - g) +
          xlogp(s.B - s.C - s.D + s.E, 1.0 - fs - ft + g);
  }
  return ll;
}

double loglik(const ScalingModel& model, const MultiscaleCounts& counts) {
  return counts.mode == CountMode::TwoStep ? loglik_two_step(model, counts)
                                           : loglik_one_step(model, counts);
}

Reparameterization::Reparameterization(const ModelSpec& spec, double min_scale, double max_scale)
    : spec_(spec) {
  if (!(min_scale > 0.0) || !(max_scale >= min_scale)) {
    throw ConfigError("Reparameterization: invalid scale range");
  }
  const auto names = spec.param_names();
  fixed_params_.assign(names.size(), 0.0);
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (const auto v = spec.fixed_value(names[i])) fixed_params_[i] = *v;
    if (names[i] == "b0") b0_slot_ = i;
    if (names[i] == "d") d_slot_ = i;
  }
  // 1 + b2 (sigma - 1) >= margin at both ends of the scale range.
  constexpr double kFar = 50.0;
  const double room = 1.0 - kSingularMargin;
  b2_lo_ = max_scale > 1.0 ? -room / (max_scale - 1.0) : -kFar;
  b2_hi_ = min_scale < 1.0 ? room / (1.0 - min_scale) : kFar;

  for (std::size_t i = 0; i < names.size(); ++i) {
    if (spec.fixed_value(names[i])) continue;
    Role role = Role::Identity;
    if (names[i] == "d") role = Role::LogD;
    if (names[i] == "b0" && spec.three_region()) role = Role::Beta0AboveHalfD;
    if (names[i] == "m") role = Role::LogisticM;
    if (names[i] == "b2" && spec.kind == PsiKind::Singular) role = Role::LogisticB2;
    roles_.push_back(role);
    slots_.push_back(i);
  }
}

void Reparameterization::to_params(std::span<const double> u, std::vector<double>& params) const {
  if (u.size() != roles_.size()) throw ConfigError("Reparameterization: wrong size");
  params = fixed_params_;
  // Two passes: b0 is placed relative to d, so d goes first.
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t k = 0; k < roles_.size(); ++k) {
      if ((roles_[k] == Role::LogD) != (pass == 0)) continue;
      const double v = u[k];
      double& out = params[slots_[k]];
      switch (roles_[k]) {
        case Role::Identity: out = v; break;
        case Role::LogD: {
          const double floor = spec_.fixed_value("b0") ? std::max(0.0, -2.0 * params[b0_slot_]) : 0.0;
          out = floor + std::exp(v);
          break;
        }
        case Role::Beta0AboveHalfD: out = -params[d_slot_] / 2.0 + std::exp(v); break;
        case Role::LogisticM:
          out = std::exp(std::log(kMinM) + (std::log(kMaxM) - std::log(kMinM)) * logistic(v));
          break;
        case Role::LogisticB2: out = b2_lo_ + (b2_hi_ - b2_lo_) * logistic(v); break;
      }
    }
  }
}

std::vector<double> Reparameterization::to_free(std::span<const double> u) const {
  std::vector<double> params;
  to_params(u, params);
  std::vector<double> out;
  const auto names = spec_.param_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!spec_.fixed_value(names[i])) out.push_back(params[i]);
  }
  return out;
}

std::vector<double> Reparameterization::to_unconstrained(std::span<const double> free_values) const {
  if (free_values.size() != roles_.size()) throw ConfigError("Reparameterization: wrong size");
  std::vector<double> params = fixed_params_;
  for (std::size_t k = 0; k < roles_.size(); ++k) params[slots_[k]] = free_values[k];

  constexpr double kTiny = 1e-300;
  std::vector<double> u(roles_.size());
  for (std::size_t k = 0; k < roles_.size(); ++k) {
    const double x = params[slots_[k]];
    switch (roles_[k]) {
      case Role::Identity: u[k] = x; break;
      case Role::LogD: {
        const double floor = spec_.fixed_value("b0") ? std::max(0.0, -2.0 * params[b0_slot_]) : 0.0;
        u[k] = std::log(std::max(x - floor, kTiny));
        break;
      }
      case Role::Beta0AboveHalfD: u[k] = std::log(std::max(x + params[d_slot_] / 2.0, kTiny)); break;
      case Role::LogisticM: {
        const double t = (std::log(std::clamp(x, kMinM, kMaxM)) - std::log(kMinM)) /
                         (std::log(kMaxM) - std::log(kMinM));
        u[k] = logit(t);
        break;
      }
      case Role::LogisticB2: u[k] = logit((x - b2_lo_) / (b2_hi_ - b2_lo_)); break;
    }
  }
  return u;
}

namespace {

using Objective = std::function<double(std::span<const double>)>;

std::vector<double> fd_gradient(const Objective& f, std::vector<double> x, double rel_step) {
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double h = rel_step * std::max(1.0, std::abs(x[k]));
    const double x0 = x[k];
    x[k] = x0 + h;
    const double fp = f(x);
    x[k] = x0 - h;
    const double fm = f(x);
    x[k] = x0;
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd fd_hessian(const Objective& f, std::vector<double> x, double rel_step) {
  const std::size_t n = x.size();
  Eigen::MatrixXd H(n, n);
  std::vector<double> h(n);
  for (std::size_t k = 0; k < n; ++k) h[k] = rel_step * std::max(1.0, std::abs(x[k]));
  const double f0 = f(x);
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = x[i];
    x[i] = xi + h[i];
    const double fp = f(x);
    x[i] = xi - h[i];
    const double fm = f(x);
    x[i] = xi;
    H(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
    for (std::size_t j = 0; j < i; ++j) {
      const double xj = x[j];
      double s = 0.0;
      for (int si : {1, -1}) {
        for (int sj : {1, -1}) {
          x[i] = xi + si * h[i];
          x[j] = xj + sj * h[j];
          s += si * sj * f(x);
        }
      }
      x[i] = xi;
      x[j] = xj;
      H(i, j) = H(j, i) = s / (4.0 * h[i] * h[j]);
    }
  }
  return H;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::isnan(x) ? kInf : std::abs(x));
  return m;
}

// Newton steps on a minimization objective with eigenvalues of the Hessian
// replaced by their absolute values, plus backtracking.
void newton_polish(const Objective& f, std::vector<double>& x, double& fx, double grad_tol,
                   int max_iter) {
  const std::size_t n = x.size();
  for (int it = 0; it < max_iter; ++it) {
    const auto g = fd_gradient(f, x, 1e-6);
    if (max_abs(g) < grad_tol) return;
    const Eigen::MatrixXd H = fd_hessian(f, x, 1e-4);
    if (!H.allFinite()) return;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H);
    Eigen::VectorXd ev = eig.eigenvalues().cwiseAbs();
    const double floor = std::max(1e-8 * ev.maxCoeff(), 1e-12);
    for (Eigen::Index k = 0; k < ev.size(); ++k) ev[k] = std::max(ev[k], floor);
    const Eigen::VectorXd gv = Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(n));
    const Eigen::VectorXd step =
        -(eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose() * gv);
    bool improved = false;
    double t = 1.0;
    std::vector<double> trial(n);
    for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
      for (std::size_t k = 0; k < n; ++k) trial[k] = x[k] + t * step[static_cast<Eigen::Index>(k)];
      const double ft = f(trial);
      if (std::isfinite(ft) && ft <= fx) {
        improved = ft < fx || t == 1.0;
        x = trial;
        fx = ft;
        break;
      }
    }
    if (!improved) return;
  }
}

// Candidate natural values for each free parameter; the coarse grid is their
// Cartesian product.
std::vector<std::vector<double>> start_values(const ModelSpec& spec, const MultiscaleCounts& counts,
                                              const Reparameterization& rp) {
  // Normalized z-values -sigma Phi^-1(C/B) and their least-squares line in sigma2.
  std::vector<double> s2, z;
  for (const ScaleCounts& s : counts.scales) {
    const double half = 0.5 / static_cast<double>(s.B);
    const double p = std::clamp(static_cast<double>(s.C) / static_cast<double>(s.B), half, 1.0 - half);
    s2.push_back(s.sigma2);
    z.push_back(-std::sqrt(s.sigma2) * dist::std_normal_quantile(p));
  }
  const double n = static_cast<double>(s2.size());
  const double ms = std::accumulate(s2.begin(), s2.end(), 0.0) / n;
  const double mz = std::accumulate(z.begin(), z.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < s2.size(); ++i) {
    sxy += (s2[i] - ms) * (z[i] - mz);
    sxx += (s2[i] - ms) * (s2[i] - ms);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  std::size_t unit = 0;
  for (std::size_t i = 0; i < s2.size(); ++i) {
    if (std::abs(std::log(s2[i])) < std::abs(std::log(s2[unit]))) unit = i;
  }
  const double b0_init = z[unit] - slope * s2[unit];

  std::vector<double> b2_values;
  for (double v : {0.0, 0.5, 1.0}) {
    if (v > rp.b2_lower() && v < rp.b2_upper()) b2_values.push_back(v);
  }
  if (b2_values.empty()) b2_values.push_back(0.5 * (rp.b2_lower() + rp.b2_upper()));

  std::vector<std::vector<double>> values;
  for (const auto& name : spec.free_param_names()) {
    if (name == "b0") {
      values.push_back(spec.three_region() ? std::vector<double>{0.05, 0.25, 0.5, 0.8}
                                           : std::vector<double>{b0_init - 0.5, b0_init, b0_init + 0.5});
    } else if (name == "b1") {
      values.push_back(spec.three_region() ? std::vector<double>{-0.4, 0.0, 0.4}
                                           : std::vector<double>{slope - 0.3, slope, slope + 0.3});
    } else if (name == "b2" && spec.kind == PsiKind::Singular) {
      values.push_back(b2_values);
    } else if (name == "d") {
      values.push_back({0.5, 1.5, 4.0, 10.0});
    } else if (name == "m") {
      values.push_back({1.0, 10.0, 1000.0});
    } else {
      values.push_back({0.0});
    }
  }
  return values;
}

// Mirror a three-region fit onto b0 <= d/2 when the mirrored point is
// admissible; the likelihood is invariant under the swap of psi1 and psi2.
void canonicalize(ScalingModel& model) {
  const ModelSpec& spec = model.spec;
  if (!spec.three_region() || spec.fixed_value("b0") || spec.fixed_value("d")) return;
  const auto names = spec.param_names();
  const auto idx = [&](const std::string& n) {
    return static_cast<std::size_t>(std::find(names.begin(), names.end(), n) - names.begin());
  };
  double& b0 = model.params[idx("b0")];
  const double d = model.params[idx("d")];
  if (!(b0 > d / 2.0) || !(d - b0 > -d / 2.0)) return;
  if (spec.shape == Shape::ThreeSameDir) {
    if (const auto b1 = spec.fixed_value("b1"); b1 && *b1 != 0.0) return;
    double& b1 = model.params[idx("b1")];
    b1 = -b1;
  }
  b0 = d - b0;
}

}  // namespace

FitResult fit(const ModelSpec& spec, const MultiscaleCounts& counts, const FitOptions& options) {
  counts.validate();
  if (counts.scales.size() < 2) throw ConfigError("fit: need at least 2 scales");
  if (spec.three_region() && counts.mode == CountMode::OneStep && !options.allow_one_step_three_region) {
    throw ConfigError("fit: three-region model '" + spec.name +
                      "' needs two-step counts (one-step fitting cannot identify small d)");
  }
  const Reparameterization rp(spec, scale_bound(counts, false), scale_bound(counts, true));
  ScalingModel work = ScalingModel::from_free(spec, std::vector<double>(spec.free_count(), 0.0));
  int evals = 0;
  const Objective objective = [&](std::span<const double> u) {
    ++evals;
    rp.to_params(u, work.params);
    return -loglik(work, counts);
  };

  // Coarse grid over the Cartesian product of start values.
  const auto grid = start_values(spec, counts, rp);
  std::vector<std::pair<double, std::vector<double>>> scored;
  std::vector<std::size_t> pos(grid.size(), 0);
  while (true) {
    std::vector<double> natural(grid.size());
    std::vector<double> free(grid.size());
    double d_value = 1.0;
    const auto names = spec.free_param_names();
    for (std::size_t k = 0; k < grid.size(); ++k) {
      natural[k] = grid[k][pos[k]];
      if (names[k] == "d") d_value = natural[k];
    }
    if (const auto fd = spec.fixed_value("d")) d_value = *fd;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      // Three-region b0 candidates are fractions of the slab width.
      free[k] = (names[k] == "b0" && spec.three_region()) ? -d_value / 2.0 + natural[k] * d_value
                                                          : natural[k];
    }
    auto u = rp.to_unconstrained(free);
    const double v = objective(u);
    if (std::isfinite(v)) scored.emplace_back(v, std::move(u));
    std::size_t k = 0;
    while (k < grid.size() && ++pos[k] == grid[k].size()) pos[k++] = 0;
    if (k == grid.size()) break;
  }

  FitResult result;
  result.model = ScalingModel::from_free(spec, std::vector<double>(spec.free_count(), kNaN));
  result.free_count = spec.free_count();
  result.se.assign(spec.free_count(), kNaN);
  if (scored.empty()) {
    result.loglik = -kInf;
    result.aic = kInf;
    result.gradient_norm = kInf;
    result.evals = evals;
    return result;
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  scored.resize(std::min<std::size_t>(scored.size(), static_cast<std::size_t>(std::max(1, options.starts))));

  NelderMeadOptions loose;
  loose.initial_step = 0.5;
  loose.f_tol = 1e-2;
  loose.x_tol = 1e-4;
  loose.max_evals = 150 * static_cast<int>(rp.size()) + 200;
  NelderMeadResult best;
  best.value = kInf;
  for (const auto& [v, u0] : scored) {
    auto r = nelder_mead_minimize(objective, u0, loose);
    if (r.value < best.value) best = std::move(r);
  }
  NelderMeadOptions tight;
  tight.initial_step = 0.1;
  tight.f_tol = 1e-7;
  tight.x_tol = 1e-8;
  tight.max_evals = 4000;
  if (std::isfinite(best.value)) {
    auto r = nelder_mead_minimize(objective, best.x, tight);
    if (r.value <= best.value) best = std::move(r);
  }

  std::vector<double> u = best.x;
  double fu = best.value;
  double ll = -fu;
  const double grad_tol = 1e-5 * (1.0 + std::abs(ll));
  if (std::isfinite(fu)) newton_polish(objective, u, fu, 1e-3 * grad_tol, 10);
  ll = -fu;

  result.gradient_norm = std::isfinite(fu) ? max_abs(fd_gradient(objective, u, 1e-6)) : kInf;
  result.loglik = ll;
  result.converged = std::isfinite(ll) && result.gradient_norm < 1e-5 * (1.0 + std::abs(ll));
  rp.to_params(u, work.params);
  result.model = work;
  canonicalize(result.model);
  result.aic = -2.0 * result.loglik + 2.0 * static_cast<double>(result.free_count);

  // Bound flags from the unconstrained coordinates.
  {
    const auto names = spec.free_param_names();
    const auto free = rp.to_free(u);
    for (std::size_t k = 0; k < names.size(); ++k) {
      const bool logistic_param = names[k] == "m" || (names[k] == "b2" && spec.kind == PsiKind::Singular);
      if (logistic_param && std::abs(u[k]) > 10.0) result.at_bound.push_back(names[k]);
      if (names[k] == "d" && free[k] < 1e-6) result.at_bound.push_back(names[k]);
      if (names[k] == "b0" && spec.three_region() && u[k] < std::log(1e-6)) result.at_bound.push_back(names[k]);
    }
  }

  if (options.standard_errors && std::isfinite(ll)) {
    // Observed information in natural coordinates.
    ScalingModel natural_work = result.model;
    const auto names = spec.param_names();
    std::vector<std::size_t> free_slots;
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (!spec.fixed_value(names[i])) free_slots.push_back(i);
    }
    std::vector<double> x0;
    for (auto i : free_slots) x0.push_back(result.model.params[i]);
    const Objective natural = [&](std::span<const double> x) {
      ++evals;
      for (std::size_t k = 0; k < free_slots.size(); ++k) natural_work.params[free_slots[k]] = x[k];
      return -loglik(natural_work, counts);
    };
    const Eigen::MatrixXd H = fd_hessian(natural, x0, 1e-4);
    if (H.allFinite()) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H);
      if (eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() > 0.0) {
        const Eigen::MatrixXd cov = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
                                    eig.eigenvectors().transpose();
        for (std::size_t k = 0; k < x0.size(); ++k) {
          result.se[k] = std::sqrt(cov(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)));
        }
      }
    }
  }
  result.evals = evals;
  return result;
}

nlohmann::json FitResult::to_json() const {
  nlohmann::json j = model_to_json(model);
  j["loglik"] = loglik;
  j["aic"] = aic;
  j["converged"] = converged;
  j["gradient_norm"] = gradient_norm;
  nlohmann::json se_obj = nlohmann::json::object();
  const auto names = model.spec.free_param_names();
  for (std::size_t k = 0; k < names.size() && k < se.size(); ++k) {
    se_obj[names[k]] = std::isfinite(se[k]) ? nlohmann::json(se[k]) : nlohmann::json(nullptr);
  }
  j["se"] = se_obj;
  j["at_bound"] = at_bound;
  j["free_parameters"] = free_count;
  j["evals"] = evals;
  if (!std::isfinite(loglik)) {
    j["loglik"] = nullptr;
    j["aic"] = nullptr;
  }
  return j;
}

ModelSelection select(const std::vector<ModelSpec>& specs, const MultiscaleCounts& counts,
                      const FitOptions& options) {
  if (specs.empty()) throw ConfigError("select: empty candidate list");
  ModelSelection sel;
  sel.candidates.resize(specs.size());
  std::vector<std::exception_ptr> errors(specs.size());
  const auto n = static_cast<std::ptrdiff_t>(specs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      sel.candidates[static_cast<std::size_t>(i)] = fit(specs[static_cast<std::size_t>(i)], counts, options);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  bool found = false;
  for (std::size_t i = 0; i < sel.candidates.size(); ++i) {
    const FitResult& c = sel.candidates[i];
    if (!c.converged) continue;
    if (!found) {
      sel.chosen = i;
      found = true;
      continue;
    }
    const FitResult& b = sel.candidates[sel.chosen];
    if (c.aic < b.aic || (c.aic == b.aic && c.free_count < b.free_count)) sel.chosen = i;
  }
  if (!found) {
    std::ostringstream msg;
    msg << "select: no candidate converged (";
    for (std::size_t i = 0; i < sel.candidates.size(); ++i) {
      msg << (i ? "; " : "") << specs[i].name << " gradient " << sel.candidates[i].gradient_norm;
    }
    msg << ')';
    throw SelectionError(msg.str());
  }
  return sel;
}

nlohmann::json ModelSelection::to_json() const {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& c : candidates) table.push_back(c.to_json());
  return {{"chosen", chosen}, {"chosen_model", best().model.spec.name}, {"candidates", table}};
}

}  // namespace regionboot
