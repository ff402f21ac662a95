#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

namespace byzcd {

enum class ModelKind { gaussian_shift, lattice_bernoulli };

/// Pre-change density f and post-change density g shared by every honest
/// sensor. Validity (0 < I < inf) is checked at construction.
class DensityPair {
 public:
  /// f = N(mu0, sigma^2), g = N(mu1, sigma^2).
  static DensityPair gaussian(double mu0, double mu1, double sigma) {
    if (!std::isfinite(mu0) || !std::isfinite(mu1) || !std::isfinite(sigma))
      throw std::invalid_argument("gaussian-shift parameters must be finite");
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian-shift requires sigma > 0");
    if (mu0 == mu1) throw std::invalid_argument("gaussian-shift with mu0 == mu1 has zero KL number");
    DensityPair d;
    d.kind_ = ModelKind::gaussian_shift;
    d.mu0_ = mu0;
    d.mu1_ = mu1;
    d.sigma_ = sigma;
    d.slope_ = (mu1 - mu0) / (sigma * sigma);
    d.mid_ = 0.5 * (mu0 + mu1);
    d.kl_ = (mu1 - mu0) * (mu1 - mu0) / (2.0 * sigma * sigma);
    return d;
  }

  /// Bernoulli pair whose log-likelihood ratio takes exactly the values +a / -a:
  /// p0 = 1/(1+e^a), p1 = e^a/(1+e^a).
  static DensityPair lattice(double a = 1.0) {
    if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("lattice-bernoulli requires 0 < a < inf");
    DensityPair d;
    d.kind_ = ModelKind::lattice_bernoulli;
    d.a_ = a;
    d.p0_ = 1.0 / (1.0 + std::exp(a));
    d.p1_ = std::exp(a) / (1.0 + std::exp(a));
    d.kl_ = a * std::tanh(0.5 * a);
    return d;
  }

  ModelKind kind() const noexcept { return kind_; }
  bool is_gaussian() const noexcept { return kind_ == ModelKind::gaussian_shift; }

  double mu0() const noexcept { return mu0_; }
  double mu1() const noexcept { return mu1_; }
  double sigma() const noexcept { return sigma_; }
  double p0() const noexcept { return p0_; }
  double p1() const noexcept { return p1_; }
  double lattice_step() const noexcept { return a_; }

  double llr(double x) const noexcept {
    if (kind_ == ModelKind::gaussian_shift) return slope_ * (x - mid_);
    return x == 1.0 ? a_ : -a_;
  }

  /// KL(g || f), the post-change drift of the log-likelihood ratio.
  double kl() const noexcept { return kl_; }

  /// KL(f || g); the pre-change drift is -kl_pre(). Both families are symmetric.
  double kl_pre() const noexcept { return kl_; }

  template <class Rng>
  double sample_pre(Rng& rng) const {
    if (kind_ == ModelKind::gaussian_shift) return mu0_ + sigma_ * boost::random::normal_distribution<double>{}(rng);
    return boost::random::bernoulli_distribution<double>{p0_}(rng) ? 1.0 : 0.0;
  }

  template <class Rng>
  double sample_post(Rng& rng) const {
    if (kind_ == ModelKind::gaussian_shift) return mu1_ + sigma_ * boost::random::normal_distribution<double>{}(rng);
    return boost::random::bernoulli_distribution<double>{p1_}(rng) ? 1.0 : 0.0;
  }

  /// Gaussian only: the observation whose log-likelihood ratio equals `value`.
  double observation_for_llr(double value) const {
    if (kind_ != ModelKind::gaussian_shift)
      throw std::logic_error("observation_for_llr needs an unbounded (gaussian-shift) llr");
    return value / slope_ + mid_;
  }

  std::string describe() const {
    if (kind_ == ModelKind::gaussian_shift)
      return "gaussian(" + std::to_string(mu0_) + "," + std::to_string(mu1_) + "," + std::to_string(sigma_) + ")";
    return "lattice-bernoulli(a=" + std::to_string(a_) + ")";
  }

 private:
  DensityPair() = default;

  ModelKind kind_ = ModelKind::gaussian_shift;
  double mu0_ = 0.0, mu1_ = 1.0, sigma_ = 1.0, slope_ = 1.0, mid_ = 0.5;
  double a_ = 1.0, p0_ = 0.5, p1_ = 0.5;
  double kl_ = 0.5;
};

inline double log_likelihood_ratio(double x, const DensityPair& model) noexcept { return model.llr(x); }
inline double kl_number(const DensityPair& model) noexcept { return model.kl(); }

enum class SensorRole { corrupt, honest_affected, honest_unaffected };

/// The world being simulated. Sensors [0, K-M) are honest and [K-M, K) are
/// corrupt; the model is homogeneous so which sensors are honest is immaterial.
struct ScenarioConfig {
  int K = 1;
  int M = 0;
  std::vector<int> affected;                  // B, indices into the honest range
  std::optional<std::uint64_t> change_time;   // nullopt: no change (P_inf)
  DensityPair model = DensityPair::gaussian(0.0, 1.0, 1.0);

  int honest_count() const noexcept { return K - M; }
  int affected_count() const noexcept { return static_cast<int>(affected.size()); }
  bool is_corrupt(int k) const noexcept { return k >= K - M; }

  void validate() const {
    if (K <= 0) throw std::invalid_argument("K must be positive");
    if (M < 0 || M >= K) throw std::invalid_argument("M must satisfy 0 <= M < K");
    std::vector<int> b = affected;
    std::sort(b.begin(), b.end());
    if (std::adjacent_find(b.begin(), b.end()) != b.end())
      throw std::invalid_argument("affected set has duplicate sensors");
    for (int k : b)
      if (k < 0 || k >= honest_count())
        throw std::invalid_argument("affected sensor " + std::to_string(k) + " is not an honest sensor index");
  }

  SensorRole role(int k) const {
    if (k < 0 || k >= K) throw std::out_of_range("sensor index out of range");
    if (is_corrupt(k)) return SensorRole::corrupt;
    return std::find(affected.begin(), affected.end(), k) != affected.end() ? SensorRole::honest_affected
                                                                            : SensorRole::honest_unaffected;
  }

  /// Scenario with every honest sensor affected.
  static ScenarioConfig all_affected(int K, int M, DensityPair model, std::optional<std::uint64_t> nu = std::nullopt) {
    ScenarioConfig s;
    s.K = K;
    s.M = M;
    s.model = model;
    s.change_time = nu;
    for (int k = 0; k < K - M; ++k) s.affected.push_back(k);
    s.validate();
    return s;
  }
};

/// Draws observation t (1-based) of an honest sensor.
template <class Rng>
double sample_observation(SensorRole role, std::uint64_t t, const ScenarioConfig& scenario, Rng& rng) {
  switch (role) {
    case SensorRole::corrupt:
      throw std::invalid_argument("corrupt sensors are driven by the adversary, not the observation model");
    case SensorRole::honest_unaffected:
      return scenario.model.sample_pre(rng);
    case SensorRole::honest_affected:
      if (scenario.change_time && t > *scenario.change_time) return scenario.model.sample_post(rng);
      return scenario.model.sample_pre(rng);
  }
  return 0.0;
}

}  // namespace byzcd
