#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include "byzcd/rules.hpp"

namespace byzcd {

struct AsymptoticQuery {
  RuleKind kind = RuleKind::lth_alarm;
  int K = 1;
  int M = 0;
  int L = 1;
  int B_size = 1;
  double I = 0.5;
  double gamma = 100.0;
};

/// First-order worst-case detection delay when the ARL is gamma, i.e. the
/// leading log(gamma) term. Throws std::domain_error when the rule's
/// hypotheses do not hold for the query.
inline double first_order_delay(const AsymptoticQuery& q) {
  auto fail = [&](const std::string& why) {
    throw std::domain_error(std::string(to_string(q.kind)) + ": " + why);
  };
  if (!(q.gamma > 1.0) || !std::isfinite(q.gamma)) fail("gamma must exceed 1");
  if (!(q.I > 0.0) || !std::isfinite(q.I)) fail("I must be positive and finite");
  if (q.K < 1 || q.M < 0 || q.M >= q.K) fail("need K >= 1 and 0 <= M < K");
  const int honest = q.K - q.M;
  if (q.B_size < 1 || q.B_size > honest) fail("need 1 <= |B| <= K-M");
  const double lg = std::log(q.gamma);
  const double I = q.I;
  const int K = q.K, M = q.M, L = q.L, B = q.B_size;

  switch (q.kind) {
    case RuleKind::lth_alarm:
      if (L < M + 1 || L > honest) fail("need M+1 <= L <= K-M");
      if (L > B) fail("L > |B|: an unaffected sensor must alarm, delay is not O(log gamma)");
      return lg / I;
    case RuleKind::voting:
      if (L < M + 1 || L > honest) fail("need M+1 <= L <= K-M");
      if (L > B) fail("L > |B|: an unaffected sensor must cross, delay is not O(log gamma)");
      return lg / ((L - M) * I);
    case RuleKind::low_sum_cusum:
      if (L < M + 1 || L > honest) fail("need M+1 <= L <= K-M");
      if (B - (K - L) < 1) fail("L < K+1-|B|: the statistic can avoid every affected sensor");
      return static_cast<double>(L) / honest * lg / ((B - (K - L)) * I);
    case RuleKind::centralized_lth_alarm:
      if (L != M + 1) fail("need L = M+1");
      if (K % (2 * M + 1) != 0) fail("K must be divisible by 2M+1");
      if (B != honest) fail("needs every honest sensor affected");
      return static_cast<double>(2 * M + 1) / K * lg / I;
    case RuleKind::sum_cusum:
    case RuleKind::subset_cusum:
      return lg / (B * I);
    case RuleKind::top_sum_cusum:
      if (L < 1 || L > honest) fail("need 1 <= L <= K-M");
      return lg / (std::min(B, L) * I);
  }
  fail("unknown rule");
  return 0.0;
}

/// P(Gamma(c, 1) > h) = e^{-h} sum_{j<c} h^j / j!.
inline double erlang_tail(double h, int c) {
  if (c < 1) throw std::invalid_argument("erlang_tail needs c >= 1");
  if (!(h >= 0.0)) throw std::invalid_argument("erlang_tail needs h >= 0");
  return boost::math::gamma_q(static_cast<double>(c), h);
}

/// Scales of the Renyi representation of S = sum of the L smallest of N
/// i.i.d. Exp(1): S = sum_j lambda_j X_j with X_j i.i.d. Exp(1) and
/// lambda_j = (L - j + 1) / (N - j + 1), j = 1..L.
inline std::vector<double> low_sum_spacing_scales(int N, int L) {
  if (N < 1 || L < 1 || L > N) throw std::invalid_argument("need 1 <= L <= N");
  std::vector<double> lam(static_cast<std::size_t>(L));
  for (int j = 1; j <= L; ++j) lam[static_cast<std::size_t>(j - 1)] = static_cast<double>(L - j + 1) / (N - j + 1);
  return lam;
}

/// Coefficients w_j = prod_{i != j} lambda_j / (lambda_j - lambda_i) of the
/// closed form P(S > h) = sum_j w_j exp(-h / lambda_j). Empty when two rates
/// coincide (only possible for L = N, the Erlang case).
inline std::vector<double> low_sum_tail_weights(int N, int L) {
  const auto lam = low_sum_spacing_scales(N, L);
  std::vector<double> w(lam.size());
  for (std::size_t j = 0; j < lam.size(); ++j) {
    long double logabs = 0.0L;
    int sign = 1;
    for (std::size_t i = 0; i < lam.size(); ++i) {
      if (i == j) continue;
      const long double d = static_cast<long double>(lam[j]) - lam[i];
      if (d == 0.0L) return {};
      if (d < 0) sign = -sign;
      logabs += std::log(static_cast<long double>(lam[j])) - std::log(std::fabs(d));
    }
    w[j] = static_cast<double>(sign * std::exp(logabs));
  }
  return w;
}

/// P(S > h) by uniformization of the phase-type chain: phase j is left at
/// rate 1 / lambda_j; every term of the series is non-negative.
inline double low_sum_tail_uniformized(double h, int N, int L) {
  if (!(h >= 0.0)) throw std::invalid_argument("need h >= 0");
  auto lam = low_sum_spacing_scales(N, L);
  if (h == 0.0) return 1.0;
  for (double& x : lam) x = 1.0 / x;  // rates
  const double Lambda = *std::max_element(lam.begin(), lam.end());
  const double mu = Lambda * h;
  std::vector<double> pi(lam.size() + 1, 0.0);  // last entry: absorbed
  pi[0] = 1.0;
  double acc = 0.0;
  const double log_mu = std::log(mu);
  for (long n = 0;; ++n) {
    double alive = 0.0;
    for (std::size_t j = 0; j < lam.size(); ++j) alive += pi[j];
    const double logw = -mu + n * log_mu - std::lgamma(static_cast<double>(n) + 1.0);
    const double term = std::exp(logw) * alive;
    acc += term;
    if (n > mu) {
      // remaining terms are bounded by alive_n * P(Poisson(mu) > n)
      const double tail_bound = std::exp(logw) * mu / (n + 1.0 - mu) * alive;
      if (alive == 0.0 || tail_bound <= 1e-16 * acc) break;
    }
    if (n > 100000000L) throw std::runtime_error("uniformization did not converge");
    for (std::size_t j = lam.size(); j-- > 0;) {
      const double move = pi[j] * lam[j] / Lambda;
      pi[j] -= move;
      pi[j + 1] += move;
    }
  }
  return std::min(1.0, acc);
}

/// P(S > h), S the sum of the L smallest of N i.i.d. Exp(1). Uses the closed
/// form when it is numerically stable and the uniformized series otherwise.
inline double low_sum_exponential_tail(double h, int N, int L) {
  if (!(h >= 0.0)) throw std::invalid_argument("need h >= 0");
  if (L == N) return erlang_tail(h, N);
  const auto lam = low_sum_spacing_scales(N, L);
  const auto w = low_sum_tail_weights(N, L);
  if (!w.empty()) {
    long double sum = 0.0L, mag = 0.0L;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const long double term = static_cast<long double>(w[j]) * std::exp(-static_cast<long double>(h) / lam[j]);
      sum += term;
      mag += std::fabs(term);
    }
    // cancellation costs log10(mag/|sum|) digits of the ~18 available
    if (sum > 0.0L && sum <= 1.0L && mag / sum < 1e8L) return static_cast<double>(sum);
  }
  return low_sum_tail_uniformized(h, N, L);
}

/// Lattice CUSUM chain with llr +1 (probability p) or -1: the statistic moves
/// on {0, ..., h-1}, reflects at 0 and is absorbed at h.
struct LatticeChain {
  int h = 1;
  double p = 0.5;
};

/// Expected absorption time from every state; entry 0 is the ARL from W = 0.
inline std::vector<double> markov_absorption_times(const LatticeChain& c) {
  if (c.h < 1) throw std::invalid_argument("lattice chain needs h >= 1");
  if (!(c.p > 0.0) || c.p > 1.0) throw std::domain_error("lattice chain with p <= 0 never reaches h");
  const int n = c.h;
  const double q = 1.0 - c.p;
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    if (i + 1 < n) A(i, i + 1) -= c.p;
    A(i, std::max(i - 1, 0)) -= q;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible()) throw std::domain_error("singular absorption system");
  const Eigen::VectorXd T = lu.solve(Eigen::VectorXd::Ones(n));
  return {T.data(), T.data() + n};
}

inline double markov_arl(const LatticeChain& c) { return markov_absorption_times(c).front(); }

/// Limit of (detection delay) / b for a rule that must wait for the slowest
/// of several statistics drifting at the given rates toward a barrier b.
inline double farrell_asymptote(double b, std::span<const double> drifts) {
  if (drifts.empty()) throw std::invalid_argument("no drifts");
  if (!(b >= 0.0)) throw std::invalid_argument("barrier must be non-negative");
  const double m = *std::min_element(drifts.begin(), drifts.end());
  if (!(m > 0.0)) throw std::domain_error("drifts must be positive");
  return b / m;
}

/// E[X] for X on {0, 1, ..., T} given cdf[t] = P(X <= t); cdf.back() must be 1.
inline double mean_from_cdf(std::span<const double> cdf) {
  if (cdf.empty() || std::abs(cdf.back() - 1.0) > 1e-12) throw std::invalid_argument("cdf must end at 1");
  double m = 0.0;
  for (std::size_t t = 0; t + 1 < cdf.size(); ++t) m += 1.0 - cdf[t];
  return m;
}

}  // namespace byzcd
