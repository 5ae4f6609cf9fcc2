#include "lapal/oracle/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "lapal/common/errors.hpp"

namespace lapal::oracle {

namespace {

void check_same_support(const DiscreteDist& p, const DiscreteDist& q) {
  if (p.size() != q.size()) {
    throw ConfigError("distributions have different support sizes: " + std::to_string(p.size()) +
                      " vs " + std::to_string(q.size()));
  }
}

// p log(p/q) with the 0 log 0 = 0 convention. Caller guarantees q > 0 when p > 0.
double xlogx_over(double p, double q) { return p > 0.0 ? p * std::log(p / q) : 0.0; }

}  // namespace

DiscreteDist DiscreteDist::make(std::vector<double> probs) {
  if (probs.empty()) throw ConfigError("distribution needs a non-empty support");
  for (double v : probs) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("probabilities must be finite and >= 0");
  }
  const double total = compensated_sum(probs);
  if (std::abs(total - 1.0) > 1e-12) {
    throw ConfigError("probabilities sum to " + std::to_string(total) + ", expected 1");
  }
  return DiscreteDist{std::move(probs)};
}

double compensated_sum(const std::vector<double>& terms) {
  double sum = 0.0;
  double comp = 0.0;
  for (double x : terms) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

bool kl_support_ok(const DiscreteDist& p, const DiscreteDist& q) {
  check_same_support(p, q);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.probs[i] > 0.0 && q.probs[i] <= 0.0) return false;
  }
  return true;
}

double kl(const DiscreteDist& p, const DiscreteDist& q) {
  if (!kl_support_ok(p, q)) return std::numeric_limits<double>::infinity();
  std::vector<double> terms(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) terms[i] = xlogx_over(p.probs[i], q.probs[i]);
  // Rounding can leave a tiny negative total when p and q nearly coincide.
  return std::max(0.0, compensated_sum(terms));
}

double js(const DiscreteDist& p, const DiscreteDist& q) {
  check_same_support(p, q);
  std::vector<double> terms;
  terms.reserve(2 * p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p.probs[i] + q.probs[i]);
    terms.push_back(0.5 * xlogx_over(p.probs[i], m));
    terms.push_back(0.5 * xlogx_over(q.probs[i], m));
  }
  return std::clamp(compensated_sum(terms), 0.0, std::numbers::ln2);
}

GanOptimum optimal_gan_objective(const DiscreteDist& p_expert, const DiscreteDist& p_policy) {
  check_same_support(p_expert, p_policy);
  GanOptimum out;
  out.d_star.resize(p_expert.size());
  std::vector<double> terms;
  terms.reserve(2 * p_expert.size());
  for (std::size_t i = 0; i < p_expert.size(); ++i) {
    const double pe = p_expert.probs[i];
    const double pg = p_policy.probs[i];
    const double total = pe + pg;
    // Off both supports the objective does not depend on D; 1/2 is the symmetric choice.
    const double d = total > 0.0 ? pe / total : 0.5;
    out.d_star[i] = d;
    if (pe > 0.0) terms.push_back(pe * std::log(pe / total));
    if (pg > 0.0) terms.push_back(pg * std::log(pg / total));
  }
  out.j_star = compensated_sum(terms);
  const double identity = 2.0 * js(p_expert, p_policy) - std::log(4.0);
  if (std::abs(out.j_star - identity) > 1e-10) {
    throw NumericError("optimal GAN objective " + std::to_string(out.j_star) +
                       " disagrees with 2 JS - log 4 = " + std::to_string(identity));
  }
  return out;
}

DiscreteDist pushforward(const DiscreteDist& p, const std::vector<std::size_t>& map) {
  if (map.size() != p.size()) {
    throw ConfigError("map covers " + std::to_string(map.size()) + " points, distribution has " +
                      std::to_string(p.size()));
  }
  const std::size_t image = *std::max_element(map.begin(), map.end()) + 1;
  std::vector<std::vector<double>> buckets(image);
  for (std::size_t i = 0; i < p.size(); ++i) buckets[map[i]].push_back(p.probs[i]);
  DiscreteDist out;
  out.probs.resize(image);
  for (std::size_t j = 0; j < image; ++j) out.probs[j] = compensated_sum(buckets[j]);
  return out;
}

}  // namespace lapal::oracle
