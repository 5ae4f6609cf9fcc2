#pragma once

#include <cstddef>
#include <vector>

namespace lapal::oracle {

// Probability vector over a finite support.
struct DiscreteDist {
  std::vector<double> probs;

  // Throws ConfigError unless entries are >= 0 and sum to 1 within 1e-12.
  static DiscreteDist make(std::vector<double> probs);
  std::size_t size() const { return probs.size(); }
};

// Neumaier-compensated sum.
double compensated_sum(const std::vector<double>& terms);

// KL(p||q) in nats. Returns +infinity when supp(p) is not inside supp(q).
double kl(const DiscreteDist& p, const DiscreteDist& q);
bool kl_support_ok(const DiscreteDist& p, const DiscreteDist& q);

// Jensen-Shannon divergence in nats, in [0, log 2].
double js(const DiscreteDist& p, const DiscreteDist& q);

struct GanOptimum {
  std::vector<double> d_star;
  double j_star = 0.0;
};

// Pointwise optimal discriminator p_e / (p_e + p_g) and the attained
// objective. Throws NumericError if J* drifts from 2 JS - log 4 by > 1e-10.
GanOptimum optimal_gan_objective(const DiscreteDist& p_expert, const DiscreteDist& p_policy);

// map[i] is the image index of support point i. Image size is max(map) + 1.
DiscreteDist pushforward(const DiscreteDist& p, const std::vector<std::size_t>& map);

}  // namespace lapal::oracle
