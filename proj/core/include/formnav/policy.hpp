#pragma once

#include "formnav/geometry.hpp"
#include "formnav/nn.hpp"
#include "formnav/observation.hpp"

namespace formnav {

// Maps between squashed network outputs in (-1, 1)^2 and ActionCmd in A.
struct ActionScaler {
  ActionBounds bounds;

  ActionCmd to_env(const Eigen::Vector2d& squashed) const {
    return {bounds.v_min + 0.5 * (squashed.x() + 1.0) * bounds.v_range(),
            bounds.w_min + 0.5 * (squashed.y() + 1.0) * bounds.w_range()};
  }
  Eigen::Vector2d to_squashed(const ActionCmd& a) const {
    return {2.0 * (a.v - bounds.v_min) / bounds.v_range() - 1.0,
            2.0 * (a.w - bounds.w_min) / bounds.w_range() - 1.0};
  }
};

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

// Decentralized actor: MLP(52 -> 256 -> 256 -> 4) emitting the mean and
// log-std of a tanh-squashed Gaussian over the two action channels.
class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  GaussianPolicy(int obs_dim, int hidden, Rng& rng);

  // Stochastic environment action.
  ActionCmd act(const ObservationVector& obs, const ActionScaler& scaler, Rng& rng) const;
  // Mode of the distribution (tanh of the mean), used for evaluation.
  ActionCmd act_deterministic(const ObservationVector& obs, const ActionScaler& scaler) const;

  // Tape path: squashed action in (-1,1)^2 and per-row log density, with the
  // reparameterized noise supplied by the caller.
  struct Sample {
    Var action;    // B x 2
    Var log_prob;  // B x 1
  };
  Sample sample(Tape& tape, Var obs, const Mat& noise);

  // Forward-only squashed sample for target computation.
  struct NumericSample {
    Mat action;    // B x 2, in (-1, 1)
    Mat log_prob;  // B x 1
  };
  NumericSample sample_numeric(const Mat& obs, const Mat& noise) const;

  std::vector<Parameter*> parameters() { return net_.parameters(); }
  void collect_named(const std::string& prefix,
                     std::vector<std::pair<std::string, Parameter*>>& out) {
    net_.collect_named(prefix, out);
  }

 private:
  Mlp net_;
};

}  // namespace formnav
