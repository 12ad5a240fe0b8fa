#include "formnav/policy.hpp"

namespace formnav {

GaussianPolicy::GaussianPolicy(int obs_dim, int hidden, Rng& rng)
    : net_(MlpSpec::make({obs_dim, hidden, hidden, 4}, Activation::kRelu), rng) {}

namespace {

void split_head(const Mat& out, Mat& mean, Mat& log_std) {
  mean = out.leftCols(2);
  log_std = out.rightCols(2).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
}

}  // namespace

ActionCmd GaussianPolicy::act(const ObservationVector& obs, const ActionScaler& scaler,
                              Rng& rng) const {
  const Mat out = net_.forward(obs.transpose());
  Mat mean, log_std;
  split_head(out, mean, log_std);
  Eigen::Vector2d squashed;
  for (int c = 0; c < 2; ++c) {
    const double u = mean(0, c) + std::exp(log_std(0, c)) * rng.normal();
    squashed[c] = std::tanh(u);
  }
  return scaler.to_env(squashed);
}

ActionCmd GaussianPolicy::act_deterministic(const ObservationVector& obs,
                                            const ActionScaler& scaler) const {
  const Mat out = net_.forward(obs.transpose());
  Eigen::Vector2d squashed(std::tanh(out(0, 0)), std::tanh(out(0, 1)));
  return scaler.to_env(squashed);
}

GaussianPolicy::Sample GaussianPolicy::sample(Tape& tape, Var obs, const Mat& noise) {
  Var out = net_.forward(tape, obs);
  Var mean = tape.slice_cols(out, 0, 2);
  Var log_std = tape.clamp(tape.slice_cols(out, 2, 2), kLogStdMin, kLogStdMax);
  return {tape.squashed_action(mean, log_std, noise),
          tape.squashed_log_prob(mean, log_std, noise)};
}

GaussianPolicy::NumericSample GaussianPolicy::sample_numeric(const Mat& obs,
                                                             const Mat& noise) const {
  const Mat out = net_.forward(obs);
  Mat mean, log_std;
  split_head(out, mean, log_std);
  const Mat sigma = log_std.array().exp();
  const Mat u = mean + sigma.cwiseProduct(noise);
  NumericSample s;
  s.action = u.array().tanh();
  s.log_prob.resize(u.rows(), 1);
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  constexpr double kLog2 = 0.69314718055994530942;
  for (Eigen::Index r = 0; r < u.rows(); ++r) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < u.cols(); ++c) {
      acc += -0.5 * noise(r, c) * noise(r, c) - log_std(r, c) - kHalfLog2Pi;
      acc += 2.0 * (u(r, c) + softplus(-2.0 * u(r, c)) - kLog2);
    }
    s.log_prob(r, 0) = acc;
  }
  return s;
}

}  // namespace formnav
