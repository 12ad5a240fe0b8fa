#include "formnav/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace formnav {

MlpSpec MlpSpec::make(std::vector<int> sizes, Activation hidden, Activation output) {
  if (sizes.size() < 2) throw std::invalid_argument("MlpSpec: need at least one layer");
  for (int s : sizes) {
    if (s <= 0) throw std::invalid_argument("MlpSpec: sizes must be positive");
  }
  MlpSpec spec;
  spec.sizes = std::move(sizes);
  spec.activations.assign(spec.sizes.size() - 1, hidden);
  spec.activations.back() = output;
  return spec;
}

Mlp::Mlp(MlpSpec spec, Rng& rng) : spec_(std::move(spec)) {
  if (spec_.activations.size() != spec_.sizes.size() - 1) {
    throw std::invalid_argument("Mlp: one activation per layer required");
  }
  for (int l = 0; l < spec_.n_layers(); ++l) {
    const int fan_in = spec_.sizes[l];
    const int fan_out = spec_.sizes[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    Mat W(fan_out, fan_in);
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = rng.uniform(-bound, bound);
    }
    weights_.emplace_back(std::move(W));
    biases_.emplace_back(Mat::Zero(1, fan_out));
  }
}

Var Mlp::forward(Tape& tape, Var x) {
  if (tape.value(x).cols() != spec_.sizes.front()) {
    throw std::invalid_argument("Mlp::forward: input width mismatch");
  }
  Var h = x;
  for (int l = 0; l < spec_.n_layers(); ++l) {
    h = tape.linear(h, tape.param(weights_[l]), tape.param(biases_[l]));
    switch (spec_.activations[l]) {
      case Activation::kRelu: h = tape.relu(h); break;
      case Activation::kTanh: h = tape.tanh(h); break;
      case Activation::kIdentity: break;
    }
  }
  return h;
}

Mat Mlp::forward(const Mat& x) const {
  if (x.cols() != spec_.sizes.front()) {
    throw std::invalid_argument("Mlp::forward: input width mismatch");
  }
  Mat h = x;
  for (int l = 0; l < spec_.n_layers(); ++l) {
    Mat y = h * weights_[l].value.transpose();
    y.rowwise() += biases_[l].value.row(0);
    switch (spec_.activations[l]) {
      case Activation::kRelu: y = y.cwiseMax(0.0); break;
      case Activation::kTanh: y = y.array().tanh(); break;
      case Activation::kIdentity: break;
    }
    h = std::move(y);
  }
  return h;
}

std::vector<Parameter*> Mlp::parameters() {
  std::vector<Parameter*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

std::vector<const Parameter*> Mlp::parameters() const {
  std::vector<const Parameter*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

void Mlp::collect_named(const std::string& prefix,
                        std::vector<std::pair<std::string, Parameter*>>& out) {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back({prefix + "/l" + std::to_string(l) + "/W", &weights_[l]});
    out.push_back({prefix + "/l" + std::to_string(l) + "/b", &biases_[l]});
  }
}

void Adam::step(const std::vector<Parameter*>& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (Parameter* p : params) {
    p->moment1 = beta1_ * p->moment1 + (1.0 - beta1_) * p->grad;
    p->moment2 = beta2_ * p->moment2.array() + (1.0 - beta2_) * p->grad.array().square();
    const Mat mhat = p->moment1 / bc1;
    const Mat vhat = p->moment2 / bc2;
    p->value.array() -= lr_ * mhat.array() / (vhat.array().sqrt() + eps_);
  }
}

AttentionResult attention_single(const Eigen::VectorXd& query,
                                 const std::vector<Eigen::VectorXd>& keys,
                                 const std::vector<Eigen::VectorXd>& values, int n_heads) {
  Tape tape;
  Var q = tape.input(query.transpose());
  std::vector<Var> ks, vs;
  for (const auto& k : keys) ks.push_back(tape.input(k.transpose()));
  for (const auto& v : values) vs.push_back(tape.input(v.transpose()));
  Mat weights;
  Var out = tape.attention(q, ks, vs, n_heads, &weights);
  AttentionResult result;
  result.output = tape.value(out).row(0).transpose();
  const int m = static_cast<int>(keys.size());
  for (int h = 0; h < n_heads; ++h) {
    result.weights.push_back(weights.row(0).segment(h * m, m).transpose());
  }
  return result;
}

SquashedSample squashed_gaussian(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std,
                                 const Eigen::VectorXd& noise) {
  Tape tape;
  Var m = tape.input(mean.transpose());
  Var l = tape.input(log_std.transpose());
  Var a = tape.squashed_action(m, l, noise.transpose());
  Var lp = tape.squashed_log_prob(m, l, noise.transpose());
  return {tape.value(a).row(0).transpose(), tape.value(lp)(0, 0)};
}

}  // namespace formnav
