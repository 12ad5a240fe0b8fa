#pragma once

#include <string>
#include <vector>

#include "formnav/rng.hpp"
#include "formnav/tensor.hpp"

namespace formnav {

enum class Activation { kRelu, kTanh, kIdentity };

struct MlpSpec {
  std::vector<int> sizes;              // input size followed by layer widths
  std::vector<Activation> activations; // one per layer

  static MlpSpec make(std::vector<int> sizes, Activation hidden,
                      Activation output = Activation::kIdentity);
  int n_layers() const { return static_cast<int>(sizes.size()) - 1; }
};

// Fully connected network with per-layer activations. Two forward paths: a
// tape path for training and a plain path for inference / target values.
class Mlp {
 public:
  Mlp() = default;
  Mlp(MlpSpec spec, Rng& rng);

  Var forward(Tape& tape, Var x);
  Mat forward(const Mat& x) const;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  const MlpSpec& spec() const { return spec_; }

  // Parameter names for the checkpoint container: prefix/l<i>/{W,b}.
  void collect_named(const std::string& prefix,
                     std::vector<std::pair<std::string, Parameter*>>& out);

 private:
  MlpSpec spec_;
  std::vector<Parameter> weights_;
  std::vector<Parameter> biases_;
};

// Bias-corrected adaptive-moment update (shared step counter).
class Adam {
 public:
  explicit Adam(double lr = 3e-4, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Parameter*>& params);
  long step_count() const { return t_; }
  void set_step_count(long t) { t_ = t; }
  double learning_rate() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

// Single-query multi-head attention, the non-batched convenience form.
struct AttentionResult {
  Eigen::VectorXd output;
  // weights[h][j]: softmax weight of key j under head h; each row sums to 1.
  std::vector<Eigen::VectorXd> weights;
};
AttentionResult attention_single(const Eigen::VectorXd& query,
                                 const std::vector<Eigen::VectorXd>& keys,
                                 const std::vector<Eigen::VectorXd>& values, int n_heads);

// One draw from a tanh-squashed Gaussian with its log density.
struct SquashedSample {
  Eigen::VectorXd action;  // strictly inside (-1, 1)
  double log_prob;
};
SquashedSample squashed_gaussian(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std,
                                 const Eigen::VectorXd& noise);

}  // namespace formnav
