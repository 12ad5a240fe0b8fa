#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

namespace formnav {

using Mat = Eigen::MatrixXd;

// Learnable dense array plus its gradient and adaptive-moment state.
struct Parameter {
  Mat value;
  Mat grad;
  Mat moment1;
  Mat moment2;

  explicit Parameter(Mat v = Mat())
      : value(std::move(v)),
        grad(Mat::Zero(value.rows(), value.cols())),
        moment1(Mat::Zero(value.rows(), value.cols())),
        moment2(Mat::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(); }
};

// Reverse-mode tape over row-major batches (rows = batch items). One tape per
// forward pass; backward() may run once, after which the tape is spent.
//
// Convention for shapes: activations are B x F, weights F_out x F_in, biases
// 1 x F_out, scalars 1 x 1.
class Tape {
 public:
  struct Var {
    int idx = -1;
    bool valid() const { return idx >= 0; }
  };

  // Leaf that is not differentiated (batch inputs, constants).
  Var input(Mat value);
  // Leaf whose gradient is wanted (for gradient checks w.r.t. inputs).
  Var leaf(Mat value);
  // Leaf tied to a Parameter: backward accumulates into p.grad.
  Var param(Parameter& p);

  const Mat& value(Var v) const { return nodes_[v.idx].value; }
  // Valid after backward(); zero matrix if the node was never reached.
  const Mat& grad(Var v) const;

  // y = x W^T + b (b broadcast over rows).
  Var linear(Var x, Var W, Var b);
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, double s);
  Var add_const(Var a, double s);
  Var relu(Var a);
  Var tanh(Var a);
  Var exp(Var a);
  Var clamp(Var a, double lo, double hi);
  Var concat_cols(Var a, Var b);
  Var slice_cols(Var a, int start, int n);
  Var sum(Var a);
  Var mean(Var a);
  Var min2(Var a, Var b);          // elementwise min, ties differentiate through a
  Var mul_scalar(Var a, Var s);    // s is 1x1, broadcast multiply
  Var softmax_rows(Var a);

  // Multi-head scaled dot-product attention. q and each keys[j]/values[j] are
  // B x E with E divisible by n_heads. Output is B x E (concatenated heads).
  // If weights_out is given it receives the B x (n_heads * M) softmax weights
  // laid out head-major.
  Var attention(Var q, const std::vector<Var>& keys, const std::vector<Var>& values, int n_heads,
                Mat* weights_out = nullptr);

  // Plain average of same-shaped inputs (attention-free pooling ablation).
  Var mean_pool(const std::vector<Var>& inputs);

  // tanh-squashed Gaussian reparameterization. noise is a constant B x A
  // standard-normal draw. Action lies strictly inside (-1, 1).
  Var squashed_action(Var mean, Var log_std, const Mat& noise);
  // Per-row log density of the squashed action, B x 1, including the tanh
  // change-of-variables correction.
  Var squashed_log_prob(Var mean, Var log_std, const Mat& noise);

  // Reverse sweep from a 1x1 loss. Throws if called twice.
  void backward(Var loss);

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    bool grad_alloc = false;
    std::function<void(Tape&)> back;
  };

  Var make(Mat value, bool requires_grad, std::function<void(Tape&)> back = nullptr);
  Mat& grad_ref(int idx);
  void accumulate(int idx, const Mat& g);

  std::vector<Node> nodes_;
  bool backward_done_ = false;

  friend struct TapeTestPeer;
};

using Var = Tape::Var;

// Numerically stable helpers shared by ops and tests.
double softplus(double x);
double logistic(double x);
void softmax_rows_inplace(Mat& m);

}  // namespace formnav
