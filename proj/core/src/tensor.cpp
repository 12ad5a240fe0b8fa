#include "formnav/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace formnav {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double logistic(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void softmax_rows_inplace(Mat& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - mx).exp();
    m.row(r) /= m.row(r).sum();
  }
}

Tape::Var Tape::make(Mat value, bool requires_grad, std::function<void(Tape&)> back) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  node.back = std::move(back);
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Mat& Tape::grad_ref(int idx) {
  Node& n = nodes_[idx];
  if (!n.grad_alloc) {
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.grad_alloc = true;
  }
  return n.grad;
}

void Tape::accumulate(int idx, const Mat& g) {
  if (!nodes_[idx].requires_grad) return;
  grad_ref(idx) += g;
}

const Mat& Tape::grad(Var v) const {
  const Node& n = nodes_[v.idx];
  if (!n.grad_alloc) {
    // Disconnected from the loss: expose a zero of the right shape lazily.
    const_cast<Tape*>(this)->grad_ref(v.idx);
  }
  return nodes_[v.idx].grad;
}

Tape::Var Tape::input(Mat value) { return make(std::move(value), false); }

Tape::Var Tape::leaf(Mat value) { return make(std::move(value), true); }

Tape::Var Tape::param(Parameter& p) {
  Var v = make(p.value, true, nullptr);
  const int idx = v.idx;
  Parameter* target = &p;
  nodes_[idx].back = [idx, target](Tape& t) {
    if (t.nodes_[idx].grad_alloc) target->grad += t.nodes_[idx].grad;
  };
  return v;
}

Tape::Var Tape::linear(Var x, Var W, Var b) {
  const Mat& xv = value(x);
  const Mat& Wv = value(W);
  const Mat& bv = value(b);
  if (xv.cols() != Wv.cols()) throw std::invalid_argument("linear: input width mismatch");
  if (bv.rows() != 1 || bv.cols() != Wv.rows()) {
    throw std::invalid_argument("linear: bias shape mismatch");
  }
  Mat y = xv * Wv.transpose();
  y.rowwise() += bv.row(0);
  const bool rg = nodes_[x.idx].requires_grad || nodes_[W.idx].requires_grad ||
                  nodes_[b.idx].requires_grad;
  Var out = make(std::move(y), rg);
  const int oi = out.idx, xi = x.idx, wi = W.idx, bi = b.idx;
  nodes_[oi].back = [oi, xi, wi, bi](Tape& t) {
    if (!t.nodes_[oi].grad_alloc) return;
    const Mat& g = t.nodes_[oi].grad;
    if (t.nodes_[xi].requires_grad) t.grad_ref(xi).noalias() += g * t.nodes_[wi].value;
    if (t.nodes_[wi].requires_grad) t.grad_ref(wi).noalias() += g.transpose() * t.nodes_[xi].value;
    if (t.nodes_[bi].requires_grad) t.grad_ref(bi).row(0) += g.colwise().sum();
  };
  return out;
}

Tape::Var Tape::matmul(Var a, Var b) {
  const Mat& av = value(a);
  const Mat& bv = value(b);
  if (av.cols() != bv.rows()) throw std::invalid_argument("matmul: shape mismatch");
  const bool rg = nodes_[a.idx].requires_grad || nodes_[b.idx].requires_grad;
  Var out = make(av * bv, rg);
  const int oi = out.idx, ai = a.idx, bi = b.idx;
  nodes_[oi].back = [oi, ai, bi](Tape& t) {
    if (!t.nodes_[oi].grad_alloc) return;
    const Mat& g = t.nodes_[oi].grad;
    if (t.nodes_[ai].requires_grad) {
      t.grad_ref(ai).noalias() += g * t.nodes_[bi].value.transpose();
    }
    if (t.nodes_[bi].requires_grad) {
      t.grad_ref(bi).noalias() += t.nodes_[ai].value.transpose() * g;
    }
  };
  return out;
}

namespace {
void check_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}
}  // namespace

Tape::Var Tape::add(Var a, Var b) {
  check_same_shape(value(a), value(b), "add");
  const bool rg = nodes_[a.idx].requires_grad || nodes_[b.idx].requires_grad;
  Var out = make(value(a) + value(b), rg);
  const int oi = out.idx, ai = a.idx, bi = b.idx;
  nodes_[oi].back = [oi, ai, bi](Tape& t) {
    if (!t.nodes_[oi].grad_alloc) return;
    t.accumulate(ai, t.nodes_[oi].grad);
    t.accumulate(bi, t.nodes_[oi].grad);
  };
  return out;
}

Tape::Var Tape::sub(Var a, Var b) {
  check_same_shape(value(a), value(b), "sub");
  const bool rg = nodes_[a.idx].requires_grad || nodes_[b.idx].requires_grad;
  Var out = make(value(a) - value(b), rg);
  const int oi = out.idx, ai = a.idx, bi = b.idx;
  nodes_[oi].back = [oi, ai, bi](Tape& t) {
    if (!t.nodes_[oi].grad_alloc) return;
    t.accumulate(ai, t.nodes_[oi].grad);
    t.accumulate(bi, -t.nodes_[oi].grad);
  };
  return out;
}

Tape::Var Tape::mul(Var a, Var b) {
  check_same_shape(value(a), value(b), "mul");
  const bool rg = nodes_[a.idx].requires_grad || nodes_[b.idx].requires_grad;
  Var out = make(value(a).cwiseProduct(value(b)), rg);
  const int oi = out.idx, ai = a.idx, bi = b.idx;
  nodes_[oi].back = [oi, ai, bi](Tape& t) {
    if (!t.nodes_[oi].grad_alloc) return;
    const Mat& g = t.nodes_[oi].grad;
    t.accumulate(ai, g.cwiseProduct(t.nodes_[bi].value));
    t.accumulate(bi, g.cwiseProduct(t.nodes_[ai].value));
  };
  return out;
}

Tape::Var Tape::scale(Var a, double s) {
  Var out = make(value(a) * s, nodes_[a.idx].requires_grad);
  const int oi = out.idx, ai = a.idx;
  nodes_[oi].back = [oi, ai, s](Tape& t) {
    if (!t.nodes_[oi].grad_alloc) return;
    t.accumulate(ai, t.nodes_[oi].grad * s);
  };
  return out;
}

Tape::Var Tape::add_const(Var a, double s) {
  Var out = make(value(a).array() + s, nodes_[a.idx].requires_grad);
  const int oi = out.idx, ai = a.idx;
  nodes_[oi].back = [oi, ai](Tape& t) {
    if (!t.nodes_[oi].grad_alloc) return;
    t.accumulate(ai, t.nodes_[oi].grad);
  };
  return out;
}

Tape::Var Tape::relu(Var a) {
  Var out = make(value(a).cwiseMax(0.0), nodes_[a.idx].requires_grad);
  const int oi = out.idx, ai = a.idx;
  nodes_[oi].back = [oi, ai](Tape& t) {
    if (!t.nodes_[oi].grad_alloc) return;
    const Mat mask = (t.nodes_[ai].value.array() > 0.0).cast<double>();
    t.accumulate(ai, t.nodes_[oi].grad.cwiseProduct(mask));
  };
  return out;
}

Tape::Var Tape::tanh(Var a) {
  Var out = make(value(a).array().tanh(), nodes_[a.idx].requires_grad);
  const int oi = out.idx, ai = a.idx;
  nodes_[oi].back = [oi, ai](Tape& t) {
    if (!t.nodes_[oi].grad_alloc) return;
    const Mat& y = t.nodes_[oi].value;
    t.accumulate(ai, t.nodes_[oi].grad.cwiseProduct((1.0 - y.array().square()).matrix()));
  };
  return out;
}

Tape::Var Tape::exp(Var a) {
  Var out = make(value(a).array().exp(), nodes_[a.idx].requires_grad);
  const int oi = out.idx, ai = a.idx;
  nodes_[oi].back = [oi, ai](Tape& t) {
    if (!t.nodes_[oi].grad_alloc) return;
    t.accumulate(ai, t.nodes_[oi].grad.cwiseProduct(t.nodes_[oi].value));
  };
  return out;
}

Tape::Var Tape::clamp(Var a, double lo, double hi) {
  Var out = make(value(a).cwiseMax(lo).cwiseMin(hi), nodes_[a.idx].requires_grad);
  const int oi = out.idx, ai = a.idx;
  nodes_[oi].back = [oi, ai, lo, hi](Tape& t) {
    if (!t.nodes_[oi].grad_alloc) return;
    const Mat& x = t.nodes_[ai].value;
    const Mat mask =
        ((x.array() > lo) && (x.array() < hi)).cast<double>();
    t.accumulate(ai, t.nodes_[oi].grad.cwiseProduct(mask));
  };
  return out;
}

Tape::Var Tape::concat_cols(Var a, Var b) {
  const Mat& av = value(a);
  const Mat& bv = value(b);
  if (av.rows() != bv.rows()) throw std::invalid_argument("concat_cols: row mismatch");
  const Eigen::Index na = av.cols(), nb = bv.cols();
  Mat y(av.rows(), na + nb);
  y << av, bv;
  const bool rg = nodes_[a.idx].requires_grad || nodes_[b.idx].requires_grad;
  Var out = make(std::move(y), rg);
  const int oi = out.idx, ai = a.idx, bi = b.idx;
  nodes_[oi].back = [oi, ai, bi, na, nb](Tape& t) {
    if (!t.nodes_[oi].grad_alloc) return;
    const Mat& g = t.nodes_[oi].grad;
    t.accumulate(ai, g.leftCols(na));
    t.accumulate(bi, g.rightCols(nb));
  };
  return out;
}

Tape::Var Tape::slice_cols(Var a, int start, int n) {
  const Mat& av = value(a);
  if (start < 0 || n < 0 || start + n > av.cols()) {
    throw std::invalid_argument("slice_cols: out of range");
  }
  Var out = make(av.middleCols(start, n), nodes_[a.idx].requires_grad);
  const int oi = out.idx, ai = a.idx;
  nodes_[oi].back = [oi, ai, start, n](Tape& t) {
    if (!t.nodes_[oi].grad_alloc) return;
    Mat& ga = t.grad_ref(ai);
    if (t.nodes_[ai].requires_grad) ga.middleCols(start, n) += t.nodes_[oi].grad;
  };
  return out;
}

Tape::Var Tape::sum(Var a) {
  Mat y(1, 1);
  y(0, 0) = value(a).sum();
  Var out = make(std::move(y), nodes_[a.idx].requires_grad);
  const int oi = out.idx, ai = a.idx;
  nodes_[oi].back = [oi, ai](Tape& t) {
    if (!t.nodes_[oi].grad_alloc) return;
    const double g = t.nodes_[oi].grad(0, 0);
    t.accumulate(ai, Mat::Constant(t.nodes_[ai].value.rows(), t.nodes_[ai].value.cols(), g));
  };
  return out;
}

Tape::Var Tape::mean(Var a) {
  const double scale = 1.0 / static_cast<double>(value(a).size());
  return this->scale(sum(a), scale);
}

Tape::Var Tape::min2(Var a, Var b) {
  check_same_shape(value(a), value(b), "min2");
  const bool rg = nodes_[a.idx].requires_grad || nodes_[b.idx].requires_grad;
  Var out = make(value(a).cwiseMin(value(b)), rg);
  const int oi = out.idx, ai = a.idx, bi = b.idx;
  nodes_[oi].back = [oi, ai, bi](Tape& t) {
    if (!t.nodes_[oi].grad_alloc) return;
    const Mat& g = t.nodes_[oi].grad;
    const Mat pick_a = (t.nodes_[ai].value.array() <= t.nodes_[bi].value.array()).cast<double>();
    t.accumulate(ai, g.cwiseProduct(pick_a));
    t.accumulate(bi, g.cwiseProduct((1.0 - pick_a.array()).matrix()));
  };
  return out;
}

Tape::Var Tape::mul_scalar(Var a, Var s) {
  if (value(s).size() != 1) throw std::invalid_argument("mul_scalar: scalar must be 1x1");
  const bool rg = nodes_[a.idx].requires_grad || nodes_[s.idx].requires_grad;
  Var out = make(value(a) * value(s)(0, 0), rg);
  const int oi = out.idx, ai = a.idx, si = s.idx;
  nodes_[oi].back = [oi, ai, si](Tape& t) {
    if (!t.nodes_[oi].grad_alloc) return;
    const Mat& g = t.nodes_[oi].grad;
    t.accumulate(ai, g * t.nodes_[si].value(0, 0));
    if (t.nodes_[si].requires_grad) {
      Mat gs(1, 1);
      gs(0, 0) = g.cwiseProduct(t.nodes_[ai].value).sum();
      t.accumulate(si, gs);
    }
  };
  return out;
}

Tape::Var Tape::softmax_rows(Var a) {
  Mat y = value(a);
  softmax_rows_inplace(y);
  Var out = make(std::move(y), nodes_[a.idx].requires_grad);
  const int oi = out.idx, ai = a.idx;
  nodes_[oi].back = [oi, ai](Tape& t) {
    if (!t.nodes_[oi].grad_alloc) return;
    const Mat& y = t.nodes_[oi].value;
    const Mat& g = t.nodes_[oi].grad;
    Mat ga(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = y.row(r).dot(g.row(r));
      ga.row(r) = y.row(r).cwiseProduct(g.row(r) - Mat::Constant(1, y.cols(), dot));
    }
    t.accumulate(ai, ga);
  };
  return out;
}

Tape::Var Tape::attention(Var q, const std::vector<Var>& keys, const std::vector<Var>& values,
                          int n_heads, Mat* weights_out) {
  if (keys.empty() || keys.size() != values.size()) {
    throw std::invalid_argument("attention: need matching, non-empty keys and values");
  }
  const Mat& qv = value(q);
  const Eigen::Index B = qv.rows(), E = qv.cols();
  if (E % n_heads != 0) throw std::invalid_argument("attention: E must divide by n_heads");
  const Eigen::Index Dh = E / n_heads;
  const int M = static_cast<int>(keys.size());
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(Dh));

  for (const auto& kv : keys) check_same_shape(value(kv), qv, "attention keys");
  for (const auto& vv : values) check_same_shape(value(vv), qv, "attention values");

  // weights: B x (n_heads * M), head-major.
  Mat weights(B, n_heads * static_cast<Eigen::Index>(M));
  Mat out_val(B, E);
  for (Eigen::Index b = 0; b < B; ++b) {
    for (int h = 0; h < n_heads; ++h) {
      Eigen::VectorXd logits(M);
      for (int j = 0; j < M; ++j) {
        logits[j] =
            qv.row(b).segment(h * Dh, Dh).dot(value(keys[j]).row(b).segment(h * Dh, Dh)) *
            inv_sqrt;
      }
      const double mx = logits.maxCoeff();
      Eigen::VectorXd w = (logits.array() - mx).exp();
      w /= w.sum();
      Eigen::RowVectorXd z = Eigen::RowVectorXd::Zero(Dh);
      for (int j = 0; j < M; ++j) {
        z += w[j] * value(values[j]).row(b).segment(h * Dh, Dh);
      }
      out_val.row(b).segment(h * Dh, Dh) = z;
      weights.row(b).segment(h * M, M) = w.transpose();
    }
  }
  if (weights_out) *weights_out = weights;

  bool rg = nodes_[q.idx].requires_grad;
  for (const auto& kv : keys) rg = rg || nodes_[kv.idx].requires_grad;
  for (const auto& vv : values) rg = rg || nodes_[vv.idx].requires_grad;

  Var out = make(std::move(out_val), rg);
  const int oi = out.idx, qi = q.idx;
  std::vector<int> kid(M), vid(M);
  for (int j = 0; j < M; ++j) {
    kid[j] = keys[j].idx;
    vid[j] = values[j].idx;
  }
  const int H = n_heads;
  nodes_[oi].back = [oi, qi, kid, vid, H, Dh, M, inv_sqrt, weights](Tape& t) {
    if (!t.nodes_[oi].grad_alloc) return;
    const Mat& g = t.nodes_[oi].grad;
    const Mat& qv = t.nodes_[qi].value;
    const Eigen::Index B = qv.rows();
    Mat gq = Mat::Zero(B, qv.cols());
    std::vector<Mat> gk(M, Mat::Zero(B, qv.cols()));
    std::vector<Mat> gv(M, Mat::Zero(B, qv.cols()));
    for (Eigen::Index b = 0; b < B; ++b) {
      for (int h = 0; h < H; ++h) {
        const auto gz = g.row(b).segment(h * Dh, Dh);
        Eigen::VectorXd dw(M);
        for (int j = 0; j < M; ++j) {
          gv[j].row(b).segment(h * Dh, Dh) += weights(b, h * M + j) * gz;
          dw[j] = gz.dot(t.nodes_[vid[j]].value.row(b).segment(h * Dh, Dh));
        }
        double wdot = 0.0;
        for (int j = 0; j < M; ++j) wdot += weights(b, h * M + j) * dw[j];
        for (int j = 0; j < M; ++j) {
          const double ds = weights(b, h * M + j) * (dw[j] - wdot) * inv_sqrt;
          gq.row(b).segment(h * Dh, Dh) +=
              ds * t.nodes_[kid[j]].value.row(b).segment(h * Dh, Dh);
          gk[j].row(b).segment(h * Dh, Dh) += ds * qv.row(b).segment(h * Dh, Dh);
        }
      }
    }
    t.accumulate(qi, gq);
    for (int j = 0; j < M; ++j) {
      t.accumulate(kid[j], gk[j]);
      t.accumulate(vid[j], gv[j]);
    }
  };
  return out;
}

Tape::Var Tape::mean_pool(const std::vector<Var>& inputs) {
  if (inputs.empty()) throw std::invalid_argument("mean_pool: no inputs");
  Mat acc = value(inputs[0]);
  bool rg = nodes_[inputs[0].idx].requires_grad;
  for (std::size_t j = 1; j < inputs.size(); ++j) {
    check_same_shape(value(inputs[j]), acc, "mean_pool");
    acc += value(inputs[j]);
    rg = rg || nodes_[inputs[j].idx].requires_grad;
  }
  const double inv = 1.0 / static_cast<double>(inputs.size());
  acc *= inv;
  Var out = make(std::move(acc), rg);
  const int oi = out.idx;
  std::vector<int> ids;
  for (const auto& v : inputs) ids.push_back(v.idx);
  nodes_[oi].back = [oi, ids, inv](Tape& t) {
    if (!t.nodes_[oi].grad_alloc) return;
    const Mat g = t.nodes_[oi].grad * inv;
    for (int id : ids) t.accumulate(id, g);
  };
  return out;
}

Tape::Var Tape::squashed_action(Var mean, Var log_std, const Mat& noise) {
  const Mat& mv = value(mean);
  const Mat& lv = value(log_std);
  check_same_shape(mv, lv, "squashed_action");
  check_same_shape(mv, noise, "squashed_action noise");
  const Mat sigma = lv.array().exp();
  const Mat u = mv + sigma.cwiseProduct(noise);
  Mat a = u.array().tanh();
  const bool rg = nodes_[mean.idx].requires_grad || nodes_[log_std.idx].requires_grad;
  Var out = make(std::move(a), rg);
  const int oi = out.idx, mi = mean.idx, li = log_std.idx;
  nodes_[oi].back = [oi, mi, li, noise](Tape& t) {
    if (!t.nodes_[oi].grad_alloc) return;
    const Mat& a = t.nodes_[oi].value;
    const Mat& g = t.nodes_[oi].grad;
    const Mat sigma = t.nodes_[li].value.array().exp();
    const Mat gu = g.cwiseProduct((1.0 - a.array().square()).matrix());
    t.accumulate(mi, gu);
    t.accumulate(li, gu.cwiseProduct(sigma.cwiseProduct(noise)));
  };
  return out;
}

Tape::Var Tape::squashed_log_prob(Var mean, Var log_std, const Mat& noise) {
  const Mat& mv = value(mean);
  const Mat& lv = value(log_std);
  check_same_shape(mv, lv, "squashed_log_prob");
  check_same_shape(mv, noise, "squashed_log_prob noise");
  constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 log(2 pi)
  constexpr double kLog2 = 0.69314718055994530942;

  const Mat sigma = lv.array().exp();
  const Mat u = mv + sigma.cwiseProduct(noise);
  Mat lp(mv.rows(), 1);
  for (Eigen::Index r = 0; r < mv.rows(); ++r) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < mv.cols(); ++c) {
      const double eps = noise(r, c);
      acc += -0.5 * eps * eps - lv(r, c) - kHalfLog2Pi;
      // -log(1 - tanh(u)^2) = -2 (log 2 - u - softplus(-2u))
      acc += 2.0 * (u(r, c) + softplus(-2.0 * u(r, c)) - kLog2);
    }
    lp(r, 0) = acc;
  }
  const bool rg = nodes_[mean.idx].requires_grad || nodes_[log_std.idx].requires_grad;
  Var out = make(std::move(lp), rg);
  const int oi = out.idx, mi = mean.idx, li = log_std.idx;
  nodes_[oi].back = [oi, mi, li, noise, u, sigma](Tape& t) {
    if (!t.nodes_[oi].grad_alloc) return;
    const Mat& g = t.nodes_[oi].grad;  // B x 1
    const Eigen::Index B = u.rows(), A = u.cols();
    Mat gm(B, A), gl(B, A);
    for (Eigen::Index r = 0; r < B; ++r) {
      for (Eigen::Index c = 0; c < A; ++c) {
        const double du = 2.0 - 4.0 * logistic(-2.0 * u(r, c));
        gm(r, c) = g(r, 0) * du;
        gl(r, c) = g(r, 0) * (-1.0 + du * sigma(r, c) * noise(r, c));
      }
    }
    t.accumulate(mi, gm);
    t.accumulate(li, gl);
  };
  return out;
}

void Tape::backward(Var loss) {
  if (backward_done_) throw std::logic_error("Tape::backward called twice");
  backward_done_ = true;
  if (value(loss).size() != 1) throw std::invalid_argument("backward: loss must be 1x1");
  grad_ref(loss.idx)(0, 0) = 1.0;
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back && n.grad_alloc && n.requires_grad) n.back(*this);
  }
}

}  // namespace formnav
