#include "formnav/critic.hpp"

#include <stdexcept>

namespace formnav {

namespace {

Mat glorot(int rows, int cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / (rows + cols));
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-bound, bound);
  }
  return m;
}

}  // namespace

AttentionCritic::AttentionCritic(const AttentionCriticConfig& config, Rng& rng)
    : config_(config) {
  const int in = config.obs_dim + config.act_dim;
  const int e = config.embed_dim;
  const int h = config.critic_hidden;
  online_.encoder = Mlp(MlpSpec::make({in, e, e}, Activation::kRelu, Activation::kIdentity), rng);
  online_.w_query = Parameter(glorot(e, e, rng));
  online_.w_key = Parameter(glorot(e, e, rng));
  online_.w_value = Parameter(glorot(e, e, rng));
  online_.critic1 = Mlp(MlpSpec::make({2 * e, h, h, 1}, Activation::kRelu), rng);
  online_.critic2 = Mlp(MlpSpec::make({2 * e, h, h, 1}, Activation::kRelu), rng);
  target_ = online_;
}

AttentionCritic::TapeContext AttentionCritic::embed(Tape& tape, const std::vector<Var>& obs,
                                                    const std::vector<Var>& actions) {
  if (obs.size() != actions.size() || obs.size() < 2) {
    throw std::invalid_argument("AttentionCritic::embed: need (obs, action) for >= 2 agents");
  }
  TapeContext ctx;
  Var wk = tape.param(online_.w_key);
  Var wv = tape.param(online_.w_value);
  for (std::size_t j = 0; j < obs.size(); ++j) {
    Var e = online_.encoder.forward(tape, tape.concat_cols(obs[j], actions[j]));
    ctx.embed.push_back(e);
    ctx.key.push_back(tape.matmul(e, wk));
    ctx.value.push_back(tape.matmul(e, wv));
  }
  return ctx;
}

void AttentionCritic::reembed_agent(Tape& tape, TapeContext& ctx, int agent, Var obs,
                                    Var action) {
  Var e = online_.encoder.forward(tape, tape.concat_cols(obs, action));
  ctx.embed[agent] = e;
  ctx.key[agent] = tape.matmul(e, tape.param(online_.w_key));
  ctx.value[agent] = tape.matmul(e, tape.param(online_.w_value));
}

AttentionCritic::TapeEval AttentionCritic::q_from_context(Tape& tape, const TapeContext& ctx,
                                                          int agent) {
  const int n = static_cast<int>(ctx.embed.size());
  if (agent < 0 || agent >= n) {
    throw std::out_of_range("AttentionCritic: agent index out of range");
  }
  std::vector<Var> keys, values;
  for (int j = 0; j < n; ++j) {
    if (j == agent) continue;
    keys.push_back(ctx.key[j]);
    values.push_back(ctx.value[j]);
  }
  Var z;
  if (config_.use_attention) {
    Var query = tape.matmul(ctx.embed[agent], tape.param(online_.w_query));
    z = tape.attention(query, keys, values, config_.n_heads);
  } else {
    z = tape.mean_pool(values);
  }
  Var joint = tape.concat_cols(ctx.embed[agent], z);
  return {online_.critic1.forward(tape, joint), online_.critic2.forward(tape, joint)};
}

AttentionCritic::TapeEval AttentionCritic::q_both(Tape& tape, const std::vector<Var>& obs,
                                                  const std::vector<Var>& actions, int agent) {
  TapeContext ctx = embed(tape, obs, actions);
  return q_from_context(tape, ctx, agent);
}

AttentionCritic::NumericContext AttentionCritic::embed_numeric(const std::vector<Mat>& obs,
                                                               const std::vector<Mat>& actions,
                                                               bool use_targets) const {
  const ParamSet& set = use_targets ? target_ : online_;
  const int n = static_cast<int>(obs.size());
  if (n < 2 || static_cast<int>(actions.size()) != n) {
    throw std::invalid_argument("AttentionCritic: need (obs, action) for >= 2 agents");
  }
  NumericContext ctx;
  ctx.targets = use_targets;
  ctx.embed.resize(n);
  ctx.key.resize(n);
  ctx.value.resize(n);
  for (int j = 0; j < n; ++j) {
    Mat in(obs[j].rows(), obs[j].cols() + actions[j].cols());
    in << obs[j], actions[j];
    ctx.embed[j] = set.encoder.forward(in);
    ctx.key[j].noalias() = ctx.embed[j] * set.w_key.value;
    ctx.value[j].noalias() = ctx.embed[j] * set.w_value.value;
  }
  return ctx;
}

AttentionCritic::NumericEval AttentionCritic::q_from_numeric_context(const NumericContext& ctx,
                                                                     int agent) const {
  const ParamSet& set = ctx.targets ? target_ : online_;
  const int n = static_cast<int>(ctx.embed.size());
  if (agent < 0 || agent >= n) {
    throw std::out_of_range("AttentionCritic: agent index out of range");
  }
  const Eigen::Index B = ctx.embed[agent].rows();
  const int e = config_.embed_dim;
  const int heads = config_.n_heads;
  const Eigen::Index dh = e / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<int> others;
  for (int j = 0; j < n; ++j) {
    if (j != agent) others.push_back(j);
  }
  const int m = static_cast<int>(others.size());

  Mat z(B, e);
  if (config_.use_attention) {
    Mat query;
    query.noalias() = ctx.embed[agent] * set.w_query.value;
    for (Eigen::Index b = 0; b < B; ++b) {
      for (int h = 0; h < heads; ++h) {
        Eigen::VectorXd logits(m);
        for (int jj = 0; jj < m; ++jj) {
          logits[jj] = query.row(b).segment(h * dh, dh).dot(
                           ctx.key[others[jj]].row(b).segment(h * dh, dh)) *
                       inv_sqrt;
        }
        const double mx = logits.maxCoeff();
        Eigen::VectorXd w = (logits.array() - mx).exp();
        w /= w.sum();
        Eigen::RowVectorXd zh = Eigen::RowVectorXd::Zero(dh);
        for (int jj = 0; jj < m; ++jj) {
          zh += w[jj] * ctx.value[others[jj]].row(b).segment(h * dh, dh);
        }
        z.row(b).segment(h * dh, dh) = zh;
      }
    }
  } else {
    z.setZero();
    for (int jj = 0; jj < m; ++jj) z += ctx.value[others[jj]];
    z /= static_cast<double>(m);
  }
  Mat joint(B, 2 * e);
  joint << ctx.embed[agent], z;
  return {set.critic1.forward(joint), set.critic2.forward(joint)};
}

AttentionCritic::NumericEval AttentionCritic::q_both_numeric(const std::vector<Mat>& obs,
                                                             const std::vector<Mat>& actions,
                                                             int agent, bool use_targets) const {
  return q_from_numeric_context(embed_numeric(obs, actions, use_targets), agent);
}

double AttentionCritic::critic_q(const std::vector<Eigen::VectorXd>& all_obs,
                                 const std::vector<Eigen::VectorXd>& all_actions, int agent,
                                 int which, bool use_targets) const {
  if (which != 1 && which != 2) throw std::invalid_argument("critic_q: which must be 1 or 2");
  std::vector<Mat> obs, actions;
  for (const auto& o : all_obs) obs.push_back(o.transpose());
  for (const auto& a : all_actions) actions.push_back(a.transpose());
  const NumericEval eval = q_both_numeric(obs, actions, agent, use_targets);
  return which == 1 ? eval.q1(0, 0) : eval.q2(0, 0);
}

void AttentionCritic::target_sync(double tau) {
  if (tau <= 0.0 || tau > 1.0) throw std::invalid_argument("target_sync: tau must be in (0, 1]");
  auto blend = [tau](Parameter& target, const Parameter& online) {
    target.value = (1.0 - tau) * target.value + tau * online.value;
  };
  auto blend_mlp = [&](Mlp& target, Mlp& online) {
    auto tp = target.parameters();
    auto op = online.parameters();
    for (std::size_t i = 0; i < tp.size(); ++i) blend(*tp[i], *op[i]);
  };
  blend_mlp(target_.encoder, online_.encoder);
  blend(target_.w_query, online_.w_query);
  blend(target_.w_key, online_.w_key);
  blend(target_.w_value, online_.w_value);
  blend_mlp(target_.critic1, online_.critic1);
  blend_mlp(target_.critic2, online_.critic2);
}

std::vector<Parameter*> AttentionCritic::parameters() {
  std::vector<Parameter*> out;
  for (auto* p : online_.encoder.parameters()) out.push_back(p);
  out.push_back(&online_.w_query);
  out.push_back(&online_.w_key);
  out.push_back(&online_.w_value);
  for (auto* p : online_.critic1.parameters()) out.push_back(p);
  for (auto* p : online_.critic2.parameters()) out.push_back(p);
  return out;
}

void AttentionCritic::collect_named(const std::string& prefix,
                                    std::vector<std::pair<std::string, Parameter*>>& out,
                                    bool include_targets) {
  auto collect_set = [&](ParamSet& set, const std::string& base) {
    set.encoder.collect_named(base + "/encoder", out);
    out.push_back({base + "/w_query", &set.w_query});
    out.push_back({base + "/w_key", &set.w_key});
    out.push_back({base + "/w_value", &set.w_value});
    set.critic1.collect_named(base + "/critic1", out);
    set.critic2.collect_named(base + "/critic2", out);
  };
  collect_set(online_, prefix);
  if (include_targets) collect_set(target_, prefix + "/target");
}

}  // namespace formnav
