#pragma once

#include "formnav/checkpoint.hpp"
#include "formnav/nn.hpp"

namespace formnav {

struct AttentionCriticConfig {
  int obs_dim = 52;
  int act_dim = 2;
  int embed_dim = 128;
  int n_heads = 4;
  int critic_hidden = 256;
  // When false, z_i is the plain mean of the value projections (pooling
  // ablation); shapes and the N-agnostic property are unchanged.
  bool use_attention = true;
};

// Centralized twin critics with a shared per-agent encoder and multi-head
// attention over the other agents. The encoder is tied across agents, so the
// same parameters evaluate any team size; Q_i is invariant to permutations
// of the other agents.
//
// Per agent i: e_j = encoder(o_j, a_j) for all j; query W_q e_i attends over
// keys/values W_k e_j, W_v e_j (j != i); Q = critic(concat(e_i, z_i)).
class AttentionCritic {
 public:
  AttentionCritic(const AttentionCriticConfig& config, Rng& rng);

  // Scalar form (one joint sample). which selects the twin head (1 or 2).
  double critic_q(const std::vector<Eigen::VectorXd>& all_obs,
                  const std::vector<Eigen::VectorXd>& all_actions, int agent, int which,
                  bool use_targets) const;

  // Batched tape forms used by the trainer. Inputs are B x obs_dim and
  // B x act_dim per agent. Embedding/key/value nodes are built once per tape
  // and reused across the per-agent heads.
  struct TapeEval {
    Var q1;
    Var q2;
  };
  struct TapeContext {
    std::vector<Var> embed, key, value;  // one per agent
  };
  TapeContext embed(Tape& tape, const std::vector<Var>& obs, const std::vector<Var>& actions);
  // Swaps in a fresh (obs, action) pair for one agent (actor update path).
  void reembed_agent(Tape& tape, TapeContext& ctx, int agent, Var obs, Var action);
  TapeEval q_from_context(Tape& tape, const TapeContext& ctx, int agent);
  TapeEval q_both(Tape& tape, const std::vector<Var>& obs, const std::vector<Var>& actions,
                  int agent);

  // Forward-only path on the target (or online) parameters.
  struct NumericEval {
    Mat q1;  // B x 1
    Mat q2;
  };
  struct NumericContext {
    std::vector<Mat> embed, key, value;
    bool targets = false;
  };
  NumericContext embed_numeric(const std::vector<Mat>& obs, const std::vector<Mat>& actions,
                               bool use_targets) const;
  NumericEval q_from_numeric_context(const NumericContext& ctx, int agent) const;
  NumericEval q_both_numeric(const std::vector<Mat>& obs, const std::vector<Mat>& actions,
                             int agent, bool use_targets) const;

  // target <- (1 - tau) target + tau online, elementwise.
  void target_sync(double tau);
  // Copies online parameters into the targets (tau = 1).
  void targets_from_online() { target_sync(1.0); }

  std::vector<Parameter*> parameters();
  void collect_named(const std::string& prefix,
                     std::vector<std::pair<std::string, Parameter*>>& out,
                     bool include_targets);
  const AttentionCriticConfig& config() const { return config_; }

 private:
  struct ParamSet {
    Mlp encoder;        // (obs+act) -> embed
    Parameter w_query;  // embed x embed
    Parameter w_key;
    Parameter w_value;
    Mlp critic1;  // 2*embed -> hidden -> hidden -> 1
    Mlp critic2;
  };

  AttentionCriticConfig config_;
  ParamSet online_;
  ParamSet target_;
};

}  // namespace formnav
