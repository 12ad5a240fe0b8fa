#include "formnav/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <iostream>

#include "formnav/checkpoint.hpp"
#include "formnav/csv.hpp"

namespace formnav {

namespace {

Mat normal_mat(Rng& rng, int rows, int cols) {
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = rng.normal();
  }
  return m;
}

}  // namespace

Trainer::Trainer(TrainerSetup setup)
    : setup_(std::move(setup)),
      assignment_(NeighborAssignment::ring(setup_.scenario.n_robots)),
      rng_(mix_seed(setup_.train.seed, 0, 2)),
      critic_opt_(setup_.train.lr) {
  scaler_.bounds = setup_.mpc.bounds;
  const int n = setup_.scenario.n_robots;

  Rng init_rng(mix_seed(setup_.train.seed, 0, 1));
  for (int i = 0; i < n; ++i) actors_.emplace_back(kObservationDim, 256, init_rng);
  AttentionCriticConfig critic_config;
  critic_config.obs_dim = kObservationDim;
  critic_config.use_attention = setup_.train.attention_enabled;
  critic_ = std::make_unique<AttentionCritic>(critic_config, init_rng);

  log_alpha_.assign(n, 0.0);  // alpha starts at 1
  alpha_m1_.assign(n, Mat::Zero(1, 1));
  alpha_m2_.assign(n, Mat::Zero(1, 1));
  for (int i = 0; i < n; ++i) actor_opt_.emplace_back(setup_.train.lr);

  buffer_ = std::make_unique<ReplayBuffer>(n, kObservationDim, 2, setup_.train.buffer_capacity);
  for (int i = 0; i < n; ++i) filters_.emplace_back(setup_.mpc, i);

  begin_episode();
}

void Trainer::begin_episode() {
  const WorldState world =
      spawn_scenario(setup_.scenario, mix_seed(setup_.train.seed, episodes_done_, 11));
  SimParams params = setup_.sim;
  params.max_steps = setup_.train.max_steps;
  episode_ = std::make_unique<Episode>(world, params);
  for (auto& f : filters_) f.reset();
  prev_executed_.assign(n_agents(), ActionCmd{});
  current_obs_.resize(n_agents());
  for (int i = 0; i < n_agents(); ++i) {
    current_obs_[i] = build_observation(episode_->world(), i, assignment_,
                                        setup_.scenario.d_ref, prev_executed_[i], params);
  }
  ep_returns_.assign(n_agents(), 0.0);
  ep_formation_sum_ = 0.0;
  ep_deviation_sum_ = 0.0;
  ep_steps_ = 0;
  ep_goals_ = 0;
}

ActionCmd Trainer::propose_action(int agent, const ObservationVector& obs) {
  // Warmup collects without updates; a freshly initialized policy explores
  // uniformly, a resumed one keeps acting (it only needs to refill the
  // buffer).
  if (total_env_steps_ < setup_.train.warmup_steps && !resumed_) {
    return {rng_.uniform(scaler_.bounds.v_min, scaler_.bounds.v_max),
            rng_.uniform(scaler_.bounds.w_min, scaler_.bounds.w_max)};
  }
  return actors_[agent].act(obs, scaler_, rng_);
}

void Trainer::resample_goal() {
  WorldState& world = episode_->mutable_world();
  const Vec2 current = centroid(world);
  const double margin = setup_.scenario.wall_margin + world.robot_radius;
  for (int attempt = 0; attempt < setup_.scenario.max_spawn_attempts; ++attempt) {
    const Vec2 g(rng_.uniform(world.arena.lo.x() + margin, world.arena.hi.x() - margin),
                 rng_.uniform(world.arena.lo.y() + margin, world.arena.hi.y() - margin));
    bool clear = true;
    for (const auto& obs : world.obstacles) {
      if (obs.surface_distance(g) < setup_.scenario.obstacle_clearance) {
        clear = false;
        break;
      }
    }
    if (clear && (g - current).norm() >= setup_.scenario.goal_min_dist) {
      world.centroid_goal = g;
      return;
    }
  }
  // Keep the old goal if sampling failed; the episode simply continues.
}

EpisodeStatus Trainer::step_env() {
  const int n = n_agents();
  std::vector<ActionCmd> proposals(n), executed(n);
  for (int i = 0; i < n; ++i) {
    proposals[i] = propose_action(i, current_obs_[i]);
    if (setup_.train.mpc_enabled) {
      executed[i] = filters_[i].step(episode_->world(), proposals[i], assignment_).action;
    } else {
      executed[i] = scaler_.bounds.clamp(proposals[i]);
    }
  }

  EpisodeStatus status = episode_->step(executed);
  const WorldState& world = episode_->world();

  std::vector<double> rewards(n);
  for (int i = 0; i < n; ++i) {
    const RewardBreakdown breakdown =
        compute_reward(world, i, assignment_, setup_.scenario.d_ref, status, proposals[i],
                       executed[i], setup_.reward, scaler_.bounds);
    rewards[i] = breakdown.total();
    ep_returns_[i] += breakdown.total();
    ep_deviation_sum_ += -breakdown.deviation;
  }
  ep_formation_sum_ += formation_error(world, setup_.scenario.d_ref);
  ++ep_steps_;

  if (status.state == EpisodeState::kGoalReached) {
    ++ep_goals_;
    resample_goal();
    episode_->resume();
  }

  const bool done = status.collision_or_stuck();
  std::vector<Eigen::VectorXd> obs_list(n), next_obs_list(n);
  std::vector<Eigen::Vector2d> action_list(n);
  std::vector<double> reward_list(n);
  for (int i = 0; i < n; ++i) {
    ObservationVector next_obs = build_observation(world, i, assignment_, setup_.scenario.d_ref,
                                                   executed[i], episode_->params());
    obs_list[i] = current_obs_[i];
    next_obs_list[i] = next_obs;
    action_list[i] = Eigen::Vector2d(proposals[i].v, proposals[i].w);
    reward_list[i] = rewards[i];
    current_obs_[i] = next_obs;
    prev_executed_[i] = executed[i];
  }
  buffer_->push(obs_list, action_list, reward_list, next_obs_list, done);

  ++total_env_steps_;
  last_step_ = {std::move(proposals), std::move(executed), status};
  return status;
}

UpdateLosses Trainer::update(const ReplayBuffer::Batch& batch) {
  const int n = n_agents();
  const int B = batch.size();
  const double gamma = setup_.train.gamma;
  UpdateLosses losses;
  losses.actor_loss.assign(n, 0.0);
  losses.alpha.assign(n, 0.0);
  losses.entropy.assign(n, 0.0);

  // Actions into squashed network coordinates.
  std::vector<Mat> act_sq(n);
  for (int i = 0; i < n; ++i) {
    Mat sq(B, 2);
    for (int b = 0; b < B; ++b) {
      const Eigen::Vector2d s = scaler_.to_squashed(
          ActionCmd{batch.actions[i](b, 0), batch.actions[i](b, 1)});
      sq(b, 0) = s.x();
      sq(b, 1) = s.y();
    }
    act_sq[i] = std::move(sq);
  }

  // Bootstrapped targets on the frozen target networks.
  std::vector<Mat> next_actions(n);
  std::vector<Mat> next_log_prob(n);
  for (int j = 0; j < n; ++j) {
    const Mat noise = normal_mat(rng_, B, 2);
    auto s = actors_[j].sample_numeric(batch.next_obs[j], noise);
    next_actions[j] = std::move(s.action);
    next_log_prob[j] = std::move(s.log_prob);
  }
  std::vector<Mat> targets(n);
  const auto target_ctx = critic_->embed_numeric(batch.next_obs, next_actions, true);
  for (int i = 0; i < n; ++i) {
    const auto eval = critic_->q_from_numeric_context(target_ctx, i);
    const double alpha = std::exp(log_alpha_[i]);
    Mat y(B, 1);
    for (int b = 0; b < B; ++b) {
      const double qmin = std::min(eval.q1(b, 0), eval.q2(b, 0));
      y(b, 0) = batch.rewards[i][b] +
                gamma * (1.0 - batch.done[b]) * (qmin - alpha * next_log_prob[i](b, 0));
    }
    targets[i] = std::move(y);
  }

  // Critic update.
  for (Parameter* p : critic_->parameters()) p->zero_grad();
  {
    Tape tape;
    std::vector<Var> obs_v(n), act_v(n);
    for (int i = 0; i < n; ++i) {
      obs_v[i] = tape.input(batch.obs[i]);
      act_v[i] = tape.input(act_sq[i]);
    }
    auto ctx = critic_->embed(tape, obs_v, act_v);
    Var loss;
    for (int i = 0; i < n; ++i) {
      auto q = critic_->q_from_context(tape, ctx, i);
      Var y = tape.input(targets[i]);
      Var d1 = tape.sub(q.q1, y);
      Var d2 = tape.sub(q.q2, y);
      Var li = tape.add(tape.mean(tape.mul(d1, d1)), tape.mean(tape.mul(d2, d2)));
      loss = loss.valid() ? tape.add(loss, li) : li;
    }
    losses.critic_loss = tape.value(loss)(0, 0);
    tape.backward(loss);
  }
  critic_opt_.step(critic_->parameters());

  // Actor updates on one tape; each loss term only reaches its own actor.
  for (int i = 0; i < n; ++i) {
    for (Parameter* p : actors_[i].parameters()) p->zero_grad();
  }
  std::vector<double> mean_log_prob(n, 0.0);
  {
    Tape tape;
    std::vector<Var> obs_v(n), act_v(n);
    for (int i = 0; i < n; ++i) {
      obs_v[i] = tape.input(batch.obs[i]);
      act_v[i] = tape.input(act_sq[i]);
    }
    const auto base_ctx = critic_->embed(tape, obs_v, act_v);
    Var total;
    for (int i = 0; i < n; ++i) {
      const Mat noise = normal_mat(rng_, B, 2);
      auto sample = actors_[i].sample(tape, obs_v[i], noise);
      auto ctx = base_ctx;
      critic_->reembed_agent(tape, ctx, i, obs_v[i], sample.action);
      auto q = critic_->q_from_context(tape, ctx, i);
      Var qmin = tape.min2(q.q1, q.q2);
      const double alpha = std::exp(log_alpha_[i]);
      Var li = tape.mean(tape.sub(tape.scale(sample.log_prob, alpha), qmin));
      losses.actor_loss[i] = tape.value(li)(0, 0);
      mean_log_prob[i] = tape.value(sample.log_prob).mean();
      total = total.valid() ? tape.add(total, li) : li;
    }
    tape.backward(total);
  }
  for (int i = 0; i < n; ++i) actor_opt_[i].step(actors_[i].parameters());

  // Entropy temperature, one scalar adaptive-moment update per agent.
  ++alpha_steps_;
  const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(alpha_steps_));
  const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(alpha_steps_));
  for (int i = 0; i < n; ++i) {
    const double alpha = std::exp(log_alpha_[i]);
    const double grad = -alpha * (mean_log_prob[i] + setup_.train.target_entropy);
    alpha_m1_[i](0, 0) = 0.9 * alpha_m1_[i](0, 0) + 0.1 * grad;
    alpha_m2_[i](0, 0) = 0.999 * alpha_m2_[i](0, 0) + 0.001 * grad * grad;
    log_alpha_[i] -=
        setup_.train.lr * (alpha_m1_[i](0, 0) / bc1) / (std::sqrt(alpha_m2_[i](0, 0) / bc2) + 1e-8);
    losses.alpha[i] = std::exp(log_alpha_[i]);
    losses.entropy[i] = -mean_log_prob[i];
  }

  critic_->target_sync(setup_.train.tau);
  return losses;
}

std::vector<EpisodeMetrics> Trainer::run() {
  namespace fs = std::filesystem;
  std::unique_ptr<CsvWriter> csv;
  const bool writing = !setup_.out_dir.empty();
  if (writing) {
    fs::create_directories(setup_.out_dir);
    std::vector<std::string> columns = {"episode"};
    for (int i = 0; i < n_agents(); ++i) columns.push_back("return_" + std::to_string(i));
    for (const char* c : {"formation_error", "goals_reached", "collisions", "timeouts",
                          "mean_deviation_penalty", "wall_time"}) {
      columns.push_back(c);
    }
    csv = std::make_unique<CsvWriter>(setup_.out_dir + "/metrics.csv", columns);
  }

  std::vector<EpisodeMetrics> all;
  double sim_time = 0.0;
  const long episodes = setup_.train.episodes;

  auto write_checkpoint_if = [&](long ep_index, bool force) {
    if (!writing) return;
    const long every = setup_.train.checkpoint_every;
    const bool periodic = every > 0 && ep_index > 0 && ep_index % every == 0;
    if (periodic || force) {
      save_checkpoint(setup_.out_dir + "/checkpoint_ep" + std::to_string(ep_index) + ".ckpt");
    }
  };

  if (writing) save_checkpoint(setup_.out_dir + "/checkpoint_ep0.ckpt");

  for (long ep = 0; ep < episodes; ++ep) {
    try {
      begin_episode();
    } catch (const SpawnFailure& e) {
      std::cerr << "episode " << ep << " skipped: " << e.what() << "\n";
      ++episodes_done_;
      continue;
    }
    EpisodeStatus status;
    while (true) {
      status = step_env();
      if (total_env_steps_ >= setup_.train.warmup_steps &&
          total_env_steps_ % setup_.train.update_every == 0 &&
          buffer_->size() >= setup_.train.batch) {
        for (int u = 0; u < setup_.train.updates_per_round; ++u) {
          update(buffer_->sample(setup_.train.batch, rng_));
        }
      }
      if (status.terminal()) break;
    }

    EpisodeMetrics m;
    m.episode = ep;
    m.returns = ep_returns_;
    m.formation_error = ep_steps_ > 0 ? ep_formation_sum_ / ep_steps_ : 0.0;
    m.goals_reached = ep_goals_;
    m.collisions = status.state == EpisodeState::kCollision ? 1 : 0;
    m.timeouts =
        (status.state == EpisodeState::kTimeout || status.state == EpisodeState::kStuck) ? 1 : 0;
    m.mean_deviation_penalty =
        ep_steps_ > 0 ? ep_deviation_sum_ / (ep_steps_ * n_agents()) : 0.0;
    sim_time += ep_steps_ * setup_.sim.dt;
    m.sim_time = sim_time;
    all.push_back(m);

    if (csv) {
      csv->field(m.episode);
      for (double r : m.returns) csv->field(r);
      csv->field(m.formation_error);
      csv->field(m.goals_reached);
      csv->field(m.collisions);
      csv->field(m.timeouts);
      csv->field(m.mean_deviation_penalty);
      csv->field(m.sim_time);
      csv->end_row();
    }
    ++episodes_done_;
    write_checkpoint_if(episodes_done_, false);
    if (setup_.on_episode) setup_.on_episode(m);
  }
  if (writing) {
    save_checkpoint(setup_.out_dir + "/checkpoint_final.ckpt");
    csv->flush();
  }
  return all;
}

std::vector<std::pair<std::string, Parameter*>> Trainer::named_parameters() {
  std::vector<std::pair<std::string, Parameter*>> named;
  for (int i = 0; i < n_agents(); ++i) {
    actors_[i].collect_named("actor" + std::to_string(i), named);
  }
  critic_->collect_named("critic", named, /*include_targets=*/true);
  return named;
}

void Trainer::save_checkpoint(const std::string& path) const {
  CheckpointWriter w;
  auto named = const_cast<Trainer*>(this)->named_parameters();
  for (const auto& [name, p] : named) {
    w.add(name, p->value);
    w.add(name + ".m1", p->moment1);
    w.add(name + ".m2", p->moment2);
  }
  for (int i = 0; i < n_agents(); ++i) {
    const std::string tag = std::to_string(i);
    w.add_scalar("alpha/log_alpha" + tag, log_alpha_[i]);
    w.add("alpha/m1_" + tag, alpha_m1_[i]);
    w.add("alpha/m2_" + tag, alpha_m2_[i]);
    w.add_scalar("opt/actor" + tag + "_steps", static_cast<double>(actor_opt_[i].step_count()));
  }
  w.add_scalar("opt/critic_steps", static_cast<double>(critic_opt_.step_count()));
  w.add_scalar("opt/alpha_steps", static_cast<double>(alpha_steps_));
  w.add_scalar("meta/version", 1.0);
  w.add_scalar("meta/n_agents", static_cast<double>(n_agents()));
  w.add_scalar("meta/obs_dim", kObservationDim);
  w.add_scalar("meta/act_dim", 2);
  w.add_scalar("meta/episodes_done", static_cast<double>(episodes_done_));
  w.add_scalar("meta/env_steps", static_cast<double>(total_env_steps_));
  w.write(path);
}

void Trainer::load_checkpoint(const std::string& path) {
  CheckpointReader r(path);
  const int n_ckpt = static_cast<int>(r.get_scalar("meta/n_agents"));
  if (static_cast<int>(r.get_scalar("meta/obs_dim")) != kObservationDim) {
    throw std::runtime_error("checkpoint observation width mismatch");
  }
  if (n_ckpt != n_agents()) {
    throw std::runtime_error("checkpoint was trained with " + std::to_string(n_ckpt) +
                             " agents, trainer has " + std::to_string(n_agents()));
  }
  auto named = named_parameters();
  for (auto& [name, p] : named) {
    const Mat& v = r.get(name);
    if (v.rows() != p->value.rows() || v.cols() != p->value.cols()) {
      throw std::runtime_error("checkpoint array '" + name + "' has the wrong shape");
    }
    p->value = v;
    p->moment1 = r.get(name + ".m1");
    p->moment2 = r.get(name + ".m2");
  }
  for (int i = 0; i < n_agents(); ++i) {
    const std::string tag = std::to_string(i);
    log_alpha_[i] = r.get_scalar("alpha/log_alpha" + tag);
    alpha_m1_[i] = r.get("alpha/m1_" + tag);
    alpha_m2_[i] = r.get("alpha/m2_" + tag);
    actor_opt_[i].set_step_count(static_cast<long>(r.get_scalar("opt/actor" + tag + "_steps")));
  }
  critic_opt_.set_step_count(static_cast<long>(r.get_scalar("opt/critic_steps")));
  alpha_steps_ = static_cast<long>(r.get_scalar("opt/alpha_steps"));
  resumed_ = true;
}

}  // namespace formnav
