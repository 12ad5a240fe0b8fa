#pragma once

#include <cstdint>
#include <vector>

#include "formnav/rng.hpp"
#include "formnav/tensor.hpp"

namespace formnav {

// Joint-step replay: one row stores every agent's transition for a single
// world step, which keeps the agents aligned for the centralized critics.
// Per-agent views are just column ranges of a row. Rows are float32; training
// math converts back to float64 on sampling.
class ReplayBuffer {
 public:
  ReplayBuffer(int n_agents, int obs_dim, int act_dim, long capacity);

  void push(const std::vector<Eigen::VectorXd>& obs,
            const std::vector<Eigen::Vector2d>& actions, const std::vector<double>& rewards,
            const std::vector<Eigen::VectorXd>& next_obs, bool done);

  long size() const { return size_; }
  long capacity() const { return capacity_; }
  int n_agents() const { return n_agents_; }

  struct Batch {
    std::vector<Mat> obs;       // per agent, B x obs_dim
    std::vector<Mat> actions;   // per agent, B x act_dim (environment units)
    std::vector<Eigen::VectorXd> rewards;  // per agent, B
    std::vector<Mat> next_obs;  // per agent, B x obs_dim
    Eigen::VectorXd done;       // B (shared across agents)
    int size() const { return static_cast<int>(done.size()); }
  };

  Batch sample(int batch_size, Rng& rng) const;
  Batch gather(const std::vector<long>& indices) const;

  // Raw row access for tests.
  Eigen::Vector2d stored_action(long row, int agent) const;

 private:
  long row_floats() const;

  int n_agents_, obs_dim_, act_dim_;
  long capacity_;
  long size_ = 0;
  long next_ = 0;
  std::vector<float> data_;
};

}  // namespace formnav
