#include "formnav/replay.hpp"

#include <stdexcept>

namespace formnav {

ReplayBuffer::ReplayBuffer(int n_agents, int obs_dim, int act_dim, long capacity)
    : n_agents_(n_agents), obs_dim_(obs_dim), act_dim_(act_dim), capacity_(capacity) {
  if (capacity <= 0) throw std::invalid_argument("replay capacity must be positive");
  data_.resize(static_cast<std::size_t>(capacity) * row_floats());
}

long ReplayBuffer::row_floats() const {
  // Per agent: obs, next_obs, action, reward; plus the shared done flag.
  return static_cast<long>(n_agents_) * (2 * obs_dim_ + act_dim_ + 1) + 1;
}

void ReplayBuffer::push(const std::vector<Eigen::VectorXd>& obs,
                        const std::vector<Eigen::Vector2d>& actions,
                        const std::vector<double>& rewards,
                        const std::vector<Eigen::VectorXd>& next_obs, bool done) {
  if (static_cast<int>(obs.size()) != n_agents_ || static_cast<int>(actions.size()) != n_agents_ ||
      static_cast<int>(rewards.size()) != n_agents_ ||
      static_cast<int>(next_obs.size()) != n_agents_) {
    throw std::invalid_argument("replay push: agent count mismatch");
  }
  float* row = data_.data() + static_cast<std::size_t>(next_) * row_floats();
  std::size_t k = 0;
  for (int i = 0; i < n_agents_; ++i) {
    for (int d = 0; d < obs_dim_; ++d) row[k++] = static_cast<float>(obs[i][d]);
    for (int d = 0; d < obs_dim_; ++d) row[k++] = static_cast<float>(next_obs[i][d]);
    for (int d = 0; d < act_dim_; ++d) row[k++] = static_cast<float>(actions[i][d]);
    row[k++] = static_cast<float>(rewards[i]);
  }
  row[k++] = done ? 1.0f : 0.0f;
  next_ = (next_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

ReplayBuffer::Batch ReplayBuffer::gather(const std::vector<long>& indices) const {
  const int B = static_cast<int>(indices.size());
  Batch batch;
  batch.obs.assign(n_agents_, Mat(B, obs_dim_));
  batch.next_obs.assign(n_agents_, Mat(B, obs_dim_));
  batch.actions.assign(n_agents_, Mat(B, act_dim_));
  batch.rewards.assign(n_agents_, Eigen::VectorXd(B));
  batch.done.resize(B);
  for (int b = 0; b < B; ++b) {
    if (indices[b] < 0 || indices[b] >= size_) {
      throw std::out_of_range("replay gather: index out of range");
    }
    const float* row = data_.data() + static_cast<std::size_t>(indices[b]) * row_floats();
    std::size_t k = 0;
    for (int i = 0; i < n_agents_; ++i) {
      for (int d = 0; d < obs_dim_; ++d) batch.obs[i](b, d) = row[k++];
      for (int d = 0; d < obs_dim_; ++d) batch.next_obs[i](b, d) = row[k++];
      for (int d = 0; d < act_dim_; ++d) batch.actions[i](b, d) = row[k++];
      batch.rewards[i][b] = row[k++];
    }
    batch.done[b] = row[k++];
  }
  return batch;
}

ReplayBuffer::Batch ReplayBuffer::sample(int batch_size, Rng& rng) const {
  if (size_ == 0) throw std::logic_error("replay sample: buffer is empty");
  std::vector<long> indices(batch_size);
  for (int b = 0; b < batch_size; ++b) {
    indices[b] = static_cast<long>(rng.uniform_index(static_cast<std::uint64_t>(size_)));
  }
  return gather(indices);
}

Eigen::Vector2d ReplayBuffer::stored_action(long row_idx, int agent) const {
  if (row_idx < 0 || row_idx >= size_) throw std::out_of_range("replay row out of range");
  const float* row = data_.data() + static_cast<std::size_t>(row_idx) * row_floats();
  const std::size_t base =
      static_cast<std::size_t>(agent) * (2 * obs_dim_ + act_dim_ + 1) + 2 * obs_dim_;
  return {row[base], row[base + 1]};
}

}  // namespace formnav
