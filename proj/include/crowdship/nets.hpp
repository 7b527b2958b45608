#pragma once
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdship/rng.hpp"

#include "json.hpp"

namespace crowdship {

// Scalar-output MLP over (location embedding, continuous features):
// concat(embed[loc], feats) -> hidden_layers x [Linear + ELU] -> Linear -> R.
struct MlpShape {
  int num_locations = 0;
  int embed_dim = 10;
  int num_features = 0;
  int hidden = 300;
  int hidden_layers = 3;

  int input_dim() const { return embed_dim + num_features; }
  long param_count() const;
  bool operator==(const MlpShape&) const = default;
  void validate() const;
};

class Mlp {
 public:
  Mlp() = default;

  // Embeddings ~ N(0, 0.1); linear layers uniform +-1/sqrt(fan_in).
  static Mlp initialized(const MlpShape& shape, std::uint64_t seed);
  static Mlp from_params(const MlpShape& shape, Eigen::VectorXd params);

  // Batched forward. features is num_features x batch; returns batch outputs.
  Eigen::VectorXd forward(const std::vector<int>& locations,
                          const Eigen::MatrixXd& features) const;

  double forward_one(int location, const std::vector<double>& feats) const;

  // Forward that records activations for a later backward pass.
  struct Tape {
    std::vector<int> locations;
    Eigen::MatrixXd input;               // input_dim x batch
    std::vector<Eigen::MatrixXd> hidden; // post-ELU, hidden x batch each
    Eigen::VectorXd output;
  };
  Eigen::VectorXd forward(const std::vector<int>& locations,
                          const Eigen::MatrixXd& features, Tape& tape) const;

  // Accumulates d(sum_b upstream[b] * output[b])/dtheta into grad (same
  // layout as params). grad must already be sized; throws on size mismatch.
  void backward(const Tape& tape, const Eigen::VectorXd& upstream,
                Eigen::VectorXd& grad) const;

  const MlpShape& shape() const { return shape_; }
  const Eigen::VectorXd& params() const { return params_; }
  Eigen::VectorXd& params() { return params_; }

 private:
  MlpShape shape_;
  Eigen::VectorXd params_;

  // Segment offsets into the flat parameter vector.
  long embed_off() const { return 0; }
  long layer_w_off(int l) const;
  long layer_b_off(int l) const;
  long head_w_off() const;
  long head_b_off() const;
  friend struct MlpLayout;
};

struct AdamOptimizer {
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  Eigen::VectorXd m, v;
  long t = 0;

  // Throws std::runtime_error if grad contains NaN/Inf.
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
};

// Online/target pair with Polyak averaging.
struct TargetPair {
  Mlp online;
  Mlp target;
  double tau = 0.001;

  static TargetPair make(const MlpShape& shape, std::uint64_t seed, double tau);
  void soft_update();  // target <- tau*online + (1-tau)*target
};

// O(log n) prefix-sum tree for proportional sampling.
class SumTree {
 public:
  explicit SumTree(std::size_t capacity);
  void set(std::size_t i, double value);
  double get(std::size_t i) const;
  double total() const;
  // Largest index with prefix-sum <= mass; mass in [0, total).
  std::size_t find_prefix(double mass) const;
  std::size_t capacity() const { return cap_; }

 private:
  std::size_t cap_ = 0, base_ = 1;
  std::vector<double> tree_;
};

// Prioritized replay with proportional sampling (priority^alpha), FIFO
// eviction, and importance weights (N*P)^-beta normalized by the batch max.
template <class T>
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, double alpha)
      : cap_(capacity), alpha_(alpha), tree_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
    if (alpha < 0.0) throw std::invalid_argument("replay alpha must be >= 0");
    items_.reserve(capacity);
  }

  // New experiences enter at the current max priority so each is seen at
  // least once before its TD error takes over.
  void push(T item) {
    std::size_t slot = next_;
    if (items_.size() < cap_) {
      items_.push_back(std::move(item));
    } else {
      items_[slot] = std::move(item);
    }
    set_priority(slot, max_priority_);
    next_ = (next_ + 1) % cap_;
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return cap_; }
  const T& operator[](std::size_t i) const { return items_[i]; }

  struct Drawn {
    std::vector<std::size_t> indices;
    std::vector<double> weights;  // normalized to max 1 within the batch
  };

  Drawn sample(std::size_t n, double beta, RandomStream& rng) const {
    if (items_.empty()) throw std::runtime_error("replay buffer is empty");
    Drawn d;
    d.indices.resize(n);
    d.weights.resize(n);
    const double total = tree_.total();
    for (std::size_t k = 0; k < n; ++k) {
      double mass = rng.uniform() * total;
      std::size_t i = std::min(tree_.find_prefix(mass), items_.size() - 1);
      d.indices[k] = i;
      double p = tree_.get(i) / total;
      d.weights[k] = std::pow(static_cast<double>(items_.size()) * p, -beta);
    }
    double wmax = *std::max_element(d.weights.begin(), d.weights.end());
    for (double& w : d.weights) w /= wmax;
    return d;
  }

  void set_priority(std::size_t i, double priority) {
    if (priority <= 0.0 || !std::isfinite(priority))
      throw std::invalid_argument("replay priority must be positive and finite");
    max_priority_ = std::max(max_priority_, priority);
    tree_.set(i, std::pow(priority, alpha_));
  }

 private:
  std::size_t cap_;
  double alpha_;
  std::vector<T> items_;
  SumTree tree_;
  std::size_t next_ = 0;
  double max_priority_ = 1.0;
};

// Binary checkpoint: magic, JSON header (shape/tau/meta), then the online and
// target parameter vectors as little-endian float64.
void save_checkpoint(const std::string& path, const TargetPair& pair,
                     const nlohmann::ordered_json& meta);
TargetPair load_checkpoint(const std::string& path,
                           nlohmann::json* meta_out = nullptr);

}  // namespace crowdship
