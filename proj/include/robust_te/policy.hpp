#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>

namespace robust_te {

// c x N x N demand tensor; element (ch, i, j) lives at ch*N*N + i*N + j.
struct AgentState {
  std::size_t channels = 0;
  std::size_t grid = 0;
  Eigen::VectorXd values;
};

// Layer sizes of the path-scoring network:
// conv 3x3 (same padding, stride 1) -> LeakyReLU -> dense -> LeakyReLU -> linear -> softmax.
struct PolicyShape {
  std::size_t channels = 2;   // c
  std::size_t grid = 0;       // N, node count
  std::size_t filters = 128;
  std::size_t hidden = 128;
  std::size_t outputs = 0;    // number of candidate paths

  std::size_t parameter_count() const;
  bool operator==(const PolicyShape&) const = default;
};

struct OptimizerSettings {
  double lr_initial = 1e-3;
  double lr_decay = 0.96;
  std::size_t lr_decay_every = 500;
  double lr_min = 1e-4;
  double entropy_beta = 0.1;
  bool operator==(const OptimizerSettings&) const = default;
};

// max(lr_min, lr_initial * lr_decay^floor(step / lr_decay_every))
double lr_schedule(std::size_t step, const OptimizerSettings& settings = {});

inline constexpr double kLeakySlope = 0.01;
inline constexpr std::size_t kKernel = 3;
inline constexpr double kInitRange = 0.05;

class PolicyModel {
 public:
  PolicyModel() = default;
  // Weights uniform in [-kInitRange, kInitRange], seeded.
  PolicyModel(const PolicyShape& shape, std::uint64_t seed, OptimizerSettings settings = {});

  const PolicyShape& shape() const { return shape_; }
  const OptimizerSettings& settings() const { return settings_; }
  void set_settings(const OptimizerSettings& s) { settings_ = s; }
  std::size_t step() const { return step_; }
  void set_step(std::size_t s) { step_ = s; }

  const Eigen::VectorXd& parameters() const { return params_; }
  Eigen::VectorXd& parameters() { return params_; }

  // Intermediate activations kept for backpropagation.
  struct Cache {
    Eigen::MatrixXd patches;   // (channels*9) x N^2
    Eigen::MatrixXd conv_pre;  // filters x N^2
    Eigen::VectorXd flat;      // activated conv output, column-major
    Eigen::VectorXd hidden_pre;
    Eigen::VectorXd hidden;
    Eigen::VectorXd logits;
  };

  Eigen::VectorXd logits(const AgentState& state, Cache* cache = nullptr) const;
  Eigen::VectorXd probabilities(const AgentState& state) const;

  // Gradient of a scalar function of the logits with respect to every
  // parameter, given its gradient with respect to the logits.
  Eigen::VectorXd backward(const Cache& cache, const Eigen::VectorXd& grad_logits) const;

 private:
  void check_state(const AgentState& state) const;

  PolicyShape shape_;
  OptimizerSettings settings_;
  Eigen::VectorXd params_;
  std::size_t step_ = 0;
};

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

// Text checkpoint; parameters are written as hexadecimal floats so a
// save/load round trip is bit-exact.
void save_model(const PolicyModel& model, std::ostream& out);
PolicyModel load_model(std::istream& in);
void save_model_file(const PolicyModel& model, const std::string& path);
PolicyModel load_model_file(const std::string& path);

}  // namespace robust_te
