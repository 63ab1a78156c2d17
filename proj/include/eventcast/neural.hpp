#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eventcast/core.hpp"

namespace eventcast::neural {

enum class Architecture { Ffnn1, Ffnn2, Recurrent };
enum class Cell { Gated, Simple };

struct NetSpec {
  Architecture arch = Architecture::Ffnn1;
  std::size_t inputs = 1;         // m, features per day
  std::size_t steps = 1;          // Δt, days per instance
  std::size_t hidden = 64;        // k (dense) or state size (recurrent)
  std::size_t feature_width = 8;  // per-feature hidden width, Ffnn2 only
  Cell cell = Cell::Gated;

  std::size_t input_length() const { return inputs * steps; }
  void validate() const;
  std::string describe() const;
};

/// Weights and biases, in a fixed order per architecture:
///   Ffnn1:     W0 (k x Δt·m), b0 (k), W (1 x k), b (1)
///   Ffnn2:     Wf (m·h x Δt), bf (m·h), W0 (k x m·h), b0 (k), W (1 x k), b (1)
///              rows j·h .. j·h+h-1 of Wf/bf belong to feature j
///   Recurrent: Wx (G·H x m), Wh (G·H x H), bh (G·H), W (1 x H), b (1)
///              G = 4 (gates i, f, g, o) for the gated cell, 1 for the simple one
/// Biases are stored as column matrices.
struct Params {
  std::vector<Eigen::MatrixXd> tensors;
  std::vector<std::string> names;

  std::size_t size() const;
  Params zeros_like() const;
  /// Flatten / unflatten all entries in tensor order, column-major within a tensor.
  std::vector<double> flat() const;
  void set_flat(std::span<const double> values);
  friend bool operator==(const Params& a, const Params& b);
};

/// Parameter shapes for the spec, zero-filled.
Params make_params(const NetSpec& spec);
/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per weight matrix; biases zero.
Params init_params(const NetSpec& spec, std::uint64_t seed);
/// Throws std::invalid_argument when shapes do not match the spec.
void check_params(const NetSpec& spec, const Params& params);

double sigmoid(double z);

/// Instance layout for every architecture: Δt rows of m features, oldest day
/// first, flattened row-major (x[d·m + j]).
double forward_ffnn1(std::span<const double> x, const NetSpec& spec, const Params& params);
double forward_ffnn2(std::span<const double> x, const NetSpec& spec, const Params& params);
double forward_recurrent(std::span<const double> x, const NetSpec& spec, const Params& params);
double forward(std::span<const double> x, const NetSpec& spec, const Params& params);

/// Final recurrent state h_Δt (exposed for gate-algebra checks).
Eigen::VectorXd recurrent_state(std::span<const double> x, const NetSpec& spec,
                                const Params& params);

inline constexpr double kProbClamp = 1e-12;

/// -(1/n) sum[(1-alpha) y log2 p + alpha (1-y) log2(1-p)], p clamped to
/// [1e-12, 1 - 1e-12].
double weighted_bce(std::span<const int> y, std::span<const double> p, double alpha);
/// Unweighted base-2 binary cross-entropy.
double bce(std::span<const int> y, std::span<const double> p);
/// Positive-class fraction of the labels.
double positive_fraction(std::span<const int> y);

struct LossConfig {
  double alpha = 0.5;
};

/// Weighted loss over a batch (rows of X listed in `rows`) and its exact
/// gradient with respect to every parameter.
struct LossAndGrad {
  double loss = 0.0;
  Params grad;
};

LossAndGrad backward(const Matrix& X, std::span<const int> y, std::span<const std::size_t> rows,
                     const NetSpec& spec, const Params& params, const LossConfig& loss);
double batch_loss(const Matrix& X, std::span<const int> y, std::span<const std::size_t> rows,
                  const NetSpec& spec, const Params& params, const LossConfig& loss);

struct OptimizerConfig {
  double learning_rate = 1e-4;
  double decay = 1e-6;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  double momentum = 0.9;
};

struct OptimizerState {
  Params velocity;
  std::size_t iteration = 0;
};

/// lr / (1 + decay · iteration).
double effective_rate(const OptimizerConfig& config, std::size_t iteration);
/// Point at which the Nesterov gradient is evaluated: θ + μ v.
Params lookahead(const Params& params, const OptimizerState& state, const OptimizerConfig& config);
/// v <- μ v - lr_t g, θ <- θ + v, where g was evaluated at lookahead().
void sgd_step(Params& params, const Params& grad_at_lookahead, OptimizerState& state,
              const OptimizerConfig& config);

struct TrainedNet {
  NetSpec spec;
  Params params;
  std::uint64_t seed = 0;
  std::vector<double> epoch_loss;  // weighted loss on the training rows after each epoch

  double predict(std::span<const double> x) const { return forward(x, spec, params); }
  std::vector<double> predict(const Matrix& X) const;
};

/// Mini-batch Nesterov SGD. Initialization and per-epoch shuffles come from
/// streams derived from `seed`. Throws std::runtime_error if the loss stops
/// being finite.
TrainedNet train(const Matrix& X, std::span<const int> y, const NetSpec& spec,
                 const LossConfig& loss, const OptimizerConfig& optimizer, std::uint64_t seed);

std::string save_checkpoint(const TrainedNet& net);
TrainedNet load_checkpoint(const std::string& text);
std::string epoch_loss_csv(const TrainedNet& net);

}  // namespace eventcast::neural
