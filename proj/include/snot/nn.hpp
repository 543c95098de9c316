#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "snot/linalg.hpp"
#include "snot/rng.hpp"

namespace snot {

// y = W2 relu(W1 x + b1) + b2, applied to each row of a batch.
struct MlpParams {
  Matrix W1;  // h x d_in
  Vector b1;  // h
  Matrix W2;  // d_out x h
  Vector b2;  // d_out
  // Bumped on every in-place update so caches from older parameters are detected.
  std::uint64_t revision = 0;

  static MlpParams zeros(Index d_in, Index hidden, Index d_out);
  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases of each layer.
  static MlpParams init(Index d_in, Index hidden, Index d_out, Rng& rng);

  Index input_dim() const { return W1.cols(); }
  Index hidden_dim() const { return W1.rows(); }
  Index output_dim() const { return W2.rows(); }

  bool all_finite() const;
  void validate() const;
  // Fills every tensor with zeros, keeping shapes.
  MlpParams zero_like() const;
  // this += s * other
  void add_scaled(const MlpParams& other, double s);
  // Flat view helpers for gradient checks: number of scalars and access by flat index.
  Index parameter_count() const;
  double& at(Index k);
  double at(Index k) const;
};

struct ForwardCache {
  Matrix x;
  Matrix pre;     // B x h pre-activations
  Matrix hidden;  // B x h after ReLU
  std::uint64_t revision = 0;
  const MlpParams* owner = nullptr;
};

Matrix forward(const MlpParams& p, const Matrix& x, ForwardCache* cache = nullptr);

// Gradient of <grad_out, y> with respect to all parameters. When dx is non-null it
// receives the gradient with respect to the input batch.
MlpParams backward(const MlpParams& p, const ForwardCache& cache, const Matrix& grad_out,
                   Matrix* dx = nullptr);

// Input Jacobian at a single point, d_out x d_in.
Matrix jacobian_map(const MlpParams& p, const Vector& x);

// Scalar networks only: R = mean_b |grad_y V(y_b)|^2, with its parameter gradient.
double r1_penalty(const MlpParams& p, const Matrix& y, MlpParams* grad = nullptr);

struct AdamState {
  MlpParams m;
  MlpParams v;
  std::int64_t t = 0;
  double beta1 = 0.0;
  double beta2 = 0.9;
  double learning_rate = 1e-4;
  double eps_div = 1e-8;

  static AdamState for_params(const MlpParams& p, double learning_rate, double beta1 = 0.0,
                              double beta2 = 0.9, double eps_div = 1e-8);
};

// One bias-corrected Adam descent step on p. Throws TrainingFault on non-finite gradients.
void adam_step(MlpParams& p, const MlpParams& grad, AdamState& state);

// Text checkpoint: "snot-mlp v1", then "d_in hidden d_out", then W1, b1, W2, b2 one row per line.
void save_checkpoint(std::ostream& os, const MlpParams& p);
void save_checkpoint(const std::filesystem::path& path, const MlpParams& p);
MlpParams load_checkpoint(std::istream& is);
MlpParams load_checkpoint(const std::filesystem::path& path);

namespace testing {
// Mutation hook for the self-test harness: when set, backward returns negated gradients.
void set_backward_sign_fault(bool enabled);
bool backward_sign_fault();
}  // namespace testing

}  // namespace snot
