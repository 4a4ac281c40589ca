#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "aim/linalg.hpp"
#include "aim/rng.hpp"

namespace aim {

// Numerically stable logistic function.
double sigmoid(double x);

// Softmax with max-subtraction. Throws EmptyWindow on empty input.
Vec softmax(const Vec& scores);

// Gated recurrent unit, Cho et al. 2014 convention with the reset gate
// applied inside the candidate:
//   z = sigmoid(W_z x + U_z h_prev + b_z)
//   r = sigmoid(W_r x + U_r h_prev + b_r)
//   c = tanh(W_h x + U_h (r . h_prev) + b_h)
//   h = (1 - z) . h_prev + z . c
struct GruParams {
  Mat w_z, w_r, w_h;  // H x D
  Mat u_z, u_r, u_h;  // H x H
  Vec b_z, b_r, b_h;  // H

  GruParams() = default;
  GruParams(std::size_t hidden, std::size_t input);

  std::size_t hidden() const { return w_z.rows(); }
  std::size_t input() const { return w_z.cols(); }
  void fill(double v);
};

struct GruCellCache {
  Vec x, h_prev;
  Vec z, r, h_tilde;
  Vec h;
};

std::pair<Vec, GruCellCache> gru_cell_forward(const Vec& x, const Vec& h_prev,
                                              const GruParams& p);

// Accumulates parameter gradients of <dh, h> into `grads` and returns
// (dx, dh_prev). `grads` must be shaped like `p`.
std::pair<Vec, Vec> gru_cell_backward(const GruCellCache& cache, const GruParams& p,
                                      const Vec& dh, GruParams& grads);

// Named view over one parameter tensor; the unit all optimizer and
// gradient-check code iterates over.
struct TensorRef {
  std::string name;
  double* data = nullptr;
  std::size_t size = 0;
};

std::vector<TensorRef> gru_tensors(GruParams& p, const std::string& prefix = "gru.");

// Glorot-uniform fill: entries uniform in +-sqrt(6 / (fan_in + fan_out)),
// drawn row-major. fan_in = cols, fan_out = rows.
void glorot_init(Mat& m, Rng& rng);

struct AdamState {
  Vec m;  // first moment
  Vec v;  // second moment
  std::int64_t t = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update over the concatenation of `params`.
// `grads` must match element for element. Throws NonFiniteGradient before
// touching params or state if any gradient entry is not finite.
void adam_step(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads,
               AdamState& state, const AdamConfig& cfg);

// Central-difference gradient verification. Perturbs each coordinate of
// `params` in place, evaluates `loss_fn`, and compares against `analytic`.
// Returns max over coordinates of |diff| / max(|analytic|, |numeric|, 1e-8).
double finite_diff_check(const std::function<double()>& loss_fn,
                         const std::vector<TensorRef>& params, const Vec& analytic,
                         double eps);

Vec flatten(const std::vector<TensorRef>& tensors);
std::size_t total_size(const std::vector<TensorRef>& tensors);

}  // namespace aim
