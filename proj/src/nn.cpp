#include "aim/nn.hpp"

#include <algorithm>
#include <cmath>

#include "aim/errors.hpp"

namespace aim {

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vec softmax(const Vec& scores) {
  if (scores.empty()) throw EmptyWindow();
  const double m = *std::max_element(scores.begin(), scores.end());
  Vec out(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - m);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

GruParams::GruParams(std::size_t hidden, std::size_t input)
    : w_z(hidden, input),
      w_r(hidden, input),
      w_h(hidden, input),
      u_z(hidden, hidden),
      u_r(hidden, hidden),
      u_h(hidden, hidden),
      b_z(hidden, 0.0),
      b_r(hidden, 0.0),
      b_h(hidden, 0.0) {}

void GruParams::fill(double v) {
  w_z.fill(v);
  w_r.fill(v);
  w_h.fill(v);
  u_z.fill(v);
  u_r.fill(v);
  u_h.fill(v);
  b_z.assign(b_z.size(), v);
  b_r.assign(b_r.size(), v);
  b_h.assign(b_h.size(), v);
}

std::pair<Vec, GruCellCache> gru_cell_forward(const Vec& x, const Vec& h_prev,
                                              const GruParams& p) {
  const std::size_t h_dim = p.hidden();
  require_size(x, p.input(), "gru x");
  require_size(h_prev, h_dim, "gru h_prev");

  GruCellCache cache;
  cache.x = x;
  cache.h_prev = h_prev;

  Vec z_pre = matvec(p.w_z, x);
  axpy(z_pre, 1.0, matvec(p.u_z, h_prev));
  axpy(z_pre, 1.0, p.b_z);
  Vec r_pre = matvec(p.w_r, x);
  axpy(r_pre, 1.0, matvec(p.u_r, h_prev));
  axpy(r_pre, 1.0, p.b_r);

  cache.z.resize(h_dim);
  cache.r.resize(h_dim);
  for (std::size_t i = 0; i < h_dim; ++i) {
    cache.z[i] = sigmoid(z_pre[i]);
    cache.r[i] = sigmoid(r_pre[i]);
  }

  Vec gated(h_dim);
  for (std::size_t i = 0; i < h_dim; ++i) gated[i] = cache.r[i] * h_prev[i];

  Vec c_pre = matvec(p.w_h, x);
  axpy(c_pre, 1.0, matvec(p.u_h, gated));
  axpy(c_pre, 1.0, p.b_h);

  cache.h_tilde.resize(h_dim);
  cache.h.resize(h_dim);
  for (std::size_t i = 0; i < h_dim; ++i) {
    cache.h_tilde[i] = std::tanh(c_pre[i]);
    cache.h[i] = (1.0 - cache.z[i]) * h_prev[i] + cache.z[i] * cache.h_tilde[i];
  }
  return {cache.h, cache};
}

std::pair<Vec, Vec> gru_cell_backward(const GruCellCache& cache, const GruParams& p,
                                      const Vec& dh, GruParams& grads) {
  const std::size_t h_dim = p.hidden();
  require_size(dh, h_dim, "gru dh");

  Vec dz(h_dim), dc(h_dim), dh_prev(h_dim);
  for (std::size_t i = 0; i < h_dim; ++i) {
    dz[i] = dh[i] * (cache.h_tilde[i] - cache.h_prev[i]);
    dc[i] = dh[i] * cache.z[i];
    dh_prev[i] = dh[i] * (1.0 - cache.z[i]);
  }

  Vec dc_pre(h_dim);
  for (std::size_t i = 0; i < h_dim; ++i) {
    dc_pre[i] = dc[i] * (1.0 - cache.h_tilde[i] * cache.h_tilde[i]);
  }

  Vec gated(h_dim);
  for (std::size_t i = 0; i < h_dim; ++i) gated[i] = cache.r[i] * cache.h_prev[i];
  add_outer(grads.w_h, 1.0, dc_pre, cache.x);
  add_outer(grads.u_h, 1.0, dc_pre, gated);
  axpy(grads.b_h, 1.0, dc_pre);

  const Vec d_gated = matvec_t(p.u_h, dc_pre);
  Vec dr(h_dim);
  for (std::size_t i = 0; i < h_dim; ++i) {
    dr[i] = d_gated[i] * cache.h_prev[i];
    dh_prev[i] += d_gated[i] * cache.r[i];
  }

  Vec dz_pre(h_dim), dr_pre(h_dim);
  for (std::size_t i = 0; i < h_dim; ++i) {
    dz_pre[i] = dz[i] * cache.z[i] * (1.0 - cache.z[i]);
    dr_pre[i] = dr[i] * cache.r[i] * (1.0 - cache.r[i]);
  }

  add_outer(grads.w_z, 1.0, dz_pre, cache.x);
  add_outer(grads.u_z, 1.0, dz_pre, cache.h_prev);
  axpy(grads.b_z, 1.0, dz_pre);
  add_outer(grads.w_r, 1.0, dr_pre, cache.x);
  add_outer(grads.u_r, 1.0, dr_pre, cache.h_prev);
  axpy(grads.b_r, 1.0, dr_pre);

  axpy(dh_prev, 1.0, matvec_t(p.u_z, dz_pre));
  axpy(dh_prev, 1.0, matvec_t(p.u_r, dr_pre));

  Vec dx = matvec_t(p.w_z, dz_pre);
  axpy(dx, 1.0, matvec_t(p.w_r, dr_pre));
  axpy(dx, 1.0, matvec_t(p.w_h, dc_pre));

  return {dx, dh_prev};
}

std::vector<TensorRef> gru_tensors(GruParams& p, const std::string& prefix) {
  return {
      {prefix + "w_z", p.w_z.data(), p.w_z.size()},
      {prefix + "w_r", p.w_r.data(), p.w_r.size()},
      {prefix + "w_h", p.w_h.data(), p.w_h.size()},
      {prefix + "u_z", p.u_z.data(), p.u_z.size()},
      {prefix + "u_r", p.u_r.data(), p.u_r.size()},
      {prefix + "u_h", p.u_h.data(), p.u_h.size()},
      {prefix + "b_z", p.b_z.data(), p.b_z.size()},
      {prefix + "b_r", p.b_r.data(), p.b_r.size()},
      {prefix + "b_h", p.b_h.data(), p.b_h.size()},
  };
}

void glorot_init(Mat& m, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  double* p = m.data();
  for (std::size_t i = 0; i < m.size(); ++i) p[i] = rng.uniform(-bound, bound);
}

void adam_step(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads,
               AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw ShapeError("adam: tensor list mismatch");
  const std::size_t n = total_size(params);
  if (n != total_size(grads)) throw ShapeError("adam: gradient size mismatch");
  if (state.m.size() != n) throw ShapeError("adam: state size mismatch");

  for (const TensorRef& g : grads) {
    for (std::size_t i = 0; i < g.size; ++i) {
      if (!std::isfinite(g.data[i])) throw NonFiniteGradient(g.name);
    }
  }

  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));

  std::size_t offset = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].size != grads[k].size) throw ShapeError("adam: tensor size mismatch at " + params[k].name);
    double* w = params[k].data;
    const double* g = grads[k].data;
    for (std::size_t i = 0; i < params[k].size; ++i) {
      double& m = state.m[offset + i];
      double& v = state.v[offset + i];
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g[i];
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m / bc1;
      const double v_hat = v / bc2;
      w[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
    offset += params[k].size;
  }
}

double finite_diff_check(const std::function<double()>& loss_fn,
                         const std::vector<TensorRef>& params, const Vec& analytic,
                         double eps) {
  if (analytic.size() != total_size(params)) {
    throw ShapeError("finite_diff_check: analytic gradient size mismatch");
  }
  double worst = 0.0;
  std::size_t offset = 0;
  for (const TensorRef& t : params) {
    for (std::size_t i = 0; i < t.size; ++i) {
      const double saved = t.data[i];
      t.data[i] = saved + eps;
      const double up = loss_fn();
      t.data[i] = saved - eps;
      const double down = loss_fn();
      t.data[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[offset + i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      worst = std::max(worst, std::fabs(a - numeric) / denom);
    }
    offset += t.size;
  }
  return worst;
}

Vec flatten(const std::vector<TensorRef>& tensors) {
  Vec out;
  out.reserve(total_size(tensors));
  for (const TensorRef& t : tensors) out.insert(out.end(), t.data, t.data + t.size);
  return out;
}

std::size_t total_size(const std::vector<TensorRef>& tensors) {
  std::size_t n = 0;
  for (const TensorRef& t : tensors) n += t.size;
  return n;
}

}  // namespace aim
