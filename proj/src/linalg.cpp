#include "aim/linalg.hpp"

#include <cmath>

namespace aim {

Vec matvec(const Mat& a, const Vec& x) {
  require_size(x, a.cols(), "matvec input");
  Vec y(a.rows(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double acc = 0.0;
    const double* row = a.data() + r * a.cols();
    for (std::size_t c = 0; c < a.cols(); ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
  return y;
}

Vec matvec_t(const Mat& a, const Vec& x) {
  require_size(x, a.rows(), "matvec_t input");
  Vec y(a.cols(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* row = a.data() + r * a.cols();
    const double xr = x[r];
    for (std::size_t c = 0; c < a.cols(); ++c) y[c] += row[c] * xr;
  }
  return y;
}

void add_outer(Mat& a, double alpha, const Vec& u, const Vec& v) {
  require_size(u, a.rows(), "add_outer u");
  require_size(v, a.cols(), "add_outer v");
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double* row = a.data() + r * a.cols();
    const double ur = alpha * u[r];
    for (std::size_t c = 0; c < a.cols(); ++c) row[c] += ur * v[c];
  }
}

double dot(const Vec& a, const Vec& b) {
  require_size(b, a.size(), "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(Vec& y, double alpha, const Vec& x) {
  require_size(x, y.size(), "axpy");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

bool all_finite(const Vec& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool all_finite(const Mat& m) {
  const double* p = m.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!std::isfinite(p[i])) return false;
  }
  return true;
}

void require_size(const Vec& v, std::size_t n, const std::string& what) {
  if (v.size() != n) {
    throw ShapeError(what + ": expected length " + std::to_string(n) + ", got " +
                     std::to_string(v.size()));
  }
}

}  // namespace aim
