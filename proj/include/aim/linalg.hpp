#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "aim/errors.hpp"

namespace aim {

using Vec = std::vector<double>;

// Dense row-major matrix. Deliberately minimal: the model is small enough
// that plain loops with a fixed summation order beat pulling in a BLAS,
// and fixed order is what makes runs bit-reproducible.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  void fill(double v) { data_.assign(data_.size(), v); }

  bool same_shape(const Mat& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vec data_;
};

// y = A x
Vec matvec(const Mat& a, const Vec& x);
// y = A^T x
Vec matvec_t(const Mat& a, const Vec& x);
// A += alpha * u v^T
void add_outer(Mat& a, double alpha, const Vec& u, const Vec& v);

double dot(const Vec& a, const Vec& b);
void axpy(Vec& y, double alpha, const Vec& x);  // y += alpha x

bool all_finite(const Vec& v);
bool all_finite(const Mat& m);

void require_size(const Vec& v, std::size_t n, const std::string& what);

}  // namespace aim
