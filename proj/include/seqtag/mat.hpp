#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <vector>

#include "seqtag/kernels.hpp"

namespace seqtag {

// Dense row-major matrix of doubles.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) {
    assert(i < rows && j < cols);
    return data[i * cols + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    assert(i < rows && j < cols);
    return data[i * cols + j];
  }
  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }

  std::size_t size() const { return data.size(); }
  void zero() { std::fill(data.begin(), data.end(), 0.0); }
};

// C += A*B
inline void matmul_nn(const Mat& a, const Mat& b, Mat& c) {
  assert(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols);
  kernels::active_ops().matmul_nn(a.data.data(), b.data.data(), c.data.data(),
                                  a.rows, a.cols, b.cols);
}

// C += A*B^T
inline void matmul_nt(const Mat& a, const Mat& b, Mat& c) {
  assert(a.cols == b.cols && c.rows == a.rows && c.cols == b.rows);
  kernels::active_ops().matmul_nt(a.data.data(), b.data.data(), c.data.data(),
                                  a.rows, a.cols, b.rows);
}

// C += A^T*B
inline void matmul_tn(const Mat& a, const Mat& b, Mat& c) {
  assert(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols);
  kernels::active_ops().matmul_tn(a.data.data(), b.data.data(), c.data.data(),
                                  a.cols, a.rows, b.cols);
}

}  // namespace seqtag
