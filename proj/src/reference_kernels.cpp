// Straightforward serial loops, kept as the oracle for the optimized kernels
// and as the baseline in bench_kernels.

#include <cmath>

#include "tomnet/gridworld.hpp"
#include "tomnet/kernels.hpp"

namespace tomnet::nn::reference {

namespace {

Eigen::Index cell_row(int n, int r, int c) {
  return static_cast<Eigen::Index>(n) * kNumCells + r * kGridSize + c;
}

}  // namespace

Matrix im2col(const Matrix& x, int batch, int k) {
  const int c = static_cast<int>(x.cols());
  const int h = k / 2;
  Matrix col = Matrix::Zero(static_cast<Eigen::Index>(batch) * kNumCells,
                            static_cast<Eigen::Index>(k) * k * c);
  for (int n = 0; n < batch; ++n)
    for (int r = 0; r < kGridSize; ++r)
      for (int cc = 0; cc < kGridSize; ++cc)
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx)
            for (int ch = 0; ch < c; ++ch) {
              const int sr = r + ky - h, sc = cc + kx - h;
              if (sr < 0 || sr >= kGridSize || sc < 0 || sc >= kGridSize)
                continue;
              col(cell_row(n, r, cc), (ky * k + kx) * c + ch) =
                  x(cell_row(n, sr, sc), ch);
            }
  return col;
}

Matrix col2im(const Matrix& col, int batch, int k, int channels) {
  const int h = k / 2;
  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(batch) * kNumCells,
                          channels);
  for (int n = 0; n < batch; ++n)
    for (int r = 0; r < kGridSize; ++r)
      for (int cc = 0; cc < kGridSize; ++cc)
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx)
            for (int ch = 0; ch < channels; ++ch) {
              const int sr = r + ky - h, sc = cc + kx - h;
              if (sr < 0 || sr >= kGridSize || sc < 0 || sc >= kGridSize)
                continue;
              x(cell_row(n, sr, sc), ch) +=
                  col(cell_row(n, r, cc), (ky * k + kx) * channels + ch);
            }
  return x;
}

// Direct convolution; `col` is still produced so the backward signature
// matches the optimized path.
void conv_forward(const Matrix& x, int batch, int k, ConstMatrixMap w,
                  const double* bias, Matrix& col, Matrix& y) {
  const int cin = static_cast<int>(x.cols());
  const int cout = static_cast<int>(w.cols());
  const int h = k / 2;
  col = reference::im2col(x, batch, k);
  y = Matrix::Zero(x.rows(), cout);
  for (int n = 0; n < batch; ++n)
    for (int r = 0; r < kGridSize; ++r)
      for (int cc = 0; cc < kGridSize; ++cc)
        for (int o = 0; o < cout; ++o) {
          double acc = bias != nullptr ? bias[o] : 0.0;
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const int sr = r + ky - h, sc = cc + kx - h;
              if (sr < 0 || sr >= kGridSize || sc < 0 || sc >= kGridSize)
                continue;
              for (int ch = 0; ch < cin; ++ch)
                acc += x(cell_row(n, sr, sc), ch) *
                       w((ky * k + kx) * cin + ch, o);
            }
          y(cell_row(n, r, cc), o) = acc;
        }
}

void conv_backward(const Matrix& dy, const Matrix& col, int batch, int k,
                   ConstMatrixMap w, MatrixMap dw, double* dbias, Matrix* dx) {
  const Eigen::Index rows = dy.rows();
  for (Eigen::Index p = 0; p < col.cols(); ++p)
    for (Eigen::Index o = 0; o < dy.cols(); ++o) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < rows; ++i) acc += col(i, p) * dy(i, o);
      dw(p, o) += acc;
    }
  if (dbias != nullptr) {
    for (Eigen::Index o = 0; o < dy.cols(); ++o) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < rows; ++i) acc += dy(i, o);
      dbias[o] += acc;
    }
  }
  if (dx != nullptr) {
    Matrix dcol = Matrix::Zero(rows, w.rows());
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index p = 0; p < w.rows(); ++p) {
        double acc = 0.0;
        for (Eigen::Index o = 0; o < w.cols(); ++o) acc += dy(i, o) * w(p, o);
        dcol(i, p) = acc;
      }
    const int cin = static_cast<int>(w.rows()) / (k * k);
    *dx = k == 1 ? dcol : reference::col2im(dcol, batch, k, cin);
  }
}

void bn_forward_train(const Matrix& x, const double* gamma, const double* beta,
                      double eps, Matrix& y, BnCache& cache, RowVector& mean,
                      RowVector& var) {
  const Eigen::Index rows = x.rows(), c = x.cols();
  mean = RowVector::Zero(c);
  var = RowVector::Zero(c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) mean[j] += x(i, j);
    mean[j] /= static_cast<double>(rows);
    for (Eigen::Index i = 0; i < rows; ++i)
      var[j] += (x(i, j) - mean[j]) * (x(i, j) - mean[j]);
    var[j] /= static_cast<double>(rows);
  }
  cache.inv_std = (var.array() + eps).sqrt().inverse().matrix();
  cache.xhat.resize(rows, c);
  y.resize(rows, c);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < c; ++j) {
      cache.xhat(i, j) = (x(i, j) - mean[j]) * cache.inv_std[j];
      y(i, j) = gamma[j] * cache.xhat(i, j) + beta[j];
    }
}

void bn_backward(const Matrix& dy, const BnCache& cache, const double* gamma,
                 double* dgamma, double* dbeta, Matrix& dx) {
  const Eigen::Index rows = dy.rows(), c = dy.cols();
  dx.resize(rows, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    double sdy = 0.0, sdyx = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      sdy += dy(i, j);
      sdyx += dy(i, j) * cache.xhat(i, j);
    }
    dbeta[j] += sdy;
    dgamma[j] += sdyx;
    for (Eigen::Index i = 0; i < rows; ++i) {
      dx(i, j) = gamma[j] * cache.inv_std[j] / static_cast<double>(rows) *
                 (static_cast<double>(rows) * dy(i, j) - sdy -
                  cache.xhat(i, j) * sdyx);
    }
  }
}

}  // namespace tomnet::nn::reference
