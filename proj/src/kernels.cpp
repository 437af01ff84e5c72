#include "tomnet/kernels.hpp"

#include <cmath>
#include <cstdint>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "tomnet/gridworld.hpp"

namespace tomnet::nn {

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
}

void add_column_sums(const Matrix& m, double* out) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double* row = m.data() + r * m.cols();
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[c] += row[c];
  }
}

Matrix im2col(const Matrix& x, int batch, int k) {
  const int c = static_cast<int>(x.cols());
  const int r = k / 2;
  Matrix col(static_cast<Eigen::Index>(batch) * kNumCells,
             static_cast<Eigen::Index>(k) * k * c);
#pragma omp parallel for schedule(static)
  for (int n = 0; n < batch; ++n) {
    for (int row = 0; row < kGridSize; ++row) {
      for (int cc = 0; cc < kGridSize; ++cc) {
        const Eigen::Index out = static_cast<Eigen::Index>(n) * kNumCells +
                                 row * kGridSize + cc;
        double* dst = col.row(out).data();
        for (int ky = 0; ky < k; ++ky) {
          const int sr = row + ky - r;
          for (int kx = 0; kx < k; ++kx) {
            const int sc = cc + kx - r;
            double* d = dst + (ky * k + kx) * c;
            if (sr < 0 || sr >= kGridSize || sc < 0 || sc >= kGridSize) {
              std::fill(d, d + c, 0.0);
              continue;
            }
            const double* src =
                x.row(static_cast<Eigen::Index>(n) * kNumCells +
                      sr * kGridSize + sc)
                    .data();
            std::copy(src, src + c, d);
          }
        }
      }
    }
  }
  return col;
}

Matrix col2im(const Matrix& col, int batch, int k, int channels) {
  const int r = k / 2;
  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(batch) * kNumCells,
                          channels);
  // Each sample writes only its own rows, so per-sample parallelism is
  // race-free and keeps a fixed accumulation order.
#pragma omp parallel for schedule(static)
  for (int n = 0; n < batch; ++n) {
    for (int row = 0; row < kGridSize; ++row) {
      for (int cc = 0; cc < kGridSize; ++cc) {
        const double* src =
            col.row(static_cast<Eigen::Index>(n) * kNumCells +
                    row * kGridSize + cc)
                .data();
        for (int ky = 0; ky < k; ++ky) {
          const int sr = row + ky - r;
          if (sr < 0 || sr >= kGridSize) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int sc = cc + kx - r;
            if (sc < 0 || sc >= kGridSize) continue;
            double* dst = x.row(static_cast<Eigen::Index>(n) * kNumCells +
                                sr * kGridSize + sc)
                              .data();
            const double* s = src + (ky * k + kx) * channels;
            for (int ch = 0; ch < channels; ++ch) dst[ch] += s[ch];
          }
        }
      }
    }
  }
  return x;
}

void conv_forward(const Matrix& x, int batch, int k, ConstMatrixMap w,
                  const double* bias, Matrix& col, Matrix& y) {
  if (k == 1) {
    col = x;
  } else {
    col = im2col(x, batch, k);
  }
  y.noalias() = col * w;
  if (bias != nullptr) {
    Eigen::Map<const RowVector> b(bias, w.cols());
    y.rowwise() += b;
  }
}

void conv_backward(const Matrix& dy, const Matrix& col, int batch, int k,
                   ConstMatrixMap w, MatrixMap dw, double* dbias, Matrix* dx) {
  dw.noalias() += col.transpose() * dy;
  if (dbias != nullptr) {
    add_column_sums(dy, dbias);
  }
  if (dx != nullptr) {
    Matrix dcol = dy * w.transpose();
    if (k == 1) {
      *dx = std::move(dcol);
    } else {
      *dx = col2im(dcol, batch, k, static_cast<int>(w.rows()) / (k * k));
    }
  }
}

void bn_forward_train(const Matrix& x, const double* gamma, const double* beta,
                      double eps, Matrix& y, BnCache& cache, RowVector& mean,
                      RowVector& var) {
  const double rows = static_cast<double>(x.rows());
  mean = x.colwise().sum() / rows;
  cache.xhat = x.rowwise() - mean;
  var = cache.xhat.array().square().matrix().colwise().sum() / rows;
  cache.inv_std = (var.array() + eps).rsqrt().matrix();
  cache.xhat.array().rowwise() *= cache.inv_std.array();
  Eigen::Map<const RowVector> g(gamma, x.cols()), b(beta, x.cols());
  y = cache.xhat;
  y.array().rowwise() *= g.array();
  y.rowwise() += b;
}

void bn_forward_infer(const Matrix& x, const double* gamma, const double* beta,
                      const double* running_mean, const double* running_var,
                      double eps, Matrix& y) {
  const Eigen::Index c = x.cols();
  RowVector scale(c), shift(c);
  for (Eigen::Index j = 0; j < c; ++j) {
    scale[j] = gamma[j] / std::sqrt(running_var[j] + eps);
    shift[j] = beta[j] - running_mean[j] * scale[j];
  }
  y.resize(x.rows(), c);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < c; ++j) y(i, j) = x(i, j) * scale[j] + shift[j];
  }
}

void bn_backward(const Matrix& dy, const BnCache& cache, const double* gamma,
                 double* dgamma, double* dbeta, Matrix& dx) {
  const Eigen::Index c = dy.cols();
  const RowVector sum_dy = dy.colwise().sum();
  const RowVector sum_dy_xhat =
      dy.cwiseProduct(cache.xhat).colwise().sum();
  Eigen::Map<RowVector>(dbeta, c) += sum_dy;
  Eigen::Map<RowVector>(dgamma, c) += sum_dy_xhat;
  const double inv_rows = 1.0 / static_cast<double>(dy.rows());
  const RowVector scale =
      Eigen::Map<const RowVector>(gamma, c).cwiseProduct(cache.inv_std);
  dx = dy.rowwise() - sum_dy * inv_rows;
  dx -= cache.xhat.cwiseProduct(
      (sum_dy_xhat * inv_rows).replicate(dy.rows(), 1));
  dx.array().rowwise() *= scale.array();
}

void leaky_relu_inplace(Matrix& x) {
  double* p = x.data();
  const Eigen::Index n = x.size();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    p[i] = p[i] < 0.0 ? p[i] * kLeakySlope : p[i];
  }
}

void leaky_relu_backward(const Matrix& pre, Matrix& grad) {
  const double* p = pre.data();
  double* g = grad.data();
  const Eigen::Index n = grad.size();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    g[i] = p[i] < 0.0 ? g[i] * kLeakySlope : g[i];
  }
}

Matrix global_avg_pool(const Matrix& x, int batch) {
  Matrix out(batch, x.cols());
  for (int n = 0; n < batch; ++n) {
    out.row(n) = x.middleRows(static_cast<Eigen::Index>(n) * kNumCells,
                              kNumCells)
                     .colwise()
                     .sum() /
                 static_cast<double>(kNumCells);
  }
  return out;
}

Matrix global_avg_pool_backward(const Matrix& dy, int batch) {
  Matrix dx(static_cast<Eigen::Index>(batch) * kNumCells, dy.cols());
  for (int n = 0; n < batch; ++n) {
    dx.middleRows(static_cast<Eigen::Index>(n) * kNumCells, kNumCells)
        .rowwise() = dy.row(n) / static_cast<double>(kNumCells);
  }
  return dx;
}

}  // namespace tomnet::nn
