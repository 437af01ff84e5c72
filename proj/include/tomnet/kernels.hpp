#pragma once

// Dense kernels for the perception network. Activations are stored as
// row-major [batch * 121, channels] matrices (NHWC on the 11x11 grid).
//
// The default implementations use im2col + Eigen GEMM with OpenMP over
// samples and channels; every reduction runs in a fixed order so results do
// not depend on the thread count. Serial loop-level reference versions with
// the same signatures live in nn::reference.

#include <Eigen/Dense>

namespace tomnet::nn {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

inline constexpr double kLeakySlope = 0.01;

/// Keeps large activation buffers on the heap between minibatches instead of
/// returning them to the OS (glibc only; a no-op elsewhere).
void tune_allocator();

/// out[c] += sum over rows of m(r, c), summed top to bottom. Unlike an Eigen
/// reduction the order does not depend on the alignment of `out`.
void add_column_sums(const Matrix& m, double* out);

/// Patches for a k x k convolution (k odd, zero padding k/2). Column order
/// is (ky, kx, channel).
Matrix im2col(const Matrix& x, int batch, int k);
/// Adjoint of im2col: scatters patch gradients back onto the input grid.
Matrix col2im(const Matrix& col, int batch, int k, int channels);

/// y = im2col(x) * w (+ bias). w is [k*k*cin, cout]; bias may be null.
/// The patch matrix is returned in `col` for the backward pass.
void conv_forward(const Matrix& x, int batch, int k, ConstMatrixMap w,
                  const double* bias, Matrix& col, Matrix& y);

/// Accumulates into dw / dbias; writes dx when non-null.
void conv_backward(const Matrix& dy, const Matrix& col, int batch, int k,
                   ConstMatrixMap w, MatrixMap dw, double* dbias, Matrix* dx);

struct BnCache {
  Matrix xhat;
  RowVector inv_std;
};

/// Normalizes with batch statistics; returns biased mean and variance.
void bn_forward_train(const Matrix& x, const double* gamma, const double* beta,
                      double eps, Matrix& y, BnCache& cache, RowVector& mean,
                      RowVector& var);
void bn_forward_infer(const Matrix& x, const double* gamma, const double* beta,
                      const double* running_mean, const double* running_var,
                      double eps, Matrix& y);
void bn_backward(const Matrix& dy, const BnCache& cache, const double* gamma,
                 double* dgamma, double* dbeta, Matrix& dx);

void leaky_relu_inplace(Matrix& x);
/// grad *= d lrelu / d pre. `act` may be the pre- or post-activation since
/// both share a sign.
void leaky_relu_backward(const Matrix& act, Matrix& grad);

/// [batch * 121, c] -> [batch, c] spatial mean.
Matrix global_avg_pool(const Matrix& x, int batch);
Matrix global_avg_pool_backward(const Matrix& dy, int batch);

namespace reference {

Matrix im2col(const Matrix& x, int batch, int k);
Matrix col2im(const Matrix& col, int batch, int k, int channels);
void conv_forward(const Matrix& x, int batch, int k, ConstMatrixMap w,
                  const double* bias, Matrix& col, Matrix& y);
void conv_backward(const Matrix& dy, const Matrix& col, int batch, int k,
                   ConstMatrixMap w, MatrixMap dw, double* dbias, Matrix* dx);
void bn_forward_train(const Matrix& x, const double* gamma, const double* beta,
                      double eps, Matrix& y, BnCache& cache, RowVector& mean,
                      RowVector& var);
void bn_backward(const Matrix& dy, const BnCache& cache, const double* gamma,
                 double* dgamma, double* dbeta, Matrix& dx);

}  // namespace reference

}  // namespace tomnet::nn
