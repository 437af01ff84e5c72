#include <doctest.h>

#include <omp.h>

#include "tomnet/kernels.hpp"
#include "tomnet/rng.hpp"

using namespace tomnet;
using nn::Matrix;

namespace {

Matrix random_matrix(Rng& rng, int rows, int cols) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("im2col and col2im are adjoint") {
  Rng rng(1);
  for (int k : {1, 3, 5}) {
    const int batch = 3, c = 4;
    Matrix x = random_matrix(rng, batch * 121, c);
    Matrix col = nn::im2col(x, batch, k);
    CHECK(col.cols() == k * k * c);
    Matrix y = random_matrix(rng, col.rows(), col.cols());
    const double lhs = (col.array() * y.array()).sum();
    const double rhs = (x.array() * nn::col2im(y, batch, k, c).array()).sum();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    CHECK(max_abs_diff(col, nn::reference::im2col(x, batch, k)) == 0.0);
    CHECK(max_abs_diff(nn::col2im(y, batch, k, c),
                       nn::reference::col2im(y, batch, k, c)) < 1e-12);
  }
}

TEST_CASE("convolution matches the loop reference") {
  Rng rng(2);
  for (int trial = 0; trial < 4; ++trial) {
    const int batch = 1 + trial, k = trial % 2 ? 1 : 3;
    const int cin = 3 + trial, cout = 2 + 2 * trial;
    Matrix x = random_matrix(rng, batch * 121, cin);
    Matrix w = random_matrix(rng, k * k * cin, cout);
    Matrix b = random_matrix(rng, 1, cout);
    nn::ConstMatrixMap wm(w.data(), w.rows(), w.cols());
    Matrix col, y, rcol, ry;
    nn::conv_forward(x, batch, k, wm, b.data(), col, y);
    nn::reference::conv_forward(x, batch, k, wm, b.data(), rcol, ry);
    CHECK(max_abs_diff(y, ry) < 1e-10);

    Matrix dy = random_matrix(rng, y.rows(), y.cols());
    Matrix dw = Matrix::Zero(w.rows(), w.cols()), rdw = dw;
    Matrix db = Matrix::Zero(1, cout), rdb = db;
    Matrix dx, rdx;
    nn::MatrixMap dwm(dw.data(), dw.rows(), dw.cols());
    nn::MatrixMap rdwm(rdw.data(), rdw.rows(), rdw.cols());
    nn::conv_backward(dy, col, batch, k, wm, dwm, db.data(), &dx);
    nn::reference::conv_backward(dy, rcol, batch, k, wm, rdwm, rdb.data(), &rdx);
    CHECK(max_abs_diff(dw, rdw) < 1e-10);
    CHECK(max_abs_diff(db, rdb) < 1e-10);
    CHECK(max_abs_diff(dx, rdx) < 1e-10);
  }
}

TEST_CASE("batch norm matches the loop reference") {
  Rng rng(3);
  const int rows = 2 * 121, c = 5;
  Matrix x = random_matrix(rng, rows, c);
  Matrix gamma = random_matrix(rng, 1, c), beta = random_matrix(rng, 1, c);
  Matrix y, ry;
  nn::BnCache cache, rcache;
  nn::RowVector mean, var, rmean, rvar;
  nn::bn_forward_train(x, gamma.data(), beta.data(), 1e-5, y, cache, mean, var);
  nn::reference::bn_forward_train(x, gamma.data(), beta.data(), 1e-5, ry,
                                  rcache, rmean, rvar);
  CHECK(max_abs_diff(y, ry) < 1e-12);
  CHECK((mean - rmean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((var - rvar).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(mean(0) == doctest::Approx(x.col(0).mean()));

  Matrix dy = random_matrix(rng, rows, c);
  Matrix dgamma = Matrix::Zero(1, c), dbeta = dgamma, rdg = dgamma, rdb = dgamma;
  Matrix dx, rdx;
  nn::bn_backward(dy, cache, gamma.data(), dgamma.data(), dbeta.data(), dx);
  nn::reference::bn_backward(dy, rcache, gamma.data(), rdg.data(), rdb.data(),
                             rdx);
  CHECK(max_abs_diff(dx, rdx) < 1e-12);
  CHECK(max_abs_diff(dgamma, rdg) < 1e-12);
  CHECK(max_abs_diff(dbeta, rdb) < 1e-12);

  Matrix rm = Matrix::Zero(1, c), rv = Matrix::Ones(1, c), yi;
  nn::bn_forward_infer(x, gamma.data(), beta.data(), rm.data(), rv.data(),
                       1e-5, yi);
  for (int j = 0; j < c; ++j)
    CHECK(yi(7, j) == doctest::Approx(gamma(0, j) * x(7, j) / std::sqrt(1 + 1e-5) +
                                      beta(0, j)));
}

TEST_CASE("leaky relu and pooling") {
  Matrix x(1, 4);
  x << -2.0, -0.0, 0.5, 3.0;
  Matrix a = x;
  nn::leaky_relu_inplace(a);
  CHECK(a(0, 0) == doctest::Approx(-0.02));
  CHECK(a(0, 2) == 0.5);
  Matrix g = Matrix::Ones(1, 4);
  nn::leaky_relu_backward(a, g);
  CHECK(g(0, 0) == doctest::Approx(0.01));
  CHECK(g(0, 3) == 1.0);

  Rng rng(4);
  Matrix p = random_matrix(rng, 2 * 121, 3);
  Matrix pooled = nn::global_avg_pool(p, 2);
  CHECK(pooled(1, 2) == doctest::Approx(p.block(121, 2, 121, 1).mean()));
  Matrix dy = random_matrix(rng, 2, 3);
  const double lhs = (pooled.array() * dy.array()).sum();
  const double rhs =
      (p.array() * nn::global_avg_pool_backward(dy, 2).array()).sum();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("results do not depend on the thread count") {
  Rng rng(5);
  const int batch = 8, cin = 6, cout = 7;
  Matrix x = random_matrix(rng, batch * 121, cin);
  Matrix w = random_matrix(rng, 9 * cin, cout);
  Matrix dy = random_matrix(rng, batch * 121, cout);
  nn::ConstMatrixMap wm(w.data(), w.rows(), w.cols());
  auto run = [&](int threads) {
    omp_set_num_threads(threads);
    Matrix col, y, dx;
    nn::conv_forward(x, batch, 3, wm, nullptr, col, y);
    Matrix dw = Matrix::Zero(w.rows(), w.cols());
    nn::MatrixMap dwm(dw.data(), dw.rows(), dw.cols());
    nn::conv_backward(dy, col, batch, 3, wm, dwm, nullptr, &dx);
    return std::tuple{y, dw, dx};
  };
  auto [y1, dw1, dx1] = run(1);
  auto [y4, dw4, dx4] = run(4);
  omp_set_num_threads(1);
  CHECK(max_abs_diff(y1, y4) == 0.0);
  CHECK(max_abs_diff(dw1, dw4) == 0.0);
  CHECK(max_abs_diff(dx1, dx4) == 0.0);
}
