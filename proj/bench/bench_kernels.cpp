#include <benchmark/benchmark.h>
#include <omp.h>

#include "tomnet/datagen.hpp"
#include "tomnet/kernels.hpp"
#include "tomnet/rng.hpp"
#include "tomnet/sps.hpp"

namespace {

using tomnet::nn::ConstMatrixMap;
using tomnet::nn::Matrix;
using tomnet::nn::MatrixMap;

constexpr int kBatch = 32;

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  tomnet::Rng rng(seed);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

template <bool Reference>
void BM_ConvForward(benchmark::State& state) {
  const int cin = static_cast<int>(state.range(0));
  const int cout = 32;
  const Matrix x = random_matrix(kBatch * tomnet::kNumCells, cin, 1);
  const Matrix w = random_matrix(9 * cin, cout, 2);
  Matrix col, y;
  for (auto _ : state) {
    if constexpr (Reference) {
      tomnet::nn::reference::conv_forward(x, kBatch, 3, ConstMatrixMap(w.data(), w.rows(), w.cols()),
                                          nullptr, col, y);
    } else {
      tomnet::nn::conv_forward(x, kBatch, 3, ConstMatrixMap(w.data(), w.rows(), w.cols()),
                               nullptr, col, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/reference")->Arg(20)->Arg(32);
BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/optimized")->Arg(20)->Arg(32);

template <bool Reference>
void BM_ConvBackward(benchmark::State& state) {
  const int c = 32;
  const Matrix x = random_matrix(kBatch * tomnet::kNumCells, c, 3);
  const Matrix w = random_matrix(9 * c, c, 4);
  const Matrix dy = random_matrix(kBatch * tomnet::kNumCells, c, 5);
  Matrix col, y, dx;
  Matrix dw = Matrix::Zero(w.rows(), w.cols());
  tomnet::nn::conv_forward(x, kBatch, 3, ConstMatrixMap(w.data(), w.rows(), w.cols()), nullptr,
                           col, y);
  for (auto _ : state) {
    if constexpr (Reference) {
      tomnet::nn::reference::conv_backward(dy, col, kBatch, 3,
                                           ConstMatrixMap(w.data(), w.rows(), w.cols()),
                                           MatrixMap(dw.data(), dw.rows(), dw.cols()), nullptr, &dx);
    } else {
      tomnet::nn::conv_backward(dy, col, kBatch, 3, ConstMatrixMap(w.data(), w.rows(), w.cols()),
                                MatrixMap(dw.data(), dw.rows(), dw.cols()), nullptr, &dx);
    }
    benchmark::DoNotOptimize(dx.data());
  }
}
BENCHMARK(BM_ConvBackward<true>)->Name("conv_backward/reference");
BENCHMARK(BM_ConvBackward<false>)->Name("conv_backward/optimized");

template <bool Reference>
void BM_BatchNorm(benchmark::State& state) {
  const int c = 32;
  const Matrix x = random_matrix(kBatch * tomnet::kNumCells, c, 6);
  std::vector<double> gamma(c, 1.0), beta(c, 0.0);
  Matrix y;
  tomnet::nn::BnCache cache;
  tomnet::nn::RowVector mean, var;
  for (auto _ : state) {
    if constexpr (Reference) {
      tomnet::nn::reference::bn_forward_train(x, gamma.data(), beta.data(), 1e-5, y, cache, mean,
                                              var);
    } else {
      tomnet::nn::bn_forward_train(x, gamma.data(), beta.data(), 1e-5, y, cache, mean, var);
    }
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_BatchNorm<true>)->Name("bn_forward/reference");
BENCHMARK(BM_BatchNorm<false>)->Name("bn_forward/optimized");

void BM_TrainStep(benchmark::State& state) {
  tomnet::DatasetSpec spec;
  spec.n_train_maps = 2;
  spec.trajectories_per_map = 10;
  const tomnet::Dataset d = tomnet::build_dataset(spec);
  tomnet::SpsModel model = tomnet::SpsModel::create(tomnet::Variant::Bel, {}, 1);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < 32 && i < d.samples.size(); ++i) idx.push_back(i);
  const tomnet::Batch batch = tomnet::make_batch(d.samples, idx);
  for (auto _ : state) {
    model.zero_grad();
    benchmark::DoNotOptimize(tomnet::forward_backward(model, batch, {}, false));
  }
}
BENCHMARK(BM_TrainStep)->Name("forward_backward/batch32")->Unit(benchmark::kMillisecond);

/// Episode generation with one thread against the OpenMP default.
void BM_BuildDataset(benchmark::State& state) {
  const int threads = static_cast<int>(state.range(0));
  const int saved = omp_get_max_threads();
  omp_set_num_threads(threads > 0 ? threads : saved);
  tomnet::DatasetSpec spec;
  spec.n_train_maps = 2;
  spec.trajectories_per_map = 10;
  for (auto _ : state) {
    benchmark::DoNotOptimize(tomnet::build_dataset(spec).samples.size());
  }
  omp_set_num_threads(saved);
}
BENCHMARK(BM_BuildDataset)->Name("build_dataset/serial")->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildDataset)->Name("build_dataset/openmp")->Arg(0)->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv) {
  tomnet::nn::tune_allocator();
  benchmark::Initialize(&argc, argv);
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
