#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tomnet/error.hpp"
#include "tomnet/rng.hpp"
#include "tomnet/train.hpp"

namespace tomnet {

namespace {

constexpr std::size_t kEvalChunk = 256;

void accumulate(LossComponents& acc, const LossComponents& c, double w) {
  acc.total += w * c.total;
  acc.target += w * c.target;
  acc.action += w * c.action;
  acc.state += w * c.state;
  acc.belief += w * c.belief;
  acc.l1 += w * c.l1;
  acc.l2 += w * c.l2;
}

void scale(LossComponents& c, double s) {
  LossComponents zero;
  accumulate(zero, c, s);
  c = zero;
}

}  // namespace

void SpsConfig::validate() const {
  // Small tolerance so decimal literals at the range ends are accepted.
  if (!(base_lr >= kMinLearningRate * (1 - 1e-12) &&
        base_lr <= kMaxLearningRate * (1 + 1e-12))) {
    throw ConfigError("train.lrs", "learning rate outside [0.00015, 0.001]");
  }
  if (batch_size < 2) throw ConfigError("train.batch_size", "batch size < 2");
  if (l1 < 0 || l2 < 0) throw ConfigError("train.l1", "negative penalty");
  if (max_epochs < 1) throw ConfigError("train.max_epochs", "max_epochs < 1");
  if (early_stop_patience < 1) {
    throw ConfigError("train.patience", "patience < 1");
  }
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("train.validation_fraction",
                      "validation fraction outside [0, 1)");
  }
  if (!std::is_sorted(milestones.begin(), milestones.end())) {
    throw ConfigError("train.milestones", "milestones must be sorted");
  }
}

double lr_at_epoch(double base_lr, int epoch, std::span<const int> milestones,
                   double gamma) {
  int passed = 0;
  for (int m : milestones) {
    if (m <= epoch) ++passed;
  }
  return base_lr * std::pow(gamma, passed);
}

LossComponents evaluate_loss(const SpsModel& model,
                             std::span<const EncodedSample> samples,
                             std::span<const std::size_t> indices,
                             const Regularization& reg) {
  LossComponents acc;
  if (indices.empty()) return acc;
  for (std::size_t begin = 0; begin < indices.size(); begin += kEvalChunk) {
    const std::size_t end = std::min(indices.size(), begin + kEvalChunk);
    Batch b = make_batch(samples, indices.subspan(begin, end - begin));
    LossComponents c = compute_loss(forward_batch(model, b), b,
                                    model.variant(), model, reg);
    accumulate(acc, c, static_cast<double>(end - begin));
  }
  scale(acc, 1.0 / static_cast<double>(indices.size()));
  // Penalties do not depend on the chunking; report them exactly.
  acc.l1 = reg.l1 * regularization_l1(model);
  acc.l2 = reg.l2 * regularization_l2(model);
  acc.total = acc.data() + acc.l1 + acc.l2;
  return acc;
}

TrainResult train(const Dataset& dataset, const SpsConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  const std::size_t n = dataset.samples.size();
  if (n == 0) throw TrainingError("training set is empty");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(derive_seed(cfg.init_seed, {1}));
  split_rng.shuffle(order);
  std::size_t n_val = static_cast<std::size_t>(
      std::ceil(cfg.validation_fraction * static_cast<double>(n)));
  if (n_val >= n) n_val = n - 1;
  std::vector<std::size_t> val(order.begin(), order.begin() + n_val);
  std::vector<std::size_t> tr(order.begin() + n_val, order.end());
  std::sort(val.begin(), val.end());
  std::sort(tr.begin(), tr.end());

  TrainResult r{SpsModel::create(cfg.variant, cfg.widths,
                                 derive_seed(cfg.init_seed, {0})),
                {}, {}};
  r.adam = AdamState::for_model(r.model);
  const Regularization reg = cfg.regularization();
  SpsModel best = r.model;
  double best_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr_at_epoch(cfg.base_lr, epoch, cfg.milestones, cfg.lr_gamma);

    std::vector<std::size_t> perm = tr;
    Rng epoch_rng(derive_seed(cfg.init_seed, {2, static_cast<std::uint64_t>(epoch)}));
    epoch_rng.shuffle(perm);
    std::size_t seen = 0;
    for (std::size_t begin = 0; begin < perm.size(); begin += cfg.batch_size) {
      const std::size_t end =
          std::min(perm.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      // A single-sample batch has no batch-norm statistics.
      if (end - begin < 2) break;
      Batch b = make_batch(dataset.samples,
                           std::span(perm).subspan(begin, end - begin));
      r.model.zero_grad();
      LossComponents c = forward_backward(r.model, b, reg, true);
      if (!std::isfinite(c.total)) {
        std::ostringstream msg;
        msg << "training diverged at epoch " << epoch << " (loss " << c.total
            << ")";
        throw TrainingError(msg.str());
      }
      try {
        adam_step(r.model, r.adam, rec.lr);
      } catch (const TrainingError& e) {
        throw TrainingError("epoch " + std::to_string(epoch) + ": " + e.what());
      }
      accumulate(rec.train, c, static_cast<double>(end - begin));
      seen += end - begin;
    }
    if (seen > 0) scale(rec.train, 1.0 / static_cast<double>(seen));

    const std::vector<std::size_t>& monitor = val.empty() ? tr : val;
    rec.validation = evaluate_loss(r.model, dataset.samples, monitor, reg);
    if (!std::isfinite(rec.validation.total)) {
      throw TrainingError("validation loss diverged at epoch " +
                          std::to_string(epoch));
    }
    r.curves.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.validation.total < best_loss) {
      best_loss = rec.validation.total;
      best = r.model;
      r.curves.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience) {
      r.curves.early_stopped = true;
      break;
    }
  }
  r.curves.best_validation = best_loss;
  r.model = std::move(best);
  r.model.zero_grad();
  return r;
}

}  // namespace tomnet
