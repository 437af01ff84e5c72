#include <cmath>
#include <sstream>

#include "tomnet/error.hpp"
#include "tomnet/train.hpp"

namespace tomnet {

AdamState AdamState::for_model(const SpsModel& model) {
  AdamState s;
  for (const Param& p : model.params()) {
    s.m.emplace_back(p.size(), 0.0);
    s.v.emplace_back(p.size(), 0.0);
  }
  return s;
}

void adam_step(std::span<double> w, std::span<const double> g,
               std::span<double> m, std::span<double> v, std::uint64_t step,
               double lr, const AdamConfig& cfg) {
  if (w.size() != g.size() || w.size() != m.size() || w.size() != v.size()) {
    throw ShapeError("adam_step: mismatched buffer sizes");
  }
  const double t = static_cast<double>(step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < w.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    w[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

void adam_step(SpsModel& model, AdamState& state, double lr,
               const AdamConfig& cfg) {
  auto& params = model.params();
  if (state.m.size() != params.size()) {
    throw ShapeError("optimizer state does not match the model");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Param& p = params[k];
    for (std::size_t i = 0; i < p.grad.size(); ++i) {
      if (!std::isfinite(p.grad[i])) {
        std::ostringstream msg;
        msg << "non-finite gradient in " << p.name << "[" << i
            << "] = " << p.grad[i] << " at optimizer step " << state.step + 1;
        throw TrainingError(msg.str());
      }
    }
  }
  ++state.step;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Param& p = params[k];
    adam_step(p.value, p.grad, state.m[k], state.v[k], state.step, lr, cfg);
  }
}

}  // namespace tomnet
