#include "sscl/optim.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "sscl/error.hpp"

namespace sscl {

AdamState AdamState::for_params(const ModelParams& params) {
  return {params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(ModelParams& params, const GradientTape& tape, double lr,
               AdamState& state, const AdamOptions& options) {
  std::vector<const Eigen::MatrixXd*> grads;
  tape.grad.visit([&](const std::string& name, const Eigen::MatrixXd& g) {
    if (!g.allFinite()) throw DataError("non-finite gradient in tensor " + name);
    grads.push_back(&g);
  });
  std::vector<Eigen::MatrixXd*> first, second;
  state.m.visit([&](const std::string&, Eigen::MatrixXd& t) { first.push_back(&t); });
  state.v.visit([&](const std::string&, Eigen::MatrixXd& t) { second.push_back(&t); });

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(options.beta1, t);
  const double correction2 = 1.0 - std::pow(options.beta2, t);
  std::size_t k = 0;
  params.visit([&](const std::string&, Eigen::MatrixXd& p) {
    const Eigen::MatrixXd& g = *grads[k];
    Eigen::MatrixXd& m = *first[k];
    Eigen::MatrixXd& v = *second[k];
    m = options.beta1 * m + (1.0 - options.beta1) * g;
    v = options.beta2 * v + (1.0 - options.beta2) * g.cwiseAbs2();
    const Eigen::ArrayXXd m_hat = m.array() / correction1;
    const Eigen::ArrayXXd v_hat = v.array() / correction2;
    p.array() -= lr * m_hat / (v_hat.sqrt() + options.epsilon);
    ++k;
  });
}

double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_init,
                 double lr_min) {
  if (total_steps <= 0) return lr_init;
  if (step < 0 || step > total_steps) {
    throw ArgumentError("scheduler step outside [0, total_steps]");
  }
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_min + (lr_init - lr_min) * (1.0 + std::cos(std::numbers::pi * progress)) / 2.0;
}

}  // namespace sscl
