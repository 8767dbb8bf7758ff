#pragma once

#include <cstdint>

#include "sscl/net.hpp"

namespace sscl {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First and second moment estimates, shaped like the parameters.
struct AdamState {
  ModelParams m;
  ModelParams v;
  std::int64_t step = 0;

  static AdamState for_params(const ModelParams& params);
};

// One bias-corrected Adam update. Throws DataError naming the tensor when a
// gradient is not finite; parameters are left untouched in that case.
void adam_step(ModelParams& params, const GradientTape& tape, double lr,
               AdamState& state, const AdamOptions& options = {});

// lr_min + (lr_init - lr_min) (1 + cos(pi step / total_steps)) / 2.
double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_init,
                 double lr_min = 0.0);

}  // namespace sscl
