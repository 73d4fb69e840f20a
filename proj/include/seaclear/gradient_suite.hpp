#pragma once

#include <string>
#include <vector>

namespace seaclear {

inline constexpr double kGradientTolerance = 1e-4;
inline constexpr double kGradientStep = 1e-5;

/// Worst relative error of one differentiable operation over all seeds.
struct OpGradientResult {
  std::string op;
  double max_rel_error = 0.0;
  int seeds = 0;
  int redraws = 0;  // draws rejected for sitting near a kink or rounding floor
  double seconds = 0.0;

  bool passed() const { return max_rel_error < kGradientTolerance; }
};

/// Central-difference checks (step kGradientStep) of every differentiable
/// operation on small random inputs: conv2d, bilinear_upsample, relu,
/// sigmoid, bilinear_sample, make_grid∘localize, deblur_forward,
/// predict_transmission and total_loss. Each seed draws fresh inputs;
/// draws where a relu, dark-channel argmin or sampler cell boundary lies
/// within reach of the step are redrawn. The transmission branch needs
/// four halvings, so it runs at 16×16 with 200 random input and 200 random
/// parameter coordinates per seed; everything else is at most 8×8 and
/// checked in full.
std::vector<OpGradientResult> run_gradient_suite(int seeds = 20);

}  // namespace seaclear
