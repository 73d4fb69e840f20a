#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "seaclear/params.hpp"

namespace seaclear {

/// Moment estimates for one parameter array.
struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t n) : first_moment(n, 0.0), second_moment(n, 0.0) {}
};

/// One bias-corrected Adam update of `params` in place; increments state.step.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double learning_rate);

/// Adam over a whole model: one AdamState per tensor, created on first use
/// and matched to tensors by position.
class AdamGroup {
 public:
  void step(const TensorList& params, const TensorList& grads, double learning_rate);
  const std::vector<AdamState>& states() const { return states_; }

 private:
  std::vector<AdamState> states_;
};

}  // namespace seaclear
