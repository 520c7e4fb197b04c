#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"

namespace denssiam {

// Central-finite-difference oracle for backward passes. The check builds the
// scalar loss L(x) = sum_i w_i * forward(x)_i with fixed random weights w,
// perturbs one input element at a time, and compares (L+ - L-)/(2 eps)
// against the analytic gradient. It only ever calls the forward path, so it
// stays independent of the backward code it is judging.
struct FdSettings {
  double epsilon = 1e-4;
  double denom_floor = 1e-6;  // rel err = |a-n| / max(denom_floor, |a|, |n|)
  int max_probes = 256;       // random subsample above this many elements
};

inline FdSettings fd_settings_for(bool is_double) {
  FdSettings s;
  if (!is_double) {
    s.epsilon = 1e-2;
    s.denom_floor = 1e-3;
  }
  return s;
}

// Loss of the current state of the captured inputs (weighted in double).
template <typename T>
double weighted_loss(const Tensor<T>& out, const std::vector<double>& weights);

std::vector<double> make_loss_weights(std::size_t n, Rng& rng);

// Probes `x` in place; `forward_loss` must recompute the full loss from the
// mutated x. Returns the max relative error over probed elements.
template <typename T>
double fd_max_rel_error(Tensor<T>& x, const Tensor<T>& analytic_grad,
                        const std::function<double()>& forward_loss,
                        const FdSettings& s, Rng& rng);

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
  Tensor<To> out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = static_cast<To>(t[i]);
  return out;
}

// Rounds through float so a double fixture is exactly representable in both
// precisions. The 32-bit checks run the float backward at such a point and
// compare against a double-precision difference quotient, which keeps the
// oracle noise far below the 1e-3 gate being tested.
inline void round_to_float(Tensor<double>& t) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = static_cast<double>(static_cast<float>(t[i]));
  }
}

// Compare a float analytic gradient against a double numeric gradient.
double mixed_max_rel_error(const Tensor<float>& analytic,
                           const Tensor<double>& numeric, double denom_floor);

// Full numeric gradient; probes every element of x.
Tensor<double> fd_numeric_grad(Tensor<double>& x,
                               const std::function<double()>& forward_loss,
                               double epsilon);

}  // namespace denssiam
