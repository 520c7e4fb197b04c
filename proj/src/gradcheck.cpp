#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace denssiam {

template <typename T>
double weighted_loss(const Tensor<T>& out, const std::vector<double>& weights) {
  double loss = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    loss += weights[i] * static_cast<double>(out[i]);
  }
  return loss;
}

std::vector<double> make_loss_weights(std::size_t n, Rng& rng) {
  std::vector<double> w(n);
  for (auto& v : w) v = rng.uniform() * 2.0 - 1.0;
  return w;
}

template <typename T>
double fd_max_rel_error(Tensor<T>& x, const Tensor<T>& analytic_grad,
                        const std::function<double()>& forward_loss,
                        const FdSettings& s, Rng& rng) {
  if (!x.same_shape(analytic_grad)) {
    throw ContractError("fd_max_rel_error: grad shape " +
                        shape_str(analytic_grad.shape()) + " does not match x " +
                        shape_str(x.shape()));
  }
  std::vector<std::size_t> probes;
  if (x.size() <= static_cast<std::size_t>(s.max_probes)) {
    probes.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) probes[i] = i;
  } else {
    probes.reserve(static_cast<std::size_t>(s.max_probes));
    for (int i = 0; i < s.max_probes; ++i) {
      probes.push_back(static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(x.size()) - 1)));
    }
  }
  double worst = 0.0;
  const T eps = static_cast<T>(s.epsilon);
  for (std::size_t idx : probes) {
    const T saved = x[idx];
    x[idx] = saved + eps;
    const double lp = forward_loss();
    x[idx] = saved - eps;
    const double lm = forward_loss();
    x[idx] = saved;
    const double numeric = (lp - lm) / (2.0 * static_cast<double>(eps));
    const double analytic = static_cast<double>(analytic_grad[idx]);
    const double denom =
        std::max(s.denom_floor, std::max(std::fabs(numeric), std::fabs(analytic)));
    worst = std::max(worst, std::fabs(numeric - analytic) / denom);
  }
  return worst;
}

Tensor<double> fd_numeric_grad(Tensor<double>& x,
                               const std::function<double()>& forward_loss,
                               double epsilon) {
  Tensor<double> grad(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + epsilon;
    const double lp = forward_loss();
    x[i] = saved - epsilon;
    const double lm = forward_loss();
    x[i] = saved;
    grad[i] = (lp - lm) / (2.0 * epsilon);
  }
  return grad;
}

double mixed_max_rel_error(const Tensor<float>& analytic,
                           const Tensor<double>& numeric, double denom_floor) {
  if (analytic.shape() != numeric.shape()) {
    throw ContractError("mixed_max_rel_error: shape mismatch");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = static_cast<double>(analytic[i]);
    const double n = numeric[i];
    const double denom = std::max(denom_floor, std::max(std::fabs(a), std::fabs(n)));
    worst = std::max(worst, std::fabs(a - n) / denom);
  }
  return worst;
}

template double weighted_loss<float>(const Tensor<float>&,
                                     const std::vector<double>&);
template double weighted_loss<double>(const Tensor<double>&,
                                      const std::vector<double>&);
template double fd_max_rel_error<float>(Tensor<float>&, const Tensor<float>&,
                                        const std::function<double()>&,
                                        const FdSettings&, Rng&);
template double fd_max_rel_error<double>(Tensor<double>&, const Tensor<double>&,
                                         const std::function<double()>&,
                                         const FdSettings&, Rng&);

}  // namespace denssiam
