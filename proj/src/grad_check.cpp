#include "flowsense/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "flowsense/errors.hpp"
#include "flowsense/prng.hpp"

namespace flowsense::neural {

GradCheckResult grad_check(
    const std::function<double(const std::vector<Tensor>&)>& loss_fn,
    const std::function<std::vector<Tensor>(const std::vector<Tensor>&)>& grad_fn,
    const std::vector<Tensor>& params, int n_probes, uint64_t seed,
    double step) {
  if (n_probes < 1) throw ValidationError("grad_check: n_probes must be >= 1");
  if (params.empty()) throw ValidationError("grad_check: no parameters");

  const std::vector<Tensor> analytic = grad_fn(params);
  if (analytic.size() != params.size()) {
    throw ValidationError("grad_check: gradient count mismatch");
  }

  int64_t total_coords = 0;
  for (const Tensor& p : params) total_coords += p.size();
  if (total_coords == 0) throw ValidationError("grad_check: empty parameters");

  Xorshift64Star rng(seed);
  std::vector<Tensor> probe = params;
  GradCheckResult result;
  for (int n = 0; n < n_probes; ++n) {
    int64_t flat = static_cast<int64_t>(
        rng.next_below(static_cast<uint64_t>(total_coords)));
    size_t t = 0;
    while (flat >= probe[t].size()) {
      flat -= probe[t].size();
      ++t;
    }
    const double saved = probe[t].at(flat);
    probe[t].at(flat) = saved + step;
    const double f_plus = loss_fn(probe);
    probe[t].at(flat) = saved - step;
    const double f_minus = loss_fn(probe);
    probe[t].at(flat) = saved;

    const double fd = (f_plus - f_minus) / (2.0 * step);
    const double ad = analytic[t].at(flat);
    const double denom = std::max({std::abs(fd), std::abs(ad), 1e-2});
    result.max_relative_error =
        std::max(result.max_relative_error, std::abs(fd - ad) / denom);
    result.probes_run += 1;
  }
  return result;
}

}  // namespace flowsense::neural
