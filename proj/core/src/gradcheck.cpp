#include "ecgdnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace ecgdnn {

double gradcheck(const ScalarGraphFn& fn, const std::vector<Tensor<double>>& leaves,
                 double step) {
  std::vector<std::vector<double>> analytic;
  {
    for (auto leaf : leaves) leaf.zero_grad();
    Tape<double> tape;
    Tensor<double> loss = fn(tape);
    tape.backward(loss);
    for (const auto& leaf : leaves) analytic.push_back(leaf.grad());
  }

  const auto eval = [&fn]() -> double {
    Tape<double> tape;
    return fn(tape).values()[0];
  };

  double max_rel = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Tensor<double> leaf = leaves[li];
    double* v = leaf.data();
    const std::int64_t n = leaf.numel();
    for (std::int64_t i = 0; i < n; ++i) {
      const double orig = v[i];
      v[i] = orig + step;
      const double plus = eval();
      v[i] = orig - step;
      const double minus = eval();
      v[i] = orig;
      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic[li][static_cast<std::size_t>(i)];
      const double rel =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace ecgdnn
