#pragma once

#include <functional>
#include <vector>

#include "ecgdnn/tensor.hpp"

namespace ecgdnn {

/// Builds a scalar loss from pre-created leaf tensors on the given tape.
using ScalarGraphFn = std::function<Tensor<double>(Tape<double>&)>;

/// Central-difference gradient verification, always in f64.
///
/// Runs the graph once with backward() for analytic gradients, then
/// perturbs every element of every leaf by +-step and re-evaluates.
/// Returns the max over elements of |analytic - numeric| /
/// max(1, |analytic|, |numeric|). Leaves must have requires_grad set.
double gradcheck(const ScalarGraphFn& fn, const std::vector<Tensor<double>>& leaves,
                 double step = 1e-5);

}  // namespace ecgdnn
