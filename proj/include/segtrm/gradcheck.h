#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "segtrm/autograd.h"
#include "segtrm/params.h"

namespace segtrm {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  // Coordinates whose analytic or numeric gradient is nonzero.
  std::size_t nonzero_coordinates = 0;
  std::string worst;  // "name[index]" of the worst coordinate
};

// Builds a scalar from the params inside the given graph. Must be
// deterministic: dropout off, no data-dependent randomness.
using LossBuilder = std::function<Var<double>(Graph<double>&)>;

// Compares analytic gradients against central differences on randomly
// sampled coordinates. Each sample picks a parameter tensor uniformly, then a
// coordinate uniformly inside it. Relative error is
// |a - n| / max(|a|, |n|, floor). The floor sits above central-difference
// rounding noise so gradients that are exactly zero do not count as errors.
GradCheckReport GradCheck(const LossBuilder& f, ParamStore<double>& params,
                          std::size_t samples, std::uint64_t seed = 0,
                          double step = 1e-5, double floor = 1e-6);

}  // namespace segtrm
