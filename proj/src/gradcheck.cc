#include "segtrm/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace segtrm {

GradCheckReport GradCheck(const LossBuilder& f, ParamStore<double>& params,
                          std::size_t samples, std::uint64_t seed, double step,
                          double floor) {
  params.ZeroGrad();
  {
    Graph<double> graph(false);
    Var<double> loss = f(graph);
    graph.Backward(loss);
  }

  std::vector<std::pair<const std::string*, Param<double>*>> tensors;
  for (auto& [name, p] : params) {
    if (p.value.size() > 0) tensors.emplace_back(&name, &p);
  }
  GradCheckReport report;
  if (tensors.empty()) return report;

  auto evaluate = [&f]() {
    Graph<double> graph(false);
    return f(graph).value()[0];
  };

  std::mt19937_64 rng(seed);
  for (std::size_t s = 0; s < samples; ++s) {
    auto [name, param] = tensors[rng() % tensors.size()];
    const std::size_t index = rng() % param->value.size();
    double& x = param->value[index];
    const double saved = x;
    x = saved + step;
    const double plus = evaluate();
    x = saved - step;
    const double minus = evaluate();
    x = saved;

    const double numeric = (plus - minus) / (2.0 * step);
    const double analytic = param->grad[index];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    const double rel = std::abs(analytic - numeric) / denom;
    ++report.coordinates;
    if (analytic != 0.0 || numeric != 0.0) ++report.nonzero_coordinates;
    if (rel > report.max_relative_error || report.worst.empty()) {
      report.max_relative_error = std::max(rel, report.max_relative_error);
      if (rel >= report.max_relative_error) {
        report.worst = *name + "[" + std::to_string(index) + "]";
      }
    }
  }
  return report;
}

}  // namespace segtrm
