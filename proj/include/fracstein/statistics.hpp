#pragma once

#include "fracstein/quadrature.hpp"
#include "fracstein/types.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace fracstein {

struct SampleSummary {
  Index count = 0;
  Real mean = 0.0;
  Real std_error = 0.0;  // CLT standard error of the mean
};

// Order-dependent only: pairwise sums of the values and of the squared
// deviations from the mean.
inline SampleSummary summarize(std::span<const Real> values) {
  SampleSummary s;
  s.count = static_cast<Index>(values.size());
  if (s.count == 0) return s;
  s.mean = pairwise_sum(values) / static_cast<Real>(s.count);
  if (s.count < 2) return s;
  std::vector<Real> dev(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) dev[i] = (values[i] - s.mean) * (values[i] - s.mean);
  const Real variance = pairwise_sum(dev) / static_cast<Real>(s.count - 1);
  s.std_error = std::sqrt(variance / static_cast<Real>(s.count));
  return s;
}

}  // namespace fracstein
