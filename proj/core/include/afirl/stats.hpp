#pragma once

#include <span>
#include <vector>

namespace afirl {

/// Neumaier-compensated sum; the result does not depend on summation order
/// beyond the last bit for well-conditioned inputs.
double compensatedSum(std::span<const double> values);

struct SampleSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample (n - 1) standard deviation
  double standardError() const;
};

SampleSummary summarize(std::span<const double> values);

/// One-sided Welch t-test of H1: mean(higher) > mean(lower).
struct OneSidedTest {
  double meanLower = 0.0;
  double meanHigher = 0.0;
  double t = 0.0;
  double degreesOfFreedom = 0.0;
  double pValue = 1.0;
};

OneSidedTest welchGreater(std::span<const double> lower, std::span<const double> higher);

}  // namespace afirl
