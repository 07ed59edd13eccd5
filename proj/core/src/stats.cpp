#include "afirl/stats.hpp"

#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

namespace afirl {

double compensatedSum(std::span<const double> values) {
  double sum = 0.0;
  double compensation = 0.0;
  for (const double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      compensation += (sum - t) + v;
    else
      compensation += (v - t) + sum;
    sum = t;
  }
  return sum + compensation;
}

double SampleSummary::standardError() const {
  return count > 1 ? stddev / std::sqrt(static_cast<double>(count)) : 0.0;
}

SampleSummary summarize(std::span<const double> values) {
  SampleSummary s;
  s.count = values.size();
  if (values.empty()) return s;
  s.mean = compensatedSum(values) / static_cast<double>(values.size());
  if (values.size() > 1) {
    std::vector<double> squares;
    squares.reserve(values.size());
    for (const double v : values) squares.push_back((v - s.mean) * (v - s.mean));
    s.stddev = std::sqrt(compensatedSum(squares) / static_cast<double>(values.size() - 1));
  }
  return s;
}

OneSidedTest welchGreater(std::span<const double> lower, std::span<const double> higher) {
  const auto a = summarize(lower);
  const auto b = summarize(higher);
  OneSidedTest out;
  out.meanLower = a.mean;
  out.meanHigher = b.mean;
  if (a.count < 2 || b.count < 2) return out;

  const double va = a.stddev * a.stddev / static_cast<double>(a.count);
  const double vb = b.stddev * b.stddev / static_cast<double>(b.count);
  const double se = std::sqrt(va + vb);
  if (se == 0.0) {
    out.t = b.mean > a.mean ? std::numeric_limits<double>::infinity() : 0.0;
    out.pValue = b.mean > a.mean ? 0.0 : 1.0;
    return out;
  }
  out.t = (b.mean - a.mean) / se;
  out.degreesOfFreedom = (va + vb) * (va + vb) /
                         (va * va / static_cast<double>(a.count - 1) + vb * vb / static_cast<double>(b.count - 1));
  const boost::math::students_t dist(out.degreesOfFreedom);
  out.pValue = boost::math::cdf(boost::math::complement(dist, out.t));
  return out;
}

}  // namespace afirl
