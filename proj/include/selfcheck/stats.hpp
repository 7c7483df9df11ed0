#pragma once

#include <cstdint>
#include <span>

namespace selfcheck {

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;  // sample standard deviation / sqrt(count)
};

MeanStderr mean_stderr(std::span<const double> values);

// Standard error of a Bernoulli rate estimated from `trials` draws.
double binomial_stderr(double rate, std::int64_t trials);

// Two-sided exact sign test: P(at least as extreme as min(plus, minus))
// under Binomial(plus + minus, 1/2). Returns 1 when there are no non-ties.
double sign_test_p_value(std::int64_t plus, std::int64_t minus);

}  // namespace selfcheck
