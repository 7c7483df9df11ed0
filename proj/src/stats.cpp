#include "selfcheck/stats.hpp"

#include <algorithm>
#include <cmath>

namespace selfcheck {

MeanStderr mean_stderr(std::span<const double> values) {
  MeanStderr out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  const double n = static_cast<double>(values.size());
  out.stderr_ = std::sqrt(ss / (n - 1.0) / n);
  return out;
}

double binomial_stderr(double rate, std::int64_t trials) {
  if (trials <= 0) return 0.0;
  return std::sqrt(rate * (1.0 - rate) / static_cast<double>(trials));
}

double sign_test_p_value(std::int64_t plus, std::int64_t minus) {
  const std::int64_t n = plus + minus;
  if (n == 0) return 1.0;
  const std::int64_t k = std::min(plus, minus);
  // Sum the binomial tail in log space; n can be in the millions.
  const double log_half_n = -static_cast<double>(n) * std::log(2.0);
  const double lg_n1 = std::lgamma(static_cast<double>(n) + 1.0);
  double tail = 0.0;
  for (std::int64_t i = 0; i <= k; ++i) {
    const double log_term = lg_n1 - std::lgamma(static_cast<double>(i) + 1.0) -
                            std::lgamma(static_cast<double>(n - i) + 1.0) +
                            log_half_n;
    tail += std::exp(log_term);
  }
  return std::min(1.0, 2.0 * tail);
}

}  // namespace selfcheck
