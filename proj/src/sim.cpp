#include "selfcheck/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <omp.h>

#include "selfcheck/errors.hpp"
#include "selfcheck/stats.hpp"

namespace selfcheck {

void AnswerDistribution::validate() const {
  if (!(p >= 0.0 && q >= 0.0) || p + q > 1.0 + 1e-12) {
    throw std::invalid_argument("answer distribution needs p, q >= 0 and p + q <= 1");
  }
  if (k < 0) throw std::invalid_argument("distractor count must be >= 0");
  if (k == 0 && 1.0 - p - q > 1e-12) {
    throw std::invalid_argument("tail mass 1 - p - q needs at least one distractor");
  }
}

void CheckerModel::validate() const {
  auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!unit(tpr) || !unit(tnr)) {
    throw std::invalid_argument("checker rates must lie in [0, 1]");
  }
  if (!(high >= 0.0 && high <= 1.0 && low >= 0.0 && low <= 1.0)) {
    throw std::invalid_argument("checker confidences must lie in [0, 1]");
  }
}

double theoretical_bound(double p, double q, int n) {
  if (!(q > 0.0) || !(q < p)) {
    throw InvalidRegime("bound needs 0 < q < p");
  }
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  const double ratio = (1.0 - p) / q;
  // Absorb representation error so 0.1 / 0.05 stays 2.
  const double multiplier = std::max(1.0, std::ceil(ratio - 1e-9 * std::max(1.0, ratio)));
  const double bound = multiplier * std::pow(q / p, (n + 1) / 2);
  return std::min(1.0, bound);
}

namespace {

struct Counts {
  std::int64_t majority_wrong = 0;
  std::int64_t majority_hit = 0;
  std::int64_t weighted_hit = 0;

  Counts& operator+=(const Counts& o) {
    majority_wrong += o.majority_wrong;
    majority_hit += o.majority_hit;
    weighted_hit += o.weighted_hit;
    return *this;
  }
};

class Sampler {
 public:
  explicit Sampler(const AnswerDistribution& dist)
      : p_(dist.p), pq_(dist.p + dist.q), tail_(1.0 - dist.p - dist.q), k_(dist.k) {}

  int labels() const { return k_ + 2; }

  int draw(Rng& rng) const {
    const double u = uniform01(rng);
    if (u < p_) return 0;
    if (u < pq_ || tail_ <= 0.0 || k_ == 0) return 1;
    const int j = static_cast<int>((u - pq_) / tail_ * k_);
    return 2 + std::min(j, k_ - 1);
  }

 private:
  double p_, pq_, tail_;
  int k_;
};

// Runs `trials` draws of n samples. A null checker skips weighted voting
// (and its random draws).
Counts run_chunk(const Sampler& sampler, const CheckerModel* checker, int n,
                 std::int64_t trials, Rng& rng) {
  const int m = sampler.labels();
  std::vector<double> count(m), weight(m);
  std::vector<std::int64_t> earliest(m);
  Counts out;
  for (std::int64_t t = 0; t < trials; ++t) {
    std::fill(count.begin(), count.end(), 0.0);
    std::fill(weight.begin(), weight.end(), 0.0);
    std::fill(earliest.begin(), earliest.end(), std::numeric_limits<std::int64_t>::max());
    for (int i = 0; i < n; ++i) {
      const int a = sampler.draw(rng);
      count[a] += 1.0;
      earliest[a] = std::min<std::int64_t>(earliest[a], i);
      if (checker) {
        const double u = uniform01(rng);
        double w;
        if (a == 0) {
          w = u < checker->tpr ? checker->high : checker->low;
        } else {
          w = u < checker->tnr ? checker->low : checker->high;
        }
        weight[a] += w;
      }
    }
    bool unique_correct = true;
    for (int a = 1; a < m; ++a) {
      if (count[a] >= count[0]) {
        unique_correct = false;
        break;
      }
    }
    out.majority_wrong += unique_correct ? 0 : 1;

    // Labels never drawn must not win a tie, so restrict to seen ones.
    std::vector<double> seen_count, seen_weight;
    std::vector<std::int64_t> seen_earliest;
    std::vector<int> seen_label;
    for (int a = 0; a < m; ++a) {
      if (count[a] == 0.0) continue;
      seen_label.push_back(a);
      seen_count.push_back(count[a]);
      seen_weight.push_back(weight[a]);
      seen_earliest.push_back(earliest[a]);
    }
    out.majority_hit += seen_label[select_winner(seen_count, seen_earliest)] == 0;
    if (checker) {
      out.weighted_hit += seen_label[select_winner(seen_weight, seen_earliest)] == 0;
    }
  }
  return out;
}

Counts run_trials(const AnswerDistribution& dist, const CheckerModel* checker,
                  int n, std::int64_t trials, std::uint64_t seed,
                  Execution execution, int workers) {
  const Sampler sampler(dist);
  const std::int64_t chunks = (trials + kTrialsPerChunk - 1) / kTrialsPerChunk;
  std::vector<Counts> per_chunk(static_cast<std::size_t>(chunks));
  auto run = [&](std::int64_t c) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    const std::int64_t size = std::min(kTrialsPerChunk, trials - c * kTrialsPerChunk);
    per_chunk[c] = run_chunk(sampler, checker, n, size, rng);
  };
  if (execution == Execution::serial) {
    for (std::int64_t c = 0; c < chunks; ++c) run(c);
  } else {
    const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for num_threads(threads) schedule(static)
    for (std::int64_t c = 0; c < chunks; ++c) run(c);
  }
  Counts total;
  for (const Counts& c : per_chunk) total += c;
  return total;
}

SimResult to_result(const Counts& counts, bool weighted, int n,
                    std::int64_t trials, std::uint64_t seed) {
  const double t = static_cast<double>(trials);
  SimResult r;
  r.n = n;
  r.trials = trials;
  r.seed = seed;
  r.p_wrong_majority = static_cast<double>(counts.majority_wrong) / t;
  r.p_wrong_stderr = binomial_stderr(r.p_wrong_majority, trials);
  r.acc_majority = static_cast<double>(counts.majority_hit) / t;
  r.acc_majority_stderr = binomial_stderr(r.acc_majority, trials);
  if (weighted) {
    r.acc_weighted = static_cast<double>(counts.weighted_hit) / t;
    r.acc_weighted_stderr = binomial_stderr(r.acc_weighted, trials);
  } else {
    r.acc_weighted = std::numeric_limits<double>::quiet_NaN();
    r.acc_weighted_stderr = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

void check_run_args(int n, std::int64_t trials) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
}

}  // namespace

SimResult simulate_majority(const AnswerDistribution& dist, int n,
                            std::int64_t trials, std::uint64_t seed,
                            Execution execution, int workers) {
  dist.validate();
  check_run_args(n, trials);
  return to_result(run_trials(dist, nullptr, n, trials, seed, execution, workers),
                   false, n, trials, seed);
}

SimResult simulate_weighted(const AnswerDistribution& dist,
                            const CheckerModel& checker, int n,
                            std::int64_t trials, std::uint64_t seed,
                            Execution execution, int workers) {
  dist.validate();
  checker.validate();
  check_run_args(n, trials);
  return to_result(run_trials(dist, &checker, n, trials, seed, execution, workers),
                   true, n, trials, seed);
}

namespace {

void enumerate_counts(std::vector<int>& counts, int label, int remaining,
                      const std::vector<double>& log_probs, double log_n_fact,
                      ExactMajority& out) {
  const int m = static_cast<int>(counts.size());
  if (label == m - 1) {
    counts[label] = remaining;
    double log_p = log_n_fact;
    for (int a = 0; a < m; ++a) {
      if (counts[a] == 0) continue;
      if (log_probs[a] == -INFINITY) return;  // impossible outcome
      log_p += counts[a] * log_probs[a] - std::lgamma(counts[a] + 1.0);
    }
    const double prob = std::exp(log_p);
    const int top = *std::max_element(counts.begin(), counts.end());
    int tied_mass = 0;
    int tied_labels = 0;
    for (int c : counts) {
      if (c == top) {
        tied_mass += c;
        ++tied_labels;
      }
    }
    if (counts[0] != top || tied_labels > 1) out.p_wrong += prob;
    // Among the tied labels, the one drawn first wins; by exchangeability
    // that is label 0 with probability c0 / (sum of tied counts).
    if (counts[0] == top) {
      out.acc_majority += prob * counts[0] / static_cast<double>(tied_mass);
    }
    return;
  }
  for (int c = 0; c <= remaining; ++c) {
    counts[label] = c;
    enumerate_counts(counts, label + 1, remaining - c, log_probs, log_n_fact, out);
  }
}

}  // namespace

ExactMajority exact_majority(const AnswerDistribution& dist, int n) {
  dist.validate();
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  const int m = dist.k + 2;
  std::vector<double> log_probs(m);
  const double tail = std::max(0.0, 1.0 - dist.p - dist.q);
  auto safe_log = [](double x) { return x > 0.0 ? std::log(x) : -INFINITY; };
  log_probs[0] = safe_log(dist.p);
  log_probs[1] = safe_log(dist.q);
  for (int a = 2; a < m; ++a) log_probs[a] = safe_log(tail / dist.k);
  std::vector<int> counts(m, 0);
  ExactMajority out;
  enumerate_counts(counts, 0, n, log_probs, std::lgamma(n + 1.0), out);
  return out;
}

std::vector<AnswerDistribution> PopulationModel::sample(Rng& rng) const {
  std::vector<AnswerDistribution> population;
  population.reserve(questions);
  for (int i = 0; i < questions; ++i) {
    AnswerDistribution d;
    d.k = k;
    if (uniform01(rng) < biased_fraction) {
      d.p = uniform_real(rng, biased_p_lo, biased_p_hi);
      d.q = std::min(1.0 - d.p, d.p / uniform_real(rng, biased_ratio_lo, biased_ratio_hi));
    } else {
      d.p = uniform_real(rng, unbiased_p_lo, unbiased_p_hi);
      d.q = (1.0 - d.p) * uniform_real(rng, unbiased_q_frac_lo, unbiased_q_frac_hi);
    }
    population.push_back(d);
  }
  return population;
}

std::vector<PopulationPoint> simulate_population(
    std::span<const AnswerDistribution> population, const CheckerModel& checker,
    std::span<const int> n_values, std::int64_t trials_per_question,
    std::uint64_t seed, Execution execution, int workers) {
  checker.validate();
  for (const AnswerDistribution& d : population) d.validate();
  for (int n : n_values) check_run_args(n, trials_per_question);

  const int n_questions = static_cast<int>(population.size());
  const std::size_t n_count = n_values.size();
  // hits[q * n_count + j] for question q and n_values[j].
  std::vector<Counts> hits(population.size() * n_count);
  auto run = [&](int q) {
    const Sampler sampler(population[q]);
    for (std::size_t j = 0; j < n_count; ++j) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(q),
                          static_cast<std::uint64_t>(n_values[j])));
      hits[q * n_count + j] =
          run_chunk(sampler, &checker, n_values[j], trials_per_question, rng);
    }
  };
  if (execution == Execution::serial) {
    for (int q = 0; q < n_questions; ++q) run(q);
  } else {
    const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for num_threads(threads) schedule(dynamic, 1)
    for (int q = 0; q < n_questions; ++q) run(q);
  }

  std::vector<PopulationPoint> points;
  const double denom = static_cast<double>(trials_per_question) * std::max(1, n_questions);
  for (std::size_t j = 0; j < n_count; ++j) {
    Counts total;
    for (int q = 0; q < n_questions; ++q) total += hits[q * n_count + j];
    PopulationPoint point;
    point.n = n_values[j];
    point.acc_majority = static_cast<double>(total.majority_hit) / denom;
    point.acc_weighted = static_cast<double>(total.weighted_hit) / denom;
    point.gap = point.acc_weighted - point.acc_majority;
    points.push_back(point);
  }
  return points;
}

std::vector<double> moving_average(std::span<const double> values, int window) {
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  std::vector<double> out;
  if (static_cast<int>(values.size()) < window) return out;
  for (std::size_t i = 0; i + window <= values.size(); ++i) {
    double sum = 0.0;
    for (int j = 0; j < window; ++j) sum += values[i + j];
    out.push_back(sum / window);
  }
  return out;
}

int sign_changes(std::span<const double> values) {
  int changes = 0;
  int last = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    const double d = values[i] - values[i - 1];
    const int s = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
    if (s == 0) continue;
    if (last != 0 && s != last) ++changes;
    last = s;
  }
  return changes;
}

}  // namespace selfcheck
