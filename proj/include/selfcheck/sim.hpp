#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "selfcheck/rng.hpp"
#include "selfcheck/vote.hpp"

namespace selfcheck {

// Answer 0 is correct (probability p), answer 1 is the most probable wrong
// answer (q), and the remaining 1 - p - q is split evenly over k distractors.
struct AnswerDistribution {
  double p = 0.6;
  double q = 0.4;
  int k = 3;

  // Throws std::invalid_argument on negative masses, p + q > 1, or tail mass
  // with no distractor to carry it.
  void validate() const;
};

// Two-point checker: a correct sample gets `high` with probability tpr, a
// wrong one gets `low` with probability tnr, and the other value otherwise.
struct CheckerModel {
  double tpr = 0.667;
  double tnr = 0.667;
  double high = 0.9;
  double low = 0.1;

  void validate() const;
};

struct SimResult {
  int n = 0;
  double p_wrong_majority = 0.0;  // ties count as wrong
  double p_wrong_stderr = 0.0;
  double acc_majority = 0.0;      // ties resolved by the voting tie rule
  double acc_majority_stderr = 0.0;
  double acc_weighted = 0.0;      // NaN when no checker was simulated
  double acc_weighted_stderr = 0.0;
  std::int64_t trials = 0;
  std::uint64_t seed = 0;
};

// Trials per independently seeded chunk. Chunks are the unit of parallel
// work, which keeps results identical for any worker count.
inline constexpr std::int64_t kTrialsPerChunk = 4096;

// ceil((1 - p) / q) * (q / p)^ceil(n / 2), clamped to at most 1. Throws
// InvalidRegime unless 0 < q < p.
double theoretical_bound(double p, double q, int n);

SimResult simulate_majority(const AnswerDistribution& dist, int n,
                            std::int64_t trials, std::uint64_t seed,
                            Execution execution = Execution::parallel,
                            int workers = 0);

// Majority and weighted voting scored on the same draws.
SimResult simulate_weighted(const AnswerDistribution& dist,
                            const CheckerModel& checker, int n,
                            std::int64_t trials, std::uint64_t seed,
                            Execution execution = Execution::parallel,
                            int workers = 0);

// Exact majority error (ties wrong) and tie-rule accuracy by enumerating
// all outcome count vectors. Exponential in k; meant for small n.
struct ExactMajority {
  double p_wrong = 0.0;
  double acc_majority = 0.0;
};
ExactMajority exact_majority(const AnswerDistribution& dist, int n);

// Random question populations mixing a biased subset (the modal answer is
// wrong) with ordinary questions whose modal answer is right.
struct PopulationModel {
  int questions = 200;
  double biased_fraction = 0.2;
  double biased_p_lo = 0.25, biased_p_hi = 0.35;
  // Biased questions use q = p / ratio with ratio drawn from this range.
  double biased_ratio_lo = 0.62, biased_ratio_hi = 0.72;
  double unbiased_p_lo = 0.7, unbiased_p_hi = 0.9;
  // Unbiased q is drawn as a fraction of 1 - p. The lower end 0.25 keeps q
  // no smaller than any single distractor when k = 3.
  double unbiased_q_frac_lo = 0.25, unbiased_q_frac_hi = 0.6;
  int k = 3;

  std::vector<AnswerDistribution> sample(Rng& rng) const;
};

struct PopulationPoint {
  int n = 0;
  double acc_majority = 0.0;
  double acc_weighted = 0.0;
  double gap = 0.0;  // acc_weighted - acc_majority
};

// Mean accuracies over all questions of one population.
std::vector<PopulationPoint> simulate_population(
    std::span<const AnswerDistribution> population, const CheckerModel& checker,
    std::span<const int> n_values, std::int64_t trials_per_question,
    std::uint64_t seed, Execution execution = Execution::parallel,
    int workers = 0);

// Centered moving average; returns values.size() - window + 1 points.
std::vector<double> moving_average(std::span<const double> values, int window);

// Sign changes in the first differences, ignoring zero differences.
int sign_changes(std::span<const double> values);

}  // namespace selfcheck
