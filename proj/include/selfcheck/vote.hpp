#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfcheck/checker.hpp"
#include "selfcheck/model.hpp"

namespace selfcheck {

enum class VoteMethod { majority, weighted };

std::string_view to_string(VoteMethod method);

// Relative tolerance under which two total weights count as tied.
inline constexpr double kWeightTieTolerance = 1e-9;

// Picks the candidate with the largest total weight. Candidates whose weight
// is within kWeightTieTolerance of the maximum are tied; among them the one
// whose earliest ballot has the lowest sample index wins. Shared by answer
// voting and the simulator so both follow the same tie rule.
std::size_t select_winner(std::span<const double> weights,
                          std::span<const std::int64_t> earliest_index);

struct AnswerWeight {
  NormalizedAnswer answer;
  double weight = 0.0;
  int earliest_sample_index = 0;
  int count = 0;
};

struct VoteResult {
  std::string question_id;
  NormalizedAnswer chosen;
  // One entry per distinct answer, in order of first appearance.
  std::vector<AnswerWeight> per_answer_weight;
  VoteMethod method = VoteMethod::weighted;
};

struct Ballot {
  std::optional<NormalizedAnswer> answer;  // nullopt: unparseable, skipped
  double weight = 1.0;
  int sample_index = 0;
};

// Groups ballots by answer equality and sums weights. Throws
// NoVotableSolutions when no ballot carries an answer.
VoteResult vote(std::span<const Ballot> ballots, VoteMethod method,
                std::string question_id = {});

VoteResult weighted_vote(std::span<const CheckedSolution> checked);
VoteResult majority_vote(std::span<const Solution> solutions);
VoteResult majority_vote(std::span<const CheckedSolution> checked);

nlohmann::ordered_json vote_to_json(const VoteResult& result);

// Predicted correct iff confidence > t.
bool classify(double confidence, double t);

struct LabeledConfidence {
  double confidence = 1.0;
  bool correct = false;
};

struct CheckingAccuracies {
  double acc_correct = 0.0;
  double acc_wrong = 0.0;
  double acc_mean = 0.0;
};

// Throws DegenerateSplit when either class is empty.
CheckingAccuracies checking_accuracies(std::span<const LabeledConfidence> items,
                                       double t);
CheckingAccuracies checking_accuracies(std::span<const CheckedSolution> checked,
                                       std::span<const bool> labels, double t);

// Fraction of predicted-correct solutions that are really correct; nullopt
// when nothing is predicted correct.
std::optional<double> precision_at_t(std::span<const LabeledConfidence> items,
                                     double t);

// labels[i] = checked[i]'s extracted answer equals the gold answer.
std::vector<bool> correctness_labels(std::span<const CheckedSolution> checked,
                                     const std::map<std::string, Question>& questions);

struct QuestionPool {
  std::optional<NormalizedAnswer> gold;
  std::vector<CheckedSolution> samples;
};

struct CurvePoint {
  int n = 0;
  double weighted_mean = 0.0;
  double weighted_stderr = 0.0;
  double majority_mean = 0.0;
  double majority_stderr = 0.0;
  double delta = 0.0;  // weighted_mean - majority_mean
  // Per-question sign test on the weighted-vs-majority hit rate.
  std::int64_t questions_better = 0;
  std::int64_t questions_worse = 0;
  double sign_test_p = 1.0;
};

enum class Execution { serial, parallel };

// For every n: each question draws n_resamples subsets of n samples (without
// replacement inside a subset), votes both ways, and scores against gold.
// Accuracy per resample is averaged over questions; mean and standard error
// are over resamples. Output does not depend on the worker count. Throws
// PoolTooSmall when some question has fewer than max(n_values) samples.
std::vector<CurvePoint> accuracy_vs_samples(std::span<const QuestionPool> pools,
                                            std::span<const int> n_values,
                                            int n_resamples, std::uint64_t seed,
                                            Execution execution = Execution::parallel,
                                            int workers = 0);

struct GridSearchResult {
  IntegrationParams params;
  double threshold = 0.0;
  double acc_mean = 0.0;
};

struct LabeledVerdicts {
  std::vector<Verdict> verdicts;
  bool correct = false;
};

// Best balanced accuracy over thresholds {0, 1} and every distinct
// confidence value; ties go to the lowest threshold.
std::pair<double, double> best_threshold(std::span<const LabeledConfidence> items);

// Returns the first grid point reaching the highest balanced accuracy.
// Throws DegenerateSplit unless both classes are present.
GridSearchResult grid_search_lambdas(std::span<const LabeledVerdicts> validation,
                                     std::span<const IntegrationParams> grid);

}  // namespace selfcheck
