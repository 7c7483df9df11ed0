#include "selfcheck/vote.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <omp.h>

#include "selfcheck/errors.hpp"
#include "selfcheck/io.hpp"
#include "selfcheck/rng.hpp"
#include "selfcheck/stats.hpp"

namespace selfcheck {

std::string_view to_string(VoteMethod method) {
  return method == VoteMethod::majority ? "majority" : "weighted";
}

std::size_t select_winner(std::span<const double> weights,
                          std::span<const std::int64_t> earliest_index) {
  if (weights.empty()) throw NoVotableSolutions("no candidates to vote on");
  const double best = *std::max_element(weights.begin(), weights.end());
  const double slack = kWeightTieTolerance * std::abs(best);
  std::size_t winner = weights.size();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] < best - slack) continue;
    if (winner == weights.size() || earliest_index[i] < earliest_index[winner]) {
      winner = i;
    }
  }
  return winner;
}

VoteResult vote(std::span<const Ballot> ballots, VoteMethod method,
                std::string question_id) {
  VoteResult result;
  result.question_id = std::move(question_id);
  result.method = method;
  for (const Ballot& b : ballots) {
    if (!b.answer) continue;
    if (b.weight < 0.0 || !std::isfinite(b.weight)) {
      throw std::invalid_argument("vote weights must be finite and >= 0");
    }
    const double w = method == VoteMethod::majority ? 1.0 : b.weight;
    auto it = std::find_if(
        result.per_answer_weight.begin(), result.per_answer_weight.end(),
        [&](const AnswerWeight& a) { return a.answer == *b.answer; });
    if (it == result.per_answer_weight.end()) {
      result.per_answer_weight.push_back({*b.answer, w, b.sample_index, 1});
    } else {
      it->weight += w;
      it->earliest_sample_index =
          std::min(it->earliest_sample_index, b.sample_index);
      ++it->count;
    }
  }
  if (result.per_answer_weight.empty()) {
    throw NoVotableSolutions("no solution with a parseable answer" +
                             (result.question_id.empty()
                                  ? std::string()
                                  : " for question " + result.question_id));
  }
  std::vector<double> weights;
  std::vector<std::int64_t> earliest;
  for (const AnswerWeight& a : result.per_answer_weight) {
    weights.push_back(a.weight);
    earliest.push_back(a.earliest_sample_index);
  }
  result.chosen = result.per_answer_weight[select_winner(weights, earliest)].answer;
  return result;
}

namespace {

std::vector<Ballot> ballots_of(std::span<const CheckedSolution> checked) {
  std::vector<Ballot> ballots;
  ballots.reserve(checked.size());
  for (const CheckedSolution& c : checked) {
    ballots.push_back({c.solution.extracted_answer, c.confidence.value,
                       c.solution.sample_index});
  }
  return ballots;
}

std::string question_id_of(std::span<const CheckedSolution> checked) {
  return checked.empty() ? std::string() : checked.front().solution.question_id;
}

}  // namespace

VoteResult weighted_vote(std::span<const CheckedSolution> checked) {
  return vote(ballots_of(checked), VoteMethod::weighted, question_id_of(checked));
}

VoteResult majority_vote(std::span<const CheckedSolution> checked) {
  return vote(ballots_of(checked), VoteMethod::majority, question_id_of(checked));
}

VoteResult majority_vote(std::span<const Solution> solutions) {
  std::vector<Ballot> ballots;
  for (const Solution& s : solutions) {
    ballots.push_back({s.extracted_answer, 1.0, s.sample_index});
  }
  return vote(ballots, VoteMethod::majority,
              solutions.empty() ? std::string() : solutions.front().question_id);
}

nlohmann::ordered_json vote_to_json(const VoteResult& result) {
  nlohmann::ordered_json j;
  j["question_id"] = result.question_id;
  j["method"] = std::string(to_string(result.method));
  j["chosen"] = answer_to_json(result.chosen);
  nlohmann::ordered_json weights = nlohmann::ordered_json::array();
  for (const AnswerWeight& a : result.per_answer_weight) {
    weights.push_back({{"answer", a.answer.canonical},
                       {"weight", a.weight},
                       {"count", a.count},
                       {"earliest_sample_index", a.earliest_sample_index}});
  }
  j["per_answer_weight"] = std::move(weights);
  return j;
}

bool classify(double confidence, double t) { return confidence > t; }

CheckingAccuracies checking_accuracies(std::span<const LabeledConfidence> items,
                                       double t) {
  std::int64_t n_correct = 0, n_wrong = 0, hit_correct = 0, hit_wrong = 0;
  for (const LabeledConfidence& item : items) {
    const bool predicted = classify(item.confidence, t);
    if (item.correct) {
      ++n_correct;
      hit_correct += predicted ? 1 : 0;
    } else {
      ++n_wrong;
      hit_wrong += predicted ? 0 : 1;
    }
  }
  if (n_correct == 0 || n_wrong == 0) {
    throw DegenerateSplit("checking accuracy needs both correct and wrong solutions");
  }
  CheckingAccuracies acc;
  acc.acc_correct = static_cast<double>(hit_correct) / static_cast<double>(n_correct);
  acc.acc_wrong = static_cast<double>(hit_wrong) / static_cast<double>(n_wrong);
  acc.acc_mean = (acc.acc_correct + acc.acc_wrong) / 2.0;
  return acc;
}

CheckingAccuracies checking_accuracies(std::span<const CheckedSolution> checked,
                                       std::span<const bool> labels, double t) {
  if (checked.size() != labels.size()) {
    throw std::invalid_argument("one label per checked solution required");
  }
  std::vector<LabeledConfidence> items;
  for (std::size_t i = 0; i < checked.size(); ++i) {
    items.push_back({checked[i].confidence.value, labels[i]});
  }
  return checking_accuracies(items, t);
}

std::optional<double> precision_at_t(std::span<const LabeledConfidence> items,
                                     double t) {
  std::int64_t predicted = 0, hits = 0;
  for (const LabeledConfidence& item : items) {
    if (!classify(item.confidence, t)) continue;
    ++predicted;
    hits += item.correct ? 1 : 0;
  }
  if (predicted == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(predicted);
}

std::vector<bool> correctness_labels(
    std::span<const CheckedSolution> checked,
    const std::map<std::string, Question>& questions) {
  std::vector<bool> labels;
  labels.reserve(checked.size());
  for (const CheckedSolution& c : checked) {
    auto it = questions.find(c.solution.question_id);
    if (it == questions.end()) {
      throw MissingInput("no question with id " + c.solution.question_id);
    }
    const auto& gold = it->second.gold_answer;
    const auto& got = c.solution.extracted_answer;
    labels.push_back(gold && got && *gold == *got);
  }
  return labels;
}

namespace {

struct PoolHits {
  std::vector<std::uint8_t> weighted;  // one entry per resample
  std::vector<std::uint8_t> majority;
};

bool vote_hits(std::span<const Ballot> subset, VoteMethod method,
               const std::optional<NormalizedAnswer>& gold) {
  if (!gold) return false;
  try {
    return vote(subset, method).chosen == *gold;
  } catch (const NoVotableSolutions&) {
    return false;
  }
}

PoolHits resample_question(const std::vector<Ballot>& ballots,
                           const std::optional<NormalizedAnswer>& gold, int n,
                           int n_resamples, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> order(ballots.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Ballot> subset(static_cast<std::size_t>(n));
  PoolHits hits;
  hits.weighted.resize(n_resamples);
  hits.majority.resize(n_resamples);
  for (int r = 0; r < n_resamples; ++r) {
    // Partial Fisher-Yates: the first n positions become a uniform subset.
    for (int i = 0; i < n; ++i) {
      const std::size_t j = i + uniform_index(rng, order.size() - i);
      std::swap(order[i], order[j]);
      subset[i] = ballots[order[i]];
    }
    hits.weighted[r] = vote_hits(subset, VoteMethod::weighted, gold);
    hits.majority[r] = vote_hits(subset, VoteMethod::majority, gold);
  }
  return hits;
}

}  // namespace

std::vector<CurvePoint> accuracy_vs_samples(std::span<const QuestionPool> pools,
                                            std::span<const int> n_values,
                                            int n_resamples, std::uint64_t seed,
                                            Execution execution, int workers) {
  if (n_resamples < 1) throw std::invalid_argument("n_resamples must be >= 1");
  for (int n : n_values) {
    if (n < 1) throw std::invalid_argument("sample counts must be >= 1");
    for (std::size_t q = 0; q < pools.size(); ++q) {
      if (static_cast<int>(pools[q].samples.size()) < n) {
        throw PoolTooSmall("question " + std::to_string(q) + " has " +
                           std::to_string(pools[q].samples.size()) +
                           " samples, need " + std::to_string(n));
      }
    }
  }
  std::vector<std::vector<Ballot>> ballots;
  ballots.reserve(pools.size());
  for (const QuestionPool& pool : pools) ballots.push_back(ballots_of(pool.samples));

  const int n_questions = static_cast<int>(pools.size());
  std::vector<CurvePoint> curve;
  for (std::size_t ni = 0; ni < n_values.size(); ++ni) {
    const int n = n_values[ni];
    std::vector<PoolHits> hits(pools.size());
    auto run = [&](int q) {
      hits[q] = resample_question(ballots[q], pools[q].gold, n, n_resamples,
                                  derive_seed(seed, static_cast<std::uint64_t>(q),
                                              static_cast<std::uint64_t>(n)));
    };
    if (execution == Execution::serial) {
      for (int q = 0; q < n_questions; ++q) run(q);
    } else {
      const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for num_threads(threads) schedule(dynamic, 1)
      for (int q = 0; q < n_questions; ++q) run(q);
    }

    CurvePoint point;
    point.n = n;
    std::vector<double> acc_w(n_resamples, 0.0), acc_m(n_resamples, 0.0);
    for (int q = 0; q < n_questions; ++q) {
      std::int64_t w = 0, m = 0;
      for (int r = 0; r < n_resamples; ++r) {
        acc_w[r] += hits[q].weighted[r];
        acc_m[r] += hits[q].majority[r];
        w += hits[q].weighted[r];
        m += hits[q].majority[r];
      }
      if (w > m) ++point.questions_better;
      if (w < m) ++point.questions_worse;
    }
    if (n_questions > 0) {
      for (int r = 0; r < n_resamples; ++r) {
        acc_w[r] /= n_questions;
        acc_m[r] /= n_questions;
      }
    }
    const MeanStderr w = mean_stderr(acc_w);
    const MeanStderr m = mean_stderr(acc_m);
    point.weighted_mean = w.mean;
    point.weighted_stderr = w.stderr_;
    point.majority_mean = m.mean;
    point.majority_stderr = m.stderr_;
    point.delta = w.mean - m.mean;
    point.sign_test_p =
        sign_test_p_value(point.questions_better, point.questions_worse);
    curve.push_back(point);
  }
  return curve;
}

std::pair<double, double> best_threshold(std::span<const LabeledConfidence> items) {
  std::set<double> candidates{0.0, 1.0};
  for (const LabeledConfidence& item : items) candidates.insert(item.confidence);
  double best_t = 0.0;
  double best_acc = -1.0;
  for (double t : candidates) {
    const double acc = checking_accuracies(items, t).acc_mean;
    if (acc > best_acc + 1e-12) {
      best_acc = acc;
      best_t = t;
    }
  }
  return {best_t, best_acc};
}

GridSearchResult grid_search_lambdas(std::span<const LabeledVerdicts> validation,
                                     std::span<const IntegrationParams> grid) {
  if (grid.empty()) throw std::invalid_argument("empty lambda grid");
  const bool has_correct = std::any_of(validation.begin(), validation.end(),
                                       [](const auto& v) { return v.correct; });
  const bool has_wrong = std::any_of(validation.begin(), validation.end(),
                                     [](const auto& v) { return !v.correct; });
  if (!has_correct || !has_wrong) {
    throw DegenerateSplit("grid search needs both correct and wrong solutions");
  }
  GridSearchResult best;
  best.acc_mean = -1.0;
  std::vector<LabeledConfidence> items(validation.size());
  for (const IntegrationParams& params : grid) {
    for (std::size_t i = 0; i < validation.size(); ++i) {
      items[i] = {integrate(validation[i].verdicts, params), validation[i].correct};
    }
    const auto [t, acc] = best_threshold(items);
    if (acc > best.acc_mean + 1e-12) best = {params, t, acc};
  }
  return best;
}

}  // namespace selfcheck
