#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "afirl/advisor.hpp"
#include "afirl/affordance.hpp"
#include "afirl/learner.hpp"
#include "afirl/scenario.hpp"

namespace afirl {

/// The four learning conditions: autonomous RL, interactive RL, and each with
/// the affordance check.
enum class Condition : std::uint8_t { RL, IRL, RLAff, IRLAff };

std::string toString(Condition c);  // "rl", "irl", "rl-aff", "irl-aff"
Condition parseCondition(std::string_view text);

struct ExperimentConfig {
  Condition condition = Condition::IRLAff;
  int agents = 100;
  int episodes = 500;
  LearnerConfig learner;  // useFeedback/useAffordances come from `condition`
  ChannelNoise noise;
  int smoothingWindow = 10;
  std::uint64_t masterSeed = 1;
  unsigned workers = 0;  // 0 = hardware concurrency
  bool startFromOptimalQ = false;
  std::string param;  // free-form run label; derived from the config when empty

  /// Throws std::invalid_argument on bad values.
  void validate() const;
  LearnerConfig effectiveLearner() const;
  std::string paramLabel() const;
};

/// Shared, immutable inputs of every agent: state space, oracle solution,
/// lexicon, and the failure predictor used by affordance conditions.
class ExperimentContext {
 public:
  explicit ExperimentContext(CommandLexicon lexicon = CommandLexicon::defaults());
  ExperimentContext(const ExperimentContext&) = delete;
  ExperimentContext& operator=(const ExperimentContext&) = delete;

  /// Installs a trained network as the failure predictor.
  void setAffordanceNet(AffordanceNet net);
  void setFailurePredictor(std::shared_ptr<const FailurePredictor> predictor);

  const StateSpace& space() const { return space_; }
  const OptimalSolution& solution() const { return solution_; }
  const CommandLexicon& lexicon() const { return lexicon_; }
  const FailurePredictor* predictor() const { return predictor_.get(); }
  std::shared_ptr<const FailurePredictor> sharedPredictor() const { return predictor_; }

 private:
  StateSpace space_;
  OptimalSolution solution_;
  CommandLexicon lexicon_;
  std::shared_ptr<const FailurePredictor> predictor_;
};

struct LearningCurve {
  std::string condition;
  std::string param;
  std::vector<double> rawMean;        // per episode, mean over agents
  std::vector<double> smoothed;       // trailing moving average of rawMean
  std::vector<double> standardError;  // per episode, over agents
  std::vector<double> agentCumulative;  // per agent, sum over episodes

  /// Mean over agents of the cumulative reward.
  double meanCumulative() const;
  double cumulativeStandardError() const;
  /// First episode (1-based) whose smoothed reward reaches `fraction` of the
  /// best smoothed reward, i.e. smoothed >= best - (1 - fraction)|best|.
  /// 0 for an empty curve.
  int episodesToReach(double fraction) const;
  bool operator==(const LearningCurve&) const = default;
};

/// splitmix64 finalizer.
constexpr std::uint64_t mixSeed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of agent `index`: the mixed master seed XOR the agent index. Mixing
/// first keeps small master seeds from sharing agent seed sets (1 ^ i and
/// 2 ^ i cover the same range).
constexpr std::uint64_t agentSeed(std::uint64_t masterSeed, std::uint64_t index) {
  return mixSeed(masterSeed) ^ index;
}

/// Episode rewards, one row per agent in agent-index order.
std::vector<std::vector<double>> runAgents(const ExperimentConfig& cfg, const ExperimentContext& ctx);

/// Mean, standard error and smoothing over a reward matrix (agents x episodes).
LearningCurve aggregate(const std::vector<std::vector<double>>& rewards, int smoothingWindow,
                        std::string condition = {}, std::string param = {});

LearningCurve runCondition(const ExperimentConfig& cfg, const ExperimentContext& ctx);

/// Trailing moving average; the first window-1 entries average what exists.
/// Throws std::invalid_argument for window < 1.
std::vector<double> smooth(std::span<const double> raw, int window);

enum class SweepParameter : std::uint8_t { ThetaMin, Eta };

std::string toString(SweepParameter p);
SweepParameter parseSweepParameter(std::string_view text);

struct SweepPoint {
  double value = 0.0;
  LearningCurve curve;
};

/// One runCondition per value with the base config's master seed.
std::vector<SweepPoint> sweep(const ExperimentConfig& base, SweepParameter parameter,
                              std::span<const double> values, const ExperimentContext& ctx);

/// CSV header: episode,condition,param,raw_mean,smoothed_mean,stderr.
/// One row per (curve, episode). Throws std::runtime_error naming the file if
/// it cannot be written or parsed.
void writeCurvesCsv(std::span<const LearningCurve> curves, const std::filesystem::path& path);
std::vector<LearningCurve> readCurvesCsv(const std::filesystem::path& path);

}  // namespace afirl
