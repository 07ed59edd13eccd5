#pragma once

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "afirl/advisor.hpp"
#include "afirl/affordance.hpp"
#include "afirl/random.hpp"
#include "afirl/scenario.hpp"

namespace afirl {

/// Which recognition result the learner treats as the advice.
enum class AdviceChannel : std::uint8_t { MultiModal, AudioOnly, VisionOnly };

std::string toString(AdviceChannel c);
AdviceChannel parseAdviceChannel(std::string_view text);

struct LearnerConfig {
  double alpha = 0.3;
  double gamma = 0.9;
  double epsilon = 0.1;
  double feedbackProbability = 0.3;  // per step
  double thetaMin = 0.25;            // advice needs confidence strictly above this
  double eta = 1.0;                  // probability the affordance check runs
  bool useFeedback = false;
  bool useAffordances = false;
  AdviceChannel channel = AdviceChannel::MultiModal;
  int maxStepsPerEpisode = 100;

  /// Throws std::invalid_argument for out-of-range values.
  void validate() const;
};

/// Tabular action values over the states of a StateSpace, zero-initialized.
class QTable {
 public:
  /// The space must outlive the table.
  explicit QTable(const StateSpace& space);
  static QTable fromSolution(const StateSpace& space, const OptimalSolution& solution);

  /// Zero for states outside the space.
  double get(const WorldState& s, Action a) const;
  /// Throws std::out_of_range for states outside the space.
  void set(const WorldState& s, Action a, double value);

  /// Highest-valued action; ties go to the earliest action in kAllActions.
  Action greedy(const WorldState& s) const;
  /// Greedy restricted to `candidates` (non-empty, in kAllActions order).
  Action greedyAmong(const WorldState& s, std::span<const Action> candidates) const;

  const StateSpace& space() const { return *space_; }
  const std::vector<std::array<double, kActionCount>>& values() const { return values_; }
  bool operator==(const QTable& other) const { return values_ == other.values_; }

 private:
  const StateSpace* space_;
  std::vector<std::array<double, kActionCount>> values_;
};

/// Advice as seen by the learner after channel selection.
struct AdviceSignal {
  Action label = Action::GoLeft;
  double confidence = 0.0;
  std::optional<IntegratedFeedback> fused;
};

AdviceSignal adviceSignal(const AdviceEvent& event, AdviceChannel channel);

struct Selection {
  Action action = Action::GoLeft;
  bool adviceOffered = false;
  bool adviceUsed = false;
  bool explored = false;
  bool affordanceChecked = false;
  bool affordanceBypassed = false;
  std::optional<Action> bypassedAction;  // the candidate that was replaced
  std::optional<AdviceSignal> advice;
};

/// Decision pipeline for one step, given the advice available (if any):
///   1. advice above thetaMin becomes the candidate;
///   2. otherwise epsilon-greedy over q;
///   3. with probability eta, a candidate predicted to fail is replaced by the
///      greedy (or, after exploration, uniformly chosen) action among those
///      not predicted to fail. If every action is predicted to fail the
///      candidate stands.
Selection selectAction(const QTable& q, const WorldState& s, const LearnerConfig& cfg,
                       const std::optional<AdviceSignal>& advice, const FailurePredictor* predictor,
                       Rng& rng);

/// Batch-mode selection: with feedbackProbability (when feedback is enabled)
/// the advisor is consulted first, then the pipeline above runs.
Selection selectAction(const QTable& q, const WorldState& s, const LearnerConfig& cfg,
                       const Advisor* advisor, const FailurePredictor* predictor, Rng& rng);

/// One-step SARSA update; `next` empty means the transition was terminal and
/// bootstraps from zero.
void sarsaUpdate(QTable& q, const WorldState& s, Action a, double reward,
                 const std::optional<std::pair<WorldState, Action>>& next, const LearnerConfig& cfg);

struct StepRecord {
  int step = 0;  // 1-based within the episode
  WorldState state;
  Action action = Action::GoLeft;
  bool adviceOffered = false;
  bool adviceUsed = false;
  bool affordanceBypassed = false;
  std::optional<Action> bypassedAction;
  std::optional<AdviceSignal> advice;
  double reward = 0.0;
  OutcomeKind outcome = OutcomeKind::Continue;
  WorldState next;
};

struct EpisodeResult {
  Location start = Location::Left;
  double reward = 0.0;  // undiscounted sum
  int steps = 0;
  OutcomeKind end = OutcomeKind::Continue;  // Continue means truncated
  std::vector<StepRecord> trace;

  bool truncated() const { return end == OutcomeKind::Continue; }
};

/// Called at every decision point; returns the advice to consider, if any.
using AdviceProvider = std::function<std::optional<AdviceSignal>(const WorldState&, Rng&)>;

/// Provider that consults `advisor` with the configured per-step probability.
AdviceProvider batchAdviceProvider(const Advisor* advisor, const LearnerConfig& cfg);

/// Step-at-a-time SARSA episode.
///
/// The action for the current state is chosen at the start of advance(), so
/// advice arriving between steps applies to the state the trainer last saw.
/// The update of the previous pair is applied right after that choice, which
/// is the ordinary SARSA order.
class EpisodeStepper {
 public:
  /// All referenced objects must outlive the stepper.
  EpisodeStepper(QTable& q, const LearnerConfig& cfg, const FailurePredictor* predictor, Rng& rng);

  void begin(Location start);
  /// Draws the goblet side uniformly.
  void begin();

  /// Executes one step. Must not be called after finished().
  StepRecord advance(const AdviceProvider& provider);

  bool finished() const { return finished_; }
  const WorldState& state() const { return state_; }
  const EpisodeResult& result() const { return result_; }

 private:
  QTable* q_;
  const LearnerConfig* cfg_;
  const FailurePredictor* predictor_;
  Rng* rng_;
  WorldState state_;
  std::optional<std::pair<WorldState, Action>> previous_;
  double previousReward_ = 0.0;
  bool finished_ = true;
  EpisodeResult result_;
};

/// Runs one full episode from a uniformly drawn start, updating q in place.
EpisodeResult runEpisode(QTable& q, const LearnerConfig& cfg, const Advisor* advisor,
                         const FailurePredictor* predictor, Rng& rng, bool recordTrace = true);

}  // namespace afirl
