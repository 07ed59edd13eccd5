#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "afirl/fusion.hpp"
#include "afirl/random.hpp"
#include "afirl/scenario.hpp"

namespace afirl {

/// Corruption applied to the trainer's advice before recognition.
struct ChannelNoise {
  double audioCharErrorRate = 0.05;   // per-character substitution probability
  double visionLabelErrorRate = 0.4;  // per-frame mislabel probability
  int hypothesisCount = 10;           // size of the simulated n-best list

  /// Throws std::invalid_argument if a rate is outside [0, 1] or the
  /// hypothesis count is below one.
  void validate() const;
  bool operator==(const ChannelNoise&) const = default;
};

struct AdviceEvent {
  Action intended = Action::GoLeft;
  std::vector<std::string> hypotheses;
  std::vector<Action> gestureWindow;
  UnimodalPrediction audio;
  UnimodalPrediction vision;
  IntegratedFeedback fused;
};

nlohmann::json toJson(const AdviceEvent& event);

/// Simulated parent-like trainer. Always intends the optimal action; only the
/// recognition channels corrupt it.
class Advisor {
 public:
  /// The space and solution must outlive the advisor.
  Advisor(const StateSpace& space, const OptimalSolution& solution, CommandLexicon lexicon,
          ChannelNoise noise = {});

  /// Throws std::invalid_argument for final or unreachable states.
  Action intendedAdvice(const WorldState& s) const;

  /// Speech: each character of the intended sentence is independently
  /// replaced by a random lowercase letter with the audio error rate, once per
  /// hypothesis. Vision: five frames, each the intended label or (with the
  /// vision error rate) a uniformly chosen other label.
  AdviceEvent emitAdvice(const WorldState& s, Rng& rng) const;

  const ChannelNoise& noise() const { return noise_; }
  const CommandLexicon& lexicon() const { return lexicon_; }

 private:
  const StateSpace* space_;
  const OptimalSolution* solution_;
  CommandLexicon lexicon_;
  ChannelNoise noise_;
};

}  // namespace afirl
