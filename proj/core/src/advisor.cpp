#include "afirl/advisor.hpp"

#include <stdexcept>

#include <nlohmann/json.hpp>

namespace afirl {

void ChannelNoise::validate() const {
  auto inUnit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!inUnit(audioCharErrorRate)) throw std::invalid_argument("audio error rate must be in [0, 1]");
  if (!inUnit(visionLabelErrorRate)) throw std::invalid_argument("vision error rate must be in [0, 1]");
  if (hypothesisCount < 1) throw std::invalid_argument("hypothesis count must be at least 1");
}

nlohmann::json toJson(const AdviceEvent& event) {
  nlohmann::json window = nlohmann::json::array();
  for (const auto a : event.gestureWindow) window.push_back(toString(a));
  return {
      {"intended", toString(event.intended)},
      {"hypotheses", event.hypotheses},
      {"gesture_window", window},
      {"audio", {{"label", toString(event.audio.label)}, {"confidence", event.audio.confidence}}},
      {"vision", {{"label", toString(event.vision.label)}, {"confidence", event.vision.confidence}}},
      {"fused",
       {{"label", toString(event.fused.label)},
        {"confidence", event.fused.confidence},
        {"likeliness", event.fused.likeliness},
        {"congruent", event.fused.congruent}}},
  };
}

Advisor::Advisor(const StateSpace& space, const OptimalSolution& solution, CommandLexicon lexicon,
                 ChannelNoise noise)
    : space_(&space), solution_(&solution), lexicon_(std::move(lexicon)), noise_(noise) {
  noise_.validate();
}

Action Advisor::intendedAdvice(const WorldState& s) const {
  if (isFinal(s)) throw std::invalid_argument("no advice for the final state");
  return solution_->action(*space_, s);
}

AdviceEvent Advisor::emitAdvice(const WorldState& s, Rng& rng) const {
  AdviceEvent event;
  event.intended = intendedAdvice(s);

  const std::string& sentence = lexicon_.sentence(event.intended);
  event.hypotheses.reserve(static_cast<std::size_t>(noise_.hypothesisCount));
  for (int h = 0; h < noise_.hypothesisCount; ++h) {
    std::string heard = sentence;
    for (char& c : heard)
      if (rng.bernoulli(noise_.audioCharErrorRate)) c = static_cast<char>('a' + rng.below(26));
    event.hypotheses.push_back(std::move(heard));
  }

  event.gestureWindow.reserve(kGestureWindow);
  for (std::size_t f = 0; f < kGestureWindow; ++f) {
    Action frame = event.intended;
    if (rng.bernoulli(noise_.visionLabelErrorRate)) {
      // Uniform over the six labels other than the intended one.
      auto k = rng.below(kActionCount - 1);
      if (k >= indexOf(event.intended)) ++k;
      frame = kAllActions[k];
    }
    event.gestureWindow.push_back(frame);
  }

  event.audio = recognizeSpeech(event.hypotheses, lexicon_);
  event.vision = recognizeGesture(event.gestureWindow);
  event.fused = integrate(event.audio, event.vision);
  return event;
}

}  // namespace afirl
