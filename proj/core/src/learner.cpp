#include "afirl/learner.hpp"

#include <stdexcept>

namespace afirl {

std::string toString(AdviceChannel c) {
  switch (c) {
    case AdviceChannel::MultiModal: return "multimodal";
    case AdviceChannel::AudioOnly: return "audio";
    case AdviceChannel::VisionOnly: return "vision";
  }
  return "?";
}

AdviceChannel parseAdviceChannel(std::string_view text) {
  if (text == "multimodal") return AdviceChannel::MultiModal;
  if (text == "audio") return AdviceChannel::AudioOnly;
  if (text == "vision") return AdviceChannel::VisionOnly;
  throw std::invalid_argument("unknown advice channel '" + std::string(text) + "'");
}

void LearnerConfig::validate() const {
  auto probability = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(name) + " must be in [0, 1]");
  };
  probability(alpha, "alpha");
  probability(gamma, "gamma");
  probability(epsilon, "epsilon");
  probability(feedbackProbability, "feedback probability");
  probability(thetaMin, "theta");
  probability(eta, "eta");
  if (maxStepsPerEpisode < 1) throw std::invalid_argument("max steps per episode must be at least 1");
}

// ---------------------------------------------------------------------------

QTable::QTable(const StateSpace& space) : space_(&space), values_(space.size()) {}

QTable QTable::fromSolution(const StateSpace& space, const OptimalSolution& solution) {
  if (solution.actionValues.size() != space.size())
    throw std::invalid_argument("solution does not match the state space");
  QTable q(space);
  q.values_ = solution.actionValues;
  return q;
}

double QTable::get(const WorldState& s, Action a) const {
  const auto index = space_->indexOf(s);
  return index ? values_[*index][indexOf(a)] : 0.0;
}

void QTable::set(const WorldState& s, Action a, double value) {
  const auto index = space_->indexOf(s);
  if (!index) throw std::out_of_range("state " + toString(s) + " has no Q-table row");
  values_[*index][indexOf(a)] = value;
}

Action QTable::greedy(const WorldState& s) const { return greedyAmong(s, kAllActions); }

Action QTable::greedyAmong(const WorldState& s, std::span<const Action> candidates) const {
  if (candidates.empty()) throw std::invalid_argument("greedy selection over an empty action set");
  Action best = candidates.front();
  double bestValue = get(s, best);
  for (const auto a : candidates.subspan(1)) {
    const double v = get(s, a);
    if (v > bestValue) {
      best = a;
      bestValue = v;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

AdviceSignal adviceSignal(const AdviceEvent& event, AdviceChannel channel) {
  switch (channel) {
    case AdviceChannel::AudioOnly: return {event.audio.label, event.audio.confidence, std::nullopt};
    case AdviceChannel::VisionOnly: return {event.vision.label, event.vision.confidence, std::nullopt};
    case AdviceChannel::MultiModal: break;
  }
  return {event.fused.label, event.fused.confidence, event.fused};
}

Selection selectAction(const QTable& q, const WorldState& s, const LearnerConfig& cfg,
                       const std::optional<AdviceSignal>& advice, const FailurePredictor* predictor,
                       Rng& rng) {
  Selection sel;
  if (advice) {
    sel.adviceOffered = true;
    sel.advice = advice;
    if (advice->confidence > cfg.thetaMin) {
      sel.action = advice->label;
      sel.adviceUsed = true;
    }
  }
  if (!sel.adviceUsed) {
    sel.explored = rng.bernoulli(cfg.epsilon);
    sel.action = sel.explored ? kAllActions[rng.below(kActionCount)] : q.greedy(s);
  }

  if (cfg.useAffordances && predictor != nullptr && rng.bernoulli(cfg.eta)) {
    sel.affordanceChecked = true;
    if (predictor->predictsFailure(s, sel.action)) {
      std::vector<Action> safe;
      for (const auto a : kAllActions)
        if (!predictor->predictsFailure(s, a)) safe.push_back(a);
      if (!safe.empty()) {
        sel.bypassedAction = sel.action;
        sel.action = sel.explored ? safe[rng.below(safe.size())] : q.greedyAmong(s, safe);
        sel.affordanceBypassed = true;
      }
    }
  }
  return sel;
}

AdviceProvider batchAdviceProvider(const Advisor* advisor, const LearnerConfig& cfg) {
  return [advisor, useFeedback = cfg.useFeedback, probability = cfg.feedbackProbability,
          channel = cfg.channel](const WorldState& s, Rng& rng) -> std::optional<AdviceSignal> {
    if (!useFeedback || advisor == nullptr) return std::nullopt;
    if (!rng.bernoulli(probability)) return std::nullopt;
    return adviceSignal(advisor->emitAdvice(s, rng), channel);
  };
}

Selection selectAction(const QTable& q, const WorldState& s, const LearnerConfig& cfg,
                       const Advisor* advisor, const FailurePredictor* predictor, Rng& rng) {
  const auto advice = batchAdviceProvider(advisor, cfg)(s, rng);
  return selectAction(q, s, cfg, advice, predictor, rng);
}

void sarsaUpdate(QTable& q, const WorldState& s, Action a, double reward,
                 const std::optional<std::pair<WorldState, Action>>& next, const LearnerConfig& cfg) {
  const double bootstrap = next ? q.get(next->first, next->second) : 0.0;
  const double current = q.get(s, a);
  q.set(s, a, current + cfg.alpha * (reward + cfg.gamma * bootstrap - current));
}

// ---------------------------------------------------------------------------

EpisodeStepper::EpisodeStepper(QTable& q, const LearnerConfig& cfg, const FailurePredictor* predictor,
                               Rng& rng)
    : q_(&q), cfg_(&cfg), predictor_(predictor), rng_(&rng) {}

void EpisodeStepper::begin(Location start) {
  state_ = initialState(start);
  previous_.reset();
  previousReward_ = 0.0;
  finished_ = false;
  result_ = EpisodeResult{};
  result_.start = start;
}

void EpisodeStepper::begin() { begin(rng_->bernoulli(0.5) ? Location::Right : Location::Left); }

StepRecord EpisodeStepper::advance(const AdviceProvider& provider) {
  if (finished_) throw std::logic_error("episode already finished");

  std::optional<AdviceSignal> advice;
  if (provider) advice = provider(state_, *rng_);
  const auto sel = selectAction(*q_, state_, *cfg_, advice, predictor_, *rng_);

  if (previous_) sarsaUpdate(*q_, previous_->first, previous_->second, previousReward_,
                             std::make_pair(state_, sel.action), *cfg_);

  const auto outcome = step(state_, sel.action, result_.start);

  StepRecord rec;
  rec.step = ++result_.steps;
  rec.state = state_;
  rec.action = sel.action;
  rec.adviceOffered = sel.adviceOffered;
  rec.adviceUsed = sel.adviceUsed;
  rec.affordanceBypassed = sel.affordanceBypassed;
  rec.bypassedAction = sel.bypassedAction;
  rec.advice = sel.advice;
  rec.reward = outcome.reward;
  rec.outcome = outcome.kind;
  rec.next = outcome.next;
  result_.reward += outcome.reward;

  if (outcome.terminal()) {
    sarsaUpdate(*q_, state_, sel.action, outcome.reward, std::nullopt, *cfg_);
    previous_.reset();
    result_.end = outcome.kind;
    finished_ = true;
  } else {
    previous_ = std::make_pair(state_, sel.action);
    previousReward_ = outcome.reward;
    state_ = outcome.next;
    if (result_.steps >= cfg_->maxStepsPerEpisode) {
      // Truncated: bootstrap the last pair from the greedy value of the
      // state the episode was cut in.
      sarsaUpdate(*q_, previous_->first, previous_->second, previousReward_,
                  std::make_pair(state_, q_->greedy(state_)), *cfg_);
      previous_.reset();
      result_.end = OutcomeKind::Continue;
      finished_ = true;
    }
  }
  return rec;
}

EpisodeResult runEpisode(QTable& q, const LearnerConfig& cfg, const Advisor* advisor,
                         const FailurePredictor* predictor, Rng& rng, bool recordTrace) {
  EpisodeStepper stepper(q, cfg, predictor, rng);
  stepper.begin();
  const auto provider = batchAdviceProvider(advisor, cfg);
  std::vector<StepRecord> trace;
  while (!stepper.finished()) {
    auto rec = stepper.advance(provider);
    if (recordTrace) trace.push_back(std::move(rec));
  }
  EpisodeResult result = stepper.result();
  result.trace = std::move(trace);
  return result;
}

}  // namespace afirl
