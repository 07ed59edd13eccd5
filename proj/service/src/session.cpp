#include "afirl/session.hpp"

#include "afirl/stats.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace afirl::session {

namespace {

using nlohmann::json;

LearnerConfig effectiveLearner(const SessionConfig& cfg) {
  LearnerConfig l = cfg.learner;
  l.useFeedback = cfg.condition == Condition::IRL || cfg.condition == Condition::IRLAff;
  l.useAffordances = cfg.condition == Condition::RLAff || cfg.condition == Condition::IRLAff;
  return l;
}

StartPolicy parseStartPolicy(const std::string& text) {
  if (text == "random") return StartPolicy::Random;
  if (text == "left") return StartPolicy::Left;
  if (text == "right") return StartPolicy::Right;
  throw std::invalid_argument("start must be random, left or right");
}

void rejectUnknownKeys(const json& doc, const std::set<std::string>& allowed) {
  if (!doc.is_object()) throw std::invalid_argument("expected a JSON object");
  for (const auto& [key, value] : doc.items())
    if (allowed.count(key) == 0) throw std::invalid_argument("unknown field '" + key + "'");
}

double number(const json& doc, const char* key) {
  const auto& v = doc.at(key);
  if (!v.is_number()) throw std::invalid_argument(std::string(key) + " must be a number");
  return v.get<double>();
}

bool flag(const json& doc, const char* key) {
  const auto& v = doc.at(key);
  if (!v.is_boolean()) throw std::invalid_argument(std::string(key) + " must be true or false");
  return v.get<bool>();
}

std::int64_t integer(const json& doc, const char* key) {
  const auto& v = doc.at(key);
  if (!v.is_number_integer()) throw std::invalid_argument(std::string(key) + " must be an integer");
  return v.get<std::int64_t>();
}

std::string text(const json& doc, const char* key) {
  const auto& v = doc.at(key);
  if (!v.is_string()) throw std::invalid_argument(std::string(key) + " must be a string");
  return v.get<std::string>();
}

json predictionJson(const UnimodalPrediction& p) {
  return {{"label", toString(p.label)}, {"confidence", p.confidence}};
}

std::string endName(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::Done: return "done";
    case OutcomeKind::Failed: return "failed";
    case OutcomeKind::Continue: break;
  }
  return "truncated";
}

}  // namespace

std::string toString(StartPolicy p) {
  switch (p) {
    case StartPolicy::Left: return "left";
    case StartPolicy::Right: return "right";
    case StartPolicy::Random: break;
  }
  return "random";
}

json stateJson(const WorldState& s) {
  static constexpr const char* kHands[] = {"free", "sponge", "goblet"};
  static constexpr const char* kGoblet[] = {"left", "right", "inhand"};
  return {{"hand", kHands[static_cast<int>(s.hand)]},
          {"arm", toString(s.arm)},
          {"goblet", kGoblet[static_cast<int>(s.goblet)]},
          {"leftClean", s.sides.leftClean},
          {"rightClean", s.sides.rightClean},
          {"text", toString(s)}};
}

json errorMessage(const std::string& reason) {
  return {{"v", kWireVersion}, {"kind", "error"}, {"reason", reason}};
}

// ---------------------------------------------------------------------------

SessionConfig SessionConfig::fromJson(const json& doc) {
  rejectUnknownKeys(doc, {"v", "condition", "alpha", "gamma", "epsilon", "theta", "eta", "maxSteps", "pace",
                          "seed", "episodes", "start", "paused"});
  if (doc.contains("v") && doc.at("v") != kWireVersion) throw std::invalid_argument("unsupported protocol version");
  SessionConfig cfg;
  if (doc.contains("condition")) cfg.condition = parseCondition(text(doc, "condition"));
  if (doc.contains("alpha")) cfg.learner.alpha = number(doc, "alpha");
  if (doc.contains("gamma")) cfg.learner.gamma = number(doc, "gamma");
  if (doc.contains("epsilon")) cfg.learner.epsilon = number(doc, "epsilon");
  if (doc.contains("theta")) cfg.learner.thetaMin = number(doc, "theta");
  if (doc.contains("eta")) cfg.learner.eta = number(doc, "eta");
  if (doc.contains("maxSteps")) cfg.learner.maxStepsPerEpisode = static_cast<int>(integer(doc, "maxSteps"));
  if (doc.contains("pace")) cfg.pace = number(doc, "pace");
  if (doc.contains("seed")) {
    const auto seed = integer(doc, "seed");
    if (seed < 0) throw std::invalid_argument("seed must not be negative");
    cfg.seed = static_cast<std::uint64_t>(seed);
  }
  if (doc.contains("episodes")) cfg.episodes = static_cast<int>(integer(doc, "episodes"));
  if (doc.contains("start")) cfg.start = parseStartPolicy(text(doc, "start"));
  if (doc.contains("paused")) cfg.paused = flag(doc, "paused");
  cfg.validate();
  return cfg;
}

json SessionConfig::toJson() const {
  return {{"condition", afirl::toString(condition)},
          {"alpha", learner.alpha},
          {"gamma", learner.gamma},
          {"epsilon", learner.epsilon},
          {"theta", learner.thetaMin},
          {"eta", learner.eta},
          {"maxSteps", learner.maxStepsPerEpisode},
          {"pace", pace},
          {"seed", seed},
          {"episodes", episodes},
          {"start", session::toString(start)},
          {"paused", paused}};
}

void SessionConfig::validate() const {
  learner.validate();
  if (!(pace > 0.0 && pace <= 1000.0)) throw std::invalid_argument("pace must be in (0, 1000] steps per second");
  if (episodes < 0) throw std::invalid_argument("episodes must not be negative");
}

AdviceSubmission parseAdviceSubmit(const json& message) {
  rejectUnknownKeys(message, {"v", "kind", "id", "sentence", "hypotheses", "gestures", "label", "confidence"});
  AdviceSubmission out;
  if (message.contains("id")) out.id = message.at("id");

  if (message.contains("sentence") && message.contains("hypotheses"))
    throw std::invalid_argument("send either sentence or hypotheses, not both");
  if (message.contains("sentence")) out.hypotheses.push_back(text(message, "sentence"));
  if (message.contains("hypotheses")) {
    const auto& list = message.at("hypotheses");
    if (!list.is_array() || list.empty()) throw std::invalid_argument("hypotheses must be a non-empty list");
    for (const auto& h : list) {
      if (!h.is_string()) throw std::invalid_argument("hypotheses must be strings");
      out.hypotheses.push_back(h.get<std::string>());
    }
  }
  if (message.contains("gestures")) {
    const auto& list = message.at("gestures");
    if (!list.is_array() || list.size() != kGestureWindow)
      throw std::invalid_argument("gestures must list exactly five labels");
    for (const auto& g : list) {
      if (!g.is_string()) throw std::invalid_argument("gesture labels must be strings");
      out.gestures.push_back(parseAction(g.get<std::string>()));
    }
  }
  const bool direct = message.contains("label") || message.contains("confidence");
  const bool raw = !out.hypotheses.empty() || !out.gestures.empty();
  if (direct && raw) throw std::invalid_argument("send raw channels or a label/confidence pair, not both");
  if (raw) {
    if (out.hypotheses.empty()) throw std::invalid_argument("raw advice needs a sentence");
    if (out.gestures.empty()) throw std::invalid_argument("raw advice needs a gesture window");
  } else {
    if (!message.contains("label") || !message.contains("confidence"))
      throw std::invalid_argument("advice needs a sentence and gestures, or a label and confidence");
    out.label = parseAction(text(message, "label"));
    out.confidence = number(message, "confidence");
    if (!(out.confidence >= 0.0 && out.confidence <= 1.0))
      throw std::invalid_argument("confidence must be in [0, 1]");
  }
  return out;
}

// ---------------------------------------------------------------------------

Session::Session(std::string id, SessionConfig config, const ExperimentContext& context)
    : id_(std::move(id)),
      context_(&context),
      predictor_(context.sharedPredictor()),
      config_((config.validate(), config)),
      learner_(effectiveLearner(config_)),
      q_(context.space()),
      rng_(config_.seed),
      stepper_(q_, learner_, learner_.useAffordances ? predictor_.get() : nullptr, rng_) {
  if (learner_.useAffordances && predictor_ == nullptr)
    throw std::invalid_argument("condition " + afirl::toString(config_.condition) + " needs an affordance model");
}

Session::~Session() = default;

void Session::beginEpisode() {
  ++episode_;
  switch (config_.start) {
    case StartPolicy::Left: stepper_.begin(Location::Left); break;
    case StartPolicy::Right: stepper_.begin(Location::Right); break;
    case StartPolicy::Random: stepper_.begin(); break;
  }
}

std::vector<json> Session::step() {
  const std::lock_guard lock(mutex_);
  if (finished_) return {};
  if (stepper_.finished()) beginEpisode();

  std::optional<PendingAdvice> taken;
  const AdviceProvider provider = [this, &taken](const WorldState&, Rng&) -> std::optional<AdviceSignal> {
    if (!pending_) return std::nullopt;
    taken = std::move(pending_);
    pending_.reset();
    return taken->signal;
  };
  const auto rec = stepper_.advance(provider);
  lastReward_ = rec.reward;
  lastStep_ = rec;

  json update = {{"v", kWireVersion},
                 {"kind", "stateUpdate"},
                 {"sessionId", id_},
                 {"episode", episode_},
                 {"step", rec.step},
                 {"state", stateJson(rec.state)},
                 {"action", toString(rec.action)},
                 {"reward", rec.reward},
                 {"outcome", toString(rec.outcome)},
                 {"next", rec.outcome == OutcomeKind::Failed ? json(nullptr) : stateJson(rec.next)},
                 {"adviceOffered", rec.adviceOffered},
                 {"adviceUsed", rec.adviceUsed},
                 {"affordanceBypassed", rec.affordanceBypassed},
                 {"bypassedAction", rec.bypassedAction ? json(toString(*rec.bypassedAction)) : json(nullptr)},
                 {"confidence", rec.advice ? json(rec.advice->confidence) : json(nullptr)},
                 {"advice", nullptr},
                 {"episodeReward", stepper_.result().reward}};
  if (taken)
    update["advice"] = {{"id", taken->id},
                        {"label", toString(taken->signal.label)},
                        {"confidence", taken->signal.confidence},
                        {"used", rec.adviceUsed}};

  std::vector<json> out{std::move(update)};
  if (stepper_.finished()) {
    const auto& result = stepper_.result();
    episodeRewards_.push_back(result.reward);
    out.push_back({{"v", kWireVersion},
                   {"kind", "episodeEnd"},
                   {"sessionId", id_},
                   {"episode", episode_},
                   {"reward", result.reward},
                   {"steps", result.steps},
                   {"end", endName(result.end)}});
    if (config_.episodes > 0 && episode_ >= config_.episodes) finished_ = true;
  }
  return out;
}

json Session::submitAdvice(const AdviceSubmission& advice) {
  json ack = {{"v", kWireVersion}, {"kind", "adviceAck"}, {"sessionId", id_}, {"id", advice.id}};
  auto reject = [&ack](const std::string& reason) {
    ack["accepted"] = false;
    ack["reason"] = reason;
    return ack;
  };

  PendingAdvice pending{advice.id, {}};
  if (advice.raw()) {
    const auto audio = recognizeSpeech(advice.hypotheses, context_->lexicon());
    const auto vision = recognizeGesture(advice.gestures);
    const auto fused = integrate(audio, vision);
    pending.signal = {fused.label, fused.confidence, fused};
    ack["audio"] = predictionJson(audio);
    ack["vision"] = predictionJson(vision);
    ack["likeliness"] = fused.likeliness;
    ack["congruent"] = fused.congruent;
  } else {
    pending.signal = {*advice.label, advice.confidence, std::nullopt};
  }
  ack["label"] = toString(pending.signal.label);
  ack["confidence"] = pending.signal.confidence;

  const std::lock_guard lock(mutex_);
  ack["passesThreshold"] = pending.signal.confidence > learner_.thetaMin;
  if (finished_) return reject("session finished");
  if (!learner_.useFeedback)
    return reject("condition " + afirl::toString(config_.condition) + " does not take advice");
  if (pending_) return reject("advice already pending; resubmit after the next step");
  pending_ = std::move(pending);
  ack["accepted"] = true;
  return ack;
}

json Session::updateConfig(const json& message) {
  rejectUnknownKeys(message, {"v", "kind", "alpha", "epsilon", "theta", "eta", "pace", "paused"});
  const std::lock_guard emit(emitMutex_);
  const std::lock_guard lock(mutex_);
  SessionConfig next = config_;
  if (message.contains("alpha")) next.learner.alpha = number(message, "alpha");
  if (message.contains("epsilon")) next.learner.epsilon = number(message, "epsilon");
  if (message.contains("theta")) next.learner.thetaMin = number(message, "theta");
  if (message.contains("eta")) next.learner.eta = number(message, "eta");
  if (message.contains("pace")) next.pace = number(message, "pace");
  if (message.contains("paused")) next.paused = flag(message, "paused");
  next.validate();
  config_ = next;
  // The stepper reads learner_ through a pointer, so edits apply from the next step.
  learner_ = effectiveLearner(config_);
  wake_.notify_all();
  return {{"v", kWireVersion}, {"kind", "configUpdate"}, {"sessionId", id_}, {"config", config_.toJson()}};
}

json Session::handleMessage(const std::string& textMessage) {
  json message;
  try {
    message = json::parse(textMessage);
  } catch (const json::parse_error&) {
    return errorMessage("message is not valid JSON");
  }
  if (!message.is_object()) return errorMessage("message must be a JSON object");
  if (message.value("v", json()) != kWireVersion) return errorMessage("unsupported or missing protocol version v");
  const auto kind = message.value("kind", std::string{});
  if (kind == "adviceSubmit") {
    try {
      return submitAdvice(parseAdviceSubmit(message));
    } catch (const std::exception& e) {
      return {{"v", kWireVersion}, {"kind", "adviceAck"}, {"sessionId", id_},
              {"id", message.value("id", json())}, {"accepted", false}, {"reason", e.what()}};
    }
  }
  if (kind == "configUpdate") {
    try {
      return updateConfig(message);
    } catch (const std::exception& e) {
      return errorMessage(e.what());
    }
  }
  return errorMessage("unexpected message kind '" + kind + "'");
}

json Session::snapshot() const {
  const std::lock_guard lock(mutex_);
  const bool active = !stepper_.finished();
  json lastStep = nullptr;
  if (lastStep_)
    lastStep = {{"step", lastStep_->step},
                {"action", toString(lastStep_->action)},
                {"reward", lastStep_->reward},
                {"outcome", toString(lastStep_->outcome)},
                {"adviceUsed", lastStep_->adviceUsed},
                {"affordanceBypassed", lastStep_->affordanceBypassed}};
  return {{"v", kWireVersion},
          {"sessionId", id_},
          {"status", finished_ ? "finished" : config_.paused ? "paused" : "running"},
          {"config", config_.toJson()},
          {"episode", episode_},
          {"episodeActive", active},
          {"step", active ? stepper_.result().steps : 0},
          {"state", active ? stateJson(stepper_.state()) : json(nullptr)},
          {"episodeReward", active ? stepper_.result().reward : 0.0},
          {"lastReward", lastReward_},
          {"lastStep", lastStep},
          {"episodeRewards", episodeRewards_},
          {"cumulativeReward", compensatedSum(episodeRewards_)},
          {"advicePending", pending_.has_value()}};
}

SessionConfig Session::config() const {
  const std::lock_guard lock(mutex_);
  return config_;
}

QTable Session::qTable() const {
  const std::lock_guard lock(mutex_);
  return q_;
}

bool Session::finished() const {
  const std::lock_guard lock(mutex_);
  return finished_;
}

bool Session::advicePending() const {
  const std::lock_guard lock(mutex_);
  return pending_.has_value();
}

int Session::subscribe(Listener listener) {
  const std::lock_guard lock(listenersMutex_);
  listeners_.emplace(nextToken_, std::move(listener));
  return nextToken_++;
}

void Session::unsubscribe(int token) {
  const std::lock_guard lock(listenersMutex_);
  listeners_.erase(token);
}

void Session::broadcast(const std::vector<json>& messages) {
  std::vector<Listener> targets;
  {
    const std::lock_guard lock(listenersMutex_);
    for (const auto& [token, l] : listeners_) targets.push_back(l);
  }
  for (const auto& m : messages) {
    const auto payload = m.dump();
    for (const auto& l : targets) l(payload);
  }
}

void Session::run() {
  if (runner_.joinable()) return;
  runner_ = std::jthread([this](std::stop_token stop) { loop(stop); });
}

void Session::loop(std::stop_token stop) {
  using Clock = std::chrono::steady_clock;
  while (!stop.stop_requested()) {
    {
      std::unique_lock lock(mutex_);
      wake_.wait(lock, stop, [this] { return !config_.paused && !finished_; });
      if (stop.stop_requested()) return;
    }
    const auto started = Clock::now();
    {
      const std::lock_guard emit(emitMutex_);
      const auto cfg = config();
      if (cfg.paused) continue;
      broadcast(step());
    }

    std::unique_lock lock(mutex_);
    const auto period = std::chrono::duration<double>(1.0 / config_.pace);
    const auto deadline = started + std::chrono::duration_cast<Clock::duration>(period);
    wake_.wait_until(lock, stop, deadline, [] { return false; });
  }
}

// ---------------------------------------------------------------------------

SessionManager::SessionManager(const ExperimentContext& context, bool startLoops)
    : context_(&context), startLoops_(startLoops) {}

std::shared_ptr<Session> SessionManager::create(const json& config) {
  auto cfg = SessionConfig::fromJson(config);
  std::string id;
  {
    const std::lock_guard lock(mutex_);
    id = "s" + std::to_string(++counter_);
  }
  auto session = std::make_shared<Session>(id, cfg, *context_);
  if (startLoops_) session->run();
  const std::lock_guard lock(mutex_);
  sessions_.emplace(id, session);
  return session;
}

std::shared_ptr<Session> SessionManager::find(const std::string& id) const {
  const std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

bool SessionManager::close(const std::string& id) {
  const std::lock_guard lock(mutex_);
  return sessions_.erase(id) > 0;
}

std::size_t SessionManager::size() const {
  const std::lock_guard lock(mutex_);
  return sessions_.size();
}

}  // namespace afirl::session
