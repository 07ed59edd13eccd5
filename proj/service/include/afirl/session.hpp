#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "afirl/experiment.hpp"
#include "afirl/learner.hpp"

namespace afirl::session {

// Wire protocol version carried in every message as "v".
inline constexpr int kWireVersion = 1;

enum class StartPolicy : std::uint8_t { Random, Left, Right };

struct SessionConfig {
  Condition condition = Condition::IRLAff;
  LearnerConfig learner;  // feedback/affordance switches follow `condition`
  double pace = 2.0;      // steps per second
  std::uint64_t seed = 1;
  int episodes = 0;       // 0 runs until the session is closed
  StartPolicy start = StartPolicy::Random;
  bool paused = false;

  /// Unknown keys and out-of-range values throw std::invalid_argument.
  static SessionConfig fromJson(const nlohmann::json& doc);
  nlohmann::json toJson() const;
  void validate() const;
};

/// Parsed adviceSubmit payload: raw channels to fuse, or a direct pair.
struct AdviceSubmission {
  nlohmann::json id;  // echoed back; null when the client sent none
  std::vector<std::string> hypotheses;
  std::vector<Action> gestures;
  std::optional<Action> label;
  double confidence = 0.0;

  bool raw() const { return !hypotheses.empty(); }
};

/// Throws std::invalid_argument describing what is wrong with the message.
AdviceSubmission parseAdviceSubmit(const nlohmann::json& message);

/// A learning session driven by a human advisor.
///
/// The learner advances only through step(). Advice is handed over through a
/// single-slot mailbox: a submission is fused immediately (so the trainer
/// sees the confidence at once) and waits for the next decision point, where
/// it replaces the batch-mode feedback draw. A second submission while the
/// slot is full is rejected with a reason instead of overwriting the first.
class Session {
 public:
  using Listener = std::function<void(const std::string&)>;

  Session(std::string id, SessionConfig config, const ExperimentContext& context);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& id() const { return id_; }

  /// Executes one step and returns the messages it produced (a stateUpdate,
  /// followed by an episodeEnd when the episode ended). Empty once the
  /// configured number of episodes is done.
  std::vector<nlohmann::json> step();

  /// Builds the adviceAck for a submission and fills the mailbox if accepted.
  nlohmann::json submitAdvice(const AdviceSubmission& advice);

  /// Applies a configUpdate payload and returns the resulting configUpdate
  /// message. Throws std::invalid_argument on bad values; nothing changes then.
  /// Once a pause has been applied the step loop emits nothing further.
  nlohmann::json updateConfig(const nlohmann::json& message);

  /// Dispatches one client message and returns the reply.
  nlohmann::json handleMessage(const std::string& text);

  nlohmann::json snapshot() const;
  SessionConfig config() const;
  QTable qTable() const;
  bool finished() const;
  bool advicePending() const;

  /// Listeners receive every message the step loop produces, serialized.
  int subscribe(Listener listener);
  void unsubscribe(int token);

  /// Starts the paced step loop on its own thread. Stopped by the destructor.
  void run();

 private:
  struct PendingAdvice {
    nlohmann::json id;
    AdviceSignal signal;
  };

  void beginEpisode();
  void loop(std::stop_token stop);
  void broadcast(const std::vector<nlohmann::json>& messages);

  const std::string id_;
  const ExperimentContext* context_;
  std::shared_ptr<const FailurePredictor> predictor_;

  // Held by the loop across step and broadcast, and by updateConfig, so a
  // pause reply is never followed by another stateUpdate. Taken before mutex_.
  std::mutex emitMutex_;
  mutable std::mutex mutex_;
  std::condition_variable_any wake_;
  SessionConfig config_;
  LearnerConfig learner_;
  QTable q_;
  Rng rng_;
  EpisodeStepper stepper_;
  std::optional<PendingAdvice> pending_;
  int episode_ = 0;  // 1-based once the first episode began
  double lastReward_ = 0.0;
  std::optional<StepRecord> lastStep_;
  std::vector<double> episodeRewards_;
  bool finished_ = false;

  std::mutex listenersMutex_;
  std::map<int, Listener> listeners_;
  int nextToken_ = 0;

  std::jthread runner_;
};

/// Creates, finds and closes sessions. Thread-safe.
class SessionManager {
 public:
  /// The context must outlive the manager.
  explicit SessionManager(const ExperimentContext& context, bool startLoops = true);

  /// Throws std::invalid_argument on a bad config.
  std::shared_ptr<Session> create(const nlohmann::json& config);
  std::shared_ptr<Session> find(const std::string& id) const;
  bool close(const std::string& id);
  std::size_t size() const;

 private:
  const ExperimentContext* context_;
  bool startLoops_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t counter_ = 0;
};

std::string toString(StartPolicy p);
nlohmann::json stateJson(const WorldState& s);
nlohmann::json errorMessage(const std::string& reason);

}  // namespace afirl::session
