#include <doctest.h>

#include "afirl/learner.hpp"
#include "support.hpp"

using namespace afirl;
using afirl::test::ws;

namespace {

struct Fixture {
  StateSpace space;
  OptimalSolution solution = solveOptimal(space);
};

class AllFail final : public FailurePredictor {
 public:
  bool predictsFailure(const WorldState&, Action) const override { return true; }
};

AdviceSignal signal(Action a, double confidence) { return {a, confidence, std::nullopt}; }

LearnerConfig plain() {
  LearnerConfig cfg;
  cfg.useFeedback = false;
  cfg.useAffordances = false;
  return cfg;
}

}  // namespace

TEST_CASE("sarsa update examples") {
  const Fixture f;
  QTable q(f.space);
  const auto s = initialState(Location::Left);
  const auto cfg = plain();
  sarsaUpdate(q, s, Action::Grasp, -0.01, std::make_pair(s, Action::GoLeft), cfg);
  CHECK(q.get(s, Action::Grasp) == doctest::Approx(-0.003).epsilon(1e-12));

  QTable t(f.space);
  sarsaUpdate(t, s, Action::Wipe, 1.0, std::nullopt, cfg);
  CHECK(t.get(s, Action::Wipe) == doctest::Approx(0.3).epsilon(1e-12));

  QTable b(f.space);
  const auto s2 = f.space.state(5);
  b.set(s2, Action::Place, 0.5);
  sarsaUpdate(b, s, Action::GoLeft, -0.01, std::make_pair(s2, Action::Place), cfg);
  CHECK(b.get(s, Action::GoLeft) == doctest::Approx(0.3 * (-0.01 + 0.9 * 0.5)).epsilon(1e-12));

  auto frozen = cfg;
  frozen.alpha = 0.0;
  QTable z(f.space);
  z.set(s, Action::GoHome, 0.42);
  const QTable before = z;
  sarsaUpdate(z, s, Action::GoHome, 1.0, std::nullopt, frozen);
  sarsaUpdate(z, s, Action::GoHome, -1.0, std::make_pair(s, Action::GoLeft), frozen);
  CHECK(z == before);
}

TEST_CASE("q table basics") {
  const Fixture f;
  QTable q(f.space);
  const auto outside = ws(HandObject::Free, Location::Home, GobletPlace::Left, true, true);
  CHECK(q.get(outside, Action::GoLeft) == 0.0);
  CHECK_THROWS_AS(q.set(outside, Action::GoLeft, 1.0), std::out_of_range);
  const auto s = initialState(Location::Right);
  CHECK(q.greedy(s) == Action::GoLeft);  // all tied: first action
  q.set(s, Action::Place, 0.1);
  q.set(s, Action::Abort, 0.1);
  CHECK(q.greedy(s) == Action::Place);
  const std::array<Action, 2> subset = {Action::GoHome, Action::Abort};
  CHECK(q.greedyAmong(s, subset) == Action::Abort);
  CHECK_THROWS_AS(q.greedyAmong(s, std::span<const Action>{}), std::invalid_argument);
  const auto opt = QTable::fromSolution(f.space, f.solution);
  for (std::size_t i = 0; i < f.space.size(); ++i) CHECK(opt.greedy(f.space.state(i)) == f.solution.policy[i]);
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(LearnerConfig{}.validate());
  auto bad = LearnerConfig{};
  bad.eta = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = LearnerConfig{};
  bad.maxStepsPerEpisode = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK(parseAdviceChannel("audio") == AdviceChannel::AudioOnly);
  CHECK(toString(AdviceChannel::MultiModal) == "multimodal");
  CHECK_THROWS_AS(parseAdviceChannel("smell"), std::invalid_argument);
}

TEST_CASE("advice gate is strict") {
  const Fixture f;
  QTable q(f.space);
  auto cfg = plain();
  cfg.epsilon = 0.0;
  cfg.thetaMin = 0.25;
  const auto s = initialState(Location::Left);
  q.set(s, Action::Grasp, 1.0);
  Rng rng(1);

  const auto low = selectAction(q, s, cfg, signal(Action::Abort, 0.2), nullptr, rng);
  CHECK(low.adviceOffered);
  CHECK_FALSE(low.adviceUsed);
  CHECK(low.action == Action::Grasp);

  const auto atGate = selectAction(q, s, cfg, signal(Action::Abort, 0.25), nullptr, rng);
  CHECK_FALSE(atGate.adviceUsed);

  const auto high = selectAction(q, s, cfg, signal(Action::Abort, 0.3), nullptr, rng);
  CHECK(high.adviceUsed);
  CHECK(high.action == Action::Abort);
  CHECK_FALSE(high.explored);
}

TEST_CASE("raising the threshold never admits more advice") {
  const Fixture f;
  const Advisor advisor(f.space, f.solution, CommandLexicon::defaults(), ChannelNoise{});
  QTable q(f.space);
  Rng source(3);
  std::vector<std::pair<WorldState, AdviceSignal>> events;
  for (int i = 0; i < 2000; ++i) {
    const auto& s = f.space.state(source.below(f.space.size()));
    events.emplace_back(s, adviceSignal(advisor.emitAdvice(s, source), AdviceChannel::MultiModal));
  }
  int previous = static_cast<int>(events.size()) + 1;
  for (int step = 0; step <= 20; ++step) {
    auto cfg = plain();
    cfg.thetaMin = step * 0.05;
    Rng rng(9);
    int used = 0;
    for (const auto& [s, advice] : events) used += selectAction(q, s, cfg, advice, nullptr, rng).adviceUsed;
    CHECK(used <= previous);
    previous = used;
  }
}

TEST_CASE("without feedback or affordances selection is epsilon-greedy") {
  const Fixture f;
  const Advisor advisor(f.space, f.solution, CommandLexicon::defaults(), ChannelNoise{});
  QTable q(f.space);
  const auto s = initialState(Location::Left);
  q.set(s, Action::GoHome, 0.5);
  auto cfg = plain();
  cfg.epsilon = 0.0;
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const auto sel = selectAction(q, s, cfg, &advisor, nullptr, rng);
    CHECK(sel.action == Action::GoHome);
    CHECK_FALSE(sel.adviceOffered);
    CHECK_FALSE(sel.affordanceChecked);
  }
  cfg.epsilon = 1.0;
  std::array<int, kActionCount> counts{};
  for (int i = 0; i < 7000; ++i) ++counts[indexOf(selectAction(q, s, cfg, &advisor, nullptr, rng).action)];
  for (const int c : counts) CHECK(c > 800);
}

TEST_CASE("bypass replaces a failing candidate with the best safe action") {
  const Fixture f;
  const TransitionFailureOracle oracle;
  QTable q(f.space);
  const auto s = ws(HandObject::Sponge, Location::Right, GobletPlace::Right, false, false);
  q.set(s, Action::Wipe, 0.9);
  q.set(s, Action::Grasp, 0.8);  // also fails: grasping with a full hand
  q.set(s, Action::GoLeft, 0.5);
  q.set(s, Action::GoHome, 0.1);
  auto cfg = plain();
  cfg.useAffordances = true;
  cfg.eta = 1.0;
  cfg.epsilon = 0.0;
  Rng rng(1);
  const auto sel = selectAction(q, s, cfg, std::nullopt, &oracle, rng);
  CHECK(sel.affordanceChecked);
  CHECK(sel.affordanceBypassed);
  CHECK(sel.bypassedAction == Action::Wipe);
  CHECK(sel.action == Action::GoLeft);

  // Advice that would fail is bypassed the same way.
  const auto advised = selectAction(q, s, cfg, signal(Action::Wipe, 1.0), &oracle, rng);
  CHECK(advised.adviceUsed);
  CHECK(advised.affordanceBypassed);
  CHECK(advised.action == Action::GoLeft);

  // Exploration re-selects among safe actions only.
  cfg.epsilon = 1.0;
  for (int i = 0; i < 500; ++i) CHECK_FALSE(oracle.predictsFailure(s, selectAction(q, s, cfg, std::nullopt, &oracle, rng).action));

  // With eta = 0 the check never runs.
  cfg.epsilon = 0.0;
  cfg.eta = 0.0;
  const auto off = selectAction(q, s, cfg, std::nullopt, &oracle, rng);
  CHECK_FALSE(off.affordanceChecked);
  CHECK(off.action == Action::Wipe);

  // If every action is predicted to fail the candidate stands.
  const AllFail allFail;
  cfg.eta = 1.0;
  const auto stuck = selectAction(q, s, cfg, std::nullopt, &allFail, rng);
  CHECK(stuck.affordanceChecked);
  CHECK_FALSE(stuck.affordanceBypassed);
  CHECK(stuck.action == Action::Wipe);
}

TEST_CASE("the optimal table replays the optimal episode") {
  const Fixture f;
  auto cfg = plain();
  cfg.epsilon = 0.0;
  cfg.alpha = 0.0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    QTable q = QTable::fromSolution(f.space, f.solution);
    Rng rng(seed);
    const auto r = runEpisode(q, cfg, nullptr, nullptr, rng);
    CHECK(r.end == OutcomeKind::Done);
    CHECK(r.steps == 15);
    CHECK(r.reward == doctest::Approx(1.0 - 0.01 * 14).epsilon(1e-12));
    CHECK(r.trace.size() == 15);
  }
}

TEST_CASE("episode edge cases") {
  const Fixture f;
  auto cfg = plain();
  cfg.epsilon = 0.0;

  SUBCASE("failure on the first step") {
    QTable q(f.space);
    for (const auto start : {Location::Left, Location::Right}) q.set(initialState(start), Action::Wipe, 1.0);
    Rng rng(1);
    const auto r = runEpisode(q, cfg, nullptr, nullptr, rng);
    CHECK(r.steps == 1);
    CHECK(r.end == OutcomeKind::Failed);
    CHECK(r.reward == -1.0);
  }
  SUBCASE("truncation") {
    QTable q(f.space);
    cfg.maxStepsPerEpisode = 5;
    cfg.alpha = 0.0;
    for (const auto& s : f.space.states()) q.set(s, Action::GoHome, 1.0);
    Rng rng(1);
    const auto r = runEpisode(q, cfg, nullptr, nullptr, rng);
    CHECK(r.truncated());
    CHECK(r.steps == 5);
    CHECK(r.reward == doctest::Approx(-0.05).epsilon(1e-12));
  }
}

TEST_CASE("episode rewards stay within bounds") {
  const Fixture f;
  const Advisor advisor(f.space, f.solution, CommandLexicon::defaults(), ChannelNoise{});
  const TransitionFailureOracle oracle;
  for (const bool feedback : {false, true}) {
    auto cfg = plain();
    cfg.useFeedback = feedback;
    cfg.useAffordances = feedback;
    QTable q(f.space);
    Rng rng(21);
    for (int e = 0; e < 300; ++e) {
      const auto r = runEpisode(q, cfg, &advisor, &oracle, rng, false);
      CHECK(r.reward < 1.0);
      CHECK(r.reward >= -1.0 - 0.01 * (cfg.maxStepsPerEpisode - 1) - 1e-9);
      CHECK(r.steps <= cfg.maxStepsPerEpisode);
    }
  }
}

TEST_CASE("autonomous learning equals a textbook SARSA loop") {
  const Fixture f;
  auto cfg = plain();

  QTable q(f.space);
  Rng rng(1234);
  std::vector<double> rewards;
  for (int e = 0; e < 300; ++e) rewards.push_back(runEpisode(q, cfg, nullptr, nullptr, rng, false).reward);

  // Reference: choose a, then loop { act; choose a'; update; advance }.
  std::vector<std::array<double, kActionCount>> table(f.space.size());
  auto value = [&](const WorldState& s, Action a) { return table[*f.space.indexOf(s)][indexOf(a)]; };
  auto choose = [&](Rng& r, const WorldState& s) {
    if (r.uniform() < cfg.epsilon) return kAllActions[r.below(kActionCount)];
    Action best = Action::GoLeft;
    for (const auto a : kAllActions)
      if (value(s, a) > value(s, best)) best = a;
    return best;
  };
  Rng ref(1234);
  std::vector<double> refRewards;
  for (int e = 0; e < 300; ++e) {
    const auto start = ref.uniform() < 0.5 ? Location::Right : Location::Left;
    WorldState s = initialState(start);
    Action a = choose(ref, s);
    double total = 0.0;
    for (int t = 1;; ++t) {
      const auto out = step(s, a, start);
      total += out.reward;
      auto& cell = table[*f.space.indexOf(s)][indexOf(a)];
      if (out.terminal()) {
        cell += cfg.alpha * (out.reward - cell);
        break;
      }
      if (t == cfg.maxStepsPerEpisode) {
        Action greedy = Action::GoLeft;
        for (const auto g : kAllActions)
          if (value(out.next, g) > value(out.next, greedy)) greedy = g;
        cell += cfg.alpha * (out.reward + cfg.gamma * value(out.next, greedy) - cell);
        break;
      }
      const Action next = choose(ref, out.next);
      cell += cfg.alpha * (out.reward + cfg.gamma * value(out.next, next) - cell);
      s = out.next;
      a = next;
    }
    refRewards.push_back(total);
  }
  CHECK(rewards == refRewards);
  CHECK(q.values() == table);
}

TEST_CASE("bypass soundness with the trained network") {
  const Fixture f;
  const AffordanceModel model(afirl::test::trainedNet(), f.space);
  const TransitionFailureOracle oracle;
  for (const auto& s : f.space.states()) {
    bool allFail = true;
    for (const auto a : kAllActions) {
      CHECK(model.predictsFailure(s, a) == oracle.predictsFailure(s, a));
      allFail = allFail && oracle.predictsFailure(s, a);
    }
    CHECK_FALSE(allFail);
  }
  const Advisor advisor(f.space, f.solution, CommandLexicon::defaults(), ChannelNoise{});
  LearnerConfig cfg;
  cfg.useFeedback = true;
  cfg.useAffordances = true;
  cfg.eta = 1.0;
  QTable q(f.space);
  Rng rng(99);
  int failed = 0;
  for (int e = 0; e < 100; ++e) failed += runEpisode(q, cfg, &advisor, &model, rng, false).end == OutcomeKind::Failed;
  CHECK(failed == 0);
}

TEST_CASE("stepper supports externally supplied advice") {
  const Fixture f;
  LearnerConfig cfg;
  cfg.useFeedback = true;
  cfg.epsilon = 0.0;
  QTable q(f.space);
  Rng rng(5);
  EpisodeStepper stepper(q, cfg, nullptr, rng);
  stepper.begin(Location::Left);
  CHECK(stepper.state() == initialState(Location::Left));
  const AdviceProvider goRight = [](const WorldState&, Rng&) { return std::optional(signal(Action::GoRight, 1.0)); };
  const auto rec = stepper.advance(goRight);
  CHECK(rec.adviceUsed);
  CHECK(rec.action == Action::GoRight);
  CHECK(rec.step == 1);
  CHECK(stepper.state().arm == Location::Right);
  const auto abort = stepper.advance([](const WorldState&, Rng&) { return std::optional(signal(Action::Abort, 1.0)); });
  CHECK(abort.next == initialState(Location::Left));
  CHECK_FALSE(stepper.finished());
  // The pending update for the first pair lands when the second action is chosen.
  CHECK(q.get(initialState(Location::Left), Action::GoRight) == doctest::Approx(-0.003));
  const auto wipe = stepper.advance([](const WorldState&, Rng&) { return std::optional(signal(Action::Wipe, 1.0)); });
  CHECK(wipe.outcome == OutcomeKind::Failed);
  CHECK(stepper.finished());
  CHECK(stepper.result().reward == doctest::Approx(-1.02));
  CHECK_THROWS_AS(stepper.advance(nullptr), std::logic_error);
}

TEST_CASE("channel selection") {
  AdviceEvent e;
  e.audio = {Action::GoLeft, 0.9, Modality::Audio};
  e.vision = {Action::Wipe, 0.6, Modality::Vision};
  e.fused = integrate(e.audio, e.vision);
  CHECK(adviceSignal(e, AdviceChannel::AudioOnly).label == Action::GoLeft);
  CHECK(adviceSignal(e, AdviceChannel::VisionOnly).confidence == 0.6);
  const auto fused = adviceSignal(e, AdviceChannel::MultiModal);
  CHECK(fused.label == Action::GoLeft);
  CHECK(fused.fused.has_value());
  CHECK(fused.confidence == e.fused.confidence);
}
