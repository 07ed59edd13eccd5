#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "afirl/advisor.hpp"
#include "support.hpp"

using namespace afirl;
using afirl::test::ws;

namespace {

struct Fixture {
  StateSpace space;
  OptimalSolution solution = solveOptimal(space);

  Advisor advisor(ChannelNoise noise) const { return Advisor(space, solution, CommandLexicon::defaults(), noise); }
};

ChannelNoise rates(double audio, double vision) {
  ChannelNoise n;
  n.audioCharErrorRate = audio;
  n.visionLabelErrorRate = vision;
  return n;
}

struct ChannelStats {
  int hits = 0;  // fused label equals the intended action
  double meanConfidence = 0.0;
  int congruent = 0;
};

// Events over states drawn uniformly from the space.
ChannelStats channelStats(const Fixture& f, const ChannelNoise& noise, int draws, std::uint64_t seed) {
  const auto advisor = f.advisor(noise);
  Rng rng(seed);
  ChannelStats out;
  for (int i = 0; i < draws; ++i) {
    const auto& s = f.space.state(rng.below(f.space.size()));
    const auto event = advisor.emitAdvice(s, rng);
    out.hits += event.fused.label == event.intended ? 1 : 0;
    out.meanConfidence += event.fused.confidence;
    out.congruent += event.fused.congruent ? 1 : 0;
  }
  out.meanConfidence /= draws;
  return out;
}

double fusedAccuracy(const Fixture& f, const ChannelNoise& noise, int draws, std::uint64_t seed) {
  return static_cast<double>(channelStats(f, noise, draws, seed).hits) / draws;
}

}  // namespace

TEST_CASE("intended advice follows the optimal policy") {
  const Fixture f;
  const auto advisor = f.advisor({});
  CHECK(advisor.intendedAdvice(initialState(Location::Right)) == Action::Grasp);
  CHECK(advisor.intendedAdvice(ws(HandObject::Sponge, Location::Home, GobletPlace::Left, true, true)) ==
        Action::Place);
  CHECK_THROWS_AS(advisor.intendedAdvice(ws(HandObject::Free, Location::Home, GobletPlace::Left, true, true)),
                  std::invalid_argument);
  for (std::size_t i = 0; i < f.space.size(); ++i)
    CHECK(advisor.intendedAdvice(f.space.state(i)) == f.solution.policy[i]);
}

TEST_CASE("noiseless channels deliver the intended action with full confidence") {
  const Fixture f;
  const auto advisor = f.advisor(rates(0.0, 0.0));
  Rng rng(4);
  for (const auto& s : f.space.states()) {
    const auto e = advisor.emitAdvice(s, rng);
    CHECK(e.audio.label == e.intended);
    CHECK(e.audio.confidence == 1.0);
    CHECK(e.vision.label == e.intended);
    CHECK(e.vision.confidence == 1.0);
    CHECK(e.fused.confidence == 1.0);
    CHECK(e.hypotheses.size() == 10);
    CHECK(e.gestureWindow.size() == 5);
  }
}

TEST_CASE("a fully corrupted vision channel never shows the intended label") {
  const Fixture f;
  const auto advisor = f.advisor(rates(0.05, 1.0));
  Rng rng(8);
  for (int i = 0; i < 500; ++i) {
    const auto& s = f.space.state(rng.below(f.space.size()));
    const auto e = advisor.emitAdvice(s, rng);
    for (const auto frame : e.gestureWindow) CHECK(frame != e.intended);
    if (e.audio.confidence > e.vision.confidence && e.audio.label == e.intended)
      CHECK(e.fused.label == e.intended);
  }
}

TEST_CASE("speech corruption substitutes characters without changing length") {
  const Fixture f;
  const auto advisor = f.advisor(rates(0.3, 0.0));
  Rng rng(12);
  for (int i = 0; i < 50; ++i) {
    const auto e = advisor.emitAdvice(initialState(Location::Left), rng);
    for (const auto& h : e.hypotheses) CHECK(h.size() == std::string("grasp").size());
  }
}

TEST_CASE("advice is a pure function of state, noise and seed") {
  const Fixture f;
  const auto advisor = f.advisor({});
  for (const auto& s : f.space.states()) {
    Rng a(77), b(77);
    const auto x = advisor.emitAdvice(s, a);
    const auto y = advisor.emitAdvice(s, b);
    CHECK(x.hypotheses == y.hypotheses);
    CHECK(x.gestureWindow == y.gestureWindow);
    CHECK(x.fused == y.fused);
    CHECK(toJson(x) == toJson(y));
  }
}

TEST_CASE("channel fidelity regression baselines") {
  const Fixture f;
  // Frozen from 10,000 draws with seed 1. Ten hypotheses nearly always
  // contain a clean sentence, so the fused label is almost always right and
  // the noise shows up in the confidence instead.
  struct Baseline {
    double audio, vision;
    int hits;
    double meanConfidence;
    int congruent;
  };
  for (const auto& b : {Baseline{0.05, 0.2, 10000, 0.92813109243669223, 9819},
                        Baseline{0.05, 0.4, 10000, 0.8254628464063406, 8657},
                        Baseline{0.3, 0.4, 9998, 0.80298761652068684, 8578},
                        Baseline{0.5, 0.6, 9929, 0.58745116470639891, 5950}}) {
    CAPTURE(b.audio);
    CAPTURE(b.vision);
    const auto got = channelStats(f, rates(b.audio, b.vision), 10000, 1);
    CHECK(got.hits == b.hits);
    CHECK(got.meanConfidence == doctest::Approx(b.meanConfidence).epsilon(1e-12));
    CHECK(got.congruent == b.congruent);
  }
}

TEST_CASE("raising one channel's error rate never improves fused accuracy") {
  const Fixture f;
  constexpr int kDraws = 10000;
  auto check = [&](const std::vector<ChannelNoise>& ladder) {
    double previous = 1.0;
    for (const auto& noise : ladder) {
      const double acc = fusedAccuracy(f, noise, kDraws, 5);
      const double se = std::sqrt(std::max(acc * (1.0 - acc), 1e-12) / kDraws);
      CHECK(acc <= previous + 2.0 * se);
      previous = acc;
    }
  };
  std::vector<ChannelNoise> vision, audio;
  for (const double r : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) vision.push_back(rates(0.05, r));
  for (const double r : {0.0, 0.1, 0.2, 0.4, 0.6, 0.8}) audio.push_back(rates(r, 0.2));
  check(vision);
  check(audio);
}

TEST_CASE("noise validation") {
  CHECK_NOTHROW(ChannelNoise{}.validate());
  CHECK_THROWS_AS(rates(-0.1, 0.2).validate(), std::invalid_argument);
  CHECK_THROWS_AS(rates(0.1, 1.2).validate(), std::invalid_argument);
  ChannelNoise n;
  n.hypothesisCount = 0;
  CHECK_THROWS_AS(n.validate(), std::invalid_argument);
}

TEST_CASE("advice events serialize for audit logs") {
  const Fixture f;
  Rng rng(1);
  const auto doc = toJson(f.advisor({}).emitAdvice(initialState(Location::Left), rng));
  CHECK(doc.at("intended") == "grasp");
  CHECK(doc.at("hypotheses").size() == 10);
  CHECK(doc.at("gesture_window").size() == 5);
  CHECK(doc.contains("audio"));
  CHECK(doc.contains("vision"));
  CHECK(doc.at("fused").contains("confidence"));
}
