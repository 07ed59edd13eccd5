#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "afirl/fusion.hpp"

using namespace afirl;

namespace {

UnimodalPrediction audio(Action a, double c) { return {a, c, Modality::Audio}; }
UnimodalPrediction vision(Action a, double c) { return {a, c, Modality::Vision}; }

}  // namespace

TEST_CASE("levenshtein") {
  CHECK(levenshtein("", "") == 0);
  CHECK(levenshtein("abc", "") == 3);
  CHECK(levenshtein("", "abc") == 3);
  CHECK(levenshtein("go lift", "go left") == 1);
  CHECK(levenshtein("kitten", "sitting") == 3);
  CHECK(levenshtein("flaw", "lawn") == 2);
  const std::string longA(100, 'a');
  std::string longB = longA;
  longB[50] = 'b';
  CHECK(levenshtein(longA, longB) == 1);
  CHECK(levenshtein(longA, "") == 100);
}

TEST_CASE("levenshtein is a metric on small strings") {
  const std::vector<std::string> words = {"", "a", "go", "go left", "go right", "wipe", "abort", "grasp", "xyz"};
  for (const auto& a : words)
    for (const auto& b : words) {
      CHECK(levenshtein(a, b) == levenshtein(b, a));
      CHECK((levenshtein(a, b) == 0) == (a == b));
      for (const auto& c : words) CHECK(levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c));
    }
}

TEST_CASE("speech recognition") {
  const auto lexicon = CommandLexicon::defaults();
  const std::vector<std::string> exact = {"go left"};
  CHECK(recognizeSpeech(exact, lexicon) == audio(Action::GoLeft, 1.0));

  const std::vector<std::string> typo = {"go lift"};
  const auto p = recognizeSpeech(typo, lexicon);
  CHECK(p.label == Action::GoLeft);
  CHECK(p.confidence == doctest::Approx(1.0 - 1.0 / 7.0).epsilon(1e-12));

  const std::vector<std::string> junk = {"zzzzzzzzzzzz"};
  CHECK(recognizeSpeech(junk, lexicon).confidence == 0.0);

  // The best pair over the whole n-best list wins.
  const std::vector<std::string> nbest = {"qqqqq", "wipx", "zzz"};
  const auto best = recognizeSpeech(nbest, lexicon);
  CHECK(best.label == Action::Wipe);
  CHECK(best.confidence == doctest::Approx(0.75));

  CHECK_THROWS_AS(recognizeSpeech(std::vector<std::string>{}, lexicon), std::invalid_argument);
}

TEST_CASE("gesture recognition") {
  using A = Action;
  const std::array<A, 5> unanimous = {A::Wipe, A::Wipe, A::Wipe, A::Wipe, A::Wipe};
  CHECK(recognizeGesture(unanimous) == vision(A::Wipe, 1.0));
  const std::array<A, 5> four = {A::Wipe, A::Wipe, A::Wipe, A::Grasp, A::Wipe};
  CHECK(recognizeGesture(four) == vision(A::Wipe, 0.8));
  // Ties go to the label seen most recently.
  const std::array<A, 5> tie = {A::Grasp, A::Wipe, A::Grasp, A::Wipe, A::Abort};
  CHECK(recognizeGesture(tie).label == A::Wipe);
  CHECK(recognizeGesture(tie).confidence == doctest::Approx(0.4));
  const std::array<A, 5> spread = {A::GoLeft, A::GoRight, A::GoHome, A::Grasp, A::Place};
  CHECK(recognizeGesture(spread) == vision(A::Place, 0.2));

  const std::array<A, 4> shortWindow = {A::Wipe, A::Wipe, A::Wipe, A::Wipe};
  CHECK_THROWS_AS(recognizeGesture(shortWindow), std::invalid_argument);
}

TEST_CASE("gesture confidence takes only the five multiples of 0.2") {
  // Every window over three labels.
  const std::array<Action, 3> labels = {Action::GoLeft, Action::Wipe, Action::Abort};
  for (int code = 0; code < 243; ++code) {
    std::array<Action, 5> window{};
    int c = code;
    for (auto& w : window) {
      w = labels[static_cast<std::size_t>(c % 3)];
      c /= 3;
    }
    const auto p = recognizeGesture(window);
    const double scaled = p.confidence * 5.0;
    CHECK(scaled == std::round(scaled));
    CHECK(p.confidence >= 0.4 - 1e-12);  // with three labels the mode occurs at least twice
    CHECK(p.confidence <= 1.0);
  }
}

TEST_CASE("integration worked examples") {
  const auto a = integrate(audio(Action::GoLeft, 0.8), vision(Action::GoLeft, 0.6));
  CHECK(a.label == Action::GoLeft);
  CHECK(a.likeliness == doctest::Approx(1.4));
  CHECK(a.confidence == doctest::Approx(0.7968).epsilon(1e-4 / 0.7968));
  CHECK(a.congruent);

  const auto b = integrate(audio(Action::GoLeft, 1.0), vision(Action::GoLeft, 1.0));
  CHECK(b.confidence == 1.0);

  const auto c = integrate(audio(Action::GoLeft, 0.7), vision(Action::Wipe, 0.7));
  CHECK(c.label == Action::Wipe);
  CHECK(c.likeliness == 0.0);
  CHECK(c.confidence == 0.0);
  CHECK_FALSE(c.congruent);

  const auto d = integrate(audio(Action::Grasp, 0.9), vision(Action::Wipe, 0.4));
  CHECK(d.label == Action::Grasp);
  CHECK(d.likeliness == doctest::Approx(0.5));
}

TEST_CASE("integration rejects swapped modalities") {
  CHECK_THROWS_AS(integrate(vision(Action::GoLeft, 1.0), audio(Action::GoLeft, 1.0)), std::invalid_argument);
}

TEST_CASE("integrated confidence") {
  CHECK(integratedConfidence(2.0) == 1.0);
  CHECK(integratedConfidence(0.0) == 0.0);
  double previous = -1.0;
  for (int i = 0; i <= 200; ++i) {
    const double g = integratedConfidence(i * 0.01);
    CHECK(g >= 0.0);
    CHECK(g <= 1.0);
    CHECK(g > previous);
    previous = g;
  }
}

TEST_CASE("fusion properties on a 0.05 grid") {
  for (int i = 0; i <= 20; ++i)
    for (int j = 0; j <= 20; ++j) {
      const double ca = i * 0.05;
      const double cv = j * 0.05;
      const auto same = integrate(audio(Action::Grasp, ca), vision(Action::Grasp, cv));
      const auto diff = integrate(audio(Action::Grasp, ca), vision(Action::Place, cv));
      for (const auto& f : {same, diff}) {
        CHECK(f.confidence >= 0.0);
        CHECK(f.confidence <= 1.0);
        CHECK(f.likeliness >= 0.0);
        CHECK(f.likeliness <= 2.0);
      }
      CHECK(same.label == Action::Grasp);
      CHECK(diff.label == (ca > cv ? Action::Grasp : Action::Place));
      if (ca > 0.0 && cv > 0.0) CHECK(same.confidence > diff.confidence);
    }
}

TEST_CASE("lexicon") {
  const auto lexicon = CommandLexicon::defaults();
  CHECK(lexicon.sentence(Action::GoLeft) == "go left");
  CHECK(lexicon.sentence(Action::Abort) == "abort");
  CHECK_THROWS_AS(CommandLexicon({"a", "b"}), std::invalid_argument);
  CHECK_THROWS_AS(CommandLexicon({"a", "b", "c", "d", "e", "f", "a"}), std::invalid_argument);
  CHECK_THROWS_AS(CommandLexicon({"a", "b", "c", "d", "e", "f", ""}), std::invalid_argument);

  const auto path = std::filesystem::temp_directory_path() / "afirl-lexicon-test.txt";
  {
    std::ofstream out(path);
    out << "move left\nmove right\n\nreturn\ntake\nput down\nclean\nstop\n";
  }
  const auto loaded = CommandLexicon::load(path);
  CHECK(loaded.sentence(Action::GoHome) == "return");
  CHECK(loaded.sentence(Action::Abort) == "stop");
  std::filesystem::remove(path);
  CHECK_THROWS_AS(CommandLexicon::load(path), std::runtime_error);
}
