#include "afirl/fusion.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

namespace afirl {

std::string toString(Modality m) { return m == Modality::Audio ? "audio" : "vision"; }

CommandLexicon::CommandLexicon(std::vector<std::string> sentences) : sentences_(std::move(sentences)) {
  if (sentences_.size() != kActionCount)
    throw std::invalid_argument("lexicon needs exactly " + std::to_string(kActionCount) +
                                " sentences, got " + std::to_string(sentences_.size()));
  std::set<std::string> seen;
  for (const auto& s : sentences_) {
    if (s.empty()) throw std::invalid_argument("lexicon sentences must be non-empty");
    if (!seen.insert(s).second) throw std::invalid_argument("duplicate lexicon sentence '" + s + "'");
  }
}

CommandLexicon CommandLexicon::defaults() {
  return CommandLexicon({"go left", "go right", "go home", "grasp", "place", "wipe", "abort"});
}

CommandLexicon CommandLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read lexicon file " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return CommandLexicon(std::move(lines));
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  std::array<std::size_t, 64> small{};
  std::vector<std::size_t> large;
  std::span<std::size_t> row;
  if (b.size() < small.size()) {
    row = std::span<std::size_t>(small.data(), b.size() + 1);
  } else {
    large.resize(b.size() + 1);
    row = large;
  }
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diagonal = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t above = row[j];
      row[j] = std::min({above + 1, row[j - 1] + 1, diagonal + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diagonal = above;
    }
  }
  return row[b.size()];
}

UnimodalPrediction recognizeSpeech(std::span<const std::string> hypotheses,
                                   const CommandLexicon& lexicon) {
  if (hypotheses.empty()) throw std::invalid_argument("speech recognition needs at least one hypothesis");
  std::size_t bestDistance = std::numeric_limits<std::size_t>::max();
  std::size_t bestSentence = 0;
  for (std::size_t j = 0; j < kActionCount; ++j) {
    const auto& sentence = lexicon.sentences()[j];
    for (const auto& h : hypotheses) {
      const auto d = levenshtein(h, sentence);
      if (d < bestDistance) {
        bestDistance = d;
        bestSentence = j;
      }
    }
  }
  const double length = static_cast<double>(lexicon.sentences()[bestSentence].size());
  const double confidence = std::max(0.0, 1.0 - static_cast<double>(bestDistance) / length);
  return {kAllActions[bestSentence], confidence, Modality::Audio};
}

UnimodalPrediction recognizeGesture(std::span<const Action> window) {
  if (window.size() != kGestureWindow)
    throw std::invalid_argument("gesture window must hold exactly " + std::to_string(kGestureWindow) +
                                " labels, got " + std::to_string(window.size()));
  std::array<int, kActionCount> counts{};
  std::array<std::size_t, kActionCount> lastSeen{};
  for (std::size_t i = 0; i < window.size(); ++i) {
    ++counts[indexOf(window[i])];
    lastSeen[indexOf(window[i])] = i;
  }
  std::size_t best = indexOf(window.back());
  for (std::size_t k = 0; k < kActionCount; ++k) {
    if (counts[k] > counts[best] || (counts[k] == counts[best] && counts[k] > 0 && lastSeen[k] > lastSeen[best]))
      best = k;
  }
  return {kAllActions[best], static_cast<double>(counts[best]) / static_cast<double>(kGestureWindow),
          Modality::Vision};
}

double integratedConfidence(double likeliness) { return std::log(1.0 + likeliness) / std::log(3.0); }

IntegratedFeedback integrate(const UnimodalPrediction& audio, const UnimodalPrediction& vision) {
  if (audio.modality != Modality::Audio || vision.modality != Modality::Vision)
    throw std::invalid_argument("integrate expects an audio and a vision prediction");
  IntegratedFeedback out;
  out.label = audio.confidence > vision.confidence ? audio.label : vision.label;
  out.congruent = audio.label == vision.label;
  out.likeliness = out.congruent ? audio.confidence + vision.confidence
                                 : std::abs(audio.confidence - vision.confidence);
  out.confidence = integratedConfidence(out.likeliness);
  return out;
}

}  // namespace afirl
