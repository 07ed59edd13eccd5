#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "afirl/scenario.hpp"

namespace afirl {

enum class Modality : std::uint8_t { Audio, Vision };

std::string toString(Modality m);

/// A (label, confidence) pair produced by one recognition channel.
struct UnimodalPrediction {
  Action label = Action::GoLeft;
  double confidence = 0.0;
  Modality modality = Modality::Audio;

  bool operator==(const UnimodalPrediction&) const = default;
};

/// Audio-visual integration result.
struct IntegratedFeedback {
  Action label = Action::GoLeft;
  double confidence = 0.0;  // ln(1 + likeliness) / ln(3), in [0, 1]
  double likeliness = 0.0;  // in [0, 2]
  bool congruent = false;

  bool operator==(const IntegratedFeedback&) const = default;
};

/// In-domain command sentences, one per action in kAllActions order.
class CommandLexicon {
 public:
  /// Throws std::invalid_argument unless there are exactly seven distinct,
  /// non-empty sentences.
  explicit CommandLexicon(std::vector<std::string> sentences);

  /// "go left", "go right", "go home", "grasp", "place", "wipe", "abort".
  static CommandLexicon defaults();

  /// One sentence per line in action order; blank lines are skipped.
  /// Throws std::runtime_error if the file cannot be read.
  static CommandLexicon load(const std::filesystem::path& path);

  const std::string& sentence(Action a) const { return sentences_[indexOf(a)]; }
  const std::vector<std::string>& sentences() const { return sentences_; }

 private:
  std::vector<std::string> sentences_;
};

/// Character-level edit distance (unit-cost insert, delete, substitute).
std::size_t levenshtein(std::string_view a, std::string_view b);

/// Best in-domain sentence over an n-best hypothesis list.
///
/// The label is the sentence at minimum edit distance over all
/// (hypothesis, sentence) pairs; ties go to the earlier sentence, then the
/// earlier hypothesis. Confidence is max(0, 1 - distance / |sentence|).
/// Throws std::invalid_argument for an empty list.
UnimodalPrediction recognizeSpeech(std::span<const std::string> hypotheses,
                                   const CommandLexicon& lexicon);

inline constexpr std::size_t kGestureWindow = 5;

/// Mode of the last five frame labels (oldest first). Ties go to the label
/// seen most recently; confidence is multiplicity / 5. Throws
/// std::invalid_argument unless the window has exactly five labels.
UnimodalPrediction recognizeGesture(std::span<const Action> window);

/// ln(1 + phi) rescaled by ln(3) so that phi = 2 maps to 1.
double integratedConfidence(double likeliness);

/// Picks the label with the strictly higher confidence (vision on ties) and
/// strengthens or weakens confidence by label agreement. Throws
/// std::invalid_argument if the modalities are not (Audio, Vision).
IntegratedFeedback integrate(const UnimodalPrediction& audio, const UnimodalPrediction& vision);

}  // namespace afirl
