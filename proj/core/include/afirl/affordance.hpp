#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "afirl/scenario.hpp"

namespace afirl {

// Contextual affordances: effect = f(state, object, action). The object acted
// on is implied by the hand contents and arm position inside the state code.

inline constexpr std::size_t kHiddenUnits = 30;

using InputCode = std::array<double, kInputCodeSize>;

/// One (state, action) -> next-state example. An all-zero target marks a
/// transition into a failed state.
struct AffordanceSample {
  InputCode input{};
  StateCode target{};

  bool operator==(const AffordanceSample&) const = default;
};

InputCode encodeInput(const WorldState& s, Action a);

/// One sample per (state, action) in enumeration order, targets from the true
/// transition with each state's canonical episode start.
std::vector<AffordanceSample> generateDataset(const StateSpace& space);

/// CSV with columns x0..x19,y0..y12. Throws std::runtime_error on I/O or
/// parse failure (the message names the file).
void writeDatasetCsv(std::span<const AffordanceSample> samples, const std::filesystem::path& path);
std::vector<AffordanceSample> readDatasetCsv(const std::filesystem::path& path);

/// 20 -> 30 -> 13 perceptron with logistic units on both layers.
///
/// Parameters live in one flat vector so the trainer can treat the network as
/// a least-squares model:
///   [input j][hidden h]  at j * 30 + h   (j = 20 is the hidden bias)
///   [output k][hidden h] at 630 + k * 31 + h   (h = 30 is the output bias)
class AffordanceNet {
 public:
  static constexpr std::size_t kInputs = kInputCodeSize;
  static constexpr std::size_t kHidden = kHiddenUnits;
  static constexpr std::size_t kOutputs = kStateCodeSize;
  static constexpr std::size_t kHiddenBlock = (kInputs + 1) * kHidden;
  static constexpr std::size_t kOutputBlock = kHidden + 1;
  static constexpr std::size_t kParameterCount = kHiddenBlock + kOutputs * kOutputBlock;

  using Output = std::array<double, kOutputs>;

  AffordanceNet();

  /// Weights uniform in [-0.5, 0.5].
  static AffordanceNet randomInit(std::uint64_t seed);

  static constexpr std::size_t inputWeightIndex(std::size_t input, std::size_t hidden) {
    return input * kHidden + hidden;
  }
  static constexpr std::size_t outputWeightIndex(std::size_t output, std::size_t hidden) {
    return kHiddenBlock + output * kOutputBlock + hidden;
  }

  Output forward(std::span<const double, kInputs> input) const;
  /// Forward pass that also returns the hidden activations.
  Output forward(std::span<const double, kInputs> input, std::array<double, kHidden>& hidden) const;

  const Eigen::VectorXd& parameters() const { return params_; }
  void setParameters(Eigen::VectorXd params);

  std::uint64_t seed() const { return seed_; }
  void setSeed(std::uint64_t seed) { seed_ = seed; }

  bool operator==(const AffordanceNet& other) const {
    return seed_ == other.seed_ && params_ == other.params_;
  }

 private:
  Eigen::VectorXd params_;
  std::uint64_t seed_ = 0;
};

/// Derivatives of every network output with respect to every parameter,
/// one row per (sample, output) in sample-major order.
Eigen::MatrixXd jacobian(const AffordanceNet& net, std::span<const AffordanceSample> samples);

/// Sum of squared output errors over a batch.
double sumSquaredError(const AffordanceNet& net, std::span<const AffordanceSample> samples);

struct TrainOptions {
  int epochs = 100;
  std::uint64_t seed = 1;
  double initialDamping = 1e-3;
  double dampingIncrease = 10.0;
  double dampingDecrease = 10.0;
  double maxDamping = 1e10;
  double targetMse = 1e-2;
  /// Stop early once the gradient norm |J^T e| drops below this.
  double minGradient = 1e-7;
};

struct TrainingReport {
  int epochs = 0;              // accepted steps
  int rejectedSteps = 0;
  double initialMse = 0.0;
  double finalMse = 0.0;
  bool converged = false;      // finalMse <= targetMse
  bool dampingSaturated = false;
  bool gradientVanished = false;
  std::vector<double> mseHistory;  // after each accepted step
};

struct TrainingResult {
  AffordanceNet net;
  TrainingReport report;
};

/// Batch damped Gauss-Newton (Levenberg-Marquardt) on the sum of squared
/// errors. Each epoch is one accepted step: the damping grows by
/// `dampingIncrease` on every rejected trial and shrinks by `dampingDecrease`
/// after an accepted one. Deterministic for a given seed. Throws
/// std::invalid_argument on an empty dataset.
TrainingResult train(std::span<const AffordanceSample> samples, const TrainOptions& options = {});

/// Gauss-Newton system pieces: J^T J (lower triangle filled) and J^T e with
/// e = output - target. Exploits the one-hot input sparsity.
struct NormalEquations {
  Eigen::MatrixXd jtj;
  Eigen::VectorXd jte;
  double sse = 0.0;
};
NormalEquations normalEquations(const AffordanceNet& net, std::span<const AffordanceSample> samples);

/// Raw outputs and the decoded next state; nullopt decoded means the
/// transition is predicted to fail (every output below 0.5).
struct EffectPrediction {
  AffordanceNet::Output raw{};
  std::optional<WorldState> decoded;

  bool failed() const { return !decoded.has_value(); }
};

inline constexpr double kFailureThreshold = 0.5;

/// Decodes a 13-component effect code with the same rule used for network outputs.
std::optional<WorldState> decodeEffect(std::span<const double, kStateCodeSize> code);

EffectPrediction predictEffect(const AffordanceNet& net, const WorldState& s, Action a);
bool predictsFailure(const AffordanceNet& net, const WorldState& s, Action a);

struct FidelityReport {
  std::size_t samples = 0;
  std::size_t exactMatches = 0;       // decoded next state and failed flag both right
  std::size_t failureAgreements = 0;  // failed flag right
  double exactRate() const { return samples ? static_cast<double>(exactMatches) / samples : 0.0; }
  double failureRate() const { return samples ? static_cast<double>(failureAgreements) / samples : 0.0; }
};

/// Compares decoded predictions against the dataset targets.
FidelityReport evaluate(const AffordanceNet& net, std::span<const AffordanceSample> samples);

/// Source of "does this action lead to a failed state" answers.
class FailurePredictor {
 public:
  virtual ~FailurePredictor() = default;
  virtual bool predictsFailure(const WorldState& s, Action a) const = 0;
};

/// Trained network with answers cached for every enumerated state. States
/// outside the space fall back to a forward pass.
class AffordanceModel final : public FailurePredictor {
 public:
  AffordanceModel(AffordanceNet net, const StateSpace& space);

  bool predictsFailure(const WorldState& s, Action a) const override;
  const AffordanceNet& net() const { return net_; }

 private:
  AffordanceNet net_;
  const StateSpace* space_;
  std::vector<std::array<bool, kActionCount>> failures_;
};

/// Ground-truth failure answers from the transition function.
class TransitionFailureOracle final : public FailurePredictor {
 public:
  bool predictsFailure(const WorldState& s, Action a) const override;
};

// Weights document: {"format", "version", "seed", "layers": [...], "training": {...}}.
nlohmann::json toJson(const AffordanceNet& net, const TrainingReport* report = nullptr);
AffordanceNet affordanceNetFromJson(const nlohmann::json& doc);
void saveNet(const AffordanceNet& net, const std::filesystem::path& path,
             const TrainingReport* report = nullptr);
/// Throws std::runtime_error if the file is missing or malformed.
AffordanceNet loadNet(const std::filesystem::path& path);

}  // namespace afirl
