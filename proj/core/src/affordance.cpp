#include "afirl/affordance.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "afirl/format.hpp"
#include "afirl/random.hpp"

namespace afirl {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr std::size_t kBiasInput = AffordanceNet::kInputs;

}  // namespace

InputCode encodeInput(const WorldState& s, Action a) {
  InputCode in{};
  const auto state = encode(s);
  const auto action = encode(a);
  std::copy(state.begin(), state.end(), in.begin());
  std::copy(action.begin(), action.end(), in.begin() + kStateCodeSize);
  return in;
}

std::vector<AffordanceSample> generateDataset(const StateSpace& space) {
  std::vector<AffordanceSample> samples;
  samples.reserve(space.size() * kActionCount);
  for (std::size_t i = 0; i < space.size(); ++i) {
    for (const auto a : kAllActions) {
      AffordanceSample sample;
      sample.input = encodeInput(space.state(i), a);
      const auto out = space.canonicalStep(i, a);
      if (!out.failed()) sample.target = encode(out.next);
      samples.push_back(sample);
    }
  }
  return samples;
}

void writeDatasetCsv(std::span<const AffordanceSample> samples, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file " + path.string());
  for (std::size_t j = 0; j < kInputCodeSize; ++j) out << 'x' << j << ',';
  for (std::size_t k = 0; k < kStateCodeSize; ++k) out << 'y' << k << (k + 1 < kStateCodeSize ? "," : "\n");
  for (const auto& s : samples) {
    for (const double v : s.input) out << formatNumber(v) << ',';
    for (std::size_t k = 0; k < kStateCodeSize; ++k)
      out << formatNumber(s.target[k]) << (k + 1 < kStateCodeSize ? "," : "\n");
  }
  if (!out) throw std::runtime_error("error while writing dataset file " + path.string());
}

std::vector<AffordanceSample> readDatasetCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read dataset file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset file " + path.string());
  std::vector<AffordanceSample> samples;
  std::size_t lineNo = 1;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    std::vector<double> values;
    std::stringstream cells(line);
    for (std::string cell; std::getline(cells, cell, ',');) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineNo) + ": bad number '" + cell + "'");
      }
    }
    if (values.size() != kInputCodeSize + kStateCodeSize)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineNo) + ": expected " +
                               std::to_string(kInputCodeSize + kStateCodeSize) + " columns");
    AffordanceSample s;
    std::copy_n(values.begin(), kInputCodeSize, s.input.begin());
    std::copy_n(values.begin() + kInputCodeSize, kStateCodeSize, s.target.begin());
    samples.push_back(s);
  }
  return samples;
}

// ---------------------------------------------------------------------------
// Network

AffordanceNet::AffordanceNet() : params_(Eigen::VectorXd::Zero(kParameterCount)) {}

AffordanceNet AffordanceNet::randomInit(std::uint64_t seed) {
  AffordanceNet net;
  Rng rng(seed);
  for (Eigen::Index i = 0; i < net.params_.size(); ++i) net.params_[i] = rng.uniform() - 0.5;
  net.seed_ = seed;
  return net;
}

void AffordanceNet::setParameters(Eigen::VectorXd params) {
  if (params.size() != static_cast<Eigen::Index>(kParameterCount))
    throw std::invalid_argument("expected " + std::to_string(kParameterCount) + " parameters");
  if (!params.allFinite()) throw std::invalid_argument("network parameters must be finite");
  params_ = std::move(params);
}

AffordanceNet::Output AffordanceNet::forward(std::span<const double, kInputs> input) const {
  std::array<double, kHidden> hidden{};
  return forward(input, hidden);
}

AffordanceNet::Output AffordanceNet::forward(std::span<const double, kInputs> input,
                                             std::array<double, kHidden>& hidden) const {
  const double* p = params_.data();
  for (std::size_t h = 0; h < kHidden; ++h) hidden[h] = p[inputWeightIndex(kBiasInput, h)];
  for (std::size_t j = 0; j < kInputs; ++j) {
    if (input[j] == 0.0) continue;
    for (std::size_t h = 0; h < kHidden; ++h) hidden[h] += p[inputWeightIndex(j, h)] * input[j];
  }
  for (auto& a : hidden) a = sigmoid(a);

  Output out{};
  for (std::size_t k = 0; k < kOutputs; ++k) {
    double z = p[outputWeightIndex(k, kHidden)];
    for (std::size_t h = 0; h < kHidden; ++h) z += p[outputWeightIndex(k, h)] * hidden[h];
    out[k] = sigmoid(z);
  }
  return out;
}

Eigen::MatrixXd jacobian(const AffordanceNet& net, std::span<const AffordanceSample> samples) {
  using Net = AffordanceNet;
  const double* p = net.parameters().data();
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(samples.size() * Net::kOutputs),
                                              static_cast<Eigen::Index>(Net::kParameterCount));
  std::array<double, Net::kHidden> hidden{};
  for (std::size_t n = 0; n < samples.size(); ++n) {
    const auto& x = samples[n].input;
    const auto y = net.forward(x, hidden);
    for (std::size_t k = 0; k < Net::kOutputs; ++k) {
      const auto row = static_cast<Eigen::Index>(n * Net::kOutputs + k);
      const double dy = y[k] * (1.0 - y[k]);
      for (std::size_t h = 0; h < Net::kHidden; ++h) {
        jac(row, static_cast<Eigen::Index>(Net::outputWeightIndex(k, h))) = dy * hidden[h];
        const double dh = dy * p[Net::outputWeightIndex(k, h)] * hidden[h] * (1.0 - hidden[h]);
        for (std::size_t j = 0; j < Net::kInputs; ++j)
          jac(row, static_cast<Eigen::Index>(Net::inputWeightIndex(j, h))) = dh * x[j];
        jac(row, static_cast<Eigen::Index>(Net::inputWeightIndex(kBiasInput, h))) = dh;
      }
      jac(row, static_cast<Eigen::Index>(Net::outputWeightIndex(k, Net::kHidden))) = dy;
    }
  }
  return jac;
}

double sumSquaredError(const AffordanceNet& net, std::span<const AffordanceSample> samples) {
  double sse = 0.0;
  for (const auto& s : samples) {
    const auto y = net.forward(s.input);
    for (std::size_t k = 0; k < AffordanceNet::kOutputs; ++k) {
      const double e = y[k] - s.target[k];
      sse += e * e;
    }
  }
  return sse;
}

NormalEquations normalEquations(const AffordanceNet& net, std::span<const AffordanceSample> samples) {
  using Net = AffordanceNet;
  constexpr auto H = static_cast<Eigen::Index>(Net::kHidden);
  constexpr auto K = static_cast<Eigen::Index>(Net::kOutputs);
  constexpr auto B = static_cast<Eigen::Index>(Net::kOutputBlock);
  const double* p = net.parameters().data();

  NormalEquations eq;
  eq.jtj = Eigen::MatrixXd::Zero(Net::kParameterCount, Net::kParameterCount);
  eq.jte = Eigen::VectorXd::Zero(Net::kParameterCount);

  std::array<double, Net::kHidden> hidden{};
  std::vector<std::size_t> active;
  std::vector<double> activeValue;
  // Per-sample Jacobian split into the hidden-layer part (rows = outputs,
  // columns = hidden unit; scaled by each active input afterwards) and the
  // output-layer part (row k touches only its own block of 31 columns).
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic> hiddenPart(K, H);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic> outputPart(K, B);
  Eigen::VectorXd err(K);

  for (const auto& s : samples) {
    const auto y = net.forward(s.input, hidden);
    active.clear();
    activeValue.clear();
    for (std::size_t j = 0; j < Net::kInputs; ++j) {
      if (s.input[j] != 0.0) {
        active.push_back(j);
        activeValue.push_back(s.input[j]);
      }
    }
    active.push_back(kBiasInput);
    activeValue.push_back(1.0);

    for (Eigen::Index k = 0; k < K; ++k) {
      const double yk = y[static_cast<std::size_t>(k)];
      const double dy = yk * (1.0 - yk);
      err[k] = yk - s.target[static_cast<std::size_t>(k)];
      eq.sse += err[k] * err[k];
      for (Eigen::Index h = 0; h < H; ++h) {
        const double a = hidden[static_cast<std::size_t>(h)];
        outputPart(k, h) = dy * a;
        hiddenPart(k, h) = dy * p[Net::outputWeightIndex(static_cast<std::size_t>(k), static_cast<std::size_t>(h))] *
                           a * (1.0 - a);
      }
      outputPart(k, H) = dy;
    }

    // Hidden x hidden: blocks (ja, jb) = xa * xb * G^T G.
    const Eigen::MatrixXd gtg = hiddenPart.transpose() * hiddenPart;
    const Eigen::VectorXd gte = hiddenPart.transpose() * err;
    for (std::size_t a = 0; a < active.size(); ++a) {
      const auto rowA = static_cast<Eigen::Index>(Net::inputWeightIndex(active[a], 0));
      eq.jte.segment(rowA, H) += activeValue[a] * gte;
      for (std::size_t b = 0; b <= a; ++b) {
        const auto colB = static_cast<Eigen::Index>(Net::inputWeightIndex(active[b], 0));
        eq.jtj.block(rowA, colB, H, H) += (activeValue[a] * activeValue[b]) * gtg;
      }
    }
    for (Eigen::Index k = 0; k < K; ++k) {
      const auto rowK = static_cast<Eigen::Index>(Net::outputWeightIndex(static_cast<std::size_t>(k), 0));
      const auto ok = outputPart.row(k);
      // Output x output (only the diagonal block of output k is non-zero).
      eq.jtj.block(rowK, rowK, B, B) += ok.transpose() * ok;
      eq.jte.segment(rowK, B) += err[k] * ok.transpose();
      // Output x hidden; output parameters come after hidden ones, so this
      // lands in the lower triangle.
      const auto gk = hiddenPart.row(k);
      const Eigen::MatrixXd cross = ok.transpose() * gk;
      for (std::size_t a = 0; a < active.size(); ++a) {
        const auto colA = static_cast<Eigen::Index>(Net::inputWeightIndex(active[a], 0));
        eq.jtj.block(rowK, colA, B, H) += activeValue[a] * cross;
      }
    }
  }
  return eq;
}

TrainingResult train(std::span<const AffordanceSample> samples, const TrainOptions& options) {
  if (samples.empty()) throw std::invalid_argument("cannot train on an empty dataset");
  if (options.epochs < 0) throw std::invalid_argument("epochs must be non-negative");

  TrainingResult result{AffordanceNet::randomInit(options.seed), {}};
  auto& report = result.report;
  const double outputs = static_cast<double>(samples.size() * AffordanceNet::kOutputs);

  double damping = options.initialDamping;
  double sse = sumSquaredError(result.net, samples);
  report.initialMse = sse / outputs;

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    const auto eq = normalEquations(result.net, samples);
    if (eq.jte.norm() < options.minGradient) {
      report.gradientVanished = true;
      break;
    }
    bool accepted = false;
    while (damping <= options.maxDamping) {
      Eigen::MatrixXd system = eq.jtj;
      system.diagonal().array() += damping;
      const Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(system);
      if (llt.info() == Eigen::Success) {
        Eigen::VectorXd candidate = result.net.parameters() - llt.solve(eq.jte);
        if (candidate.allFinite()) {
          AffordanceNet trial = result.net;
          trial.setParameters(std::move(candidate));
          const double trialSse = sumSquaredError(trial, samples);
          if (trialSse < sse) {
            result.net = std::move(trial);
            sse = trialSse;
            damping /= options.dampingDecrease;
            accepted = true;
            break;
          }
        }
      }
      ++report.rejectedSteps;
      damping *= options.dampingIncrease;
    }
    if (!accepted) {
      report.dampingSaturated = true;
      break;
    }
    ++report.epochs;
    report.mseHistory.push_back(sse / outputs);
  }

  report.finalMse = sse / outputs;
  report.converged = report.finalMse <= options.targetMse;
  return result;
}

// ---------------------------------------------------------------------------
// Prediction

std::optional<WorldState> decodeEffect(std::span<const double, kStateCodeSize> code) {
  bool anyActive = false;
  for (const double v : code) anyActive = anyActive || v >= kFailureThreshold;
  if (!anyActive) return std::nullopt;
  return decodeState(code);
}

EffectPrediction predictEffect(const AffordanceNet& net, const WorldState& s, Action a) {
  EffectPrediction out;
  const auto input = encodeInput(s, a);
  out.raw = net.forward(input);
  out.decoded = decodeEffect(out.raw);
  return out;
}

bool predictsFailure(const AffordanceNet& net, const WorldState& s, Action a) {
  return predictEffect(net, s, a).failed();
}

FidelityReport evaluate(const AffordanceNet& net, std::span<const AffordanceSample> samples) {
  FidelityReport report;
  for (const auto& s : samples) {
    const auto raw = net.forward(s.input);
    const auto predicted = decodeEffect(raw);
    const auto expected = decodeEffect(s.target);
    ++report.samples;
    if (predicted.has_value() == expected.has_value()) {
      ++report.failureAgreements;
      if (predicted == expected) ++report.exactMatches;
    }
  }
  return report;
}

AffordanceModel::AffordanceModel(AffordanceNet net, const StateSpace& space)
    : net_(std::move(net)), space_(&space), failures_(space.size()) {
  for (std::size_t i = 0; i < space.size(); ++i)
    for (const auto a : kAllActions) failures_[i][indexOf(a)] = afirl::predictsFailure(net_, space.state(i), a);
}

bool AffordanceModel::predictsFailure(const WorldState& s, Action a) const {
  if (const auto index = space_->indexOf(s)) return failures_[*index][indexOf(a)];
  return afirl::predictsFailure(net_, s, a);
}

bool TransitionFailureOracle::predictsFailure(const WorldState& s, Action a) const {
  return step(s, a, Location::Left).failed();
}

// ---------------------------------------------------------------------------
// Persistence

nlohmann::json toJson(const AffordanceNet& net, const TrainingReport* report) {
  using Net = AffordanceNet;
  const auto& p = net.parameters();
  nlohmann::json hiddenWeights = nlohmann::json::array();
  nlohmann::json hiddenBias = nlohmann::json::array();
  for (std::size_t h = 0; h < Net::kHidden; ++h) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < Net::kInputs; ++j) row.push_back(p[static_cast<Eigen::Index>(Net::inputWeightIndex(j, h))]);
    hiddenWeights.push_back(std::move(row));
    hiddenBias.push_back(p[static_cast<Eigen::Index>(Net::inputWeightIndex(kBiasInput, h))]);
  }
  nlohmann::json outputWeights = nlohmann::json::array();
  nlohmann::json outputBias = nlohmann::json::array();
  for (std::size_t k = 0; k < Net::kOutputs; ++k) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t h = 0; h < Net::kHidden; ++h) row.push_back(p[static_cast<Eigen::Index>(Net::outputWeightIndex(k, h))]);
    outputWeights.push_back(std::move(row));
    outputBias.push_back(p[static_cast<Eigen::Index>(Net::outputWeightIndex(k, Net::kHidden))]);
  }
  nlohmann::json doc = {
      {"format", "afirl-affordance-net"},
      {"version", 1},
      {"seed", net.seed()},
      {"layers",
       {{{"inputs", Net::kInputs}, {"outputs", Net::kHidden}, {"activation", "sigmoid"},
         {"weights", hiddenWeights}, {"bias", hiddenBias}},
        {{"inputs", Net::kHidden}, {"outputs", Net::kOutputs}, {"activation", "sigmoid"},
         {"weights", outputWeights}, {"bias", outputBias}}}},
  };
  if (report != nullptr) {
    doc["training"] = {{"epochs", report->epochs},
                       {"rejected_steps", report->rejectedSteps},
                       {"initial_mse", report->initialMse},
                       {"final_mse", report->finalMse},
                       {"converged", report->converged}};
  }
  return doc;
}

AffordanceNet affordanceNetFromJson(const nlohmann::json& doc) {
  using Net = AffordanceNet;
  if (doc.value("format", std::string{}) != "afirl-affordance-net")
    throw std::runtime_error("not an affordance network document");
  const auto& layers = doc.at("layers");
  if (!layers.is_array() || layers.size() != 2) throw std::runtime_error("expected two layers");
  const auto& hidden = layers[0];
  const auto& output = layers[1];
  if (hidden.at("inputs") != Net::kInputs || hidden.at("outputs") != Net::kHidden ||
      output.at("inputs") != Net::kHidden || output.at("outputs") != Net::kOutputs)
    throw std::runtime_error("layer shapes do not match a 20-30-13 network");

  Eigen::VectorXd p(static_cast<Eigen::Index>(Net::kParameterCount));
  for (std::size_t h = 0; h < Net::kHidden; ++h) {
    const auto& row = hidden.at("weights").at(h);
    if (row.size() != Net::kInputs) throw std::runtime_error("hidden weight row has the wrong length");
    for (std::size_t j = 0; j < Net::kInputs; ++j)
      p[static_cast<Eigen::Index>(Net::inputWeightIndex(j, h))] = row.at(j).get<double>();
    p[static_cast<Eigen::Index>(Net::inputWeightIndex(kBiasInput, h))] = hidden.at("bias").at(h).get<double>();
  }
  for (std::size_t k = 0; k < Net::kOutputs; ++k) {
    const auto& row = output.at("weights").at(k);
    if (row.size() != Net::kHidden) throw std::runtime_error("output weight row has the wrong length");
    for (std::size_t h = 0; h < Net::kHidden; ++h)
      p[static_cast<Eigen::Index>(Net::outputWeightIndex(k, h))] = row.at(h).get<double>();
    p[static_cast<Eigen::Index>(Net::outputWeightIndex(k, Net::kHidden))] = output.at("bias").at(k).get<double>();
  }
  AffordanceNet net;
  net.setParameters(std::move(p));
  net.setSeed(doc.value("seed", std::uint64_t{0}));
  return net;
}

void saveNet(const AffordanceNet& net, const std::filesystem::path& path, const TrainingReport* report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write weights file " + path.string());
  out << toJson(net, report).dump(2) << '\n';
  if (!out) throw std::runtime_error("error while writing weights file " + path.string());
}

AffordanceNet loadNet(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read weights file " + path.string());
  try {
    return affordanceNetFromJson(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace afirl
