#include "afirl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "afirl/format.hpp"
#include "afirl/stats.hpp"

namespace afirl {

std::string toString(Condition c) {
  switch (c) {
    case Condition::RL: return "rl";
    case Condition::IRL: return "irl";
    case Condition::RLAff: return "rl-aff";
    case Condition::IRLAff: return "irl-aff";
  }
  return "?";
}

Condition parseCondition(std::string_view text) {
  for (const auto c : {Condition::RL, Condition::IRL, Condition::RLAff, Condition::IRLAff})
    if (toString(c) == text) return c;
  throw std::invalid_argument("unknown condition '" + std::string(text) + "' (rl, irl, rl-aff, irl-aff)");
}

void ExperimentConfig::validate() const {
  if (agents < 1) throw std::invalid_argument("agents must be at least 1");
  if (episodes < 1) throw std::invalid_argument("episodes must be at least 1");
  if (smoothingWindow < 1) throw std::invalid_argument("smoothing window must be at least 1");
  if (param.find_first_of(",\n\r") != std::string::npos)
    throw std::invalid_argument("run label must not contain commas or newlines");
  learner.validate();
  noise.validate();
}

LearnerConfig ExperimentConfig::effectiveLearner() const {
  LearnerConfig cfg = learner;
  cfg.useFeedback = condition == Condition::IRL || condition == Condition::IRLAff;
  cfg.useAffordances = condition == Condition::RLAff || condition == Condition::IRLAff;
  return cfg;
}

std::string ExperimentConfig::paramLabel() const {
  if (!param.empty()) return param;
  const auto cfg = effectiveLearner();
  std::string label;
  auto append = [&label](const std::string& part) {
    if (!label.empty()) label += ';';
    label += part;
  };
  if (cfg.useFeedback) {
    append("theta=" + formatNumber(cfg.thetaMin));
    if (cfg.channel != AdviceChannel::MultiModal) append("channel=" + toString(cfg.channel));
  }
  if (cfg.useAffordances) append("eta=" + formatNumber(cfg.eta));
  return label.empty() ? "-" : label;
}

// ---------------------------------------------------------------------------

ExperimentContext::ExperimentContext(CommandLexicon lexicon)
    : space_(), solution_(solveOptimal(space_)), lexicon_(std::move(lexicon)) {}

void ExperimentContext::setAffordanceNet(AffordanceNet net) {
  predictor_ = std::make_shared<AffordanceModel>(std::move(net), space_);
}

void ExperimentContext::setFailurePredictor(std::shared_ptr<const FailurePredictor> predictor) {
  predictor_ = std::move(predictor);
}

double LearningCurve::meanCumulative() const { return summarize(agentCumulative).mean; }
double LearningCurve::cumulativeStandardError() const { return summarize(agentCumulative).standardError(); }

int LearningCurve::episodesToReach(double fraction) const {
  if (smoothed.empty()) return 0;
  const double best = *std::max_element(smoothed.begin(), smoothed.end());
  const double target = best - (1.0 - fraction) * std::abs(best);
  const auto it = std::find_if(smoothed.begin(), smoothed.end(), [target](double v) { return v >= target; });
  return static_cast<int>(it - smoothed.begin()) + 1;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> runAgent(const ExperimentConfig& cfg, const LearnerConfig& learner,
                             const ExperimentContext& ctx, std::uint64_t index) {
  Rng rng(agentSeed(cfg.masterSeed, index));
  QTable q = cfg.startFromOptimalQ ? QTable::fromSolution(ctx.space(), ctx.solution()) : QTable(ctx.space());
  const Advisor advisor(ctx.space(), ctx.solution(), ctx.lexicon(), cfg.noise);
  const FailurePredictor* predictor = learner.useAffordances ? ctx.predictor() : nullptr;

  std::vector<double> rewards;
  rewards.reserve(static_cast<std::size_t>(cfg.episodes));
  for (int e = 0; e < cfg.episodes; ++e)
    rewards.push_back(runEpisode(q, learner, &advisor, predictor, rng, /*recordTrace=*/false).reward);
  return rewards;
}

}  // namespace

std::vector<std::vector<double>> runAgents(const ExperimentConfig& cfg, const ExperimentContext& ctx) {
  cfg.validate();
  const auto learner = cfg.effectiveLearner();
  if (learner.useAffordances && ctx.predictor() == nullptr)
    throw std::logic_error("condition " + toString(cfg.condition) + " needs an affordance model");

  const auto agents = static_cast<std::size_t>(cfg.agents);
  std::vector<std::vector<double>> rewards(agents);
  unsigned workers = cfg.workers != 0 ? cfg.workers : std::max(1U, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, agents));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failureMutex;
  auto work = [&] {
    for (std::size_t i = next++; i < agents; i = next++) {
      try {
        rewards[i] = runAgent(cfg, learner, ctx, i);
      } catch (...) {
        const std::lock_guard lock(failureMutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return rewards;
}

LearningCurve aggregate(const std::vector<std::vector<double>>& rewards, int smoothingWindow,
                        std::string condition, std::string param) {
  LearningCurve curve;
  curve.condition = std::move(condition);
  curve.param = std::move(param);
  if (rewards.empty()) return curve;
  const std::size_t episodes = rewards.front().size();
  for (const auto& row : rewards)
    if (row.size() != episodes) throw std::invalid_argument("agents ran different episode counts");

  std::vector<double> column(rewards.size());
  curve.rawMean.reserve(episodes);
  curve.standardError.reserve(episodes);
  for (std::size_t e = 0; e < episodes; ++e) {
    for (std::size_t a = 0; a < rewards.size(); ++a) column[a] = rewards[a][e];
    const auto summary = summarize(column);
    curve.rawMean.push_back(summary.mean);
    curve.standardError.push_back(summary.standardError());
  }
  curve.smoothed = smooth(curve.rawMean, smoothingWindow);
  curve.agentCumulative.reserve(rewards.size());
  for (const auto& row : rewards) curve.agentCumulative.push_back(compensatedSum(row));
  return curve;
}

LearningCurve runCondition(const ExperimentConfig& cfg, const ExperimentContext& ctx) {
  return aggregate(runAgents(cfg, ctx), cfg.smoothingWindow, toString(cfg.condition), cfg.paramLabel());
}

std::vector<double> smooth(std::span<const double> raw, int window) {
  if (window < 1) throw std::invalid_argument("smoothing window must be at least 1");
  std::vector<double> out;
  out.reserve(raw.size());
  const auto w = static_cast<std::size_t>(window);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const std::size_t first = i + 1 >= w ? i + 1 - w : 0;
    out.push_back(compensatedSum(raw.subspan(first, i + 1 - first)) / static_cast<double>(i + 1 - first));
  }
  return out;
}

std::string toString(SweepParameter p) { return p == SweepParameter::ThetaMin ? "theta" : "eta"; }

SweepParameter parseSweepParameter(std::string_view text) {
  if (text == "theta") return SweepParameter::ThetaMin;
  if (text == "eta") return SweepParameter::Eta;
  throw std::invalid_argument("unknown sweep parameter '" + std::string(text) + "' (theta, eta)");
}

std::vector<SweepPoint> sweep(const ExperimentConfig& base, SweepParameter parameter,
                              std::span<const double> values, const ExperimentContext& ctx) {
  std::vector<SweepPoint> points;
  points.reserve(values.size());
  for (const double v : values) {
    ExperimentConfig cfg = base;
    (parameter == SweepParameter::ThetaMin ? cfg.learner.thetaMin : cfg.learner.eta) = v;
    points.push_back({v, runCondition(cfg, ctx)});
  }
  return points;
}

// ---------------------------------------------------------------------------

void writeCurvesCsv(std::span<const LearningCurve> curves, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write results file " + path.string());
  out << "episode,condition,param,raw_mean,smoothed_mean,stderr\n";
  for (const auto& c : curves) {
    for (std::size_t e = 0; e < c.rawMean.size(); ++e) {
      out << e << ',' << c.condition << ',' << c.param << ',' << formatNumber(c.rawMean[e]) << ','
          << formatNumber(c.smoothed.at(e)) << ',' << formatNumber(c.standardError.at(e)) << '\n';
    }
  }
  out.flush();
  if (!out) throw std::runtime_error("error while writing results file " + path.string());
}

std::vector<LearningCurve> readCurvesCsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read results file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "episode,condition,param,raw_mean,smoothed_mean,stderr")
    throw std::runtime_error(path.string() + ": missing or unexpected header");

  std::vector<LearningCurve> curves;
  std::map<std::pair<std::string, std::string>, std::size_t> byKey;
  std::size_t lineNo = 1;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 6) throw std::runtime_error(path.string() + ":" + std::to_string(lineNo) + ": expected 6 columns");
    const auto key = std::make_pair(cells[1], cells[2]);
    auto [it, inserted] = byKey.try_emplace(key, curves.size());
    if (inserted) {
      curves.emplace_back();
      curves.back().condition = cells[1];
      curves.back().param = cells[2];
    }
    auto& curve = curves[it->second];
    try {
      if (std::stoul(cells[0]) != curve.rawMean.size()) throw std::runtime_error("episodes out of order");
      curve.rawMean.push_back(std::stod(cells[3]));
      curve.smoothed.push_back(std::stod(cells[4]));
      curve.standardError.push_back(std::stod(cells[5]));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineNo) + ": " + e.what());
    }
  }
  return curves;
}

}  // namespace afirl
