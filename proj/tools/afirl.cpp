#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "afirl/affordance.hpp"
#include "afirl/experiment.hpp"
#include "afirl/format.hpp"
#include "afirl/fusion.hpp"
#include "afirl/plot.hpp"
#include "afirl/scenario.hpp"
#include "json_config.hpp"

#ifdef AFIRL_HAVE_SESSION
#include "afirl/server.hpp"
#include "afirl/session.hpp"
#endif

namespace fs = std::filesystem;
using namespace afirl;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

// Reference sizes reported alongside what the rules produce.
constexpr int kReferenceStates = 53;
constexpr int kReferenceSamples = 371;

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

fs::path defaultOutputDir() {
  const char* env = std::getenv("AFIRL_OUTPUT_DIR");
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::path("results");
}

fs::path prepareOutput(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

struct GlobalFlags {
  std::string lexicon;

  CommandLexicon loadLexicon() const {
    return lexicon.empty() ? CommandLexicon::defaults() : CommandLexicon::load(lexicon);
  }
};

// Where the affordance predictor comes from: a weights file, or a fresh
// training run with the given seed.
struct NetFlags {
  std::string path;
  std::uint64_t seed = 1;
  int epochs = 100;

  void add(CLI::App* app) {
    app->add_option("--net", path, "Affordance network weights (JSON); trained at startup when omitted")
        ->check(CLI::ExistingFile);
    app->add_option("--net-seed", seed, "Weight initialization seed when training at startup")->capture_default_str();
    app->add_option("--net-epochs", epochs, "Training epochs when training at startup")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
  }

  AffordanceNet obtain(const StateSpace& space) const {
    if (!path.empty()) return loadNet(path);
    std::cerr << "training affordance network (seed " << seed << ")\n";
    TrainOptions options;
    options.seed = seed;
    options.epochs = epochs;
    const auto samples = generateDataset(space);
    return train(samples, options).net;
  }
};

struct ExperimentFlags {
  ExperimentConfig cfg;
  std::string channel = "multimodal";
  std::string out = defaultOutputDir().string();
  std::string name;

  void add(CLI::App* app) {
    auto& l = cfg.learner;
    app->add_option("--agents", cfg.agents, "Independent agents")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--episodes", cfg.episodes, "Episodes per agent")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--alpha", l.alpha, "Learning rate")->capture_default_str();
    app->add_option("--gamma", l.gamma, "Discount factor")->capture_default_str();
    app->add_option("--epsilon", l.epsilon, "Exploration probability")->capture_default_str();
    app->add_option("--feedback-probability", l.feedbackProbability, "Chance of advice per step")
        ->capture_default_str();
    app->add_option("--theta", l.thetaMin, "Advice is used only above this confidence")->capture_default_str();
    app->add_option("--eta", l.eta, "Probability the affordance check runs")->capture_default_str();
    app->add_option("--channel", channel, "Advice channel")
        ->capture_default_str()
        ->check(CLI::IsMember({"multimodal", "audio", "vision"}));
    app->add_option("--max-steps", l.maxStepsPerEpisode, "Step limit per episode")->capture_default_str();
    app->add_option("--audio-noise", cfg.noise.audioCharErrorRate, "Per-character speech error rate")
        ->capture_default_str();
    app->add_option("--vision-noise", cfg.noise.visionLabelErrorRate, "Per-frame gesture error rate")
        ->capture_default_str();
    app->add_option("--hypotheses", cfg.noise.hypothesisCount, "Size of the speech n-best list")->capture_default_str();
    app->add_option("--window", cfg.smoothingWindow, "Smoothing window in episodes")->capture_default_str();
    app->add_option("--seed", cfg.masterSeed, "Master seed")->capture_default_str();
    app->add_option("--workers", cfg.workers, "Worker threads (0 = all cores)")->capture_default_str();
    app->add_option("--out", out, "Output directory (default from AFIRL_OUTPUT_DIR)")->capture_default_str();
    app->add_option("--name", name, "Base name of the output files");
  }

  ExperimentConfig build() const {
    ExperimentConfig c = cfg;
    c.learner.channel = parseAdviceChannel(channel);
    return c;
  }
};

bool needsPredictor(Condition c) { return c == Condition::RLAff || c == Condition::IRLAff; }

std::string describe(const LearningCurve& c) {
  return c.condition + " " + c.param + ": mean cumulative reward " + fixed(c.meanCumulative(), 2) + " +- " +
         fixed(c.cumulativeStandardError(), 2) + " (SE), final smoothed " +
         fixed(c.smoothed.empty() ? 0.0 : c.smoothed.back()) + ", 95% of best smoothed at episode " +
         std::to_string(c.episodesToReach(0.95));
}

// ---------------------------------------------------------------------------

int runEnumerate(const std::string& datasetPath) {
  const StateSpace space;
  const auto solution = solveOptimal(space);
  std::cout << "index,state,origin,optimal_action,value\n";
  for (std::size_t i = 0; i < space.size(); ++i)
    std::cout << i << ',' << toString(space.state(i)) << ',' << toString(space.origin(i)) << ','
              << toString(solution.policy[i]) << ',' << fixed(solution.values[i], 6) << '\n';
  const auto samples = generateDataset(space);
  std::cout << "states: " << space.size() << " (reference count " << kReferenceStates << ")\n"
            << "dataset samples: " << samples.size() << " (reference count " << kReferenceSamples << ")\n";
  if (!datasetPath.empty()) {
    writeDatasetCsv(samples, datasetPath);
    std::cout << "dataset written to " << datasetPath << '\n';
  }
  return 0;
}

int runTrain(const TrainOptions& options, const fs::path& outDir, const std::string& name) {
  const StateSpace space;
  const auto samples = generateDataset(space);
  const auto result = train(samples, options);
  const auto fidelity = evaluate(result.net, samples);
  const auto& r = result.report;

  prepareOutput(outDir);
  const auto weights = outDir / (name + ".json");
  saveNet(result.net, weights, &r);
  const nlohmann::json report = {{"samples", fidelity.samples},
                                 {"exactMatches", fidelity.exactMatches},
                                 {"failureAgreements", fidelity.failureAgreements},
                                 {"exactRate", fidelity.exactRate()},
                                 {"failureRate", fidelity.failureRate()},
                                 {"epochs", r.epochs},
                                 {"rejectedSteps", r.rejectedSteps},
                                 {"initialMse", r.initialMse},
                                 {"finalMse", r.finalMse},
                                 {"gradientVanished", r.gradientVanished},
                                 {"dampingSaturated", r.dampingSaturated}};
  const auto reportPath = outDir / (name + "-accuracy.json");
  std::ofstream reportOut(reportPath, std::ios::binary);
  if (!(reportOut << report.dump(2) << '\n')) throw std::runtime_error("cannot write " + reportPath.string());

  std::cout << "epochs: " << r.epochs << " accepted, " << r.rejectedSteps << " rejected"
            << (r.gradientVanished ? " (stopped: gradient vanished)" : "") << '\n'
            << "mse: " << formatNumber(r.initialMse) << " -> " << formatNumber(r.finalMse) << '\n'
            << "exact match: " << fidelity.exactMatches << '/' << fidelity.samples << " ("
            << fixed(100.0 * fidelity.exactRate(), 2) << "%)\n"
            << "failure flag agreement: " << fidelity.failureAgreements << '/' << fidelity.samples << " ("
            << fixed(100.0 * fidelity.failureRate(), 2) << "%)\n"
            << "weights: " << weights.string() << "\nreport: " << reportPath.string() << '\n';
  return 0;
}

void writeOutputs(std::span<const LearningCurve> curves, std::span<const PlotPanel> panels, const fs::path& outDir,
                  const std::string& name, const std::string& title) {
  prepareOutput(outDir);
  const auto csv = outDir / (name + ".csv");
  const auto svg = outDir / (name + ".svg");
  writeCurvesCsv(curves, csv);
  writeSvgPlot(panels, title, svg);
  std::cout << "curves: " << csv.string() << "\nplot: " << svg.string() << '\n';
}

PlotSeries series(const LearningCurve& c, std::string label) { return {std::move(label), c.smoothed}; }

int runRun(const ExperimentFlags& flags, const std::string& condition, const NetFlags& net,
           const GlobalFlags& global) {
  auto cfg = flags.build();
  cfg.condition = parseCondition(condition);
  cfg.validate();
  ExperimentContext ctx(global.loadLexicon());
  if (needsPredictor(cfg.condition)) ctx.setAffordanceNet(net.obtain(ctx.space()));

  const auto curve = runCondition(cfg, ctx);
  std::cout << describe(curve) << '\n';
  const std::vector<LearningCurve> curves{curve};
  const std::vector<PlotPanel> panels{{curve.condition, {series(curve, curve.condition + " " + curve.param)}}};
  writeOutputs(curves, panels, flags.out, flags.name.empty() ? "run-" + condition : flags.name,
               "Smoothed reward, " + curve.condition);
  return 0;
}

struct SweepFlags {
  std::string parameter;
  std::vector<double> values;
  std::vector<std::string> conditions;
  bool baseline = false;
};

int runSweep(const ExperimentFlags& flags, const SweepFlags& sf, const NetFlags& net, const GlobalFlags& global) {
  const auto base = flags.build();
  base.validate();

  auto conditions = sf.conditions;
  if (conditions.empty()) {
    if (sf.parameter == "eta") conditions = {"rl-aff", "irl-aff"};
    else conditions = {"irl"};
  }
  auto values = sf.values;
  if (values.empty()) {
    if (sf.parameter == "theta") values = {0.0, 0.25, 0.5, 0.75};
    if (sf.parameter == "eta") values = {0.3, 0.5, 0.8, 1.0};
  }
  if (sf.parameter == "channel" && !sf.values.empty())
    throw CLI::ValidationError("--values", "the channel comparison takes no values");

  ExperimentContext ctx(global.loadLexicon());
  bool predictor = false;
  for (const auto& c : conditions) predictor = predictor || needsPredictor(parseCondition(c));
  if (predictor) ctx.setAffordanceNet(net.obtain(ctx.space()));

  std::vector<LearningCurve> curves;
  std::vector<PlotPanel> panels;
  std::optional<LearningCurve> rl;
  if (sf.baseline) {
    auto cfg = base;
    cfg.condition = Condition::RL;
    rl = runCondition(cfg, ctx);
    curves.push_back(*rl);
    std::cout << describe(*rl) << '\n';
  }
  for (const auto& name : conditions) {
    auto cfg = base;
    cfg.condition = parseCondition(name);
    PlotPanel panel{name, {}};
    if (rl) panel.series.push_back(series(*rl, "rl"));
    std::vector<LearningCurve> runs;
    if (sf.parameter == "channel") {
      for (const auto channel : {AdviceChannel::MultiModal, AdviceChannel::AudioOnly, AdviceChannel::VisionOnly}) {
        cfg.learner.channel = channel;
        runs.push_back(runCondition(cfg, ctx));
      }
    } else {
      for (auto& point : sweep(cfg, parseSweepParameter(sf.parameter), values, ctx))
        runs.push_back(std::move(point.curve));
    }
    for (auto& c : runs) {
      std::cout << describe(c) << '\n';
      panel.series.push_back(series(c, c.param));
      curves.push_back(std::move(c));
    }
    panels.push_back(std::move(panel));
  }
  writeOutputs(curves, panels, flags.out, flags.name.empty() ? "sweep-" + sf.parameter : flags.name,
               "Smoothed reward by " + sf.parameter);
  return 0;
}

// "sentence<TAB>g1,g2,g3,g4,g5"; '|' separates n-best hypotheses.
std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, sep)) out.push_back(part);
  if (!text.empty() && text.back() == sep) out.emplace_back();
  return out;
}

int runFuse(const std::string& input, const GlobalFlags& global) {
  const auto lexicon = global.loadLexicon();
  std::ifstream file;
  if (input != "-") {
    file.open(input);
    if (!file) throw std::runtime_error("cannot read " + input);
  }
  std::istream& in = input == "-" ? std::cin : file;

  std::cout << "line,audio_label,audio_confidence,vision_label,vision_confidence,label,confidence,likeliness,"
               "congruent\n";
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 2)
      throw std::runtime_error(input + ":" + std::to_string(n) + ": expected sentence<TAB>five gesture labels");
    std::vector<Action> gestures;
    for (const auto& g : split(fields[1], ',')) gestures.push_back(parseAction(g));
    const auto hypotheses = split(fields[0], '|');
    const auto audio = recognizeSpeech(hypotheses, lexicon);
    const auto vision = recognizeGesture(gestures);
    const auto fused = integrate(audio, vision);
    std::cout << n << ',' << toString(audio.label) << ',' << formatNumber(audio.confidence) << ','
              << toString(vision.label) << ',' << formatNumber(vision.confidence) << ',' << toString(fused.label)
              << ',' << formatNumber(fused.confidence) << ',' << formatNumber(fused.likeliness) << ','
              << (fused.congruent ? "true" : "false") << '\n';
  }
  return 0;
}

#ifdef AFIRL_HAVE_SESSION
int runServe(const std::string& host, std::uint16_t port, int threads, const NetFlags& net,
             const GlobalFlags& global) {
  // Block the stop signals before any thread starts so only sigwait sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  ExperimentContext ctx(global.loadLexicon());
  ctx.setAffordanceNet(net.obtain(ctx.space()));
  auto sessions = std::make_shared<session::SessionManager>(ctx);
  session::Server server({host, port, threads}, sessions);
  server.start();
  std::cout << "listening on http://" << host << ':' << server.port() << std::endl;

  int received = 0;
  sigwait(&signals, &received);
  std::cerr << "stopping\n";
  server.stop();
  server.wait();
  return 0;
}
#endif

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Affordance-driven interactive reinforcement learning on the table-cleaning task"};
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<cli::JsonConfig>(&app));
  app.set_config("--config", "", "JSON file supplying any flag; command-line flags win");
  app.allow_config_extras(CLI::config_extras_mode::error);

  GlobalFlags global;
  app.add_option("--lexicon", global.lexicon, "Command sentences, one per action in action order")
      ->check(CLI::ExistingFile);

  auto* enumerate = app.add_subcommand("enumerate", "Print the reachable states and the dataset size");
  std::string datasetPath;
  enumerate->add_option("--dataset", datasetPath, "Also write the affordance dataset as CSV");

  auto* trainCmd = app.add_subcommand("train-affordances", "Train the affordance network and report its accuracy");
  TrainOptions trainOptions;
  std::string trainOut = defaultOutputDir().string();
  std::string trainName = "affordance-net";
  trainCmd->add_option("--epochs", trainOptions.epochs, "Accepted training steps")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  trainCmd->add_option("--seed", trainOptions.seed, "Weight initialization seed")->capture_default_str();
  trainCmd->add_option("--target-mse", trainOptions.targetMse, "Mean squared error regarded as converged")
      ->capture_default_str();
  trainCmd->add_option("--out", trainOut, "Output directory (default from AFIRL_OUTPUT_DIR)")->capture_default_str();
  trainCmd->add_option("--name", trainName, "Base name of the output files")->capture_default_str();

  auto* run = app.add_subcommand("run", "Run one condition over a population of agents");
  ExperimentFlags runFlags;
  std::string condition = "irl-aff";
  NetFlags runNet;
  run->add_option("--condition", condition, "Learning condition")
      ->capture_default_str()
      ->check(CLI::IsMember({"rl", "irl", "rl-aff", "irl-aff"}));
  runFlags.add(run);
  runNet.add(run);

  auto* sweepCmd = app.add_subcommand("sweep", "Sweep theta or eta, or compare advice channels");
  ExperimentFlags sweepFlags;
  SweepFlags sf;
  NetFlags sweepNet;
  sweepCmd->add_option("--parameter", sf.parameter, "What to vary")
      ->required()
      ->check(CLI::IsMember({"theta", "eta", "channel"}));
  sweepCmd->add_option("--values", sf.values, "Values to try (default: the standard grid)");
  sweepCmd->add_option("--conditions", sf.conditions, "Conditions to sweep (default: irl for theta and channel, "
                                                      "rl-aff and irl-aff for eta)")
      ->check(CLI::IsMember({"rl", "irl", "rl-aff", "irl-aff"}));
  sweepCmd->add_flag("--baseline", sf.baseline, "Add the autonomous RL curve to every panel");
  sweepFlags.add(sweepCmd);
  sweepNet.add(sweepCmd);

  auto* serve = app.add_subcommand("serve", "Start the live session service");
  std::string host = "127.0.0.1";
  std::uint16_t port = 8080;
  int threads = 1;
  NetFlags serveNet;
  serve->add_option("--host", host, "Listen address")->capture_default_str();
  serve->add_option("--port", port, "Listen port (0 picks a free one)")->capture_default_str();
  serve->add_option("--threads", threads, "I/O threads")->capture_default_str()->check(CLI::PositiveNumber);
  serveNet.add(serve);

  auto* fuse = app.add_subcommand("fuse", "Fuse (speech, gesture window) pairs read from a file");
  std::string fuseInput;
  fuse->add_option("input", fuseInput, "Lines of sentence<TAB>five comma-separated gesture labels; '-' for stdin")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*enumerate) return runEnumerate(datasetPath);
    if (*trainCmd) return runTrain(trainOptions, trainOut, trainName);
    if (*run) return runRun(runFlags, condition, runNet, global);
    if (*sweepCmd) return runSweep(sweepFlags, sf, sweepNet, global);
    if (*fuse) return runFuse(fuseInput, global);
    if (*serve) {
#ifdef AFIRL_HAVE_SESSION
      return runServe(host, port, threads, serveNet, global);
#else
      std::cerr << "error: this build has no session service (configure with -DAFIRL_BUILD_SERVICE=ON)\n";
      return kRuntimeError;
#endif
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return 0;
}
