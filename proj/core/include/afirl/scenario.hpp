#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace afirl {

// Cleaning-table task: a one-armed robot wipes both table sections, moving
// the goblet out of the way, and finishes with the sponge back at home.

enum class HandObject : std::uint8_t { Free, Sponge, Goblet };
enum class Location : std::uint8_t { Left, Right, Home };
enum class GobletPlace : std::uint8_t { Left, Right, InHand };

enum class Action : std::uint8_t { GoLeft, GoRight, GoHome, Grasp, Place, Wipe, Abort };

inline constexpr std::size_t kActionCount = 7;
inline constexpr std::array<Action, kActionCount> kAllActions = {
    Action::GoLeft, Action::GoRight, Action::GoHome, Action::Grasp,
    Action::Place,  Action::Wipe,    Action::Abort};

struct SideCondition {
  bool leftClean = false;
  bool rightClean = false;

  auto operator<=>(const SideCondition&) const = default;
};

struct WorldState {
  HandObject hand = HandObject::Free;
  Location arm = Location::Home;
  GobletPlace goblet = GobletPlace::Left;
  SideCondition sides;

  auto operator<=>(const WorldState&) const = default;
};

/// True when the goblet is in exactly one place: InHand iff the hand holds it.
bool isValid(const WorldState& s);

/// Free hand at home with both sides clean; the goblet may rest on either side.
bool isFinal(const WorldState& s);

/// Fresh episode start: hand free at home, both sides dirty, goblet on
/// `gobletSide`. Throws std::invalid_argument for Location::Home.
WorldState initialState(Location gobletSide);

inline constexpr double kRewardDone = 1.0;
inline constexpr double kRewardFailed = -1.0;
inline constexpr double kRewardStep = -0.01;

enum class OutcomeKind : std::uint8_t { Continue, Failed, Done };

struct TransitionOutcome {
  OutcomeKind kind = OutcomeKind::Continue;
  WorldState next;  // meaningful for Continue and Done
  double reward = kRewardStep;

  bool terminal() const { return kind != OutcomeKind::Continue; }
  bool failed() const { return kind == OutcomeKind::Failed; }
  bool operator==(const TransitionOutcome&) const = default;
};

/// Deterministic transition. `episodeStart` is the goblet side the episode
/// began with; only Abort reads it. Throws std::invalid_argument when `s` is
/// invalid, final, or `episodeStart` is Home.
///
/// Failed-state rules:
///   grasp with a full hand; grasp at a side without the goblet;
///   place with a free hand; place the sponge anywhere but home;
///   place the goblet at home; wipe without the sponge, at home, or on the
///   side occupied by the goblet.
TransitionOutcome step(const WorldState& s, Action a, Location episodeStart);

// Left/right mirror images.
Location mirror(Location l);
Action mirror(Action a);
WorldState mirror(const WorldState& s);

// Canonical text forms, e.g. "free|home|right|DD" (left side first, D=dirty,
// C=clean) and "go_left".
std::string toString(const WorldState& s);
std::string toString(Action a);
std::string toString(Location l);
std::string toString(OutcomeKind k);
/// Throws std::invalid_argument on malformed input.
WorldState parseState(std::string_view text);
Action parseAction(std::string_view text);
Location parseLocation(std::string_view text);

// Localist codes. State: hand(3) | arm(3) | goblet(3) | sides(4), where the
// side group is one-hot over {DD, CD, DC, CC} (left letter first).
inline constexpr std::size_t kStateCodeSize = 13;
inline constexpr std::size_t kActionCodeSize = kActionCount;
inline constexpr std::size_t kInputCodeSize = kStateCodeSize + kActionCodeSize;

using StateCode = std::array<double, kStateCodeSize>;
using ActionCode = std::array<double, kActionCodeSize>;

StateCode encode(const WorldState& s);
ActionCode encode(Action a);
/// Argmax within each of the four groups. Ties go to the lower index.
WorldState decodeState(std::span<const double, kStateCodeSize> code);

/// Index of an action in kAllActions.
constexpr std::size_t indexOf(Action a) { return static_cast<std::size_t>(a); }

/// Reachable non-terminal states in breadth-first discovery order.
///
/// Discovery starts from the left-goblet and right-goblet initial states (in
/// that order) and expands actions in kAllActions order, so indices are
/// stable. Each state remembers the start it was first reached from; that is
/// the canonical episode start used wherever a transition must be evaluated
/// without an episode context.
class StateSpace {
 public:
  StateSpace();

  std::size_t size() const { return states_.size(); }
  const std::vector<WorldState>& states() const { return states_; }
  const WorldState& state(std::size_t index) const { return states_.at(index); }
  Location origin(std::size_t index) const { return origins_.at(index); }
  std::optional<std::size_t> indexOf(const WorldState& s) const;
  bool contains(const WorldState& s) const { return indexOf(s).has_value(); }

  /// step() with the state's canonical episode start.
  TransitionOutcome canonicalStep(std::size_t index, Action a) const;

 private:
  std::vector<WorldState> states_;
  std::vector<Location> origins_;
  std::array<int, 108> lookup_{};
};

/// Ordered list of reachable non-terminal states.
std::vector<WorldState> enumerateStates();

/// Optimal values, action values and greedy actions over a StateSpace.
struct OptimalSolution {
  double discount = 0.9;
  std::vector<double> values;
  std::vector<std::array<double, kActionCount>> actionValues;
  std::vector<Action> policy;
  int iterations = 0;

  Action action(const StateSpace& space, const WorldState& s) const;
};

/// Value iteration with the task rewards. Greedy ties are broken by
/// kAllActions order (values within 1e-12 count as tied).
OptimalSolution solveOptimal(const StateSpace& space, double discount = 0.9);

/// Steps taken by the greedy optimal policy from an initial state until the
/// episode ends; returns nullopt if it fails or exceeds `limit` steps.
std::optional<int> optimalEpisodeLength(const StateSpace& space, const OptimalSolution& solution,
                                        Location gobletSide, int limit = 1000);

}  // namespace afirl
