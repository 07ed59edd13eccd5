#include "afirl/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace afirl {

namespace {

int packedCode(const WorldState& s) {
  const int sides = (s.sides.leftClean ? 1 : 0) + (s.sides.rightClean ? 2 : 0);
  return ((static_cast<int>(s.hand) * 3 + static_cast<int>(s.arm)) * 3 +
          static_cast<int>(s.goblet)) * 4 + sides;
}

GobletPlace toGobletPlace(Location l) {
  return l == Location::Left ? GobletPlace::Left : GobletPlace::Right;
}

bool gobletAt(const WorldState& s, Location l) {
  return l != Location::Home && s.goblet == toGobletPlace(l);
}

TransitionOutcome failedOutcome(const WorldState& s) {
  return {OutcomeKind::Failed, s, kRewardFailed};
}

TransitionOutcome moveTo(WorldState next) {
  if (isFinal(next)) return {OutcomeKind::Done, next, kRewardDone};
  return {OutcomeKind::Continue, next, kRewardStep};
}

}  // namespace

bool isValid(const WorldState& s) {
  return (s.goblet == GobletPlace::InHand) == (s.hand == HandObject::Goblet);
}

bool isFinal(const WorldState& s) {
  return s.hand == HandObject::Free && s.arm == Location::Home && s.sides.leftClean &&
         s.sides.rightClean;
}

WorldState initialState(Location gobletSide) {
  if (gobletSide == Location::Home)
    throw std::invalid_argument("the goblet never starts at the home position");
  return WorldState{HandObject::Free, Location::Home, toGobletPlace(gobletSide), {}};
}

TransitionOutcome step(const WorldState& s, Action a, Location episodeStart) {
  if (!isValid(s)) throw std::invalid_argument("invalid state " + toString(s));
  if (isFinal(s)) throw std::invalid_argument("no transitions out of the final state");
  if (episodeStart == Location::Home) throw std::invalid_argument("episode start must be left or right");

  WorldState next = s;
  switch (a) {
    case Action::GoLeft:
      next.arm = Location::Left;
      return moveTo(next);
    case Action::GoRight:
      next.arm = Location::Right;
      return moveTo(next);
    case Action::GoHome:
      next.arm = Location::Home;
      return moveTo(next);
    case Action::Grasp:
      if (s.hand != HandObject::Free) return failedOutcome(s);
      if (s.arm == Location::Home) {
        next.hand = HandObject::Sponge;
        return moveTo(next);
      }
      if (!gobletAt(s, s.arm)) return failedOutcome(s);
      next.hand = HandObject::Goblet;
      next.goblet = GobletPlace::InHand;
      return moveTo(next);
    case Action::Place:
      if (s.hand == HandObject::Free) return failedOutcome(s);
      if (s.hand == HandObject::Sponge) {
        if (s.arm != Location::Home) return failedOutcome(s);
        next.hand = HandObject::Free;
        return moveTo(next);
      }
      if (s.arm == Location::Home) return failedOutcome(s);
      next.hand = HandObject::Free;
      next.goblet = toGobletPlace(s.arm);
      return moveTo(next);
    case Action::Wipe:
      if (s.hand != HandObject::Sponge || s.arm == Location::Home || gobletAt(s, s.arm))
        return failedOutcome(s);
      (s.arm == Location::Left ? next.sides.leftClean : next.sides.rightClean) = true;
      return moveTo(next);
    case Action::Abort:
      return moveTo(initialState(episodeStart));
  }
  throw std::invalid_argument("unknown action");
}

Location mirror(Location l) {
  switch (l) {
    case Location::Left: return Location::Right;
    case Location::Right: return Location::Left;
    case Location::Home: return Location::Home;
  }
  return l;
}

Action mirror(Action a) {
  if (a == Action::GoLeft) return Action::GoRight;
  if (a == Action::GoRight) return Action::GoLeft;
  return a;
}

WorldState mirror(const WorldState& s) {
  WorldState m = s;
  m.arm = mirror(s.arm);
  if (s.goblet == GobletPlace::Left) m.goblet = GobletPlace::Right;
  else if (s.goblet == GobletPlace::Right) m.goblet = GobletPlace::Left;
  m.sides = {s.sides.rightClean, s.sides.leftClean};
  return m;
}

// ---------------------------------------------------------------------------
// Text forms

namespace {

constexpr std::array<std::string_view, 3> kHandNames = {"free", "sponge", "goblet"};
constexpr std::array<std::string_view, 3> kLocationNames = {"left", "right", "home"};
constexpr std::array<std::string_view, 3> kGobletNames = {"left", "right", "inhand"};
constexpr std::array<std::string_view, kActionCount> kActionNames = {
    "go_left", "go_right", "go_home", "grasp", "place", "wipe", "abort"};

template <std::size_t N>
std::size_t lookupName(const std::array<std::string_view, N>& names, std::string_view text,
                       std::string_view what) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == text) return i;
  throw std::invalid_argument("unknown " + std::string(what) + " '" + std::string(text) + "'");
}

}  // namespace

std::string toString(const WorldState& s) {
  std::string out;
  out += kHandNames[static_cast<std::size_t>(s.hand)];
  out += '|';
  out += kLocationNames[static_cast<std::size_t>(s.arm)];
  out += '|';
  out += kGobletNames[static_cast<std::size_t>(s.goblet)];
  out += '|';
  out += s.sides.leftClean ? 'C' : 'D';
  out += s.sides.rightClean ? 'C' : 'D';
  return out;
}

std::string toString(Action a) { return std::string(kActionNames[indexOf(a)]); }
std::string toString(Location l) { return std::string(kLocationNames[static_cast<std::size_t>(l)]); }

std::string toString(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::Continue: return "continue";
    case OutcomeKind::Failed: return "failed";
    case OutcomeKind::Done: return "done";
  }
  return "?";
}

WorldState parseState(std::string_view text) {
  std::array<std::string_view, 4> parts;
  std::size_t count = 0;
  while (count < 4) {
    const auto bar = text.find('|');
    parts[count++] = text.substr(0, bar);
    if (bar == std::string_view::npos) {
      text = {};
      break;
    }
    text.remove_prefix(bar + 1);
  }
  if (count != 4 || !text.empty() || parts[3].size() != 2)
    throw std::invalid_argument("malformed state string");
  auto side = [](char c) {
    if (c == 'C') return true;
    if (c == 'D') return false;
    throw std::invalid_argument("side condition must use C or D");
  };
  WorldState s;
  s.hand = static_cast<HandObject>(lookupName(kHandNames, parts[0], "hand object"));
  s.arm = static_cast<Location>(lookupName(kLocationNames, parts[1], "location"));
  s.goblet = static_cast<GobletPlace>(lookupName(kGobletNames, parts[2], "goblet place"));
  s.sides = {side(parts[3][0]), side(parts[3][1])};
  if (!isValid(s)) throw std::invalid_argument("goblet in hand must match the hand object");
  return s;
}

Action parseAction(std::string_view text) {
  return static_cast<Action>(lookupName(kActionNames, text, "action"));
}

Location parseLocation(std::string_view text) {
  return static_cast<Location>(lookupName(kLocationNames, text, "location"));
}

// ---------------------------------------------------------------------------
// Codes

StateCode encode(const WorldState& s) {
  StateCode code{};
  code[static_cast<std::size_t>(s.hand)] = 1.0;
  code[3 + static_cast<std::size_t>(s.arm)] = 1.0;
  code[6 + static_cast<std::size_t>(s.goblet)] = 1.0;
  code[9 + (s.sides.leftClean ? 1 : 0) + (s.sides.rightClean ? 2 : 0)] = 1.0;
  return code;
}

ActionCode encode(Action a) {
  ActionCode code{};
  code[indexOf(a)] = 1.0;
  return code;
}

WorldState decodeState(std::span<const double, kStateCodeSize> code) {
  auto argmax = [&](std::size_t first, std::size_t count) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < count; ++i)
      if (code[first + i] > code[first + best]) best = i;
    return best;
  };
  WorldState s;
  s.hand = static_cast<HandObject>(argmax(0, 3));
  s.arm = static_cast<Location>(argmax(3, 3));
  s.goblet = static_cast<GobletPlace>(argmax(6, 3));
  const auto sides = argmax(9, 4);
  s.sides = {(sides & 1U) != 0, (sides & 2U) != 0};
  return s;
}

// ---------------------------------------------------------------------------
// Enumeration

StateSpace::StateSpace() {
  lookup_.fill(-1);
  std::deque<std::size_t> frontier;
  auto visit = [&](const WorldState& s, Location origin) {
    auto& slot = lookup_[static_cast<std::size_t>(packedCode(s))];
    if (slot >= 0) return;
    slot = static_cast<int>(states_.size());
    states_.push_back(s);
    origins_.push_back(origin);
    frontier.push_back(states_.size() - 1);
  };
  visit(initialState(Location::Left), Location::Left);
  visit(initialState(Location::Right), Location::Right);
  while (!frontier.empty()) {
    const auto index = frontier.front();
    frontier.pop_front();
    for (const auto a : kAllActions) {
      const auto outcome = step(states_[index], a, origins_[index]);
      if (outcome.kind == OutcomeKind::Continue) visit(outcome.next, origins_[index]);
    }
  }
}

std::optional<std::size_t> StateSpace::indexOf(const WorldState& s) const {
  const auto code = packedCode(s);
  if (code < 0 || code >= static_cast<int>(lookup_.size())) return std::nullopt;
  const int slot = lookup_[static_cast<std::size_t>(code)];
  if (slot < 0) return std::nullopt;
  return static_cast<std::size_t>(slot);
}

TransitionOutcome StateSpace::canonicalStep(std::size_t index, Action a) const {
  return step(states_.at(index), a, origins_.at(index));
}

std::vector<WorldState> enumerateStates() { return StateSpace{}.states(); }

// ---------------------------------------------------------------------------
// Oracle

Action OptimalSolution::action(const StateSpace& space, const WorldState& s) const {
  const auto index = space.indexOf(s);
  if (!index) throw std::invalid_argument("state " + toString(s) + " is not a reachable non-terminal state");
  return policy[*index];
}

OptimalSolution solveOptimal(const StateSpace& space, double discount) {
  const std::size_t n = space.size();
  OptimalSolution sol;
  sol.discount = discount;
  sol.values.assign(n, 0.0);
  sol.actionValues.assign(n, {});
  sol.policy.assign(n, Action::GoLeft);

  // Successor table; -1 marks a terminal outcome.
  std::vector<std::array<TransitionOutcome, kActionCount>> outcomes(n);
  std::vector<std::array<int, kActionCount>> successor(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto a : kAllActions) {
      const auto out = space.canonicalStep(i, a);
      outcomes[i][indexOf(a)] = out;
      successor[i][indexOf(a)] =
          out.kind == OutcomeKind::Continue ? static_cast<int>(*space.indexOf(out.next)) : -1;
    }
  }

  for (int iter = 1; iter <= 100000; ++iter) {
    double residual = 0.0;
    std::vector<double> updated(n);
    for (std::size_t i = 0; i < n; ++i) {
      double best = -1e300;
      for (std::size_t k = 0; k < kActionCount; ++k) {
        const int next = successor[i][k];
        const double q = outcomes[i][k].reward +
                         (next >= 0 ? discount * sol.values[static_cast<std::size_t>(next)] : 0.0);
        sol.actionValues[i][k] = q;
        best = std::max(best, q);
      }
      updated[i] = best;
      residual = std::max(residual, std::abs(best - sol.values[i]));
    }
    sol.values = std::move(updated);
    sol.iterations = iter;
    if (residual < 1e-14) break;
  }

  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < kActionCount; ++k)
      if (sol.actionValues[i][k] > sol.actionValues[i][best] + 1e-12) best = k;
    sol.policy[i] = kAllActions[best];
  }
  return sol;
}

std::optional<int> optimalEpisodeLength(const StateSpace& space, const OptimalSolution& solution,
                                        Location gobletSide, int limit) {
  WorldState s = initialState(gobletSide);
  for (int steps = 1; steps <= limit; ++steps) {
    const auto out = step(s, solution.action(space, s), gobletSide);
    if (out.kind == OutcomeKind::Done) return steps;
    if (out.kind == OutcomeKind::Failed) return std::nullopt;
    s = out.next;
  }
  return std::nullopt;
}

}  // namespace afirl
