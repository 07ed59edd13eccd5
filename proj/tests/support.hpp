#pragma once

#include "afirl/affordance.hpp"
#include "afirl/scenario.hpp"

namespace afirl::test {

// The full-dataset network with default options, trained once per binary.
inline const AffordanceNet& trainedNet() {
  static const AffordanceNet net = [] {
    const StateSpace space;
    const auto data = generateDataset(space);
    return train(data).net;
  }();
  return net;
}

inline WorldState ws(HandObject h, Location arm, GobletPlace g, bool leftClean, bool rightClean) {
  return {h, arm, g, {leftClean, rightClean}};
}

}  // namespace afirl::test
