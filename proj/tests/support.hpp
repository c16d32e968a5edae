#pragma once

#include "gne/game.hpp"

#include <string>

namespace testing {

inline std::string source_path(const std::string& rel) { return std::string(GNE_SOURCE_DIR) + "/" + rel; }

// J_i = (u_i - 1)^2 on [-10, 10]^2 with u_1 + u_2 <= 1.
inline gne::QuadraticGame shared_budget_game() {
  gne::QuadraticGame g;
  g.dims = {1, 1};
  g.M = 2.0 * gne::Mat::Identity(2, 2);
  g.q = gne::Vec::Constant(2, -2.0);
  g.constant = gne::Vec::Ones(2);
  g.lower = gne::Vec::Constant(2, -10.0);
  g.upper = gne::Vec::Constant(2, 10.0);
  g.A = gne::Mat::Ones(1, 2);
  g.b = gne::Vec::Ones(1);
  return g;
}

}  // namespace testing
