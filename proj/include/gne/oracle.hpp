#pragma once

#include "gne/game.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gne {

struct OracleSolution {
  Vec u;
  Vec lambda;
  double residual = 0.0;  // kkt_residual at (u, lambda)
  std::vector<Index> active_set;  // constraint rows of [A; -I; I] (quadratic solver only)
  long iterations = 0;
  std::string method;
};

// Upper limit on enumerated active-set combinations.
inline constexpr long kMaxActiveSetCombinations = 1L << 12;

// Exact v-GNE of a quadratic game by active-set enumeration over the rows of
// A u <= b and the box bounds. Requires the symmetric part of M to be positive
// definite.
OracleSolution solve_quadratic_kkt(const QuadraticGame& game);

struct ExtragradientOptions {
  double tol = 1e-10;
  long max_iters = 2000000;
  Index lipschitz_samples = 200;
  std::uint64_t seed = 7;
  long check_every = 200;
};

// Projected extragradient on (F(u) + A' lambda, b - A u) over Omega x R^q_+,
// started from (u0, lambda0) or the centre of a sample when u0 is empty.
OracleSolution solve_extragradient(const GameSpec& game, const ExtragradientOptions& opts = {},
                                   const Vec& u0 = Vec(), const Vec& lambda0 = Vec());

struct UniquenessReport {
  std::vector<OracleSolution> solutions;
  double max_spread = 0.0;  // largest pairwise ||u_a - u_b||
};

// Extragradient from `starts` random feasible points.
UniquenessReport uniqueness_probe(const GameSpec& game, Index starts, std::uint64_t seed,
                                  const ExtragradientOptions& opts = {});

// Quadratic games with few constraints go to the enumerator, everything else
// to extragradient.
OracleSolution solve_vgne(const GameSpec& game, const QuadraticGame* quadratic = nullptr,
                          const ExtragradientOptions& opts = {});

}  // namespace gne
