#pragma once

#include "gne/harness.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace gne {

struct SweepAxis {
  std::string name;
  std::vector<double> values;
};

struct SweepGrid {
  std::vector<SweepAxis> axes;

  void validate() const;
  size_t cell_count() const;
  // Coordinates of a cell; the last axis varies fastest.
  std::vector<double> cell(size_t index) const;
};

struct SweepRow {
  size_t index = 0;
  std::vector<double> coords;
  RunMetrics metrics;
};

// Runs one cell. Exceptions are caught and recorded as a failed row.
using CellRunner = std::function<RunMetrics(const std::vector<double>& coords)>;

// Cells run concurrently; rows come back ordered by cell index.
std::vector<SweepRow> sweep(const SweepGrid& grid, const CellRunner& runner);
std::vector<SweepRow> sweep_serial(const SweepGrid& grid, const CellRunner& runner);

// `axes..,dist_to_vgne,entry_time,max_violation,status`.
void write_sweep_csv(std::ostream& os, const SweepGrid& grid, const std::vector<SweepRow>& rows);

struct Marginal {
  std::string axis;
  double value = 0.0;
  double mean_dist = 0.0;
  double mean_entry_time = kNotConverged;  // over all cells; inf if any did not converge
  size_t cells = 0;
  size_t converged = 0;
};

// Per axis value, averages over the remaining axes.
std::vector<Marginal> marginals(const SweepGrid& grid, const std::vector<SweepRow>& rows);
void write_marginals_csv(std::ostream& os, const std::vector<Marginal>& ms);

// Monotonicity of a marginal series along one axis (values ascending).
bool nondecreasing(const std::vector<double>& v, double slack = 0.0);
bool nonincreasing(const std::vector<double>& v, double slack = 0.0);

}  // namespace gne
