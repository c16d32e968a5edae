#include "gne/sweep.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace gne {

void SweepGrid::validate() const {
  if (axes.empty()) throw ValidationError("sweep grid: no axes");
  for (const auto& a : axes) {
    if (a.name.empty()) throw ValidationError("sweep grid: unnamed axis");
    if (a.values.empty()) throw ValidationError("sweep grid: axis '" + a.name + "' has no values");
  }
}

size_t SweepGrid::cell_count() const {
  size_t n = 1;
  for (const auto& a : axes) n *= a.values.size();
  return n;
}

std::vector<double> SweepGrid::cell(size_t index) const {
  std::vector<double> c(axes.size());
  for (size_t k = axes.size(); k-- > 0;) {
    const size_t len = axes[k].values.size();
    c[k] = axes[k].values[index % len];
    index /= len;
  }
  return c;
}

namespace {

SweepRow run_cell(const SweepGrid& grid, const CellRunner& runner, size_t idx) {
  SweepRow row;
  row.index = idx;
  row.coords = grid.cell(idx);
  try {
    row.metrics = runner(row.coords);
  } catch (const std::exception& e) {
    row.metrics.status = RunStatus::Failed;
    row.metrics.message = e.what();
  }
  return row;
}

}  // namespace

std::vector<SweepRow> sweep(const SweepGrid& grid, const CellRunner& runner) {
  grid.validate();
  const long n = static_cast<long>(grid.cell_count());
  std::vector<SweepRow> rows(static_cast<size_t>(n));
#pragma omp parallel for schedule(dynamic, 1)
  for (long k = 0; k < n; ++k) rows[static_cast<size_t>(k)] = run_cell(grid, runner, static_cast<size_t>(k));
  return rows;
}

std::vector<SweepRow> sweep_serial(const SweepGrid& grid, const CellRunner& runner) {
  grid.validate();
  std::vector<SweepRow> rows;
  for (size_t k = 0; k < grid.cell_count(); ++k) rows.push_back(run_cell(grid, runner, k));
  return rows;
}

namespace {

void put(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  os << buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + '"';
}

}  // namespace

void write_sweep_csv(std::ostream& os, const SweepGrid& grid, const std::vector<SweepRow>& rows) {
  for (const auto& a : grid.axes) os << a.name << ',';
  os << "dist_to_vgne,entry_time,max_violation,status\n";
  for (const auto& r : rows) {
    for (double c : r.coords) {
      put(os, c);
      os << ',';
    }
    put(os, r.metrics.dist_to_vgne);
    os << ',';
    put(os, r.metrics.entry_time);
    os << ',';
    put(os, r.metrics.max_violation);
    os << ',' << csv_field(r.metrics.status_label()) << '\n';
  }
}

std::vector<Marginal> marginals(const SweepGrid& grid, const std::vector<SweepRow>& rows) {
  std::vector<Marginal> out;
  for (size_t a = 0; a < grid.axes.size(); ++a) {
    for (double v : grid.axes[a].values) {
      Marginal mg;
      mg.axis = grid.axes[a].name;
      mg.value = v;
      double dsum = 0.0, esum = 0.0;
      for (const auto& r : rows) {
        if (r.coords[a] != v) continue;
        ++mg.cells;
        dsum += r.metrics.dist_to_vgne;
        if (r.metrics.converged()) {
          ++mg.converged;
          esum += r.metrics.entry_time;
        }
      }
      if (mg.cells > 0) {
        mg.mean_dist = dsum / static_cast<double>(mg.cells);
        mg.mean_entry_time = mg.converged == mg.cells ? esum / static_cast<double>(mg.cells) : kNotConverged;
      }
      out.push_back(mg);
    }
  }
  return out;
}

void write_marginals_csv(std::ostream& os, const std::vector<Marginal>& ms) {
  os << "axis,value,mean_dist_to_vgne,mean_entry_time,cells,converged\n";
  for (const auto& m : ms) {
    os << m.axis << ',';
    put(os, m.value);
    os << ',';
    put(os, m.mean_dist);
    os << ',';
    put(os, m.mean_entry_time);
    os << ',' << m.cells << ',' << m.converged << '\n';
  }
}

bool nondecreasing(const std::vector<double>& v, double slack) {
  for (size_t k = 1; k < v.size(); ++k)
    if (v[k] < v[k - 1] - slack) return false;
  return true;
}

bool nonincreasing(const std::vector<double>& v, double slack) {
  for (size_t k = 1; k < v.size(); ++k)
    if (v[k] > v[k - 1] + slack) return false;
  return true;
}

}  // namespace gne
