#pragma once

#include <vector>

namespace cbus {

// One simulated round. Instantaneous regrets are exact oracle values for the
// distribution the algorithm played that round; cumulative columns are their
// prefix sums.
struct TrajectoryRow {
  long long t = 0;
  int context = 0;
  int action = 0;
  double reward = 0.0;
  bool xi = false;
  bool z = false;
  double inst_reg_r = 0.0;
  double inst_reg_c = 0.0;
  double cum_reg_r = 0.0;
  double cum_reg_c = 0.0;
  int n_surviving = 0;
  double active_mu = 0.0;
  double lambda = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryRow> rows;
  long long total_z = 0;        // rounds deliberately spent on the revealing action
  long long total_queries = 0;  // disagreement-triggered queries (active rule)

  double final_cum_reg_r() const {
    return rows.empty() ? 0.0 : rows.back().cum_reg_r;
  }
  double final_cum_reg_c() const {
    return rows.empty() ? 0.0 : rows.back().cum_reg_c;
  }
};

}  // namespace cbus
