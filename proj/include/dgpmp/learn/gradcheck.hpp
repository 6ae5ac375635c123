#pragma once

#include "dgpmp/learn/train.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dgpmp::learn {

struct GradcheckConfig {
  int grid_cells = 16;
  double extent = 4.0;
  int n_states = 8;
  int unroll = 2;
  NetworkSpec network{.image_size = 8,
                      .n_states = 8,
                      .conv_filters = {4, 4},
                      .fc_hidden = {16},
                      .dropout = 0.0};
  double step = 1e-5;  // central difference half-width
  double rel_tol = 1e-3;
  double abs_tol = 1e-7;
  double min_pass_fraction = 0.99;
  int max_coords = 2000;  // per block; evenly strided when exceeded
  std::uint64_t seed = 0;
};

struct GradcheckEntry {
  std::string block;
  std::string name;  // tensor name or "t<step>/s<state>"
  long long index = 0;
  double analytic = 0.0;
  double numeric = 0.0;  // central difference
  bool kink = false;
  bool pass = false;
};

struct GradcheckBlock {
  std::string name;
  int checked = 0;
  int passed = 0;
  int kinks = 0;  // one-sided slopes disagree; excluded from the counts
  double max_rel_error = 0.0;
};

struct GradcheckReport {
  GradcheckBlock log_sigma;
  GradcheckBlock params;
  std::vector<GradcheckEntry> entries;
  bool ok = false;
};

/// Compares the unrolled-planner gradients against central differences on a
/// randomly generated tiny problem: d loss / d log sigma with sigma held
/// per step, and d loss / d network parameters through the full unroll with
/// frozen normalization statistics.
GradcheckReport gradcheck(const GradcheckConfig& config);

}  // namespace dgpmp::learn
