#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vrsim/core.hpp"
#include "vrsim/rng.hpp"

namespace vrsim {

/// 2D tiling of the mapped VR view. Tiles are indexed row-major.
struct FovGrid {
  int cols = 4;
  int rows = 2;
  double tile_side = 1.0;

  int n_fov() const { return cols * rows; }
  double width() const { return cols * tile_side; }
  double height() const { return rows * tile_side; }
};

struct EyeState {
  double x = 0.0;
  double y = 0.0;
  double diffusion = 3.0;  // D(t), in squared tile-side units
  FovIndex current_fov;
};

namespace detail {
// Boundary points belong to the lower-index tile.
inline int axis_tile(double v, double tile, int count) {
  if (v < 0.0 || v > tile * count) throw std::out_of_range("fov_of: point outside grid");
  if (v <= 0.0) return 0;
  int c = static_cast<int>(std::ceil(v / tile)) - 1;
  return std::clamp(c, 0, count - 1);
}
}  // namespace detail

inline FovIndex fov_of(double x, double y, const FovGrid& grid) {
  const int col = detail::axis_tile(x, grid.tile_side, grid.cols);
  const int row = detail::axis_tile(y, grid.tile_side, grid.rows);
  return FovIndex{row * grid.cols + col};
}

/// Per-axis Brownian displacement, Normal(0, 2D). Exposed for the
/// Monte-Carlo variance checks.
inline double sample_displacement(double diffusion, Rng& rng) {
  return rng.normal(0.0, std::sqrt(2.0 * diffusion));
}

/// One Brownian step: per-axis displacement clamped to one tile_side, then
/// the position clamped to the grid rectangle. The clamp keeps consecutive
/// FoVs edge/corner adjacent.
inline EyeState step_eye(const EyeState& state, const FovGrid& grid, Rng& rng) {
  EyeState next = state;
  const double t = grid.tile_side;
  const double dx = std::clamp(sample_displacement(state.diffusion, rng), -t, t);
  const double dy = std::clamp(sample_displacement(state.diffusion, rng), -t, t);
  next.x = std::clamp(state.x + dx, 0.0, grid.width());
  next.y = std::clamp(state.y + dy, 0.0, grid.height());
  next.current_fov = fov_of(next.x, next.y, grid);
  return next;
}

/// Length-`slots` FoV trace per user. Each user consumes an independent
/// sub-stream, so traces do not depend on iteration order.
inline std::vector<std::vector<int>> generate_trace(std::vector<EyeState> users, const FovGrid& grid,
                                                    int slots, Rng& rng) {
  if (slots < 1) throw std::invalid_argument("generate_trace: slots must be >= 1");
  std::vector<std::vector<int>> traces(users.size());
  for (std::size_t k = 0; k < users.size(); ++k) {
    Rng stream = rng.substream(k);
    traces[k].reserve(slots);
    EyeState s = users[k];
    s.current_fov = fov_of(s.x, s.y, grid);
    for (int t = 0; t < slots; ++t) {
      s = step_eye(s, grid, stream);
      traces[k].push_back(s.current_fov.value);
    }
  }
  return traces;
}

inline void write_trace_csv(const std::string& path, const std::vector<std::vector<int>>& traces) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trace_csv: cannot open " + path);
  out << "slot,user_id,fov\n";
  for (std::size_t k = 0; k < traces.size(); ++k)
    for (std::size_t t = 0; t < traces[k].size(); ++t)
      out << t << ',' << k << ',' << traces[k][t] << '\n';
}

}  // namespace vrsim
