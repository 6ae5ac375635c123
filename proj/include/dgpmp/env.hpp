#pragma once

#include "dgpmp/core.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dgpmp {

/// Binary occupancy grid. Cell (ix, iy) has its center at
/// origin + resolution * (ix, iy); storage is row-major (iy * width + ix).
class OccupancyGrid {
 public:
  OccupancyGrid(int width, int height, double resolution, Vec2 origin);
  OccupancyGrid(int width, int height, double resolution, Vec2 origin,
                std::vector<std::uint8_t> cells);

  int width() const { return width_; }
  int height() const { return height_; }
  double resolution() const { return resolution_; }
  const Vec2& origin() const { return origin_; }
  const std::vector<std::uint8_t>& cells() const { return cells_; }

  bool occupied(int ix, int iy) const { return cells_[index(ix, iy)] != 0; }
  void set(int ix, int iy, bool occ) { cells_[index(ix, iy)] = occ ? 1 : 0; }
  std::size_t index(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * width_ + ix;
  }
  Vec2 cell_center(int ix, int iy) const {
    return origin_ + resolution_ * Vec2(ix, iy);
  }
  /// Length of the grid diagonal in meters.
  double diagonal() const;
  /// True if p lies within the hull of the cell centers.
  bool contains(const Vec2& p) const;
  int occupied_count() const;

  bool operator==(const OccupancyGrid& o) const = default;

 private:
  int width_, height_;
  double resolution_;
  Vec2 origin_;
  std::vector<std::uint8_t> cells_;
};

struct SdfQuery {
  double value = 0.0;
  Vec2 gradient = Vec2::Zero();
  /// d^2 d / dx dy of the bilinear interpolant; the pure second derivatives
  /// are identically zero inside a cell.
  double cross = 0.0;
  bool clamped = false;
};

/// Euclidean signed distance field over an occupancy grid. Distances are
/// measured between cell centers and are negative on occupied cells.
class Sdf {
 public:
  Sdf(OccupancyGrid grid, std::vector<double> dist);

  const OccupancyGrid& grid() const { return grid_; }
  const std::vector<double>& data() const { return dist_; }
  double at(int ix, int iy) const { return dist_[grid_.index(ix, iy)]; }

  /// Bilinear interpolation of the four surrounding cell values. Points
  /// outside the grid are clamped to the boundary and flagged.
  SdfQuery query(const Vec2& p) const;
  double query_dist(const Vec2& p) const { return query(p).value; }
  Vec2 query_grad(const Vec2& p) const { return query(p).gradient; }

 private:
  OccupancyGrid grid_;
  std::vector<double> dist_;
};

/// Exact Euclidean signed distance transform (separable lower-envelope
/// method, run once on free and once on occupied cells). An obstacle-free
/// grid gets +diagonal everywhere; a fully occupied one gets -diagonal.
Sdf compute_sdf(const OccupancyGrid& grid);

/// Squared-distance 1D lower envelope transform over f (in place).
void distance_transform_1d(std::vector<double>& f);

enum class EnvKind { kForest, kTarpit, kMultiObs };

std::string to_string(EnvKind kind);
EnvKind env_kind_from_string(const std::string& s);

struct EnvSpec {
  EnvKind kind = EnvKind::kForest;
  double extent = 10.0;  // square workspace [0, extent]^2
  int cells = 64;
  int min_obstacles = 15;
  int max_obstacles = 30;
  double min_size = 0.3;
  double max_size = 0.6;
  Vec2 start{1.0, 1.0};
  Vec2 goal{9.0, 9.0};
  double keep_free_margin = 0.5;
  /// Upper bound on obstacle area as a fraction of the workspace.
  double max_fill = 0.5;
  std::uint64_t seed = 0;

  /// Defaults for each distribution.
  static EnvSpec defaults(EnvKind kind);
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Obstacle {
  bool disc = false;
  Vec2 center;
  double size;  // side length or diameter
};

/// Samples obstacle shapes only. Exposed so callers can inspect placement.
std::vector<Obstacle> sample_obstacles(const EnvSpec& spec);

/// Rasterizes a random environment. Cells around start and goal are kept free.
OccupancyGrid generate(const EnvSpec& spec);

// Grid file: "OCC w h res ox oy\n" followed by w*h bytes (0 free, 1 occupied).
// SDF cache: "SDF w h res ox oy\n" followed by w*h little-endian float64.
void write_grid(std::ostream& os, const OccupancyGrid& grid);
OccupancyGrid read_grid(std::istream& is);
void write_sdf(std::ostream& os, const Sdf& sdf);
Sdf read_sdf(std::istream& is);

void save_grid(const std::string& path, const OccupancyGrid& grid);
OccupancyGrid load_grid(const std::string& path);
void save_sdf(const std::string& path, const Sdf& sdf);
Sdf load_sdf(const std::string& path);

}  // namespace dgpmp
