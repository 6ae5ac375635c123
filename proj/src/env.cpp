#include "dgpmp/env.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace dgpmp {

OccupancyGrid::OccupancyGrid(int width, int height, double resolution, Vec2 origin)
    : OccupancyGrid(width, height, resolution, origin,
                    std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                                  std::max(height, 0),
                                              0)) {}

OccupancyGrid::OccupancyGrid(int width, int height, double resolution, Vec2 origin,
                             std::vector<std::uint8_t> cells)
    : width_(width), height_(height), resolution_(resolution), origin_(origin),
      cells_(std::move(cells)) {
  if (width_ <= 0 || height_ <= 0) throw InvalidArgument("grid must be non-empty");
  if (!(resolution_ > 0.0)) throw InvalidArgument("grid resolution must be > 0");
  if (cells_.size() != static_cast<std::size_t>(width_) * height_)
    throw InvalidArgument("cell count does not match width*height");
  for (auto& c : cells_) c = c ? 1 : 0;
}

double OccupancyGrid::diagonal() const {
  return resolution_ * std::hypot(static_cast<double>(width_), static_cast<double>(height_));
}

bool OccupancyGrid::contains(const Vec2& p) const {
  const Vec2 g = (p - origin_) / resolution_;
  return g.x() >= 0.0 && g.y() >= 0.0 && g.x() <= width_ - 1 && g.y() <= height_ - 1;
}

int OccupancyGrid::occupied_count() const {
  return static_cast<int>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

Sdf::Sdf(OccupancyGrid grid, std::vector<double> dist)
    : grid_(std::move(grid)), dist_(std::move(dist)) {
  if (dist_.size() != grid_.cells().size())
    throw InvalidArgument("distance field size does not match grid");
}

namespace {

// Returns the lower corner index along one axis and the fractional offset,
// clamping to the valid range. A single-cell axis has no interpolation.
struct AxisCoord {
  int i0;
  double frac;
  bool clamped;
  bool degenerate;
};

AxisCoord axis_coord(double g, int n) {
  AxisCoord a{0, 0.0, false, n == 1};
  if (g < 0.0) {
    g = 0.0;
    a.clamped = true;
  } else if (g > n - 1) {
    g = n - 1;
    a.clamped = true;
  }
  if (n == 1) return a;
  a.i0 = std::min(static_cast<int>(std::floor(g)), n - 2);
  a.frac = g - a.i0;
  return a;
}

}  // namespace

SdfQuery Sdf::query(const Vec2& p) const {
  const double res = grid_.resolution();
  const Vec2 g = (p - grid_.origin()) / res;
  const AxisCoord ax = axis_coord(g.x(), grid_.width());
  const AxisCoord ay = axis_coord(g.y(), grid_.height());
  const int ix1 = ax.degenerate ? ax.i0 : ax.i0 + 1;
  const int iy1 = ay.degenerate ? ay.i0 : ay.i0 + 1;

  const double v00 = at(ax.i0, ay.i0);
  const double v10 = at(ix1, ay.i0);
  const double v01 = at(ax.i0, iy1);
  const double v11 = at(ix1, iy1);
  const double fx = ax.frac, fy = ay.frac;

  SdfQuery q;
  q.value = (1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10 + (1 - fx) * fy * v01 +
            fx * fy * v11;
  q.clamped = ax.clamped || ay.clamped;
  // Clamped axes are locally constant, so their derivatives vanish.
  const bool vary_x = !ax.clamped && !ax.degenerate;
  const bool vary_y = !ay.clamped && !ay.degenerate;
  if (vary_x) q.gradient.x() = ((1 - fy) * (v10 - v00) + fy * (v11 - v01)) / res;
  if (vary_y) q.gradient.y() = ((1 - fx) * (v01 - v00) + fx * (v11 - v10)) / res;
  if (vary_x && vary_y) q.cross = (v11 - v10 - v01 + v00) / (res * res);
  return q;
}

void distance_transform_1d(std::vector<double>& f) {
  const int n = static_cast<int>(f.size());
  if (n == 0) return;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // Non-target samples are represented by a large finite value so the
  // envelope intersections stay well defined.
  constexpr double kFar = 1e20;
  std::vector<double> g(n);
  for (int q = 0; q < n; ++q) g[q] = std::isfinite(f[q]) ? f[q] : kFar;
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  auto intersect = [&](int q, int p) {
    return ((g[q] + static_cast<double>(q) * q) - (g[p] + static_cast<double>(p) * p)) /
           (2.0 * (q - p));
  };
  for (int q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    const double val = dq * dq + g[v[k]];
    f[q] = val >= kFar ? kInf : val;
  }
}

namespace {

// Squared distance (in cells) from every cell to the nearest cell where
// `target` is true. Returns all +inf if there are no targets.
std::vector<double> squared_edt(const OccupancyGrid& grid, bool target) {
  const int w = grid.width(), h = grid.height();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> out(static_cast<std::size_t>(w) * h);
  for (int iy = 0; iy < h; ++iy)
    for (int ix = 0; ix < w; ++ix)
      out[grid.index(ix, iy)] = grid.occupied(ix, iy) == target ? 0.0 : kInf;

  std::vector<double> line;
  line.resize(h);
  for (int ix = 0; ix < w; ++ix) {
    for (int iy = 0; iy < h; ++iy) line[iy] = out[grid.index(ix, iy)];
    distance_transform_1d(line);
    for (int iy = 0; iy < h; ++iy) out[grid.index(ix, iy)] = line[iy];
  }
  line.resize(w);
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) line[ix] = out[grid.index(ix, iy)];
    distance_transform_1d(line);
    for (int ix = 0; ix < w; ++ix) out[grid.index(ix, iy)] = line[ix];
  }
  return out;
}

}  // namespace

Sdf compute_sdf(const OccupancyGrid& grid) {
  const std::size_t n = grid.cells().size();
  const int occupied = grid.occupied_count();
  const double diag = grid.diagonal();
  if (occupied == 0) return Sdf(grid, std::vector<double>(n, diag));
  if (static_cast<std::size_t>(occupied) == n) return Sdf(grid, std::vector<double>(n, -diag));

  const auto to_occupied = squared_edt(grid, true);
  const auto to_free = squared_edt(grid, false);
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i)
    dist[i] = grid.resolution() * (std::sqrt(to_occupied[i]) - std::sqrt(to_free[i]));
  return Sdf(grid, std::move(dist));
}

std::string to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::kForest: return "forest";
    case EnvKind::kTarpit: return "tarpit";
    case EnvKind::kMultiObs: return "multi_obs";
  }
  return "unknown";
}

EnvKind env_kind_from_string(const std::string& s) {
  if (s == "forest") return EnvKind::kForest;
  if (s == "tarpit") return EnvKind::kTarpit;
  if (s == "multi_obs") return EnvKind::kMultiObs;
  throw InvalidArgument("unknown environment kind '" + s + "'");
}

EnvSpec EnvSpec::defaults(EnvKind kind) {
  EnvSpec s;
  s.kind = kind;
  switch (kind) {
    case EnvKind::kForest:
      s.min_obstacles = 15;
      s.max_obstacles = 30;
      s.min_size = 0.3;
      s.max_size = 0.6;
      s.keep_free_margin = 0.5;
      break;
    case EnvKind::kTarpit:
      s.min_obstacles = 2;
      s.max_obstacles = 5;
      s.min_size = 1.5;
      s.max_size = 2.5;
      s.keep_free_margin = 1.0;
      break;
    case EnvKind::kMultiObs:
      s.min_obstacles = 6;
      s.max_obstacles = 10;
      s.min_size = 0.8;
      s.max_size = 1.4;
      s.keep_free_margin = 1.0;
      break;
  }
  return s;
}

std::vector<Obstacle> sample_obstacles(const EnvSpec& spec) {
  if (spec.min_obstacles < 0 || spec.max_obstacles < spec.min_obstacles)
    throw GenerationError("invalid obstacle count range");
  if (!(spec.min_size > 0.0) || spec.max_size < spec.min_size)
    throw GenerationError("invalid obstacle size range");
  if (!(spec.extent > 0.0) || spec.cells < 2) throw GenerationError("invalid extent");
  const double worst_area = spec.max_obstacles * spec.max_size * spec.max_size;
  if (worst_area > spec.max_fill * spec.extent * spec.extent)
    throw GenerationError("obstacle area exceeds the free-space budget");

  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<int> count_dist(spec.min_obstacles, spec.max_obstacles);
  std::uniform_real_distribution<double> size_dist(spec.min_size, spec.max_size);
  std::bernoulli_distribution shape_dist(0.5);
  double lo = 0.0, hi = spec.extent;
  if (spec.kind == EnvKind::kTarpit) {
    lo = spec.extent / 3.0;
    hi = 2.0 * spec.extent / 3.0;
  }
  std::uniform_real_distribution<double> pos_dist(lo, hi);

  const int count = count_dist(rng);
  std::vector<Obstacle> obstacles;
  obstacles.reserve(count);
  for (int i = 0; i < count; ++i) {
    Obstacle o;
    o.disc = shape_dist(rng);
    o.size = size_dist(rng);
    const double x = pos_dist(rng);
    const double y = pos_dist(rng);
    o.center = Vec2(x, y);
    obstacles.push_back(o);
  }
  return obstacles;
}

OccupancyGrid generate(const EnvSpec& spec) {
  const auto obstacles = sample_obstacles(spec);
  const double res = spec.extent / spec.cells;
  OccupancyGrid grid(spec.cells, spec.cells, res, Vec2(0.5 * res, 0.5 * res));
  for (int iy = 0; iy < spec.cells; ++iy) {
    for (int ix = 0; ix < spec.cells; ++ix) {
      const Vec2 c = grid.cell_center(ix, iy);
      bool occ = false;
      for (const auto& o : obstacles) {
        const Vec2 d = c - o.center;
        if (o.disc ? d.norm() <= 0.5 * o.size
                   : (std::abs(d.x()) <= 0.5 * o.size && std::abs(d.y()) <= 0.5 * o.size)) {
          occ = true;
          break;
        }
      }
      if (occ && ((c - spec.start).norm() <= spec.keep_free_margin ||
                  (c - spec.goal).norm() <= spec.keep_free_margin))
        occ = false;
      grid.set(ix, iy, occ);
    }
  }
  return grid;
}

namespace {

void write_header(std::ostream& os, const char* tag, const OccupancyGrid& g) {
  std::ostringstream hdr;
  hdr.precision(17);
  hdr << tag << ' ' << g.width() << ' ' << g.height() << ' ' << g.resolution() << ' '
      << g.origin().x() << ' ' << g.origin().y() << '\n';
  os << hdr.str();
}

struct Header {
  int w, h;
  double res, ox, oy;
};

Header read_header(std::istream& is, const std::string& expected) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("missing " + expected + " header");
  std::istringstream ls(line);
  std::string tag;
  Header h{};
  if (!(ls >> tag >> h.w >> h.h >> h.res >> h.ox >> h.oy) || tag != expected)
    throw InvalidArgument("malformed " + expected + " header: '" + line + "'");
  if (h.w <= 0 || h.h <= 0) throw InvalidArgument("non-positive grid dimensions");
  return h;
}

}  // namespace

void write_grid(std::ostream& os, const OccupancyGrid& grid) {
  write_header(os, "OCC", grid);
  os.write(reinterpret_cast<const char*>(grid.cells().data()),
           static_cast<std::streamsize>(grid.cells().size()));
}

OccupancyGrid read_grid(std::istream& is) {
  const Header h = read_header(is, "OCC");
  std::vector<std::uint8_t> cells(static_cast<std::size_t>(h.w) * h.h);
  is.read(reinterpret_cast<char*>(cells.data()), static_cast<std::streamsize>(cells.size()));
  if (is.gcount() != static_cast<std::streamsize>(cells.size()))
    throw InvalidArgument("truncated grid payload");
  for (auto c : cells)
    if (c > 1) throw InvalidArgument("grid cells must be 0 or 1");
  return OccupancyGrid(h.w, h.h, h.res, Vec2(h.ox, h.oy), std::move(cells));
}

namespace {

void put_f64_le(std::ostream& os, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(buf, 8);
}

double get_f64_le(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (is.gcount() != 8) throw InvalidArgument("truncated float64 payload");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_sdf(std::ostream& os, const Sdf& sdf) {
  write_header(os, "SDF", sdf.grid());
  for (double v : sdf.data()) put_f64_le(os, v);
}

Sdf read_sdf(std::istream& is) {
  const Header h = read_header(is, "SDF");
  std::vector<double> dist(static_cast<std::size_t>(h.w) * h.h);
  for (auto& v : dist) v = get_f64_le(is);
  std::vector<std::uint8_t> cells(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i) cells[i] = dist[i] < 0.0 ? 1 : 0;
  return Sdf(OccupancyGrid(h.w, h.h, h.res, Vec2(h.ox, h.oy), std::move(cells)),
             std::move(dist));
}

void save_grid(const std::string& path, const OccupancyGrid& grid) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_grid(os, grid);
}

OccupancyGrid load_grid(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_grid(is);
}

void save_sdf(const std::string& path, const Sdf& sdf) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_sdf(os, sdf);
}

Sdf load_sdf(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_sdf(is);
}

}  // namespace dgpmp
