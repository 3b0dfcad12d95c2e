#pragma once

// Test-only oracles, independent of the library implementation paths they
// check: scanline rasterization (areas), erosion-based minimum width,
// a rectilinear polygon generator, and wafer tiling reference counts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "qflow/geometry.hpp"

namespace oracles {

using qflow::geom::Coord;
using qflow::geom::Point;
using qflow::geom::Polygon;

// ---------------------------------------------------------------------------
// Scanline rasterization
// ---------------------------------------------------------------------------

struct Raster {
  Coord cell = 10;  // nm per cell
  Coord x0 = 0, y0 = 0;
  std::size_t nx = 0, ny = 0;
  std::vector<std::uint8_t> mask;  // 1 = cell center inside

  bool at(std::size_t ix, std::size_t iy) const { return mask[iy * nx + ix]; }
  double area_nm2() const {
    std::size_t n = 0;
    for (std::uint8_t b : mask) n += b;
    return static_cast<double>(n) * cell * cell;
  }
};

inline Raster rasterize(const Polygon& poly, Coord cell = 10, Coord pad = 0) {
  auto bb = poly.bbox();
  Raster r;
  r.cell = cell;
  r.x0 = bb.lo.x - pad;
  r.y0 = bb.lo.y - pad;
  r.nx = static_cast<std::size_t>((bb.hi.x - r.x0 + pad) / cell + 2);
  r.ny = static_cast<std::size_t>((bb.hi.y - r.y0 + pad) / cell + 2);
  r.mask.assign(r.nx * r.ny, 0);
  const std::size_t n = poly.size();
  std::vector<double> xs;
  for (std::size_t iy = 0; iy < r.ny; ++iy) {
    double y = r.y0 + (iy + 0.5) * cell;
    xs.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const Point& a = poly[i];
      const Point& b = poly[(i + 1) % n];
      if ((a.y > y) != (b.y > y)) {
        double t = (y - a.y) / static_cast<double>(b.y - a.y);
        xs.push_back(a.x + t * (b.x - a.x));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      auto lo = static_cast<std::int64_t>(
          std::ceil((xs[k] - r.x0) / cell - 0.5));
      auto hi = static_cast<std::int64_t>(
          std::floor((xs[k + 1] - r.x0) / cell - 0.5));
      lo = std::max<std::int64_t>(lo, 0);
      hi = std::min<std::int64_t>(hi, static_cast<std::int64_t>(r.nx) - 1);
      for (std::int64_t ix = lo; ix <= hi; ++ix)
        r.mask[iy * r.nx + ix] = 1;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Erosion / opening minimum width
// ---------------------------------------------------------------------------

namespace detail {

// separable Chebyshev-disk min/max filter
inline std::vector<std::uint8_t> filter(const Raster& r,
                                        const std::vector<std::uint8_t>& in,
                                        int k, bool take_min) {
  std::vector<std::uint8_t> tmp(in.size()), out(in.size());
  auto run = [&](const std::vector<std::uint8_t>& src,
                 std::vector<std::uint8_t>& dst, bool rows) {
    std::size_t outer = rows ? r.ny : r.nx;
    std::size_t inner = rows ? r.nx : r.ny;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < inner; ++i) {
        std::uint8_t v = take_min ? 1 : 0;
        for (int d = -k; d <= k; ++d) {
          std::int64_t j = static_cast<std::int64_t>(i) + d;
          std::uint8_t cell = 0;
          if (j >= 0 && j < static_cast<std::int64_t>(inner))
            cell = rows ? src[o * r.nx + j] : src[j * r.nx + o];
          if (take_min)
            v = std::min(v, cell);
          else
            v = std::max(v, cell);
        }
        if (rows)
          dst[o * r.nx + i] = v;
        else
          dst[i * r.nx + o] = v;
      }
    }
  };
  run(in, tmp, true);
  run(tmp, out, false);
  return out;
}

}  // namespace detail

// Largest opening kernel that leaves the mask unchanged gives the minimum
// feature width: a (2k+1)-cell opening preserves features >= 2k+1 cells.
inline Coord erosion_min_width(const Polygon& poly, Coord cell = 10) {
  Raster r = rasterize(poly, cell, /*pad=*/4 * cell);
  auto opening_ok = [&](int k) {
    auto eroded = detail::filter(r, r.mask, k, /*min*/ true);
    auto opened = detail::filter(r, eroded, k, /*min*/ false);
    return opened == r.mask;
  };
  int lo = 0, hi = static_cast<int>(std::max(r.nx, r.ny) / 2 + 2);
  while (lo < hi) {  // find the largest k with opening_ok(k)
    int mid = (lo + hi + 1) / 2;
    if (opening_ok(mid))
      lo = mid;
    else
      hi = mid - 1;
  }
  return (2 * static_cast<Coord>(lo) + 1) * cell;
}

// ---------------------------------------------------------------------------
// Random rectilinear polygons
// ---------------------------------------------------------------------------

// Rectangle with notches cut from the top-left and bottom-right regions.
// Separations are kept wide so every neck is between overlapping facing
// edges (no corner-to-corner diagonals).
inline Polygon random_rectilinear(std::mt19937_64& rng, int max_notches = 2) {
  auto grid = [&](Coord lo, Coord hi) {
    std::uniform_int_distribution<Coord> d(lo / 10, hi / 10);
    return d(rng) * 10;
  };
  const Coord w = grid(2000, 5000);
  const Coord h = grid(1200, 3000);
  std::uniform_int_distribution<int> nd(0, max_notches);
  int top_notches = nd(rng);
  int bottom_notches = nd(rng);

  struct Notch {
    Coord x0, x1, depth;
  };
  auto make_notches = [&](int count, Coord zone_lo, Coord zone_hi) {
    std::vector<Notch> out;
    Coord cursor = zone_lo;
    for (int i = 0; i < count; ++i) {
      Coord min_gap = 400;
      Coord width = grid(200, 600);
      if (cursor + min_gap + width + min_gap > zone_hi) break;
      Coord x0 = cursor + min_gap;
      Coord slack = zone_hi - (x0 + width + min_gap);
      Coord shift = slack > 0 ? grid(0, std::min<Coord>(slack, 500)) : 0;
      x0 += shift;
      out.push_back({x0, x0 + width, grid(h / 5, h / 3)});
      cursor = x0 + width;
    }
    return out;
  };
  auto tops = make_notches(top_notches, 0, w * 2 / 5);
  auto bottoms = make_notches(bottom_notches, w * 3 / 5, w);

  Polygon p;
  p.v.push_back({0, 0});
  for (const Notch& n : bottoms) {  // along the bottom edge, left to right
    p.v.push_back({n.x0, 0});
    p.v.push_back({n.x0, n.depth});
    p.v.push_back({n.x1, n.depth});
    p.v.push_back({n.x1, 0});
  }
  p.v.push_back({w, 0});
  p.v.push_back({w, h});
  for (auto it = tops.rbegin(); it != tops.rend(); ++it) {  // top, right to left
    p.v.push_back({it->x1, h});
    p.v.push_back({it->x1, h - it->depth});
    p.v.push_back({it->x0, h - it->depth});
    p.v.push_back({it->x0, h});
  }
  p.v.push_back({0, h});
  p.make_ccw();
  return p;
}

// ---------------------------------------------------------------------------
// Wafer tiling references
// ---------------------------------------------------------------------------

// Row-by-row enumeration of the centered grid (die centers at half-pitch
// offsets), counting columns per row from the circle equation.
inline std::size_t centered_die_count(double diameter_mm, double exclusion_mm,
                                      double die_w_mm, double die_h_mm,
                                      double lane_mm) {
  const double r = diameter_mm / 2 - exclusion_mm;
  const double px = die_w_mm + lane_mm, py = die_h_mm + lane_mm;
  std::size_t total = 0;
  for (int j = 0;; ++j) {
    double yc = (j + 0.5) * py;
    double ymax = yc + die_h_mm / 2;  // worst corner
    if (ymax > r) break;
    double xhalf = std::sqrt(r * r - ymax * ymax);
    // columns i >= 0 with (i + 0.5) px + w/2 <= xhalf
    double limit = (xhalf - die_w_mm / 2) / px - 0.5;
    if (limit < 0) continue;
    std::size_t cols_half = static_cast<std::size_t>(std::floor(limit)) + 1;
    total += 4 * cols_half;  // both x signs, both y signs
  }
  return total;
}

// Exhaustive offset scan; independent reimplementation of the planner loop.
// Integer micrometers, like the planner, so circle-tangent corners agree.
inline std::size_t best_offset_die_count(double diameter_mm, double exclusion_mm,
                                         double die_w_mm, double die_h_mm,
                                         double lane_mm,
                                         std::int64_t step_um = 500) {
  auto um = [](double mm) {
    return static_cast<std::int64_t>(std::llround(mm * 1000.0));
  };
  const std::int64_t r = um(diameter_mm / 2 - exclusion_mm);
  const std::int64_t w = um(die_w_mm), h = um(die_h_mm);
  const std::int64_t px = w + um(lane_mm), py = h + um(lane_mm);
  auto count_at = [&](std::int64_t ox, std::int64_t oy) {
    std::size_t n = 0;
    auto imax = static_cast<int>(2 * r / px) + 2;
    auto jmax = static_cast<int>(2 * r / py) + 2;
    for (int j = -jmax; j <= jmax; ++j)
      for (int i = -imax; i <= imax; ++i) {
        std::int64_t x = ox + i * px, y = oy + j * py;
        bool ok = true;
        for (std::int64_t cx : {x, x + w})
          for (std::int64_t cy : {y, y + h})
            if (cx * cx + cy * cy > r * r) ok = false;
        if (ok) ++n;
      }
    return n;
  };
  std::size_t best = 0;
  for (std::int64_t oy = 0; oy < py; oy += step_um)
    for (std::int64_t ox = 0; ox < px; ox += step_um)
      best = std::max(best, count_at(ox, oy));
  // the centered grid is always a candidate too
  best = std::max(best, count_at((px - w) / 2, (py - h) / 2));
  return best;
}

}  // namespace oracles
