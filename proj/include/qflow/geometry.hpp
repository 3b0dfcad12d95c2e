#pragma once

// Integer-coordinate geometry kernel. All coordinates are nanometers held in
// 64-bit integers; exact predicates run in 128-bit arithmetic. Distances are
// reported as the floor of the real value in nm, so comparisons against
// integer thresholds are reproducible across platforms.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qflow/core.hpp"

namespace qflow::geom {

using Coord = std::int64_t;
using I128 = __int128;

inline int sgn(I128 v) { return (v > 0) - (v < 0); }

struct Point {
  Coord x = 0;
  Coord y = 0;

  friend bool operator==(const Point& a, const Point& b) = default;
  friend auto operator<=>(const Point& a, const Point& b) = default;
  Point operator+(const Point& o) const { return {x + o.x, y + o.y}; }
  Point operator-(const Point& o) const { return {x - o.x, y - o.y}; }
};

inline I128 cross(const Point& o, const Point& a, const Point& b) {
  return I128(a.x - o.x) * (b.y - o.y) - I128(a.y - o.y) * (b.x - o.x);
}

inline I128 dot(const Point& o, const Point& a, const Point& b) {
  return I128(a.x - o.x) * (b.x - o.x) + I128(a.y - o.y) * (b.y - o.y);
}

struct Rect {
  Point lo;
  Point hi;

  friend bool operator==(const Rect&, const Rect&) = default;

  bool valid() const { return lo.x <= hi.x && lo.y <= hi.y; }
  Coord width() const { return hi.x - lo.x; }
  Coord height() const { return hi.y - lo.y; }

  bool intersects(const Rect& o) const {  // closed rects, touching counts
    return lo.x <= o.hi.x && o.lo.x <= hi.x && lo.y <= o.hi.y && o.lo.y <= hi.y;
  }
  bool overlaps_interior(const Rect& o) const {
    return lo.x < o.hi.x && o.lo.x < hi.x && lo.y < o.hi.y && o.lo.y < hi.y;
  }
  bool contains(const Point& p) const {
    return lo.x <= p.x && p.x <= hi.x && lo.y <= p.y && p.y <= hi.y;
  }
  bool contains(const Rect& o) const {
    return lo.x <= o.lo.x && o.hi.x <= hi.x && lo.y <= o.lo.y && o.hi.y <= hi.y;
  }
  Rect expanded(Coord d) const { return {{lo.x - d, lo.y - d}, {hi.x + d, hi.y + d}}; }
  void include(const Point& p) {
    lo.x = std::min(lo.x, p.x);
    lo.y = std::min(lo.y, p.y);
    hi.x = std::max(hi.x, p.x);
    hi.y = std::max(hi.y, p.y);
  }
  void include(const Rect& r) {
    include(r.lo);
    include(r.hi);
  }
  static Rect empty() {
    constexpr Coord m = std::numeric_limits<Coord>::max();
    return {{m, m}, {-m, -m}};
  }
};

// ---------------------------------------------------------------------------
// Segment predicates
// ---------------------------------------------------------------------------

inline bool on_segment(const Point& p, const Point& a, const Point& b) {
  if (cross(a, b, p) != 0) return false;
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

// Any contact (crossing, touching, collinear overlap).
inline bool segments_intersect(const Point& a, const Point& b, const Point& c,
                               const Point& d) {
  int d1 = sgn(cross(c, d, a));
  int d2 = sgn(cross(c, d, b));
  int d3 = sgn(cross(a, b, c));
  int d4 = sgn(cross(a, b, d));
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
      ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  if (d1 == 0 && on_segment(a, c, d)) return true;
  if (d2 == 0 && on_segment(b, c, d)) return true;
  if (d3 == 0 && on_segment(c, a, b)) return true;
  if (d4 == 0 && on_segment(d, a, b)) return true;
  return false;
}

// Interiors of the segments cross (shared endpoints / tangency excluded).
inline bool segments_cross_properly(const Point& a, const Point& b,
                                    const Point& c, const Point& d) {
  int d1 = sgn(cross(c, d, a));
  int d2 = sgn(cross(c, d, b));
  int d3 = sgn(cross(a, b, c));
  int d4 = sgn(cross(a, b, d));
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
         ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

namespace detail {

// floor(sqrt(v)) for non-negative v.
inline Coord isqrt_i128(I128 v) {
  if (v <= 0) return 0;
  auto k = static_cast<Coord>(std::sqrt(static_cast<long double>(v)));
  while (k > 0 && I128(k) * k > v) --k;
  while (I128(k + 1) * (k + 1) <= v) ++k;
  return k;
}

// floor(sqrt(num/den)), den > 0, num >= 0.
inline Coord isqrt_rational(I128 num, I128 den) {
  if (num <= 0) return 0;
  auto k = static_cast<Coord>(
      std::sqrt(static_cast<long double>(num) / static_cast<long double>(den)));
  while (k > 0 && I128(k) * k * den > num) --k;
  while (I128(k + 1) * (k + 1) * den <= num) ++k;
  return k;
}

// floor of the distance from p to segment [a,b].
inline Coord point_segment_dist_floor(const Point& p, const Point& a,
                                      const Point& b) {
  I128 len2 = dot(a, b, b);
  if (len2 == 0) return isqrt_i128(dot(a, p, p));
  I128 t = dot(a, b, p);
  if (t <= 0) return isqrt_i128(dot(a, p, p));
  if (t >= len2) return isqrt_i128(dot(b, p, p));
  I128 c = cross(a, b, p);
  return isqrt_rational(c * c, len2);
}

// floor of the min distance between two segments; 0 when they touch.
inline Coord segment_dist_floor(const Point& a, const Point& b, const Point& c,
                                const Point& d) {
  if (segments_intersect(a, b, c, d)) return 0;
  Coord m = point_segment_dist_floor(a, c, d);
  m = std::min(m, point_segment_dist_floor(b, c, d));
  m = std::min(m, point_segment_dist_floor(c, a, b));
  return std::min(m, point_segment_dist_floor(d, a, b));
}

inline Coord round_div(I128 num, I128 den) {  // nearest, half away from zero
  if (den < 0) {
    num = -num;
    den = -den;
  }
  if (num >= 0) return static_cast<Coord>((num + den / 2) / den);
  return -static_cast<Coord>((-num + den / 2) / den);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Polygon
// ---------------------------------------------------------------------------

enum class Containment { Outside, Boundary, Inside };

struct Polygon {
  std::vector<Point> v;  // open ring, CCW for positive area

  Polygon() = default;
  explicit Polygon(std::vector<Point> pts) : v(std::move(pts)) {}
  Polygon(std::initializer_list<Point> pts) : v(pts) {}

  std::size_t size() const { return v.size(); }
  const Point& operator[](std::size_t i) const { return v[i]; }

  // twice the signed area (positive for CCW)
  I128 signed_area2() const {
    I128 s = 0;
    for (std::size_t i = 0, n = v.size(); i < n; ++i) {
      const Point& p = v[i];
      const Point& q = v[(i + 1) % n];
      s += I128(p.x) * q.y - I128(q.x) * p.y;
    }
    return s;
  }
  std::int64_t area2() const {
    I128 s = signed_area2();
    return static_cast<std::int64_t>(s < 0 ? -s : s);
  }
  double area() const { return static_cast<double>(area2()) * 0.5; }

  Rect bbox() const {
    Rect r = Rect::empty();
    for (const Point& p : v) r.include(p);
    return r;
  }

  bool is_ccw() const { return signed_area2() > 0; }
  void make_ccw() {
    if (signed_area2() < 0) std::reverse(v.begin(), v.end());
  }

  bool rectilinear() const {
    for (std::size_t i = 0, n = v.size(); i < n; ++i) {
      const Point& p = v[i];
      const Point& q = v[(i + 1) % n];
      if (p.x != q.x && p.y != q.y) return false;
    }
    return true;
  }

  Polygon translated(const Point& d) const {
    Polygon out;
    out.v.reserve(v.size());
    for (const Point& p : v) out.v.push_back(p + d);
    return out;
  }

  bool is_simple() const;
  Containment locate(const Point& p) const;
  // empty optional when valid, else the reason
  std::optional<std::string> invalid_reason() const;
};

inline Containment Polygon::locate(const Point& p) const {
  bool in = false;
  for (std::size_t i = 0, n = v.size(); i < n; ++i) {
    const Point& a = v[i];
    const Point& b = v[(i + 1) % n];
    if (on_segment(p, a, b)) return Containment::Boundary;
    if ((a.y > p.y) != (b.y > p.y)) {
      I128 c = cross(a, b, p);
      if (b.y > a.y ? c > 0 : c < 0) in = !in;
    }
  }
  return in ? Containment::Inside : Containment::Outside;
}

inline bool Polygon::is_simple() const {
  const std::size_t n = v.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = v[i];
    const Point& b = v[(i + 1) % n];
    if (a == b) return false;
    for (std::size_t j = i + 1; j < n; ++j) {
      const Point& c = v[j];
      const Point& d = v[(j + 1) % n];
      bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (adjacent) {
        // shared vertex only; a collinear backtrack makes a spur
        const Point& shared = (j == i + 1) ? b : a;
        const Point& pa = (j == i + 1) ? a : d;
        const Point& pb = (j == i + 1) ? d : b;
        if (cross(shared, pa, pb) == 0 && dot(shared, pa, pb) > 0) return false;
        continue;
      }
      if (segments_intersect(a, b, c, d)) return false;
    }
  }
  return true;
}

inline std::optional<std::string> Polygon::invalid_reason() const {
  if (v.size() < 3) return "fewer than 3 vertices";
  for (std::size_t i = 0, n = v.size(); i < n; ++i)
    if (v[i] == v[(i + 1) % n]) return "duplicate consecutive vertex";
  if (area2() == 0) return "zero area";
  if (!is_simple()) return "self-intersecting";
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Trapezoid
// ---------------------------------------------------------------------------

// Horizontal-trapezoid: two horizontal edges at y_lo / y_hi. One of them may
// degenerate to a point (triangle).
struct Trapezoid {
  Coord y_lo = 0, y_hi = 0;
  Coord xl_lo = 0, xr_lo = 0;  // bottom edge [xl_lo, xr_lo]
  Coord xl_hi = 0, xr_hi = 0;  // top edge    [xl_hi, xr_hi]

  friend bool operator==(const Trapezoid&, const Trapezoid&) = default;

  std::int64_t area2() const {
    return static_cast<std::int64_t>(
        (I128(xr_lo - xl_lo) + I128(xr_hi - xl_hi)) * (y_hi - y_lo));
  }
  Rect bbox() const {
    return {{std::min(xl_lo, xl_hi), y_lo}, {std::max(xr_lo, xr_hi), y_hi}};
  }
  Polygon to_polygon() const {
    Polygon p;
    p.v = {{xl_lo, y_lo}, {xr_lo, y_lo}, {xr_hi, y_hi}, {xl_hi, y_hi}};
    // drop degenerate duplicates (triangle case)
    std::vector<Point> out;
    for (const Point& q : p.v)
      if (out.empty() || out.back() != q) out.push_back(q);
    if (out.size() > 1 && out.front() == out.back()) out.pop_back();
    p.v = std::move(out);
    return p;
  }
};

// Horizontal sweep at every distinct vertex y. Exact for rectilinear and
// 45-degree edges; other slopes round cut intersections to the nm grid.
inline std::vector<Trapezoid> decompose_trapezoids(const Polygon& poly) {
  struct Edge {
    Point lo, hi;  // lo.y < hi.y
  };
  std::vector<Edge> edges;
  std::vector<Coord> ys;
  const std::size_t n = poly.size();
  edges.reserve(n);
  ys.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Point a = poly[i];
    Point b = poly[(i + 1) % n];
    ys.push_back(a.y);
    if (a.y == b.y) continue;  // horizontal edges delimit bands only
    edges.push_back(a.y < b.y ? Edge{a, b} : Edge{b, a});
  }
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());

  // x of edge at height y, rounded to grid (num/den exact when den | num)
  auto x_at = [](const Edge& e, Coord y) -> Coord {
    if (y == e.lo.y) return e.lo.x;
    if (y == e.hi.y) return e.hi.x;
    I128 num = I128(e.lo.x) * (e.hi.y - e.lo.y) +
               I128(y - e.lo.y) * (e.hi.x - e.lo.x);
    return detail::round_div(num, e.hi.y - e.lo.y);
  };
  // exact comparison of edge x positions at height y (rationals)
  auto less_at = [](const Edge& a, const Edge& b, Coord y) {
    I128 na = I128(a.lo.x) * (a.hi.y - a.lo.y) + I128(y - a.lo.y) * (a.hi.x - a.lo.x);
    I128 nb = I128(b.lo.x) * (b.hi.y - b.lo.y) + I128(y - b.lo.y) * (b.hi.x - b.lo.x);
    return na * (b.hi.y - b.lo.y) < nb * (a.hi.y - a.lo.y);
  };

  std::vector<Trapezoid> out;
  for (std::size_t bi = 0; bi + 1 < ys.size(); ++bi) {
    Coord y0 = ys[bi], y1 = ys[bi + 1];
    std::vector<const Edge*> active;
    for (const Edge& e : edges)
      if (e.lo.y <= y0 && e.hi.y >= y1) active.push_back(&e);
    std::sort(active.begin(), active.end(),
              [&](const Edge* a, const Edge* b) {
                if (less_at(*a, *b, y0)) return true;
                if (less_at(*b, *a, y0)) return false;
                return less_at(*a, *b, y1);
              });
    // crossing parity: consecutive sorted edges bound interior spans
    for (std::size_t k = 0; k + 1 < active.size(); k += 2) {
      Trapezoid t;
      t.y_lo = y0;
      t.y_hi = y1;
      t.xl_lo = x_at(*active[k], y0);
      t.xr_lo = x_at(*active[k + 1], y0);
      t.xl_hi = x_at(*active[k], y1);
      t.xr_hi = x_at(*active[k + 1], y1);
      if (t.area2() > 0) out.push_back(t);
    }
  }
  return out;
}

namespace detail {

// Axis-aligned rectangles of a rectilinear polygon (bands degenerate to rects).
inline std::vector<Rect> rect_decompose(const Polygon& p) {
  std::vector<Rect> rects;
  for (const Trapezoid& t : decompose_trapezoids(p))
    rects.push_back({{t.xl_lo, t.y_lo}, {t.xr_lo, t.y_hi}});
  return rects;
}

struct Vec2d {
  double x = 0, y = 0;
};

// Band decomposition with double-precision cut coordinates; used for the
// clipping fallback on non-rectilinear polygons.
inline std::vector<std::vector<Vec2d>> bands_double(const Polygon& poly) {
  struct Edge {
    Point lo, hi;
  };
  std::vector<Edge> edges;
  std::vector<Coord> ys;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    Point a = poly[i];
    Point b = poly[(i + 1) % n];
    ys.push_back(a.y);
    if (a.y == b.y) continue;
    edges.push_back(a.y < b.y ? Edge{a, b} : Edge{b, a});
  }
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  auto x_at = [](const Edge& e, Coord y) -> double {
    return static_cast<double>(e.lo.x) +
           static_cast<double>(y - e.lo.y) * static_cast<double>(e.hi.x - e.lo.x) /
               static_cast<double>(e.hi.y - e.lo.y);
  };
  std::vector<std::vector<Vec2d>> out;
  for (std::size_t bi = 0; bi + 1 < ys.size(); ++bi) {
    Coord y0 = ys[bi], y1 = ys[bi + 1];
    std::vector<const Edge*> active;
    for (const Edge& e : edges)
      if (e.lo.y <= y0 && e.hi.y >= y1) active.push_back(&e);
    std::sort(active.begin(), active.end(), [&](const Edge* a, const Edge* b) {
      double am = x_at(*a, y0) + x_at(*a, y1);
      double bm = x_at(*b, y0) + x_at(*b, y1);
      return am < bm;
    });
    for (std::size_t k = 0; k + 1 < active.size(); k += 2) {
      std::vector<Vec2d> quad = {{x_at(*active[k], y0), double(y0)},
                                 {x_at(*active[k + 1], y0), double(y0)},
                                 {x_at(*active[k + 1], y1), double(y1)},
                                 {x_at(*active[k], y1), double(y1)}};
      out.push_back(std::move(quad));
    }
  }
  return out;
}

inline double poly_area_double(const std::vector<Vec2d>& p) {
  double s = 0;
  for (std::size_t i = 0, n = p.size(); i < n; ++i) {
    const Vec2d& a = p[i];
    const Vec2d& b = p[(i + 1) % n];
    s += a.x * b.y - b.x * a.y;
  }
  return 0.5 * std::abs(s);
}

// Sutherland-Hodgman, convex clip polygon (CCW).
inline std::vector<Vec2d> clip_convex(const std::vector<Vec2d>& subject,
                                      const std::vector<Vec2d>& clip) {
  std::vector<Vec2d> out = subject;
  for (std::size_t i = 0, n = clip.size(); i < n && !out.empty(); ++i) {
    const Vec2d& a = clip[i];
    const Vec2d& b = clip[(i + 1) % n];
    std::vector<Vec2d> in = std::move(out);
    out.clear();
    auto side = [&](const Vec2d& p) {
      return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    };
    for (std::size_t j = 0, m = in.size(); j < m; ++j) {
      const Vec2d& p = in[j];
      const Vec2d& q = in[(j + 1) % m];
      double sp = side(p), sq = side(q);
      if (sp >= 0) out.push_back(p);
      if ((sp < 0) != (sq < 0)) {
        double t = sp / (sp - sq);
        out.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
      }
    }
  }
  return out;
}

inline void ensure_ccw(std::vector<Vec2d>& p) {
  double s = 0;
  for (std::size_t i = 0, n = p.size(); i < n; ++i)
    s += p[i].x * p[(i + 1) % n].y - p[(i + 1) % n].x * p[i].y;
  if (s < 0) std::reverse(p.begin(), p.end());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Polygon-pair measurements
// ---------------------------------------------------------------------------

// Area of a intersect (b + shift) in nm^2. Exact for rectilinear inputs;
// general polygons are clipped band-wise in double precision and rounded.
inline std::int64_t intersection_area(const Polygon& a, const Polygon& b,
                                      Point shift = {0, 0}) {
  Polygon bs = (shift == Point{0, 0}) ? b : b.translated(shift);
  Rect ra = a.bbox(), rb = bs.bbox();
  if (!ra.overlaps_interior(rb)) return 0;
  if (a.rectilinear() && bs.rectilinear()) {
    std::int64_t total = 0;
    auto rsa = detail::rect_decompose(a);
    auto rsb = detail::rect_decompose(bs);
    for (const Rect& x : rsa)
      for (const Rect& y : rsb) {
        Coord w = std::min(x.hi.x, y.hi.x) - std::max(x.lo.x, y.lo.x);
        Coord h = std::min(x.hi.y, y.hi.y) - std::max(x.lo.y, y.lo.y);
        if (w > 0 && h > 0) total += w * h;
      }
    return total;
  }
  double total = 0;
  auto qa = detail::bands_double(a);
  auto qb = detail::bands_double(bs);
  for (auto& x : qa) detail::ensure_ccw(x);
  for (auto& y : qb) {
    detail::ensure_ccw(y);
    for (const auto& x : qa) {
      auto c = detail::clip_convex(x, y);
      if (c.size() >= 3) total += detail::poly_area_double(c);
    }
  }
  return static_cast<std::int64_t>(std::llround(total));
}

// Interiors share area (boundary contact alone does not count).
inline bool interiors_overlap(const Polygon& a, const Polygon& b) {
  if (!a.bbox().overlaps_interior(b.bbox())) return false;
  const std::size_t na = a.size(), nb = b.size();
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j)
      if (segments_cross_properly(a[i], a[(i + 1) % na], b[j], b[(j + 1) % nb]))
        return true;
  for (const Point& p : a.v)
    if (b.locate(p) == Containment::Inside) return true;
  for (const Point& p : b.v)
    if (a.locate(p) == Containment::Inside) return true;
  // remaining case: overlap bounded entirely by collinear boundary pieces
  return intersection_area(a, b) > 0;
}

enum class SpacingKind { Disjoint, Touching, Overlapping };

struct Spacing {
  SpacingKind kind = SpacingKind::Disjoint;
  Coord dist = 0;  // floor(nm); 0 unless Disjoint

  bool connected() const { return kind != SpacingKind::Disjoint; }
};

// Euclidean boundary-to-boundary separation classification.
inline Spacing min_spacing(const Polygon& a, const Polygon& b) {
  const std::size_t na = a.size(), nb = b.size();
  bool contact = false;
  Coord best = std::numeric_limits<Coord>::max();
  for (std::size_t i = 0; i < na && !contact; ++i)
    for (std::size_t j = 0; j < nb; ++j)
      if (segments_intersect(a[i], a[(i + 1) % na], b[j], b[(j + 1) % nb])) {
        contact = true;
        break;
      }
  if (contact) {
    if (interiors_overlap(a, b)) return {SpacingKind::Overlapping, 0};
    return {SpacingKind::Touching, 0};
  }
  // no boundary contact: one polygon may still contain the other
  if (a.locate(b[0]) == Containment::Inside ||
      b.locate(a[0]) == Containment::Inside)
    return {SpacingKind::Overlapping, 0};
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j)
      best = std::min(best, detail::segment_dist_floor(a[i], a[(i + 1) % na],
                                                       b[j], b[(j + 1) % nb]));
  return {SpacingKind::Disjoint, best};
}

// ---------------------------------------------------------------------------
// Minimum interior width
// ---------------------------------------------------------------------------

// Minimum separation over facing interior edge pairs: inward normals oppose,
// the edges' projections overlap, and each lies on the other's interior side.
// Equals the true minimal interior width for rectilinear polygons; concave
// corner-to-corner necks between non-overlapping edges are not measured.
inline Coord min_width(const Polygon& polygon) {
  Polygon p = polygon;
  p.make_ccw();
  const std::size_t n = p.size();
  Coord best = std::numeric_limits<Coord>::max();
  for (std::size_t i = 0; i < n; ++i) {
    Point a1 = p[i], a2 = p[(i + 1) % n];
    Point di{a2.x - a1.x, a2.y - a1.y};
    Point ni{-di.y, di.x};  // inward normal (CCW)
    for (std::size_t j = i + 1; j < n; ++j) {
      Point b1 = p[j], b2 = p[(j + 1) % n];
      Point dj{b2.x - b1.x, b2.y - b1.y};
      Point nj{-dj.y, dj.x};
      I128 ndot = I128(ni.x) * nj.x + I128(ni.y) * nj.y;
      if (ndot >= 0) continue;  // normals must oppose
      // each edge on the other's interior side (midpoint test, doubled coords)
      I128 side_j = I128(ni.x) * ((b1.x + b2.x) - (a1.x + a2.x)) +
                    I128(ni.y) * ((b1.y + b2.y) - (a1.y + a2.y));
      I128 side_i = I128(nj.x) * ((a1.x + a2.x) - (b1.x + b2.x)) +
                    I128(nj.y) * ((a1.y + a2.y) - (b1.y + b2.y));
      if (side_j <= 0 || side_i <= 0) continue;
      // mutual projection overlap on edge i's direction
      I128 t1 = dot(a1, a2, b1), t2 = dot(a1, a2, b2);
      I128 len2 = dot(a1, a2, a2);
      I128 tlo = std::min(t1, t2), thi = std::max(t1, t2);
      if (thi <= 0 || tlo >= len2) continue;
      // clip edge j to the overlapping parameter range of edge i (doubles),
      // then measure; exact for axis-parallel rectilinear pairs
      double fx1 = double(b1.x), fy1 = double(b1.y);
      double fx2 = double(b2.x), fy2 = double(b2.y);
      double dt = double(t2 - t1);
      if (dt != 0) {
        double u1 = (std::max(tlo, I128(0)) - t1) / dt;
        double u2 = (std::min(thi, len2) - t1) / dt;
        if (u1 > u2) std::swap(u1, u2);
        u1 = std::clamp(u1, 0.0, 1.0);
        u2 = std::clamp(u2, 0.0, 1.0);
        fx1 = double(b1.x) + u1 * double(b2.x - b1.x);
        fy1 = double(b1.y) + u1 * double(b2.y - b1.y);
        fx2 = double(b1.x) + u2 * double(b2.x - b1.x);
        fy2 = double(b1.y) + u2 * double(b2.y - b1.y);
      }
      Point c1{static_cast<Coord>(std::llround(fx1)), static_cast<Coord>(std::llround(fy1))};
      Point c2{static_cast<Coord>(std::llround(fx2)), static_cast<Coord>(std::llround(fy2))};
      best = std::min(best, detail::segment_dist_floor(a1, a2, c1, c2));
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Path to polygon
// ---------------------------------------------------------------------------

enum class Endcap { Flush, Round, HalfExt };

struct PathPolygon {
  Polygon polygon;
  bool self_overlap = false;  // flagged for manual review, not rejected
};

// Offsets a centerline into its outline polygon. Miter joins are capped at
// twice the path width; round caps are polygonized at circle_segments per
// full circle (16 by default).
inline PathPolygon path_to_polygon(const std::vector<Point>& centerline,
                                   Coord width, Endcap cap = Endcap::Flush,
                                   int circle_segments = 16) {
  if (width <= 0) throw Error("path width must be positive");
  if (circle_segments < 4 || circle_segments % 2)
    throw Error("circle_segments must be an even number >= 4");
  std::vector<Point> pts;
  for (const Point& p : centerline)
    if (pts.empty() || pts.back() != p) pts.push_back(p);
  if (pts.size() < 2) throw Error("path needs at least 2 distinct points");

  const double h = width * 0.5;
  struct V {
    double x, y;
  };
  auto norm = [](V a) {
    double l = std::hypot(a.x, a.y);
    return V{a.x / l, a.y / l};
  };
  if (cap == Endcap::HalfExt) {
    V d0 = norm({double(pts[1].x - pts[0].x), double(pts[1].y - pts[0].y)});
    V dn = norm({double(pts.back().x - pts[pts.size() - 2].x),
                 double(pts.back().y - pts[pts.size() - 2].y)});
    pts.front() = {static_cast<Coord>(std::llround(pts.front().x - d0.x * h)),
                   static_cast<Coord>(std::llround(pts.front().y - d0.y * h))};
    pts.back() = {static_cast<Coord>(std::llround(pts.back().x + dn.x * h)),
                  static_cast<Coord>(std::llround(pts.back().y + dn.y * h))};
  }

  const std::size_t m = pts.size() - 1;  // segment count
  std::vector<V> dir(m), nrm(m);
  for (std::size_t i = 0; i < m; ++i) {
    dir[i] = norm({double(pts[i + 1].x - pts[i].x), double(pts[i + 1].y - pts[i].y)});
    nrm[i] = {-dir[i].y, dir[i].x};  // left normal
  }

  // one side of the offset outline; sign = +1 left, -1 right
  auto offset_side = [&](double sign) {
    std::vector<V> side;
    side.push_back({pts[0].x + sign * h * nrm[0].x, pts[0].y + sign * h * nrm[0].y});
    for (std::size_t k = 1; k < m; ++k) {
      V p{double(pts[k].x), double(pts[k].y)};
      V n1{sign * h * nrm[k - 1].x, sign * h * nrm[k - 1].y};
      V n2{sign * h * nrm[k].x, sign * h * nrm[k].y};
      double cr = dir[k - 1].x * dir[k].y - dir[k - 1].y * dir[k].x;
      if (std::abs(cr) < 1e-12) {  // straight or reversal: keep both offsets
        side.push_back({p.x + n1.x, p.y + n1.y});
        if (std::abs(n1.x - n2.x) + std::abs(n1.y - n2.y) > 1e-9)
          side.push_back({p.x + n2.x, p.y + n2.y});
        continue;
      }
      // intersect offset lines p+n1+t*d1 and p+n2+s*d2
      double t = ((n2.x - n1.x) * dir[k].y - (n2.y - n1.y) * dir[k].x) / cr;
      V miter{p.x + n1.x + t * dir[k - 1].x, p.y + n1.y + t * dir[k - 1].y};
      double miter_len = std::hypot(miter.x - p.x, miter.y - p.y);
      if (miter_len <= 2.0 * width) {
        side.push_back(miter);
      } else {  // bevel
        side.push_back({p.x + n1.x, p.y + n1.y});
        side.push_back({p.x + n2.x, p.y + n2.y});
      }
    }
    side.push_back(
        {pts[m].x + sign * h * nrm[m - 1].x, pts[m].y + sign * h * nrm[m - 1].y});
    return side;
  };

  std::vector<V> left = offset_side(+1.0), right = offset_side(-1.0);
  std::vector<V> ring = left;
  const int half = circle_segments / 2;
  auto arc = [&](V center, V from_n, double sweep_sign) {
    // intermediate vertices of a half polygonized circle between the sides
    for (int k = 1; k < half; ++k) {
      double th = sweep_sign * M_PI * k / half;
      double c = std::cos(th), s = std::sin(th);
      ring.push_back({center.x + (from_n.x * c - from_n.y * s) * h,
                      center.y + (from_n.x * s + from_n.y * c) * h});
    }
  };
  if (cap == Endcap::Round)
    arc({double(pts[m].x), double(pts[m].y)}, nrm[m - 1], -1.0);
  for (auto it = right.rbegin(); it != right.rend(); ++it) ring.push_back(*it);
  if (cap == Endcap::Round)
    arc({double(pts[0].x), double(pts[0].y)}, {-nrm[0].x, -nrm[0].y}, -1.0);

  PathPolygon result;
  result.polygon.v.reserve(ring.size());
  for (const V& p : ring) {
    Point q{static_cast<Coord>(std::llround(p.x)),
            static_cast<Coord>(std::llround(p.y))};
    if (result.polygon.v.empty() || result.polygon.v.back() != q)
      result.polygon.v.push_back(q);
  }
  while (result.polygon.v.size() > 1 &&
         result.polygon.v.front() == result.polygon.v.back())
    result.polygon.v.pop_back();
  result.polygon.make_ccw();
  result.self_overlap = !result.polygon.is_simple();
  return result;
}

}  // namespace qflow::geom
