#pragma once

// Step-and-repeat wafer planning: tile rectangular dies plus scribe lanes on
// a circular wafer with an edge-exclusion annulus, optionally scanning grid
// offsets for the best die count, then emit the wafer-level layout with
// process-control monitors in the lanes.
//
// All positions are computed in integer micrometers; a die is accepted iff
// all four corners lie inside the usable circle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "qflow/core.hpp"
#include "qflow/gds.hpp"
#include "qflow/geometry.hpp"

namespace qflow::wafer {

using geom::Coord;
using geom::Point;

struct WaferSpec {
  double diameter_mm = 300.0;
  double edge_exclusion_mm = 5.0;
};

struct DieSpec {
  double width_mm = 24.0;
  double height_mm = 28.0;
  std::string outline_cell = "CHIP";
};

struct ScribeSpec {
  double lane_width_mm = 0.2;
  std::vector<std::string> pcm_cells;  // cycled through interior lane segments
};

struct Site {
  int column = 0;
  int row = 0;
  std::int64_t x_um = 0;  // die lower-left corner, wafer center at (0, 0)
  std::int64_t y_um = 0;
};

struct WaferPlan {
  WaferSpec wafer;
  DieSpec die;
  ScribeSpec scribe;
  double usable_radius_mm = 0;
  std::int64_t pitch_x_um = 0;
  std::int64_t pitch_y_um = 0;
  std::int64_t offset_x_um = 0;  // grid offset of die corners modulo pitch
  std::int64_t offset_y_um = 0;
  std::vector<Site> sites;
  std::size_t die_count = 0;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::int64_t to_um(double mm) {
  return static_cast<std::int64_t>(std::llround(mm * 1000.0));
}

// all four corners of [x, x+w] x [y, y+h] within radius r (exact)
inline bool die_fits(std::int64_t x, std::int64_t y, std::int64_t w,
                     std::int64_t h, std::int64_t r) {
  auto inside = [r](std::int64_t px, std::int64_t py) {
    return px * px + py * py <= r * r;
  };
  return inside(x, y) && inside(x + w, y) && inside(x, y + h) &&
         inside(x + w, y + h);
}

// enumerate accepted sites for a given grid offset
inline std::vector<Site> sites_for_offset(std::int64_t off_x, std::int64_t off_y,
                                          std::int64_t w, std::int64_t h,
                                          std::int64_t px, std::int64_t py,
                                          std::int64_t r) {
  std::vector<Site> out;
  // candidate index range: die corners within [-r, r]
  int i_lo = static_cast<int>((-r - off_x) / px) - 2;
  int i_hi = static_cast<int>((r - off_x) / px) + 2;
  int j_lo = static_cast<int>((-r - off_y) / py) - 2;
  int j_hi = static_cast<int>((r - off_y) / py) + 2;
  for (int j = j_lo; j <= j_hi; ++j) {
    std::int64_t y = off_y + static_cast<std::int64_t>(j) * py;
    if (y + h < -r || y > r) continue;
    for (int i = i_lo; i <= i_hi; ++i) {
      std::int64_t x = off_x + static_cast<std::int64_t>(i) * px;
      if (die_fits(x, y, w, h, r)) out.push_back({i, j, x, y});
    }
  }
  return out;
}

}  // namespace detail

// Centered grid: no die straddles the wafer center; die centers sit at
// (k + 1/2) pitch. This is the reference layout the offset scan has to beat.
inline std::pair<std::int64_t, std::int64_t> centered_offset(std::int64_t w,
                                                             std::int64_t h,
                                                             std::int64_t px,
                                                             std::int64_t py) {
  // die lower-left corners at i*pitch + lane/2 relative to center
  return {(px - w) / 2, (py - h) / 2};
}

struct PlanOptions {
  bool optimize_offset = true;
  std::int64_t scan_step_um = 500;  // 0.5 mm offset scan resolution
};

inline WaferPlan plan_wafer(const WaferSpec& wafer, const DieSpec& die,
                            const ScribeSpec& scribe, PlanOptions opt = {}) {
  using detail::to_um;
  if (wafer.diameter_mm <= 0 || wafer.edge_exclusion_mm < 0 ||
      wafer.edge_exclusion_mm >= wafer.diameter_mm / 2)
    throw Error("invalid wafer spec: need 0 <= exclusion < diameter/2");
  if (die.width_mm <= 0 || die.height_mm <= 0)
    throw Error("invalid die spec: dimensions must be positive");
  if (scribe.lane_width_mm < 0) throw Error("negative scribe lane width");

  WaferPlan plan;
  plan.wafer = wafer;
  plan.die = die;
  plan.scribe = scribe;
  plan.usable_radius_mm = wafer.diameter_mm / 2 - wafer.edge_exclusion_mm;

  const std::int64_t w = to_um(die.width_mm);
  const std::int64_t h = to_um(die.height_mm);
  const std::int64_t lane = to_um(scribe.lane_width_mm);
  const std::int64_t r = to_um(plan.usable_radius_mm);
  plan.pitch_x_um = w + lane;
  plan.pitch_y_um = h + lane;

  auto [cx, cy] = centered_offset(w, h, plan.pitch_x_um, plan.pitch_y_um);
  std::int64_t best_x = cx, best_y = cy;
  std::size_t best_count =
      detail::sites_for_offset(cx, cy, w, h, plan.pitch_x_um, plan.pitch_y_um, r)
          .size();

  if (opt.optimize_offset && opt.scan_step_um > 0) {
    // exhaustive scan over one pitch period; ties go to the offset closest
    // to the centered grid (wrapped distance), then lexicographically
    auto wrapped = [](std::int64_t v, std::int64_t period) {
      std::int64_t m = ((v % period) + period) % period;
      return std::min(m, period - m);
    };
    double best_tie = 0;
    auto tie_dist = [&](std::int64_t ox, std::int64_t oy) {
      double dx = static_cast<double>(wrapped(ox - cx, plan.pitch_x_um));
      double dy = static_cast<double>(wrapped(oy - cy, plan.pitch_y_um));
      return dx * dx + dy * dy;
    };
    best_tie = tie_dist(best_x, best_y);
    for (std::int64_t oy = 0; oy < plan.pitch_y_um; oy += opt.scan_step_um) {
      for (std::int64_t ox = 0; ox < plan.pitch_x_um; ox += opt.scan_step_um) {
        std::size_t n = detail::sites_for_offset(ox, oy, w, h, plan.pitch_x_um,
                                                 plan.pitch_y_um, r)
                            .size();
        if (n < best_count) continue;
        double t = tie_dist(ox, oy);
        if (n > best_count || t < best_tie ||
            (t == best_tie && std::tie(oy, ox) < std::tie(best_y, best_x))) {
          best_count = n;
          best_x = ox;
          best_y = oy;
          best_tie = t;
        }
      }
    }
  }

  plan.offset_x_um = best_x;
  plan.offset_y_um = best_y;
  plan.sites = detail::sites_for_offset(best_x, best_y, w, h, plan.pitch_x_um,
                                        plan.pitch_y_um, r);
  std::sort(plan.sites.begin(), plan.sites.end(), [](const Site& a, const Site& b) {
    return std::tie(a.row, a.column) < std::tie(b.row, b.column);
  });
  plan.die_count = plan.sites.size();
  if (plan.die_count == 0)
    plan.warnings.push_back("no die fits the usable wafer area");
  return plan;
}

// ---------------------------------------------------------------------------
// PCM cells (scribe-lane process monitors)
// ---------------------------------------------------------------------------

// Small test structures instanced in the lanes: an alignment cross, a
// junction test array, and a resistance meander. Geometry uses the same
// layer bindings as the chip generator.
inline void add_default_pcm_cells(gds::Layout& layout) {
  using geom::Point;
  auto rect = [](int layer, int dt, Coord x0, Coord y0, Coord x1, Coord y1) {
    gds::Element e;
    e.kind = gds::ElementKind::Boundary;
    e.layer = layer;
    e.datatype = dt;
    e.coords = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
    return e;
  };
  gds::Cell& align = layout.cell("PCM_ALIGN");
  align.elements.push_back(rect(1, 0, -40000, -8000, 40000, 8000));
  align.elements.push_back(rect(1, 0, -8000, -40000, -2000, -8000));
  align.elements.push_back(rect(1, 0, -8000, 8000, -2000, 40000));
  align.elements.push_back(rect(1, 0, 2000, -40000, 8000, -8000));
  align.elements.push_back(rect(1, 0, 2000, 8000, 8000, 40000));

  gds::Cell& jjarr = layout.cell("PCM_JJ");
  for (int k = 0; k < 4; ++k) {
    Coord x = -30000 + k * 20000;
    jjarr.elements.push_back(rect(2, 0, x - 700, -100, x + 700, 100));
    jjarr.elements.push_back(rect(4, 0, x - 100, -700, x + 100, 700));
  }

  gds::Cell& res = layout.cell("PCM_RES");
  for (int k = 0; k < 3; ++k) {
    Coord y = -20000 + k * 20000;
    res.elements.push_back(rect(1, 1, -40000, y - 3000, 40000, y + 3000));
    Coord x = (k % 2 == 0) ? 34000 : -40000;
    if (k < 2) res.elements.push_back(rect(1, 1, x, y + 3000, x + 6000, y + 17000));
  }
}

inline std::vector<std::string> default_pcm_names() {
  return {"PCM_ALIGN", "PCM_JJ", "PCM_RES"};
}

// ---------------------------------------------------------------------------
// Wafer layout emission
// ---------------------------------------------------------------------------

struct WaferLayoutStats {
  std::size_t die_refs = 0;
  std::size_t pcm_refs = 0;
};

// One WAFER top cell referencing the die at every accepted site, PCM cells
// cycling through interior horizontal lane segments, and a polygonized wafer
// outline circle on the outline layer.
inline gds::Layout emit_wafer_layout(const WaferPlan& plan,
                                     const gds::Layout& die_layout,
                                     const ScribeSpec& scribe,
                                     WaferLayoutStats* stats = nullptr) {
  if (!die_layout.find_cell(plan.die.outline_cell))
    throw Error("die outline cell '" + plan.die.outline_cell +
                "' not found in die layout");
  gds::Layout out = die_layout;
  out.library_name = "WAFER";
  std::vector<std::string> pcm = scribe.pcm_cells;
  if (pcm.empty() && scribe.lane_width_mm > 0) {
    add_default_pcm_cells(out);
    pcm = default_pcm_names();
  }
  for (const std::string& name : pcm)
    if (!out.find_cell(name)) throw Error("PCM cell '" + name + "' not found");

  gds::Cell& top = out.cell("WAFER");
  WaferLayoutStats st;

  auto um_nm = [](std::int64_t um) { return um * 1000; };
  for (const Site& s : plan.sites) {
    gds::CellRef ref;
    ref.target = plan.die.outline_cell;
    ref.translation = {um_nm(s.x_um), um_nm(s.y_um)};
    top.refs.push_back(ref);
    ++st.die_refs;
  }

  // PCMs: one per interior horizontal lane segment (a site directly above),
  // round-robin through the cell list in site order
  const std::int64_t lane_nm = detail::to_um(scribe.lane_width_mm) * 1000;
  if (!pcm.empty() && lane_nm > 0) {
    std::size_t next = 0;
    for (const Site& s : plan.sites) {
      bool has_above = false;
      for (const Site& t : plan.sites)
        if (t.column == s.column && t.row == s.row + 1) has_above = true;
      if (!has_above) continue;
      gds::CellRef ref;
      ref.target = pcm[next++ % pcm.size()];
      ref.translation = {um_nm(s.x_um) + um_nm(plan.pitch_x_um) / 2,
                         um_nm(s.y_um) + um_nm(detail::to_um(plan.die.height_mm)) +
                             lane_nm / 2};
      top.refs.push_back(ref);
      ++st.pcm_refs;
    }
  }

  // wafer outline circle, 256 segments
  gds::Element circle;
  circle.kind = gds::ElementKind::Boundary;
  circle.layer = 0;
  circle.datatype = 0;
  const double r_nm = plan.wafer.diameter_mm / 2.0 * 1e6;
  for (int k = 0; k < 256; ++k) {
    double th = 2.0 * M_PI * k / 256.0;
    circle.coords.push_back({static_cast<Coord>(std::llround(r_nm * std::cos(th))),
                             static_cast<Coord>(std::llround(r_nm * std::sin(th)))});
  }
  top.elements.push_back(std::move(circle));

  out.top_cell = "WAFER";
  out.validate();
  if (stats) *stats = st;
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json plan_json(const WaferPlan& plan) {
  nlohmann::ordered_json j;
  j["report"] = "wafer_plan";
  j["version"] = 1;
  j["wafer"] = {{"diameter_mm", plan.wafer.diameter_mm},
                {"edge_exclusion_mm", plan.wafer.edge_exclusion_mm}};
  j["die"] = {{"width_mm", plan.die.width_mm},
              {"height_mm", plan.die.height_mm},
              {"outline_cell", plan.die.outline_cell}};
  j["scribe"] = {{"lane_width_mm", plan.scribe.lane_width_mm},
                 {"pcm_cells", plan.scribe.pcm_cells}};
  j["usable_radius_mm"] = plan.usable_radius_mm;
  j["pitch_um"] = {{"x", plan.pitch_x_um}, {"y", plan.pitch_y_um}};
  j["grid_offset_um"] = {{"x", plan.offset_x_um}, {"y", plan.offset_y_um}};
  j["die_count"] = plan.die_count;
  j["sites"] = nlohmann::ordered_json::array();
  for (const Site& s : plan.sites)
    j["sites"].push_back({{"column", s.column},
                          {"row", s.row},
                          {"x_um", s.x_um},
                          {"y_um", s.y_um}});
  j["warnings"] = plan.warnings;
  return j;
}

inline std::string plan_svg(const WaferPlan& plan) {
  const double r = plan.wafer.diameter_mm / 2.0;
  const double ur = plan.usable_radius_mm;
  char buf[512];
  std::string svg;
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"%.1f %.1f "
                "%.1f %.1f\" width=\"700\" height=\"700\">\n",
                -r * 1.05, -r * 1.05, 2.1 * r, 2.1 * r);
  svg += buf;
  std::snprintf(buf, sizeof buf,
                "<circle r=\"%.2f\" fill=\"#f4f4f4\" stroke=\"#444\" "
                "stroke-width=\"0.5\"/>\n<circle r=\"%.2f\" fill=\"none\" "
                "stroke=\"#a00\" stroke-dasharray=\"3 2\" stroke-width=\"0.4\"/>\n",
                r, ur);
  svg += buf;
  for (const Site& s : plan.sites) {
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" "
                  "fill=\"#cfe3ff\" stroke=\"#246\" stroke-width=\"0.25\"/>\n",
                  s.x_um / 1000.0, -(s.y_um / 1000.0 + plan.die.height_mm),
                  plan.die.width_mm, plan.die.height_mm);
    svg += buf;
  }
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.1f\" y=\"%.1f\" font-size=\"8\">%zu dies</text>\n",
                -r, -r * 0.98 + 10, plan.die_count);
  svg += buf;
  svg += "</svg>\n";
  return svg;
}

}  // namespace qflow::wafer
