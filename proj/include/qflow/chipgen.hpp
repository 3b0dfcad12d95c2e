#pragma once

// Parameterized test-chip generator: Xmon qubits with Manhattan junctions,
// meandered readout resonators tapping a feedline per row, stitch bridges
// across the feedline channel, and a rectangle-tiled ground plane. Layouts
// are clean against the shipped qeda deck by construction and fully
// deterministic for a fixed ChipSpec.
//
// Geometry scheme (one row, bottom to top): ground band / feedline channel
// (54 um slot) / 48 um strip pierced by one 22 um corridor per qubit /
// qubit window. Ground-to-ground gaps are either bridged (channel), shorter
// than the continuity threshold (corridors), or wider than the slot search
// radius (windows).

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "qflow/core.hpp"
#include "qflow/gds.hpp"
#include "qflow/geometry.hpp"

namespace qflow::chipgen {

using geom::Coord;
using geom::Point;
using geom::Rect;

// GDS bindings used by the generator; these mirror the shipped decks.
namespace layers {
constexpr int kOutline = 0;
constexpr int kM1 = 1;  // datatype 0 ground, 1 cpw conductor
constexpr int kJj = 2;  // datatype 0 bottom electrode, 1 leads
constexpr int kJjTop = 4;
constexpr int kWiring = 5;
constexpr int kBridge = 6;  // datatype 0 pads, 1 spans
constexpr int kText = 10;
}  // namespace layers

struct XmonParams {
  double arm_length_um = 130.0;
  double arm_width_um = 8.0;
  double cpw_gap_um = 6.0;          // conductor-to-ground clearance target
  std::int64_t jj_overlap_nm = 200;  // electrode strip width
  std::int64_t jj_lead_width_nm = 500;
};

enum class Topology { Diamond, Grid };

struct ChipSpec {
  int qubit_count = 4;
  Topology topology = Topology::Diamond;
  double die_width_mm = 0;   // 0: sized from content
  double die_height_mm = 0;  // 0: sized from content
  std::uint64_t seed = 1;
  XmonParams xmon;
  int qubits_per_row = 8;
  int bridges_per_segment = 3;
  double substrate_permittivity = 10.0;
  double readout_base_ghz = 5.0;
  double readout_step_ghz = 0.35;
};

struct Census {
  std::map<std::string, int> components;

  int total() const {
    int n = 0;
    for (const auto& [k, v] : components) n += v;
    return n;
  }
};

struct GeneratedChip {
  gds::Layout layout;
  Census census;
};

namespace detail {

constexpr Coord um(double v) { return static_cast<Coord>(std::llround(v * 1000.0)); }

// fixed row metrics (nm)
constexpr Coord kQubitPitch = 700000;
constexpr Coord kMargin = 250000;       // outline to functional ground
constexpr Coord kWall = 200000;         // ground flanking the window row
constexpr Coord kChannelH = 54000;      // feedline slot height
constexpr Coord kStripH = 48000;        // ground strip above the channel
constexpr Coord kCorridorW = 22000;     // resonator exit slot width
constexpr Coord kCorridorOff = -280000; // corridor x relative to qubit center
constexpr Coord kWindowHalfW = 330000;  // per-qubit window half width
constexpr Coord kWindowBelow = 455000;  // window space below qubit center
constexpr Coord kWindowAbove = 193000;  // window space above qubit center
constexpr Coord kInterRow = 100000;     // ground between stacked rows
constexpr Coord kBottomBand = 60000;    // ground below the first channel
constexpr Coord kChannelInset = 150000; // channel end walls
constexpr Coord kCondW = 10000;         // CPW conductor width
constexpr Coord kResSpanHalf = 250000;  // meander leg half-span
constexpr Coord kMeanderPitch = 25000;
constexpr Coord kFeedlineMid = 27000;   // feedline center above channel bottom
constexpr Coord kArmAboveFeed = 15000;  // readout arm center above feedline
constexpr Coord kWindowH = kWindowBelow + kWindowAbove;
constexpr Coord kRowH = kChannelH + kStripH + kWindowH;

inline gds::Element boundary(int layer, int dt, std::vector<Point> pts) {
  gds::Element e;
  e.kind = gds::ElementKind::Boundary;
  e.layer = layer;
  e.datatype = dt;
  e.coords = std::move(pts);
  return e;
}

inline gds::Element rect_el(int layer, int dt, Coord x0, Coord y0, Coord x1,
                            Coord y1) {
  return boundary(layer, dt, {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
}

inline gds::Element path_el(int layer, int dt, std::vector<Point> pts, Coord w) {
  gds::Element e;
  e.kind = gds::ElementKind::Path;
  e.layer = layer;
  e.datatype = dt;
  e.coords = std::move(pts);
  e.width = w;
  return e;
}

// Ground tiling: horizontal bands of the functional rect minus hole rects.
// Holes may touch or overlap; bands are cut at every hole edge so each hole
// spans full bands.
inline std::vector<Rect> tile_ground(const Rect& frame,
                                     const std::vector<Rect>& holes) {
  std::vector<Coord> ys = {frame.lo.y, frame.hi.y};
  for (const Rect& h : holes) {
    if (h.lo.y > frame.lo.y && h.lo.y < frame.hi.y) ys.push_back(h.lo.y);
    if (h.hi.y > frame.lo.y && h.hi.y < frame.hi.y) ys.push_back(h.hi.y);
  }
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  std::vector<Rect> tiles;
  for (std::size_t b = 0; b + 1 < ys.size(); ++b) {
    Coord y0 = ys[b], y1 = ys[b + 1];
    std::vector<std::pair<Coord, Coord>> cut;
    for (const Rect& h : holes)
      if (h.lo.y <= y0 && h.hi.y >= y1)
        cut.push_back({std::max(h.lo.x, frame.lo.x), std::min(h.hi.x, frame.hi.x)});
    std::sort(cut.begin(), cut.end());
    Coord x = frame.lo.x;
    for (const auto& [cx0, cx1] : cut) {
      if (cx0 > x) tiles.push_back({{x, y0}, {cx0, y1}});
      x = std::max(x, cx1);
    }
    if (x < frame.hi.x) tiles.push_back({{x, y0}, {frame.hi.x, y1}});
  }
  return tiles;
}

struct RowPlan {
  int qubits = 0;
  Coord base = 0;  // channel bottom y
  Coord channel_bot() const { return base; }
  Coord channel_top() const { return base + kChannelH; }
  Coord window_bot() const { return base + kChannelH + kStripH; }
  Coord window_top() const { return window_bot() + kWindowH; }
  Coord qubit_cy() const { return window_bot() + kWindowBelow; }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

class Generator {
public:
  explicit Generator(const ChipSpec& spec) : spec_(spec) {}

  GeneratedChip build() {
    using namespace detail;
    if (spec_.qubit_count < 1) throw Error("qubit_count must be >= 1");
    if (spec_.qubits_per_row < 1) throw Error("qubits_per_row must be >= 1");

    plan_rows();
    compute_frame();

    layout_ = gds::Layout{};
    layout_.library_name = "QCHIP";
    layout_.user_unit = 1e-6;
    layout_.db_unit_nm = 1;
    layout_.top_cell = "CHIP";
    gds::Cell& top = layout_.cell("CHIP");

    build_component_cells();

    std::vector<Rect> holes;
    int coupler_count = 0;

    for (std::size_t r = 0; r < rows_.size(); ++r) {
      const RowPlan& row = rows_[r];
      // holes: channel, one window per qubit (ground columns between them
      // keep the strip tiles connected), one corridor per qubit
      holes.push_back({{ch_x0_, row.channel_bot()}, {ch_x1_, row.channel_top()}});
      std::vector<Coord> corridor_x;
      for (int q = 0; q < row.qubits; ++q) {
        Coord cx = qubit_cx(q);
        holes.push_back({{cx - kWindowHalfW, row.window_bot()},
                         {cx + kWindowHalfW, row.window_top()}});
        Coord cc = cx + kCorridorOff;
        corridor_x.push_back(cc);
        holes.push_back({{cc - kCorridorW / 2, row.channel_top()},
                         {cc + kCorridorW / 2, row.window_bot()}});
      }

      // feedline
      Coord fl_y = row.channel_bot() + kFeedlineMid;
      top.elements.push_back(path_el(layers::kM1, 1,
                                     {{ch_x0_ + 30000, fl_y}, {ch_x1_ - 30000, fl_y}},
                                     kCondW));
      census_.components["feedline"] += 1;

      // qubits and resonators
      for (int q = 0; q < row.qubits; ++q) {
        Coord cx = qubit_cx(q);
        int qi = qubit_index(r, q);
        top.refs.push_back({"XMON", {cx, row.qubit_cy()}, 0, false, 1.0, {}});
        census_.components["xmon"] += 1;
        top.refs.push_back({resonator_cell(qi), {cx, row.qubit_cy()}, 0, false,
                            1.0, {}});
        census_.components["readout_resonator"] += 1;
      }

      // in-row couplers
      for (int q = 0; q + 1 < row.qubits; ++q) {
        Coord cx = qubit_cx(q);
        top.refs.push_back(
            {"CPL_H", {cx + 135000, row.qubit_cy()}, 0, false, 1.0, {}});
        ++coupler_count;
      }
      if (spec_.topology == Topology::Diamond && row.qubits == spec_.qubit_count &&
          row.qubits >= 3) {
        // closing coupler of the ring: a wiring-layer crossover above the
        // qubits (it passes over the ground columns between windows)
        Coord x0 = qubit_cx(0) - 50000;
        Coord x1 = qubit_cx(row.qubits - 1) + 50000;
        top.elements.push_back(rect_el(layers::kWiring, 0, x0,
                                       row.qubit_cy() + 155000, x1,
                                       row.qubit_cy() + 163000));
        ++coupler_count;
      }
      // inter-row couplers on the wiring layer (crossovers)
      if (r + 1 < rows_.size()) {
        int shared = std::min(row.qubits, rows_[r + 1].qubits);
        for (int q = 0; q < shared; ++q) {
          Coord cx = qubit_cx(q);
          top.refs.push_back(
              {"CPL_V", {cx, row.window_top() - 20000}, 0, false, 1.0, {}});
          ++coupler_count;
        }
      }

      // bridges: one AREF of 3 per ground strip segment along the channel
      std::vector<std::pair<Coord, Coord>> segments;
      Coord x = fx0_;
      for (Coord cc : corridor_x) {
        segments.push_back({x, cc - kCorridorW / 2});
        x = cc + kCorridorW / 2;
      }
      segments.push_back({x, fx1_});
      Coord ch_mid = row.channel_bot() + kChannelH / 2;
      for (auto [sx0, sx1] : segments) {
        Coord lo = std::max(sx0, ch_x0_) + 20000;
        Coord hi = std::min(sx1, ch_x1_) - 20000;
        if (hi - lo < 42000)
          throw Error("die too small: bridge segment narrower than 42 um");
        int n = spec_.bridges_per_segment;
        Coord step = (hi - lo) / n;
        gds::CellRef ref;
        ref.target = "BRIDGE";
        ref.translation = {lo + step / 2, ch_mid};
        ref.array = gds::ArraySpec{n, 1, {step, 0}, {0, 1}};
        top.refs.push_back(ref);
        census_.components["airbridge"] += n;
      }
    }
    census_.components["coupler"] = coupler_count;
    if (coupler_count == 0) census_.components.erase("coupler");

    // ground tiling and outline
    for (const Rect& t :
         detail::tile_ground({{fx0_, fy0_}, {fx1_, fy1_}}, holes))
      top.elements.push_back(
          rect_el(layers::kM1, 0, t.lo.x, t.lo.y, t.hi.x, t.hi.y));
    top.elements.push_back(
        rect_el(layers::kOutline, 0, 0, 0, die_w_, die_h_));

    gds::Element label;
    label.kind = gds::ElementKind::Text;
    label.layer = layers::kText;
    label.datatype = 0;
    label.coords = {{die_w_ / 2, 100000}};
    label.text = "QFLOW " + std::to_string(spec_.qubit_count) + "Q " +
                 (spec_.topology == Topology::Diamond ? "DIAMOND" : "GRID");
    top.elements.push_back(label);

    layout_.validate();
    return {std::move(layout_), std::move(census_)};
  }

private:
  ChipSpec spec_;
  gds::Layout layout_;
  Census census_;
  std::vector<detail::RowPlan> rows_;
  Coord die_w_ = 0, die_h_ = 0;
  Coord fx0_ = 0, fx1_ = 0, fy0_ = 0, fy1_ = 0;  // functional ground frame
  Coord win_x0_ = 0, ch_x0_ = 0, ch_x1_ = 0;
  std::map<int, std::string> res_cells_;  // variant -> cell name

  Coord qubit_cx(int q) const {
    return win_x0_ + 350000 + static_cast<Coord>(q) * detail::kQubitPitch;
  }
  int qubit_index(std::size_t row, int q) const {
    int n = 0;
    for (std::size_t r = 0; r < row; ++r) n += rows_[r].qubits;
    return n + q;
  }

  void plan_rows() {
    using namespace detail;
    rows_.clear();
    int per_row = spec_.topology == Topology::Diamond
                      ? spec_.qubit_count
                      : spec_.qubits_per_row;
    int remaining = spec_.qubit_count;
    while (remaining > 0) {
      RowPlan row;
      row.qubits = std::min(per_row, remaining);
      remaining -= row.qubits;
      rows_.push_back(row);
    }
  }

  void compute_frame() {
    using namespace detail;
    int max_row = 0;
    for (const RowPlan& r : rows_) max_row = std::max(max_row, r.qubits);
    Coord content_w = 2 * kWall + static_cast<Coord>(max_row) * kQubitPitch;
    Coord content_h = kBottomBand +
                      static_cast<Coord>(rows_.size()) * kRowH +
                      static_cast<Coord>(rows_.size() - 1) * kInterRow +
                      kBottomBand;
    Coord need_w = content_w + 2 * kMargin;
    Coord need_h = content_h + 2 * kMargin;
    auto round_up = [](Coord v) { return (v + 99999) / 100000 * 100000; };
    die_w_ = spec_.die_width_mm > 0 ? um(spec_.die_width_mm * 1000.0)
                                    : round_up(need_w);
    die_h_ = spec_.die_height_mm > 0 ? um(spec_.die_height_mm * 1000.0)
                                     : round_up(need_h);
    if (die_w_ < need_w || die_h_ < need_h)
      throw Error("die too small for " + std::to_string(spec_.qubit_count) +
                  " qubits: needs " + std::to_string(need_w) + " x " +
                  std::to_string(need_h) + " nm");
    fx0_ = kMargin;
    fx1_ = fx0_ + content_w + (die_w_ - need_w);  // slack goes to side ground
    fy0_ = kMargin;
    fy1_ = fy0_ + content_h + (die_h_ - need_h);
    win_x0_ = fx0_ + kWall;
    ch_x0_ = fx0_ + kChannelInset;
    ch_x1_ = fx1_ - kChannelInset;
    Coord base = fy0_ + kBottomBand;
    for (RowPlan& r : rows_) {
      r.base = base;
      base += kRowH + kInterRow;
    }
  }

  void build_component_cells() {
    using namespace detail;
    const Coord hw = um(spec_.xmon.arm_width_um) / 2;
    const Coord arm = um(spec_.xmon.arm_length_um);

    // junction: Manhattan cross of the two electrode strips plus two leads
    gds::Cell& jj = layout_.cell("JJ");
    const Coord ew = spec_.xmon.jj_overlap_nm;       // strip width
    const Coord lw = spec_.xmon.jj_lead_width_nm;
    jj.elements.push_back(rect_el(layers::kJj, 0, -700, -ew / 2, 700, ew / 2));
    jj.elements.push_back(
        rect_el(layers::kJjTop, 0, -ew / 2, -700, ew / 2, 700));
    jj.elements.push_back(
        rect_el(layers::kJj, 1, -lw / 2, -8000, lw / 2, -ew / 2));
    jj.elements.push_back(rect_el(layers::kJj, 1, -lw / 2, ew / 2, lw / 2, 4000));

    // xmon: cross, grounding tab, junction above the top arm
    gds::Cell& xmon = layout_.cell("XMON");
    std::vector<Point> cross = {
        {-arm, -hw}, {-hw, -hw}, {-hw, -arm}, {hw, -arm}, {hw, -hw}, {arm, -hw},
        {arm, hw},   {hw, hw},   {hw, arm},   {-hw, arm}, {-hw, hw}, {-arm, hw}};
    xmon.elements.push_back(boundary(layers::kM1, 1, std::move(cross)));
    xmon.elements.push_back(
        rect_el(layers::kM1, 1, -3000, arm + 8900, 3000, arm + 14900));
    xmon.refs.push_back({"JJ", {0, arm + 6000}, 0, false, 1.0, {}});

    // airbridge centered on the feedline channel
    gds::Cell& bridge = layout_.cell("BRIDGE");
    bridge.elements.push_back(rect_el(layers::kBridge, 0, -6000, 30000, 6000, 42000));
    bridge.elements.push_back(
        rect_el(layers::kBridge, 0, -6000, -42000, 6000, -30000));
    bridge.elements.push_back(
        rect_el(layers::kBridge, 1, -4000, -32000, 4000, 32000));

    // in-row coupler bar: wiring-layer crossover between neighbouring qubits
    // (it passes over the ground column separating their windows)
    gds::Cell& cpl = layout_.cell("CPL_H");
    cpl.elements.push_back(
        rect_el(layers::kWiring, 0, 0, -4000, kQubitPitch - 270000, 4000));

    // inter-row crossover on the wiring layer, overhanging 20 um into each
    // window
    if (rows_.size() > 1) {
      gds::Cell& cplv = layout_.cell("CPL_V");
      Coord len = 20000 + kInterRow + kChannelH + kStripH + 20000;
      cplv.elements.push_back(rect_el(layers::kWiring, 0, -3000, 0, 3000, len));
    }
  }

  // Readout resonator: quarter-wave-style meander sized from the target
  // frequency, dropping through the corridor into the feedline channel.
  const std::string& resonator_cell(int qubit_index) {
    using namespace detail;
    std::uint64_t state = spec_.seed * 0x9e3779b97f4a7c15ull +
                          static_cast<std::uint64_t>(qubit_index);
    int slot = static_cast<int>(qflow::detail::splitmix64(state) % 8);
    double f_ghz = spec_.readout_base_ghz + spec_.readout_step_ghz * slot;
    // quarter-wave length with eps_eff = (eps_r + 1) / 2
    double eps_eff = (spec_.substrate_permittivity + 1.0) / 2.0;
    double len_um = 2.99792458e14 / (4.0 * f_ghz * 1e9 * std::sqrt(eps_eff));
    double fixed_um = 20.0 + 250.0 + 355.0 + 200.0;  // tip, drops, channel run
    int legs = static_cast<int>(std::llround((len_um - fixed_um) / 525.0));
    if (legs % 2 == 0) ++legs;  // odd leg count so the exit jog stays clear
    if (legs < 5) legs = 5;
    if (legs > 11) legs = 11;

    auto [it, inserted] = res_cells_.try_emplace(legs, "RES_L" + std::to_string(legs));
    if (inserted) {
      gds::Cell& cell = layout_.cell(it->second);
      std::vector<Point> pts;
      pts.push_back({0, -140000});
      Coord y = -160000;
      pts.push_back({0, y});
      for (int j = 0; j < legs; ++j) {
        Coord xe = (j % 2 == 0) ? -kResSpanHalf : kResSpanHalf;
        pts.push_back({xe, y});
        if (j + 1 < legs) {
          y -= kMeanderPitch;
          pts.push_back({xe, y});
        }
      }
      // jog to the corridor and drop into the channel
      Coord arm_y = -(kWindowBelow + kStripH + kChannelH - kFeedlineMid -
                      kArmAboveFeed);
      pts.push_back({kCorridorOff, y});
      pts.push_back({kCorridorOff, arm_y});
      pts.push_back({kCorridorOff + 200000, arm_y});
      cell.elements.push_back(path_el(layers::kM1, 1, std::move(pts), kCondW));
    }
    return it->second;
  }
};

inline GeneratedChip generate_chip(const ChipSpec& spec) {
  return Generator(spec).build();
}

// ---------------------------------------------------------------------------
// Defect injection (one minimal, localized violation per rule)
// ---------------------------------------------------------------------------

// Adds one deliberate defect to a generated chip; placements sit in the
// otherwise empty margin strip so exactly one check fires.
inline gds::Layout inject_defect(const gds::Layout& chip,
                                 const std::string& rule_id) {
  using namespace detail;
  gds::Layout out = chip;
  gds::Cell& top = out.cell(out.top_cell);
  Rect outline = Rect::empty();
  for (const gds::Element& e : top.elements)
    if (e.layer == layers::kOutline && e.kind == gds::ElementKind::Boundary)
      for (const Point& p : e.coords) outline.include(p);
  const Coord cx = (outline.lo.x + outline.hi.x) / 2;
  const Coord f_bot = outline.lo.y + kMargin;  // functional ground starts here

  if (rule_id == "R1") {
    // ground finger reaching to 2 um from a planted conductor square
    top.elements.push_back(
        rect_el(layers::kM1, 0, cx, f_bot - 23000, cx + 10000, f_bot + 1000));
    top.elements.push_back(
        rect_el(layers::kM1, 1, cx, f_bot - 45000, cx + 20000, f_bot - 25000));
  } else if (rule_id == "R2") {
    top.elements.push_back(
        rect_el(layers::kM1, 1, cx, f_bot - 45000, cx + 30000, f_bot - 40100));
  } else if (rule_id == "R3") {
    // electrode flush with the crossing: overlap shrinks under -y shift
    Coord jy = f_bot - 40000;
    top.elements.push_back(rect_el(layers::kJj, 0, cx - 700, jy - 100, cx + 700, jy + 100));
    top.elements.push_back(rect_el(layers::kJjTop, 0, cx - 100, jy - 100, cx + 100, jy + 700));
  } else if (rule_id == "R4") {
    top.elements.push_back(
        rect_el(layers::kJj, 1, cx, f_bot - 45000, cx + 90, f_bot - 40000));
  } else if (rule_id == "R5") {
    top.elements.push_back(
        rect_el(layers::kBridge, 0, cx, f_bot - 40000, cx + 12000, f_bot - 28000));
    top.elements.push_back(rect_el(layers::kBridge, 0, cx + 132000, f_bot - 40000,
                                   cx + 144000, f_bot - 28000));
    top.elements.push_back(rect_el(layers::kBridge, 1, cx + 10000, f_bot - 36000,
                                   cx + 134000, f_bot - 32000));
  } else if (rule_id == "R6") {
    top.elements.push_back(
        rect_el(layers::kBridge, 0, cx, f_bot - 40000, cx + 12000, f_bot - 32000));
  } else if (rule_id == "R7") {
    top.elements.push_back(rect_el(layers::kM1, 1, cx, outline.lo.y + 150000,
                                   cx + 20000, outline.lo.y + 170000));
  } else if (rule_id == "R8") {
    top.elements.push_back(
        rect_el(layers::kWiring, 0, cx, f_bot - 45000, cx + 10000, f_bot - 35000));
    top.elements.push_back(rect_el(layers::kWiring, 0, cx + 11500, f_bot - 45000,
                                   cx + 21500, f_bot - 35000));
  } else if (rule_id == "R9") {
    // isolated ground island; narrow enough to stay below the slot length
    top.elements.push_back(
        rect_el(layers::kM1, 0, cx, f_bot - 45000, cx + 20000, f_bot - 25000));
  } else {
    throw Error("unknown rule id '" + rule_id + "'");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Recipe (de)serialization
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json recipe_json(const ChipSpec& spec) {
  nlohmann::ordered_json j;
  j["qubit_count"] = spec.qubit_count;
  j["topology"] = spec.topology == Topology::Diamond ? "diamond" : "grid";
  j["die_width_mm"] = spec.die_width_mm;
  j["die_height_mm"] = spec.die_height_mm;
  j["seed"] = spec.seed;
  j["qubits_per_row"] = spec.qubits_per_row;
  j["bridges_per_segment"] = spec.bridges_per_segment;
  j["substrate_permittivity"] = spec.substrate_permittivity;
  j["readout_base_ghz"] = spec.readout_base_ghz;
  j["readout_step_ghz"] = spec.readout_step_ghz;
  j["xmon"] = {{"arm_length_um", spec.xmon.arm_length_um},
               {"arm_width_um", spec.xmon.arm_width_um},
               {"cpw_gap_um", spec.xmon.cpw_gap_um},
               {"jj_overlap_nm", spec.xmon.jj_overlap_nm},
               {"jj_lead_width_nm", spec.xmon.jj_lead_width_nm}};
  return j;
}

inline ChipSpec chip_spec_from_json(const nlohmann::json& j) {
  ChipSpec s;
  s.qubit_count = j.value("qubit_count", 4);
  s.topology = j.value("topology", "diamond") == std::string("grid")
                   ? Topology::Grid
                   : Topology::Diamond;
  s.die_width_mm = j.value("die_width_mm", 0.0);
  s.die_height_mm = j.value("die_height_mm", 0.0);
  s.seed = j.value("seed", 1);
  s.qubits_per_row = j.value("qubits_per_row", 8);
  s.bridges_per_segment = j.value("bridges_per_segment", 3);
  s.substrate_permittivity = j.value("substrate_permittivity", 10.0);
  s.readout_base_ghz = j.value("readout_base_ghz", 5.0);
  s.readout_step_ghz = j.value("readout_step_ghz", 0.35);
  if (j.contains("xmon")) {
    const auto& x = j["xmon"];
    s.xmon.arm_length_um = x.value("arm_length_um", 130.0);
    s.xmon.arm_width_um = x.value("arm_width_um", 8.0);
    s.xmon.cpw_gap_um = x.value("cpw_gap_um", 6.0);
    s.xmon.jj_overlap_nm = x.value("jj_overlap_nm", 200);
    s.xmon.jj_lead_width_nm = x.value("jj_lead_width_nm", 500);
  }
  return s;
}

}  // namespace qflow::chipgen
