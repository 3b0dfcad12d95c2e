#pragma once

// Process-side computations: logical-layer-to-step mapping, interlayer
// registration budgets and the Josephson-junction estimate chain
// (area -> I_c -> E_J -> transmon f01).

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "qflow/core.hpp"
#include "qflow/gds.hpp"
#include "qflow/geometry.hpp"
#include "qflow/pdk.hpp"

namespace qflow::process {

constexpr double kFluxQuantumWb = 2.067833848e-15;
constexpr double kPlanckJs = 6.62607015e-34;

// ---------------------------------------------------------------------------
// Josephson junction chain
// ---------------------------------------------------------------------------

struct JJParams {
  double critical_current_density = 0.5;  // uA / um^2
  double charging_energy_over_h_mhz = 250.0;
  double flux_quantum_wb = kFluxQuantumWb;
  double planck_js = kPlanckJs;
};

struct JJChain {
  double ic_ua = 0;         // critical current, uA
  double ej_over_h_ghz = 0; // Josephson energy over h, GHz
  double f01_ghz = 0;       // transmon frequency, GHz
};

// I_c = J_c * A;  E_J = I_c * Phi0 / (2*pi);  f01 = sqrt(8 * E_J/h * E_C/h)
inline JJChain jj_chain(double area_um2, const JJParams& p = {}) {
  if (area_um2 < 0) throw Error("junction area must be non-negative");
  JJChain r;
  r.ic_ua = p.critical_current_density * area_um2;
  double ej_joule = r.ic_ua * 1e-6 * p.flux_quantum_wb / (2.0 * M_PI);
  double ej_hz = ej_joule / p.planck_js;
  r.ej_over_h_ghz = ej_hz * 1e-9;
  double ec_hz = p.charging_energy_over_h_mhz * 1e6;
  r.f01_ghz = std::sqrt(8.0 * ej_hz * ec_hz) * 1e-9;
  return r;
}

// ---------------------------------------------------------------------------
// Misalignment sensitivity (shared shift grid with DRC rule R3)
// ---------------------------------------------------------------------------

inline std::array<geom::Point, 9> shift_grid(std::int64_t tol_nm) {
  std::array<geom::Point, 9> g{};
  std::size_t i = 0;
  for (std::int64_t dy : {-tol_nm, std::int64_t{0}, tol_nm})
    for (std::int64_t dx : {-tol_nm, std::int64_t{0}, tol_nm}) g[i++] = {dx, dy};
  return g;
}

struct OverlapScan {
  std::int64_t nominal_nm2 = 0;  // area at zero shift
  std::int64_t min_nm2 = 0;
  std::int64_t max_nm2 = 0;
};

inline OverlapScan scan_overlap(const geom::Polygon& bottom,
                                const geom::Polygon& top, std::int64_t tol_nm) {
  OverlapScan s;
  s.nominal_nm2 = geom::intersection_area(bottom, top);
  s.min_nm2 = s.max_nm2 = s.nominal_nm2;
  if (tol_nm == 0) return s;
  for (const geom::Point& d : shift_grid(tol_nm)) {
    std::int64_t a = geom::intersection_area(bottom, top, d);
    s.min_nm2 = std::min(s.min_nm2, a);
    s.max_nm2 = std::max(s.max_nm2, a);
  }
  return s;
}

// max |dA/A| over the 3x3 shift grid; since I_c is proportional to area this
// is also the worst-case dI_c/I_c. ok when <= 0.05.
inline double jj_misalignment_sensitivity(const geom::Polygon& bottom,
                                          const geom::Polygon& top,
                                          std::int64_t tol_nm) {
  OverlapScan s = scan_overlap(bottom, top, tol_nm);
  if (s.nominal_nm2 <= 0)
    throw Error("electrodes do not intersect at zero shift");
  double a0 = static_cast<double>(s.nominal_nm2);
  double dev = std::max(static_cast<double>(s.max_nm2) - a0,
                        a0 - static_cast<double>(s.min_nm2));
  return dev / a0;
}

// ---------------------------------------------------------------------------
// Registration budget
// ---------------------------------------------------------------------------

struct RegistrationBudget {
  pdk::Purpose first = pdk::Purpose::Ground;
  pdk::Purpose second = pdk::Purpose::Ground;
  std::int64_t o_design_nm = 0;
  std::int64_t sigma_align_nm = 0;
  std::int64_t o_min_nm = 0;
  bool infeasible = false;  // o_min <= 0
};

inline RegistrationBudget registration_budget(std::int64_t o_design_nm,
                                              const pdk::AlignmentSpec& align) {
  if (o_design_nm <= 0) throw Error("designed overlap must be positive");
  RegistrationBudget b;
  b.first = align.first;
  b.second = align.second;
  b.o_design_nm = o_design_nm;
  b.sigma_align_nm = align.sigma_align_nm;
  b.o_min_nm = o_design_nm - align.sigma_align_nm;
  b.infeasible = b.o_min_nm <= 0;
  return b;
}

// ---------------------------------------------------------------------------
// Step plan
// ---------------------------------------------------------------------------

struct StepPlanEntry {
  int step_order = 0;
  std::string name;
  std::string material;
  std::int64_t thickness_min_nm = 0;
  std::int64_t thickness_max_nm = 0;
  pdk::Litho lithography = pdk::Litho::None;
  int gds_layer = -1;  // -1: unbound (substrate/oxidation steps)
  std::size_t polygon_count = 0;
  double total_area_um2 = 0;
};

struct StepPlan {
  std::vector<StepPlanEntry> entries;  // one per process layer, step order
};

// One entry per process layer; unpopulated layers appear with count 0.
// Throws when a populated (layer, datatype) has no bound process step.
inline StepPlan map_layers(const gds::FlatLayout& flat,
                           const pdk::ProcessStack& stack) {
  StepPlan plan;
  std::map<int, StepPlanEntry*> by_layer;
  for (const pdk::ProcessLayer& l : stack.layers) {
    StepPlanEntry e;
    e.step_order = l.step_order;
    e.name = l.name;
    e.material = l.material;
    e.thickness_min_nm = l.thickness_min_nm;
    e.thickness_max_nm = l.thickness_max_nm;
    e.lithography = l.lithography;
    e.gds_layer = l.gds_layer ? *l.gds_layer : -1;
    plan.entries.push_back(e);
  }
  for (StepPlanEntry& e : plan.entries)
    if (e.gds_layer >= 0) by_layer[e.gds_layer] = &e;

  std::vector<std::string> orphans;
  std::map<std::pair<int, int>, bool> reported;
  for (const gds::FlatPolygon& p : flat.polygons) {
    auto it = by_layer.find(p.layer);
    if (it == by_layer.end()) {
      auto key = std::make_pair(p.layer, p.datatype);
      if (!reported[key]) {
        reported[key] = true;
        orphans.push_back("(" + std::to_string(p.layer) + ", " +
                          std::to_string(p.datatype) + ")");
      }
      continue;
    }
    it->second->polygon_count++;
    it->second->total_area_um2 +=
        static_cast<double>(p.poly.area2()) * 0.5 * 1e-6;
  }
  if (!orphans.empty()) {
    std::string msg = "unbound (layer, datatype) pairs:";
    for (const std::string& o : orphans) msg += " " + o;
    throw Error(msg);
  }
  return plan;
}

inline std::string step_plan_csv(const StepPlan& plan) {
  std::string out =
      "step_order,name,material,thickness_nm,lithography,gds_layer,"
      "gds_datatype,polygon_count,total_area_um2\n";
  char buf[64];
  for (const StepPlanEntry& e : plan.entries) {
    out += std::to_string(e.step_order) + "," + e.name + "," + e.material + ",";
    out += std::to_string(e.thickness_min_nm) + "-" +
           std::to_string(e.thickness_max_nm) + ",";
    out += pdk::to_string(e.lithography) + ",";
    out += e.gds_layer >= 0 ? std::to_string(e.gds_layer) : "-";
    out += ",*,";  // process steps bind a layer; datatypes select purposes
    out += std::to_string(e.polygon_count) + ",";
    std::snprintf(buf, sizeof buf, "%.6f", e.total_area_um2);
    out += buf;
    out += "\n";
  }
  return out;
}

}  // namespace qflow::process
