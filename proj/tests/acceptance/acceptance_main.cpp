// Acceptance suite: one line per criterion, PASS/FAIL, exit 0 only when all
// criteria hold. Criterion 1 drives the CLI binary passed as argv[1]; the
// rest exercise the library directly against independent oracles.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qflow/chipgen.hpp"
#include "qflow/drc.hpp"
#include "qflow/gds.hpp"
#include "qflow/mdp.hpp"
#include "qflow/pdk.hpp"
#include "qflow/process.hpp"
#include "qflow/waferplan.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace qflow;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int id, bool pass, const std::string& what,
            const std::string& detail) {
  std::printf("%s  criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", id,
              what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) return {};
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// ---- criterion 1: end-to-end pipeline on the default chip ------------------

void criterion_1(const std::string& cli_path) {
  auto t0 = Clock::now();
  fs::path out = fs::temp_directory_path() / "qflow_acceptance_c1";
  fs::remove_all(out);
  std::string cmd = cli_path +
                    " pipeline --pdk pdks/qeda.json --recipe "
                    "recipes/default_chip.json --gen qubits=4 "
                    "--gen topology=diamond --out " +
                    out.string() + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  int code = WEXITSTATUS(status);
  double elapsed = seconds_since(t0);

  bool zero_violations = false, tapeout_pass = false;
  std::string drc_json = slurp(out / "drc_report.json");
  zero_violations = drc_json.find("\"total_violations\": 0") != std::string::npos;
  std::string tape_json = slurp(out / "tapeout_report.json");
  tapeout_pass = tape_json.find("\"overall\": \"pass\"") != std::string::npos;
  bool package = fs::exists(out / "package" / "manifest.json");

  std::ostringstream d;
  d << "exit " << code << ", violations==0: " << zero_violations
    << ", tapeout pass: " << tapeout_pass << ", package: " << package << ", "
    << std::fixed << elapsed << " s";
  report(1, code == 0 && zero_violations && tapeout_pass && package &&
                elapsed < 10.0,
         "pipeline on the default 4-qubit diamond chip is clean", d.str());
  fs::remove_all(out);
}

// ---- criterion 2: rule deck fidelity ---------------------------------------

void criterion_2() {
  auto qeda = pdk::load_pdk_file("pdks/qeda.json");
  auto cmc = pdk::load_pdk_file("pdks/cmc.json");
  auto thr = [](const pdk::Pdk& p, const char* id) -> std::int64_t {
    const pdk::RuleSpec* r = p.rules.rule(id);
    return r ? r->threshold_nm : -1;
  };
  bool qeda_ok = thr(qeda, "R1") == 3000 && thr(qeda, "R2") == 5000 &&
                 thr(qeda, "R3") == 50 && thr(qeda, "R4") == 100 &&
                 thr(qeda, "R5") == 50000 &&
                 qeda.rules.rule("R5")->max_nm == 100000 &&
                 thr(qeda, "R6") == 10000 && thr(qeda, "R7") == 200000 &&
                 thr(qeda, "R8") == 2000 && thr(qeda, "R9") == 50000;
  bool cmc_ok = thr(cmc, "R1") == 2000 && thr(cmc, "R2") == 4000 &&
                thr(cmc, "R3") == 100 && thr(cmc, "R7") == 100000 &&
                thr(cmc, "R8") == 2000 && cmc.rules.rule("R4") == nullptr &&
                cmc.rules.rule("R5") == nullptr &&
                cmc.rules.rule("R6") == nullptr &&
                cmc.rules.rule("R9") != nullptr &&
                !cmc.rules.rule("R9")->enabled;
  bool strict = thr(qeda, "R1") >= thr(cmc, "R1") &&
                thr(qeda, "R2") >= thr(cmc, "R2") &&
                thr(qeda, "R7") >= thr(cmc, "R7") &&
                thr(qeda, "R3") < thr(cmc, "R3");
  std::ostringstream d;
  d << "qeda:" << qeda_ok << " cmc:" << cmc_ok << " strictness:" << strict;
  report(2, qeda_ok && cmc_ok && strict,
         "shipped decks reproduce both benchmark threshold columns", d.str());
}

// ---- criterion 3: injection completeness -----------------------------------

void criterion_3() {
  auto deck = pdk::load_pdk_file("pdks/qeda.json");
  auto chip = chipgen::generate_chip(chipgen::ChipSpec{});
  int ok = 0;
  std::string bad;
  for (int k = 1; k <= 9; ++k) {
    std::string id = "R" + std::to_string(k);
    auto defect = chipgen::inject_defect(chip.layout, id);
    auto rep = drc::run_drc(gds::flatten(defect), deck);
    if (rep.violations.size() == 1 && rep.violations[0].rule_id == id)
      ++ok;
    else
      bad += " " + id + "(" + std::to_string(rep.violations.size()) + ")";
  }
  report(3, ok == 9, "each injected defect trips exactly its own rule",
         ok == 9 ? "9/9 rules" : std::to_string(ok) + "/9, failing:" + bad);
}

// ---- criterion 4: linear scaling -------------------------------------------

void criterion_4() {
  auto t0 = Clock::now();
  setenv("QFLOW_THREADS", "1", 1);
  auto deck = pdk::load_pdk_file("pdks/qeda.json");
  std::vector<double> prim, pairs_per_prim, times_ms;
  bool warm = false;
  for (int n : {4, 8, 16, 32, 50}) {
    chipgen::ChipSpec spec;
    spec.qubit_count = n;
    spec.topology = chipgen::Topology::Grid;
    auto flat = gds::flatten(chipgen::generate_chip(spec).layout);
    if (!warm) {  // page everything in before the first timed run
      drc::run_drc(flat, deck);
      warm = true;
    }
    double best = 1e30;
    drc::ViolationReport rep;
    for (int run = 0; run < 9; ++run) {
      rep = drc::run_drc(flat, deck);
      best = std::min(best, rep.elapsed_ms);
    }
    prim.push_back(static_cast<double>(flat.polygons.size()));
    pairs_per_prim.push_back(static_cast<double>(rep.candidate_pairs_examined) /
                             static_cast<double>(flat.polygons.size()));
    times_ms.push_back(best);
  }
  unsetenv("QFLOW_THREADS");

  double mean = 0;
  for (double r : pairs_per_prim) mean += r;
  mean /= pairs_per_prim.size();
  bool bounded = true;
  for (double r : pairs_per_prim)
    if (std::abs(r - mean) > 0.25 * mean) bounded = false;

  // log-log least squares: time vs primitive count
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  const double m = static_cast<double>(prim.size());
  for (std::size_t i = 0; i < prim.size(); ++i) {
    double x = std::log(prim[i]), y = std::log(times_ms[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  double r_num = m * sxy - sx * sy;
  double r2 = (r_num * r_num) / ((m * sxx - sx * sx) * (m * syy - sy * sy));
  double elapsed = seconds_since(t0);

  std::ostringstream d;
  d << "pairs/primitive " << std::fixed << pairs_per_prim.front() << ".."
    << pairs_per_prim.back() << " (mean " << mean << ", within 25%: " << bounded
    << "), exponent " << slope << ", R2 " << r2 << ", sweep " << elapsed << " s";
  report(4, bounded && r2 > 0.95 && slope <= 1.2 && elapsed < 60.0,
         "DRC cost scales linearly over the 4..50 qubit series", d.str());
}

// ---- criterion 5: wafer planning -------------------------------------------

void criterion_5() {
  auto t0 = Clock::now();
  wafer::DieSpec die{24.0, 28.0, "CHIP"};
  wafer::ScribeSpec scribe{0.2, {}};
  auto centered =
      wafer::plan_wafer({300.0, 5.0}, die, scribe, {false, 500});
  std::size_t row_oracle = oracles::centered_die_count(300, 5, 24, 28, 0.2);
  auto optimized = wafer::plan_wafer({300.0, 5.0}, die, scribe);
  std::size_t scan_oracle = oracles::best_offset_die_count(300, 5, 24, 28, 0.2);

  // feasible band over exclusion in [3, 5] mm, centered and optimized grids
  std::size_t lo = SIZE_MAX, hi = 0;
  for (double excl : {3.0, 3.5, 4.0, 4.5, 5.0}) {
    auto c = wafer::plan_wafer({300.0, excl}, die, scribe, {false, 500});
    auto o = wafer::plan_wafer({300.0, excl}, die, scribe);
    lo = std::min({lo, c.die_count, o.die_count});
    hi = std::max({hi, c.die_count, o.die_count});
  }
  double elapsed = seconds_since(t0);
  bool centered_ok = centered.die_count == 72 && centered.die_count == row_oracle;
  bool optimized_ok = optimized.die_count >= 72 && optimized.die_count <= 80 &&
                      optimized.die_count == scan_oracle;
  bool band_ok = lo <= 75 && 75 <= hi;
  std::ostringstream d;
  d << "centered " << centered.die_count << " (oracle " << row_oracle
    << "), optimized " << optimized.die_count << " (oracle " << scan_oracle
    << "), band [" << lo << ", " << hi << "], " << std::fixed << elapsed << " s";
  report(5, centered_ok && optimized_ok && band_ok && elapsed < 5.0,
         "wafer planning matches the enumeration oracles", d.str());
}

// ---- criterion 6: fracturing conservation ----------------------------------

// exact strict-interior test for a point against a trapezoid
bool strictly_inside(const geom::Trapezoid& t, const geom::Point& p) {
  if (p.y <= t.y_lo || p.y >= t.y_hi) return false;
  // left leg: x_left(y) = xl_lo + (y - y_lo) * (xl_hi - xl_lo) / h
  geom::I128 h = t.y_hi - t.y_lo;
  geom::I128 lx = geom::I128(t.xl_lo) * h + geom::I128(p.y - t.y_lo) * (t.xl_hi - t.xl_lo);
  geom::I128 rx = geom::I128(t.xr_lo) * h + geom::I128(p.y - t.y_lo) * (t.xr_hi - t.xr_lo);
  geom::I128 px = geom::I128(p.x) * h;
  return px > lx && px < rx;
}

void criterion_6() {
  auto t0 = Clock::now();
  std::mt19937_64 rng(2026);
  bool conserved = true, disjoint = true;
  for (int i = 0; i < 1000; ++i) {
    geom::Polygon p = oracles::random_rectilinear(rng, 2);  // up to 20 vertices
    auto traps = geom::decompose_trapezoids(p);
    std::int64_t sum = 0;
    for (const auto& t : traps) sum += t.area2();
    // cut count bound, in db-unit^2 (area2 carries a factor of 2)
    std::int64_t cuts = static_cast<std::int64_t>(traps.size()) + 1;
    if (std::abs(sum - p.area2()) > 2 * cuts) conserved = false;

    auto bb = p.bbox();
    std::uniform_int_distribution<geom::Coord> dx(bb.lo.x, bb.hi.x);
    std::uniform_int_distribution<geom::Coord> dy(bb.lo.y, bb.hi.y);
    for (int s = 0; s < 10000; ++s) {
      geom::Point q{dx(rng), dy(rng)};
      int hits = 0;
      for (const auto& t : traps)
        if (strictly_inside(t, q)) ++hits;
      if (hits > 1) disjoint = false;
    }
  }
  double elapsed = seconds_since(t0);
  std::ostringstream d;
  d << "conservation: " << conserved << ", disjointness: " << disjoint << ", "
    << std::fixed << elapsed << " s over 1000 polygons x 10^4 samples";
  report(6, conserved && disjoint && elapsed < 30.0,
         "fracturing conserves area with disjoint trapezoids", d.str());
}

// ---- criterion 7: GDSII round trip -----------------------------------------

gds::Layout fixture_all_elements() {
  gds::Layout l;
  l.library_name = "FIXTURE";
  auto& leaf = l.cell("LEAF");
  leaf.elements.push_back({gds::ElementKind::Boundary, 3, 1,
                           {{0, 0}, {1500, 0}, {1500, 800}, {0, 800}},
                           0, geom::Endcap::Flush, ""});
  leaf.elements.push_back({gds::ElementKind::Path, 2, 0,
                           {{0, 0}, {5000, 0}, {5000, 5000}},
                           900, geom::Endcap::Round, ""});
  leaf.elements.push_back({gds::ElementKind::Text, 10, 0, {{42, -42}},
                           0, geom::Endcap::Flush, "fixture"});
  auto& top = l.cell("TOP");
  gds::CellRef plain{"LEAF", {1000, 2000}, 0, false, 1.0, {}};
  gds::CellRef rotated{"LEAF", {-5000, 0}, 270.0, true, 1.0, {}};
  gds::CellRef arr{"LEAF", {0, 50000}, 90.0, false, 1.0,
                   gds::ArraySpec{4, 3, {0, 6000}, {-7000, 0}}};
  top.refs = {plain, rotated, arr};
  l.top_cell = "TOP";
  return l;
}

void criterion_7() {
  bool all = true;
  std::string detail;
  auto check = [&](const std::string& name, const gds::Layout& layout) {
    auto once = gds::parse_gds(gds::write_gds(layout));
    auto twice = gds::parse_gds(gds::write_gds(once));
    std::string why;
    bool ok = gds::structurally_equal(layout, once, &why) &&
              gds::structurally_equal(once, twice, &why);
    if (!ok) {
      all = false;
      detail += " " + name + ": " + why;
    }
  };
  check("elements-fixture", fixture_all_elements());

  gds::Layout empty;
  empty.library_name = "EMPTY";
  empty.cell("TOP");
  empty.top_cell = "TOP";
  check("empty-cell", empty);

  chipgen::ChipSpec stress;
  stress.qubit_count = 50;
  stress.topology = chipgen::Topology::Grid;
  auto chip50 = chipgen::generate_chip(stress);
  check("chip-50q", chip50.layout);

  auto chip4 = chipgen::generate_chip(chipgen::ChipSpec{});
  auto plan = wafer::plan_wafer({300.0, 5.0}, {24.0, 28.0, "CHIP"}, {0.2, {}},
                                {false, 500});
  auto waferlayout = wafer::emit_wafer_layout(plan, chip4.layout, {0.2, {}});
  check("wafer-72-die", waferlayout);

  report(7, all, "parse-write-parse is a structural identity",
         all ? "4 fixtures including the 50-qubit chip and the 72-die wafer"
             : detail);
}

// ---- criterion 8: junction physics chain -----------------------------------

void criterion_8() {
  auto r = process::jj_chain(0.04);  // J_c 0.5 uA/um^2, E_C/h 250 MHz
  bool point = std::abs(r.f01_ghz - 4.46) / 4.46 < 0.005 &&
               std::abs(r.ej_over_h_ghz - 9.93) / 9.93 < 0.005 &&
               std::abs(r.ic_ua - 0.02) < 1e-12;

  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> area(0.001, 0.5);
  std::uniform_real_distribution<double> factor(0.05, 20.0);
  bool homogeneous = true;
  for (int i = 0; i < 100; ++i) {
    double a = area(rng), k = factor(rng);
    double lhs = process::jj_chain(k * a).f01_ghz;
    double rhs = std::sqrt(k) * process::jj_chain(a).f01_ghz;
    if (std::abs(lhs - rhs) > 1e-12 * std::abs(rhs)) homogeneous = false;
  }

  std::uniform_int_distribution<std::int64_t> od(1, 500000);
  std::uniform_int_distribution<std::int64_t> sg(1, 2000);
  bool budget = true;
  for (int i = 0; i < 100; ++i) {
    pdk::AlignmentSpec a{pdk::Purpose::JjBottom, pdk::Purpose::JjTop,
                         pdk::Litho::Ebeam, sg(rng), std::nullopt};
    std::int64_t o = od(rng);
    auto b = process::registration_budget(o, a);
    if (b.o_min_nm != o - a.sigma_align_nm) budget = false;
    if (b.infeasible != (b.o_min_nm <= 0)) budget = false;
  }
  std::ostringstream d;
  d << "f01 " << r.f01_ghz << " GHz, homogeneity(100): " << homogeneous
    << ", budgets(100): " << budget;
  report(8, point && homogeneous && budget,
         "junction estimate chain and registration budgets are exact", d.str());
}

// ---- criterion 9: index vs brute-force equivalence -------------------------

void criterion_9() {
  auto deck = pdk::load_pdk_file("pdks/qeda.json");
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> layer_pick(0, 7);
  const std::pair<int, int> pairs[8] = {{1, 0}, {1, 1}, {2, 0}, {2, 1},
                                        {4, 0}, {5, 0}, {6, 0}, {6, 1}};
  std::uniform_int_distribution<geom::Coord> pos(220000, 1700000);
  std::uniform_int_distribution<geom::Coord> size(500, 120000);
  std::uniform_int_distribution<int> count(5, 49);
  bool identical = true;
  for (int fixture = 0; fixture < 50 && identical; ++fixture) {
    gds::FlatLayout flat;
    auto add = [&](int layer, int dt, geom::Polygon poly) {
      gds::FlatPolygon fp;
      fp.layer = layer;
      fp.datatype = dt;
      fp.poly = std::move(poly);
      fp.poly.make_ccw();
      fp.bbox = fp.poly.bbox();
      fp.provenance = "rnd:" + std::to_string(flat.polygons.size());
      flat.bounds.include(fp.bbox);
      flat.polygons.push_back(std::move(fp));
    };
    add(0, 0, geom::Polygon{{0, 0}, {2000000, 0}, {2000000, 2000000}, {0, 2000000}});
    int n = count(rng);
    for (int i = 0; i < n; ++i) {
      auto [layer, dt] = pairs[layer_pick(rng)];
      geom::Coord x = pos(rng), y = pos(rng);
      geom::Coord w = size(rng), h = size(rng);
      add(layer, dt,
          geom::Polygon{{x, y}, {x + w, y}, {x + w, y + h}, {x, y + h}});
    }

    auto fast = drc::run_drc(flat, deck);
    drc::Options brute;
    brute.brute_force = true;
    auto slow = drc::run_drc(flat, deck, brute);
    if (drc::report_json(fast, "qeda").dump() !=
        drc::report_json(slow, "qeda").dump())
      identical = false;
  }
  report(9, identical, "index-accelerated DRC equals brute force byte for byte",
         identical ? "50 random fixtures identical" : "divergence found");
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli = argc > 1 ? argv[1] : "./build/tools/qflow";
  std::printf("qflow acceptance suite\n");
  criterion_1(cli);
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  if (g_failures == 0) {
    std::printf("all 9 acceptance criteria pass\n");
    return 0;
  }
  std::printf("%d criteria FAILED\n", g_failures);
  return 1;
}
