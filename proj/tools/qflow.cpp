// qflow: design-to-fabrication pipeline for superconducting quantum chips.
//
// Subcommands mirror the pipeline stages: gen, drc, map, plan, fracture,
// tapeout, export, pipeline. Exit codes: 0 clean pass, 1 violations or
// failed checks (reports still written), 2 operational error. All reports
// are deterministic; timing goes to run_metadata.json.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "qflow/chipgen.hpp"
#include "qflow/drc.hpp"
#include "qflow/gds.hpp"
#include "qflow/mdp.hpp"
#include "qflow/pdk.hpp"
#include "qflow/process.hpp"
#include "qflow/waferplan.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct CommonOpts {
  std::string pdk_path;
  std::string deck = "qeda";
  std::string input;
  std::string out_dir = "out";
  std::vector<std::string> formats = {"json", "text", "svg"};
  bool waiver = false;
  std::string waiver_note;
  double wafer_diameter_mm = 300.0;
  double edge_exclusion_mm = 5.0;
  double scribe_mm = 0.2;
  std::string die_mm;  // "WxH"
  bool centered_grid = false;
  bool brute_force = false;
  // gen parameters
  int qubits = 4;
  std::string topology = "diamond";
  std::uint64_t seed = 1;
  std::string recipe_path;
  std::vector<std::string> gen_kv;
};

struct StageTimer {
  ordered_json entries = ordered_json::object();
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  void mark(const std::string& stage) {
    auto now = std::chrono::steady_clock::now();
    entries[stage] =
        std::chrono::duration<double, std::milli>(now - t0).count();
    t0 = now;
  }
};

qflow::pdk::Pdk load_pdk(const CommonOpts& opt) {
  if (!opt.pdk_path.empty()) return qflow::pdk::load_pdk_file(opt.pdk_path);
  for (const std::string& base : {std::string("pdks/"), std::string("../pdks/")}) {
    fs::path candidate = base + opt.deck + ".json";
    if (fs::exists(candidate))
      return qflow::pdk::load_pdk_file(candidate.string());
  }
  throw qflow::Error("no PDK found for deck '" + opt.deck +
                     "'; pass --pdk <file>");
}

void write_text_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw qflow::Error("cannot write " + path.string());
  f << text;
}

bool wants(const CommonOpts& opt, const std::string& fmt) {
  for (const std::string& f : opt.formats)
    if (f == fmt) return true;
  return false;
}

qflow::chipgen::ChipSpec gen_spec(const CommonOpts& opt) {
  qflow::chipgen::ChipSpec spec;
  if (!opt.recipe_path.empty()) {
    std::ifstream f(opt.recipe_path);
    if (!f) throw qflow::Error("cannot open recipe " + opt.recipe_path);
    nlohmann::json j;
    f >> j;
    spec = qflow::chipgen::chip_spec_from_json(j);
  }
  spec.qubit_count = opt.qubits;
  spec.topology = opt.topology == "grid" ? qflow::chipgen::Topology::Grid
                                         : qflow::chipgen::Topology::Diamond;
  spec.seed = opt.seed;
  if (!opt.die_mm.empty()) {
    double w = 0, h = 0;
    if (std::sscanf(opt.die_mm.c_str(), "%lfx%lf", &w, &h) != 2)
      throw qflow::Error("--die-mm expects WxH, e.g. 24x28");
    spec.die_width_mm = w;
    spec.die_height_mm = h;
  }
  // pipeline-style key=value overrides
  for (const std::string& kv : opt.gen_kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw qflow::Error("--gen expects key=value, got '" + kv + "'");
    std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
    if (k == "qubits") spec.qubit_count = std::stoi(v);
    else if (k == "topology")
      spec.topology = v == "grid" ? qflow::chipgen::Topology::Grid
                                  : qflow::chipgen::Topology::Diamond;
    else if (k == "seed") spec.seed = std::stoull(v);
    else if (k == "qubits_per_row") spec.qubits_per_row = std::stoi(v);
    else if (k == "bridges_per_segment") spec.bridges_per_segment = std::stoi(v);
    else
      throw qflow::Error("unknown --gen key '" + k + "'");
  }
  return spec;
}

qflow::wafer::DieSpec die_spec(const CommonOpts& opt, const std::string& cell) {
  qflow::wafer::DieSpec die;
  die.outline_cell = cell;
  if (!opt.die_mm.empty()) {
    double w = 0, h = 0;
    if (std::sscanf(opt.die_mm.c_str(), "%lfx%lf", &w, &h) != 2)
      throw qflow::Error("--die-mm expects WxH, e.g. 24x28");
    die.width_mm = w;
    die.height_mm = h;
  }
  return die;
}

// ---------------------------------------------------------------------------
// Stages (shared between individual commands and the pipeline)
// ---------------------------------------------------------------------------

struct StageResults {
  qflow::gds::Layout layout;
  qflow::gds::FlatLayout flat;
  qflow::pdk::Pdk pdk;
  qflow::drc::ViolationReport drc;
  qflow::process::StepPlan step_plan;
  qflow::wafer::WaferPlan plan;
  qflow::gds::Layout wafer_layout;
  std::vector<qflow::mdp::TrapezoidSet> mask;
  std::vector<qflow::mdp::ReticleData> reticles;
  qflow::mdp::JobDeck jobdeck;
  qflow::mdp::TapeoutReport tapeout;
};

void run_gen(const CommonOpts& opt, StageResults& r, StageTimer& timer) {
  auto spec = gen_spec(opt);
  auto chip = qflow::chipgen::generate_chip(spec);
  r.layout = std::move(chip.layout);
  fs::create_directories(opt.out_dir);
  qflow::gds::write_gds_file(r.layout, (fs::path(opt.out_dir) / "chip.gds").string());
  ordered_json census;
  census["components"] = ordered_json::object();
  for (const auto& [k, v] : chip.census.components) census["components"][k] = v;
  census["total"] = chip.census.total();
  write_text_file(fs::path(opt.out_dir) / "census.json", census.dump(2) + "\n");
  write_text_file(fs::path(opt.out_dir) / "chip_recipe.json",
                  qflow::chipgen::recipe_json(spec).dump(2) + "\n");
  timer.mark("gen");
}

void load_input(const CommonOpts& opt, StageResults& r) {
  if (r.layout.cells.empty()) {
    if (opt.input.empty()) throw qflow::Error("no input layout; pass --in");
    r.layout = qflow::gds::parse_gds_file(opt.input);
  }
  if (r.flat.polygons.empty() && r.flat.texts.empty())
    r.flat = qflow::gds::flatten(r.layout);
}

int run_drc_stage(const CommonOpts& opt, StageResults& r, StageTimer& timer) {
  qflow::drc::Options dopt;
  dopt.brute_force = opt.brute_force;
  r.drc = qflow::drc::run_drc(r.flat, r.pdk, dopt);
  timer.mark("drc");
  auto j = qflow::drc::report_json(r.drc, r.pdk.rules.name);
  if (wants(opt, "json"))
    write_text_file(fs::path(opt.out_dir) / "drc_report.json", j.dump(2) + "\n");
  if (wants(opt, "text"))
    write_text_file(fs::path(opt.out_dir) / "drc_report.txt",
                    qflow::drc::report_text(r.drc, r.pdk.rules.name));
  if (wants(opt, "svg"))
    write_text_file(fs::path(opt.out_dir) / "drc_report.svg",
                    qflow::drc::report_svg(r.drc, r.flat));
  return r.drc.violations.empty() ? 0 : 1;
}

void run_map_stage(const CommonOpts& opt, StageResults& r, StageTimer& timer) {
  r.step_plan = qflow::process::map_layers(r.flat, r.pdk.stack);
  write_text_file(fs::path(opt.out_dir) / "step_plan.csv",
                  qflow::process::step_plan_csv(r.step_plan));
  timer.mark("map");
}

void run_plan_stage(const CommonOpts& opt, StageResults& r, StageTimer& timer) {
  qflow::wafer::WaferSpec wspec{opt.wafer_diameter_mm, opt.edge_exclusion_mm};
  qflow::wafer::ScribeSpec scribe{opt.scribe_mm, {}};
  auto die = die_spec(opt, r.layout.top_cell.empty() ? "CHIP" : r.layout.top_cell);
  qflow::wafer::PlanOptions popt;
  popt.optimize_offset = !opt.centered_grid;
  r.plan = qflow::wafer::plan_wafer(wspec, die, scribe, popt);
  write_text_file(fs::path(opt.out_dir) / "wafer_plan.json",
                  qflow::wafer::plan_json(r.plan).dump(2) + "\n");
  if (wants(opt, "svg"))
    write_text_file(fs::path(opt.out_dir) / "wafer_map.svg",
                    qflow::wafer::plan_svg(r.plan));
  if (!r.layout.cells.empty()) {
    r.wafer_layout = qflow::wafer::emit_wafer_layout(r.plan, r.layout, scribe);
    qflow::gds::write_gds_file(r.wafer_layout,
                               (fs::path(opt.out_dir) / "wafer.gds").string());
  }
  timer.mark("plan");
}

void run_fracture_stage(const CommonOpts& opt, StageResults& r,
                        StageTimer& timer) {
  r.mask = qflow::mdp::fracture_for_mask(r.flat, r.pdk.stack);
  double fw = (r.flat.bounds.hi.x + 100000) / 1000.0;
  double fh = (r.flat.bounds.hi.y + 100000) / 1000.0;
  r.reticles = qflow::mdp::build_reticles(r.mask, r.pdk.stack, fw, fh);
  for (const auto& set : r.mask)
    write_text_file(fs::path(opt.out_dir) / "mask" /
                        (std::to_string(set.layer) + "_" +
                         std::to_string(set.datatype) + ".trap"),
                    qflow::mdp::trap_file_text(set));
  ordered_json rj;
  rj["report"] = "reticles";
  rj["version"] = 1;
  rj["reticles"] = ordered_json::array();
  for (const auto& ret : r.reticles)
    rj["reticles"].push_back({{"layer", ret.layer},
                              {"datatype", ret.datatype},
                              {"process_step", ret.process_step},
                              {"field_um", {{"x", ret.field_x_um}, {"y", ret.field_y_um}}},
                              {"trap_file", ret.trap_file},
                              {"shape_count", ret.shape_count},
                              {"checksum", ret.checksum}});
  rj["double_exposure"] = ordered_json::array();
  for (const auto& set : r.mask)
    if (set.double_exposure_pairs > 0)
      rj["double_exposure"].push_back(
          {{"layer", set.layer},
           {"datatype", set.datatype},
           {"overlapping_pairs", set.double_exposure_pairs}});
  write_text_file(fs::path(opt.out_dir) / "reticles.json", rj.dump(2) + "\n");
  timer.mark("fracture");
}

int run_tapeout_stage(const CommonOpts& opt, StageResults& r, StageTimer& timer) {
  r.tapeout = qflow::mdp::tapeout_check(r.layout, r.flat, r.pdk);
  write_text_file(fs::path(opt.out_dir) / "tapeout_report.json",
                  qflow::mdp::tapeout_json(r.tapeout).dump(2) + "\n");
  timer.mark("tapeout");
  return r.tapeout.overall ? 0 : 1;
}

int run_export_stage(const CommonOpts& opt, StageResults& r, StageTimer& timer) {
  r.jobdeck = qflow::mdp::build_job_deck(r.plan, r.reticles, r.pdk);
  write_text_file(fs::path(opt.out_dir) / "jobdeck.json",
                  qflow::mdp::job_deck_json(r.jobdeck).dump(2) + "\n");
  qflow::mdp::PackageInputs in;
  in.layout_gds = qflow::gds::write_gds(r.layout);
  in.wafer_gds = qflow::gds::write_gds(r.wafer_layout);
  in.drc_report = qflow::drc::report_json(r.drc, r.pdk.rules.name);
  in.tapeout_report = qflow::mdp::tapeout_json(r.tapeout);
  in.step_plan_csv = qflow::process::step_plan_csv(r.step_plan);
  in.wafer_plan = qflow::wafer::plan_json(r.plan);
  in.mask = r.mask;
  in.jobdeck = qflow::mdp::job_deck_json(r.jobdeck);
  in.drc_violation_count = r.drc.violations.size();
  if (!r.drc.violations.empty())
    in.first_violation = r.drc.violations[0].rule_id + ": " +
                         r.drc.violations[0].message;
  in.tapeout_pass = r.tapeout.overall;
  in.waiver = opt.waiver;
  in.waiver_note = opt.waiver_note.empty() && opt.waiver
                       ? "operator waiver via --waiver"
                       : opt.waiver_note;
  fs::path pkg = fs::path(opt.out_dir) / "package";
  std::error_code ec;
  fs::remove_all(pkg, ec);  // rebuilt on every run
  qflow::mdp::export_package(in, pkg);
  timer.mark("export");
  return 0;
}

int finish(const CommonOpts& opt, StageTimer& timer, int code,
           const std::string& status) {
  write_text_file(fs::path(opt.out_dir) / "run_metadata.json",
                  timer.entries.dump(2) + "\n");
  std::cerr << status << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qflow: GDSII-to-foundry data pipeline for superconducting chips"};
  app.require_subcommand(1);
  CommonOpts opt;

  auto add_common = [&](CLI::App* cmd, bool needs_input) {
    cmd->add_option("--pdk", opt.pdk_path, "PDK JSON document");
    cmd->add_option("--deck", opt.deck, "shipped deck name (qeda or cmc)");
    cmd->add_option("--out", opt.out_dir, "output directory");
    cmd->add_option("--format", opt.formats, "report formats (json text svg)")
        ->delimiter(',');
    if (needs_input) cmd->add_option("--in", opt.input, "input GDSII layout");
  };
  auto add_wafer = [&](CLI::App* cmd) {
    cmd->add_option("--wafer-diameter-mm", opt.wafer_diameter_mm);
    cmd->add_option("--edge-exclusion-mm", opt.edge_exclusion_mm);
    cmd->add_option("--scribe-mm", opt.scribe_mm);
    cmd->add_option("--die-mm", opt.die_mm, "die size WxH in mm, e.g. 24x28");
    cmd->add_flag("--centered-grid", opt.centered_grid,
                  "disable the offset scan; use the centered grid");
  };
  auto add_gen = [&](CLI::App* cmd) {
    cmd->add_option("--qubits", opt.qubits);
    cmd->add_option("--topology", opt.topology)
        ->check(CLI::IsMember({"diamond", "grid"}));
    cmd->add_option("--seed", opt.seed);
    cmd->add_option("--recipe", opt.recipe_path, "chip recipe JSON");
  };

  CLI::App* gen = app.add_subcommand("gen", "generate a test chip layout");
  add_common(gen, false);
  add_gen(gen);
  gen->add_option("--die-mm", opt.die_mm, "die size WxH in mm");

  CLI::App* drc = app.add_subcommand("drc", "run design rule checks");
  add_common(drc, true);
  drc->add_flag("--brute-force", opt.brute_force,
                "linear-scan candidate search (oracle mode)");

  CLI::App* map_cmd = app.add_subcommand("map", "map layers to process steps");
  add_common(map_cmd, true);

  CLI::App* plan = app.add_subcommand("plan", "plan the wafer step-and-repeat");
  add_common(plan, true);
  add_wafer(plan);

  CLI::App* fracture = app.add_subcommand("fracture", "fracture mask data");
  add_common(fracture, true);

  CLI::App* tapeout = app.add_subcommand("tapeout", "run tape-out checks");
  add_common(tapeout, true);

  CLI::App* exp = app.add_subcommand("export", "build the foundry package");
  add_common(exp, true);
  add_wafer(exp);
  exp->add_flag("--waiver", opt.waiver, "package despite gate failures");
  exp->add_option("--waiver-note", opt.waiver_note);

  CLI::App* pipeline = app.add_subcommand("pipeline", "all stages in order");
  add_common(pipeline, false);
  add_wafer(pipeline);
  pipeline->add_option("--gen", opt.gen_kv,
                       "generator overrides as key=value (qubits, topology, "
                       "seed, qubits_per_row, bridges_per_segment)");
  pipeline->add_option("--seed", opt.seed);
  pipeline->add_option("--recipe", opt.recipe_path, "chip recipe JSON");
  pipeline->add_option("--in", opt.input,
                       "existing layout (skips the generator)");
  pipeline->add_flag("--waiver", opt.waiver);
  pipeline->add_option("--waiver-note", opt.waiver_note);

  CLI11_PARSE(app, argc, argv);

  StageTimer timer;
  StageResults r;
  try {
    if (gen->parsed()) {
      run_gen(opt, r, timer);
      return finish(opt, timer, 0, "qflow gen: ok");
    }
    r.pdk = load_pdk(opt);
    if (drc->parsed()) {
      load_input(opt, r);
      int code = run_drc_stage(opt, r, timer);
      return finish(opt, timer, code,
                    code == 0 ? "qflow drc: clean"
                              : "qflow drc: " +
                                    std::to_string(r.drc.violations.size()) +
                                    " violations");
    }
    if (map_cmd->parsed()) {
      load_input(opt, r);
      run_map_stage(opt, r, timer);
      return finish(opt, timer, 0, "qflow map: ok");
    }
    if (plan->parsed()) {
      if (!opt.input.empty()) load_input(opt, r);
      run_plan_stage(opt, r, timer);
      return finish(opt, timer, 0,
                    "qflow plan: " + std::to_string(r.plan.die_count) + " dies");
    }
    if (fracture->parsed()) {
      load_input(opt, r);
      run_fracture_stage(opt, r, timer);
      return finish(opt, timer, 0,
                    "qflow fracture: " + std::to_string(r.reticles.size()) +
                        " reticles");
    }
    if (tapeout->parsed()) {
      load_input(opt, r);
      int code = run_tapeout_stage(opt, r, timer);
      return finish(opt, timer, code,
                    code == 0 ? "qflow tapeout: all checks pass"
                              : "qflow tapeout: checks failed");
    }
    if (exp->parsed() || pipeline->parsed()) {
      if (pipeline->parsed() && opt.input.empty())
        run_gen(opt, r, timer);
      load_input(opt, r);
      int drc_code = run_drc_stage(opt, r, timer);
      run_map_stage(opt, r, timer);
      run_plan_stage(opt, r, timer);
      run_fracture_stage(opt, r, timer);
      int tape_code = run_tapeout_stage(opt, r, timer);
      int code = std::max(drc_code, tape_code);
      if (code == 0 || opt.waiver) {
        run_export_stage(opt, r, timer);
        return finish(opt, timer, code,
                      code == 0 ? "qflow: package written"
                                : "qflow: package written under waiver");
      }
      std::string status = "qflow: gate failed (" +
                           std::to_string(r.drc.violations.size()) +
                           " violations, tape-out " +
                           (r.tapeout.overall ? "pass" : "fail") + ")";
      if (!r.drc.violations.empty())
        status += "; first violation " + r.drc.violations[0].rule_id + ": " +
                  r.drc.violations[0].message;
      return finish(opt, timer, code, status + "; package refused");
    }
  } catch (const std::exception& e) {
    std::cerr << "qflow error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
