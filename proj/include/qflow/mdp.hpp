#pragma once

// Mask data preparation: fracture verified layout data into trapezoids,
// build per-pattern reticle records, generate the exposure job deck, run the
// seven-check tape-out gate, and export the foundry package atomically.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "qflow/core.hpp"
#include "qflow/drc.hpp"
#include "qflow/gds.hpp"
#include "qflow/geometry.hpp"
#include "qflow/pdk.hpp"
#include "qflow/process.hpp"
#include "qflow/waferplan.hpp"

namespace qflow::mdp {

using geom::Coord;
using geom::Trapezoid;

// ---------------------------------------------------------------------------
// Fracturing
// ---------------------------------------------------------------------------

struct TrapezoidSet {
  int layer = 0;
  int datatype = 0;
  std::vector<Trapezoid> trapezoids;
  std::size_t source_polygon_count = 0;
  std::int64_t total_area2 = 0;  // twice the summed trapezoid area
  // overlapping source polygons are fractured independently (no boolean
  // pre-merge); the pairs are flagged so the mask house sees the
  // double-exposure regions
  std::size_t double_exposure_pairs = 0;

  double total_area_um2() const {
    return static_cast<double>(total_area2) * 0.5 * 1e-6;
  }
};

// Per-polygon trapezoid decomposition of one (layer, datatype).
inline TrapezoidSet fracture_layer(const gds::FlatLayout& flat, int layer,
                                   int datatype) {
  TrapezoidSet set;
  set.layer = layer;
  set.datatype = datatype;
  std::vector<std::string> invalid;
  std::vector<const gds::FlatPolygon*> sources;
  for (const gds::FlatPolygon& p : flat.polygons) {
    if (p.layer != layer || p.datatype != datatype) continue;
    if (auto reason = p.poly.invalid_reason()) {
      invalid.push_back(p.provenance + " (" + *reason + ")");
      continue;
    }
    sources.push_back(&p);
    ++set.source_polygon_count;
    for (const Trapezoid& t : geom::decompose_trapezoids(p.poly)) {
      set.total_area2 += t.area2();
      set.trapezoids.push_back(t);
    }
  }
  if (!invalid.empty()) {
    std::string msg = "fracture failed for layer (" + std::to_string(layer) +
                      ", " + std::to_string(datatype) + "); invalid polygons:";
    for (const std::string& s : invalid) msg += " " + s;
    throw Error(msg);
  }
  for (std::size_t i = 0; i < sources.size(); ++i)
    for (std::size_t j = i + 1; j < sources.size(); ++j)
      if (sources[i]->bbox.overlaps_interior(sources[j]->bbox) &&
          geom::interiors_overlap(sources[i]->poly, sources[j]->poly))
        ++set.double_exposure_pairs;
  return set;
}

inline std::vector<TrapezoidSet> fracture_all(const gds::FlatLayout& flat) {
  std::vector<TrapezoidSet> sets;
  for (const auto& [pair, count] : flat.layer_counts())
    sets.push_back(fracture_layer(flat, pair.first, pair.second));
  return sets;
}

// Mask data covers only patterns on lithographic process steps; outline,
// scribe and unbound layers carry no reticle.
inline std::vector<TrapezoidSet> fracture_for_mask(
    const gds::FlatLayout& flat, const pdk::ProcessStack& stack) {
  std::vector<TrapezoidSet> sets;
  for (const auto& [pair, count] : flat.layer_counts()) {
    const pdk::ProcessLayer* step = stack.step_for_layer(pair.first);
    if (!step || (step->lithography != pdk::Litho::Optical &&
                  step->lithography != pdk::Litho::Ebeam))
      continue;
    sets.push_back(fracture_layer(flat, pair.first, pair.second));
  }
  return sets;
}

// .trap text format: header then one trapezoid per line (integers, nm)
inline std::string trap_file_text(const TrapezoidSet& set) {
  std::string out = "TRAP v1 layer=" + std::to_string(set.layer) +
                    " datatype=" + std::to_string(set.datatype) + " dbu=1nm\n";
  char line[160];
  for (const Trapezoid& t : set.trapezoids) {
    std::snprintf(line, sizeof line, "%lld %lld %lld %lld %lld %lld\n",
                  static_cast<long long>(t.y_lo), static_cast<long long>(t.y_hi),
                  static_cast<long long>(t.xl_lo), static_cast<long long>(t.xr_lo),
                  static_cast<long long>(t.xl_hi), static_cast<long long>(t.xr_hi));
    out += line;
  }
  return out;
}

inline TrapezoidSet parse_trap_file(const std::string& text) {
  TrapezoidSet set;
  std::size_t pos = text.find('\n');
  if (pos == std::string::npos || text.rfind("TRAP v1 ", 0) != 0)
    throw Error("not a TRAP v1 file");
  if (std::sscanf(text.c_str(), "TRAP v1 layer=%d datatype=%d", &set.layer,
                  &set.datatype) != 2)
    throw Error("malformed TRAP header");
  const char* p = text.c_str() + pos + 1;
  long long v[6];
  while (*p) {
    if (std::sscanf(p, "%lld %lld %lld %lld %lld %lld", &v[0], &v[1], &v[2],
                    &v[3], &v[4], &v[5]) == 6) {
      Trapezoid t{v[0], v[1], v[2], v[3], v[4], v[5]};
      set.total_area2 += t.area2();
      set.trapezoids.push_back(t);
    }
    const char* nl = std::strchr(p, '\n');
    if (!nl) break;
    p = nl + 1;
  }
  return set;
}

// ---------------------------------------------------------------------------
// Reticles
// ---------------------------------------------------------------------------

struct ReticleData {
  int layer = 0;
  int datatype = 0;
  std::string process_step;  // name of the bound process layer, if any
  double field_x_um = 0;
  double field_y_um = 0;
  std::string trap_file;  // mask/<layer>_<datatype>.trap
  std::size_t shape_count = 0;
  std::uint64_t checksum = 0;  // order-independent over the trapezoid multiset
};

inline std::uint64_t trapezoid_multiset_checksum(
    const std::vector<Trapezoid>& traps) {
  std::uint64_t sum = 0;
  for (const Trapezoid& t : traps) {
    std::int64_t data[6] = {t.y_lo, t.y_hi, t.xl_lo, t.xr_lo, t.xl_hi, t.xr_hi};
    // commutative combine keeps the hash order-independent
    sum += qflow::detail::fnv1a(data, sizeof data);
  }
  return sum;
}

// One reticle per populated (layer, datatype) pattern; a single exposure
// field must cover the whole die plus margin.
inline std::vector<ReticleData> build_reticles(
    const std::vector<TrapezoidSet>& sets, const pdk::ProcessStack& stack,
    double field_x_um, double field_y_um) {
  std::vector<ReticleData> reticles;
  for (const TrapezoidSet& set : sets) {
    if (set.trapezoids.empty()) continue;
    ReticleData r;
    r.layer = set.layer;
    r.datatype = set.datatype;
    if (const pdk::ProcessLayer* step = stack.step_for_layer(set.layer))
      r.process_step = step->name;
    r.field_x_um = field_x_um;
    r.field_y_um = field_y_um;
    r.trap_file = "mask/" + std::to_string(set.layer) + "_" +
                  std::to_string(set.datatype) + ".trap";
    r.shape_count = set.trapezoids.size();
    r.checksum = trapezoid_multiset_checksum(set.trapezoids);
    const Coord fx = static_cast<Coord>(std::llround(field_x_um * 1000.0));
    const Coord fy = static_cast<Coord>(std::llround(field_y_um * 1000.0));
    for (const Trapezoid& t : set.trapezoids) {
      geom::Rect bb = t.bbox();
      if (bb.lo.x < 0 || bb.lo.y < 0 || bb.hi.x > fx || bb.hi.y > fy)
        throw Error("shape outside the exposure field on layer (" +
                    std::to_string(set.layer) + ", " +
                    std::to_string(set.datatype) + ")");
    }
    reticles.push_back(std::move(r));
  }
  std::sort(reticles.begin(), reticles.end(),
            [](const ReticleData& a, const ReticleData& b) {
              return std::tie(a.layer, a.datatype) < std::tie(b.layer, b.datatype);
            });
  return reticles;
}

// ---------------------------------------------------------------------------
// Job deck
// ---------------------------------------------------------------------------

struct JobDeckEntry {
  std::string reticle_id;  // "<layer>_<datatype>"
  std::string process_step;
  pdk::Litho lithography = pdk::Litho::Optical;
  double exposure_dose = 0;
  std::string dose_unit;  // mJ/cm2 (optical) or uC/cm2 (ebeam)
  std::int64_t focus_offset_nm = 0;
  std::string alignment_strategy;
  double step_pitch_x_mm = 0;
  double step_pitch_y_mm = 0;
  std::size_t site_count = 0;
  std::string site_list_ref = "wafer_plan.json#/sites";
};

struct JobDeck {
  std::vector<JobDeckEntry> entries;
};

inline JobDeck build_job_deck(const wafer::WaferPlan& plan,
                              const std::vector<ReticleData>& reticles,
                              const pdk::Pdk& pdk) {
  JobDeck deck;
  for (const ReticleData& r : reticles) {
    const pdk::ProcessLayer* step = pdk.stack.step_for_layer(r.layer);
    if (!step)
      throw Error("no process step bound to layer " + std::to_string(r.layer));
    if (step->lithography != pdk::Litho::Optical &&
        step->lithography != pdk::Litho::Ebeam)
      throw Error("process step '" + step->name + "' is not lithographic");
    if (!step->exposure || step->exposure->dose <= 0)
      throw Error("process step '" + step->name +
                  "' has no positive exposure dose default");
    JobDeckEntry e;
    e.reticle_id = std::to_string(r.layer) + "_" + std::to_string(r.datatype);
    e.process_step = step->name;
    e.lithography = step->lithography;
    e.exposure_dose = step->exposure->dose;
    e.dose_unit = step->lithography == pdk::Litho::Optical ? "mJ/cm2" : "uC/cm2";
    e.focus_offset_nm = step->exposure->focus_offset_nm;
    // alignment strategy from the deck's alignment table, if one names a
    // purpose on this layer
    e.alignment_strategy = "global wafer marks";
    for (const pdk::LayerPurpose& lp : pdk.rules.layer_map) {
      if (lp.gds_layer != r.layer) continue;
      for (const pdk::AlignmentSpec& a : pdk.rules.alignment)
        if (a.second == lp.purpose)
          e.alignment_strategy = "layer-to-layer on " + pdk::to_string(a.first) +
                                 " marks, sigma " +
                                 std::to_string(a.sigma_align_nm) + " nm";
    }
    e.step_pitch_x_mm = static_cast<double>(plan.pitch_x_um) / 1000.0;
    e.step_pitch_y_mm = static_cast<double>(plan.pitch_y_um) / 1000.0;
    e.site_count = plan.die_count;
    deck.entries.push_back(std::move(e));
  }
  return deck;
}

inline nlohmann::ordered_json job_deck_json(const JobDeck& deck) {
  nlohmann::ordered_json j;
  j["report"] = "jobdeck";
  j["version"] = 1;
  j["entries"] = nlohmann::ordered_json::array();
  for (const JobDeckEntry& e : deck.entries) {
    nlohmann::ordered_json ej;
    ej["reticle"] = e.reticle_id;
    ej["process_step"] = e.process_step;
    ej["lithography"] = pdk::to_string(e.lithography);
    ej["exposure_dose"] = e.exposure_dose;
    ej["dose_unit"] = e.dose_unit;
    ej["focus_offset_nm"] = e.focus_offset_nm;
    ej["alignment_strategy"] = e.alignment_strategy;
    ej["step_pitch_mm"] = {{"x", e.step_pitch_x_mm}, {"y", e.step_pitch_y_mm}};
    ej["sites"] = e.site_count;
    ej["site_list"] = e.site_list_ref;
    j["entries"].push_back(ej);
  }
  return j;
}

// ---------------------------------------------------------------------------
// Tape-out checks
// ---------------------------------------------------------------------------

struct TapeoutCheck {
  std::string id;    // T1..T7
  std::string name;
  bool pass = false;
  std::string details;
};

struct TapeoutReport {
  std::array<TapeoutCheck, 7> checks;
  bool overall = false;
};

inline TapeoutReport tapeout_check(const gds::Layout& layout,
                                   const gds::FlatLayout& flat,
                                   const pdk::Pdk& pdk) {
  TapeoutReport rep;
  auto set = [&](int idx, std::string id, std::string name, bool pass,
                 std::string details) {
    rep.checks[idx] = {std::move(id), std::move(name), pass, std::move(details)};
  };

  // T1: nanometer grid alignment. Integer storage makes this trivially true
  // unless flattening had to snap (non-90 rotation, fractional magnification)
  // or the imported unit was off-grid.
  bool t1 = flat.warnings.grid_snaps == 0;
  set(0, "T1", "nanometer grid alignment", t1,
      t1 ? "all coordinates on the 1 nm grid"
         : std::to_string(flat.warnings.grid_snaps) + " coordinates snapped");

  // T2: flattenability
  bool t2 = true;
  std::string t2_details = "reference graph acyclic";
  try {
    layout.validate();
    int depth = layout.reference_depth(layout.top_cell);
    t2_details = "depth " + std::to_string(depth);
    if (depth > 16) {
      t2 = false;
      t2_details += " exceeds 16";
    }
  } catch (const Error& e) {
    t2 = false;
    t2_details = e.what();
  }
  set(1, "T2", "hierarchy flattening", t2, t2_details);

  // T3: bounding-box integrity against the chip outline
  {
    std::vector<const gds::FlatPolygon*> outlines;
    for (const gds::FlatPolygon& p : flat.polygons) {
      auto purpose = pdk.rules.purpose_of(p.layer, p.datatype);
      if (purpose && *purpose == pdk::Purpose::ChipOutline)
        outlines.push_back(&p);
    }
    if (outlines.size() != 1) {
      set(2, "T3", "bounding-box integrity", false,
          "expected exactly 1 chip_outline polygon, found " +
              std::to_string(outlines.size()));
    } else {
      const geom::Rect ob = outlines[0]->bbox;
      std::size_t outside = 0;
      std::string first;
      for (const gds::FlatPolygon& p : flat.polygons) {
        auto purpose = pdk.rules.purpose_of(p.layer, p.datatype);
        if (purpose && (*purpose == pdk::Purpose::ChipOutline ||
                        *purpose == pdk::Purpose::Scribe ||
                        *purpose == pdk::Purpose::Text))
          continue;
        if (!ob.contains(p.bbox)) {
          if (outside == 0) first = p.provenance;
          ++outside;
        }
      }
      set(2, "T3", "bounding-box integrity", outside == 0,
          outside == 0 ? "all functional geometry inside the outline"
                       : std::to_string(outside) + " polygons outside, first " +
                             first);
    }
  }

  // T4: no degenerate polygons
  {
    std::size_t bad = 0;
    std::string first;
    for (const gds::FlatPolygon& p : flat.polygons) {
      if (p.poly.size() < 3 || p.poly.area2() == 0) {
        if (bad == 0) first = p.provenance;
        ++bad;
      }
    }
    set(3, "T4", "no degenerate polygons", bad == 0,
        bad == 0 ? "no zero-area or short polygons"
                 : std::to_string(bad) + " degenerate, first " + first);
  }

  // T5: layer whitelist
  {
    std::vector<std::string> unknown;
    for (const auto& [pair, count] : flat.layer_counts())
      if (!pdk.rules.purpose_of(pair.first, pair.second))
        unknown.push_back("(" + std::to_string(pair.first) + ", " +
                          std::to_string(pair.second) + ")");
    std::string detail;
    for (const std::string& u : unknown) detail += (detail.empty() ? "" : " ") + u;
    set(4, "T5", "layer whitelist", unknown.empty(),
        unknown.empty() ? "all populated layers bound in the PDK layer map"
                        : "unbound pairs: " + detail);
  }

  // T6: no self-intersecting polygons
  {
    std::size_t bad = 0;
    std::string first;
    for (const gds::FlatPolygon& p : flat.polygons) {
      if (p.poly.size() >= 3 && !p.poly.is_simple()) {
        if (bad == 0) first = p.provenance;
        ++bad;
      }
    }
    set(5, "T6", "no self-intersecting polygons", bad == 0,
        bad == 0 ? "all polygons simple"
                 : std::to_string(bad) + " self-intersecting, first " + first);
  }

  // T7: units consistency
  {
    bool db_ok = layout.db_unit_nm == 1;
    bool user_ok = std::abs(layout.user_unit - pdk.rules.user_unit) <=
                   1e-9 * std::abs(pdk.rules.user_unit);
    set(6, "T7", "units consistency", db_ok && user_ok,
        db_ok && user_ok
            ? "1 nm database unit, user unit matches the PDK"
            : (!db_ok ? "database unit is " + std::to_string(layout.db_unit_nm) +
                            " nm, expected 1 nm"
                      : "user unit mismatch"));
  }

  rep.overall = true;
  for (const TapeoutCheck& c : rep.checks) rep.overall = rep.overall && c.pass;
  return rep;
}

inline nlohmann::ordered_json tapeout_json(const TapeoutReport& rep) {
  nlohmann::ordered_json j;
  j["report"] = "tapeout";
  j["version"] = 1;
  j["overall"] = rep.overall ? "pass" : "fail";
  j["checks"] = nlohmann::ordered_json::array();
  for (const TapeoutCheck& c : rep.checks)
    j["checks"].push_back({{"id", c.id},
                           {"name", c.name},
                           {"pass", c.pass},
                           {"details", c.details}});
  return j;
}

// ---------------------------------------------------------------------------
// SHA-256 (manifest checksums)
// ---------------------------------------------------------------------------

namespace detail {

class Sha256 {
public:
  Sha256() { reset(); }

  void update(const void* data, std::size_t len) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    total_ += len;
    while (len > 0) {
      std::size_t take = std::min<std::size_t>(64 - fill_, len);
      std::memcpy(buf_ + fill_, p, take);
      fill_ += take;
      p += take;
      len -= take;
      if (fill_ == 64) {
        block(buf_);
        fill_ = 0;
      }
    }
  }

  std::string hex_digest() {
    std::uint64_t bits = total_ * 8;
    std::uint8_t pad = 0x80;
    update(&pad, 1);
    std::uint8_t zero = 0;
    while (fill_ != 56) update(&zero, 1);
    std::uint8_t lenb[8];
    for (int i = 0; i < 8; ++i) lenb[i] = static_cast<std::uint8_t>(bits >> (56 - 8 * i));
    update(lenb, 8);
    char out[65];
    for (int i = 0; i < 8; ++i)
      std::snprintf(out + 8 * i, 9, "%08x", h_[i]);
    return std::string(out, 64);
  }

private:
  void reset() {
    static constexpr std::uint32_t init[8] = {
        0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
        0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
    std::memcpy(h_, init, sizeof h_);
    fill_ = 0;
    total_ = 0;
  }

  static std::uint32_t rotr(std::uint32_t x, int n) {
    return (x >> n) | (x << (32 - n));
  }

  void block(const std::uint8_t* p) {
    static constexpr std::uint32_t k[64] = {
        0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1,
        0x923f82a4, 0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3,
        0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786,
        0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
        0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147,
        0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13,
        0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
        0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
        0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a,
        0x5b9cca4f, 0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208,
        0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2};
    std::uint32_t w[64];
    for (int i = 0; i < 16; ++i)
      w[i] = (p[4 * i] << 24) | (p[4 * i + 1] << 16) | (p[4 * i + 2] << 8) |
             p[4 * i + 3];
    for (int i = 16; i < 64; ++i) {
      std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
      std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
      w[i] = w[i - 16] + s0 + w[i - 7] + s1;
    }
    std::uint32_t a = h_[0], b = h_[1], c = h_[2], d = h_[3];
    std::uint32_t e = h_[4], f = h_[5], g = h_[6], hh = h_[7];
    for (int i = 0; i < 64; ++i) {
      std::uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
      std::uint32_t ch = (e & f) ^ (~e & g);
      std::uint32_t t1 = hh + s1 + ch + k[i] + w[i];
      std::uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
      std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
      std::uint32_t t2 = s0 + maj;
      hh = g;
      g = f;
      f = e;
      e = d + t1;
      d = c;
      c = b;
      b = a;
      a = t1 + t2;
    }
    h_[0] += a;
    h_[1] += b;
    h_[2] += c;
    h_[3] += d;
    h_[4] += e;
    h_[5] += f;
    h_[6] += g;
    h_[7] += hh;
  }

  std::uint32_t h_[8];
  std::uint8_t buf_[64];
  std::size_t fill_ = 0;
  std::uint64_t total_ = 0;
};

inline std::string sha256_hex(const std::string& data) {
  Sha256 h;
  h.update(data.data(), data.size());
  return h.hex_digest();
}

inline std::string sha256_hex(const std::vector<std::uint8_t>& data) {
  Sha256 h;
  h.update(data.data(), data.size());
  return h.hex_digest();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Foundry package
// ---------------------------------------------------------------------------

struct PackageInputs {
  std::vector<std::uint8_t> layout_gds;
  std::vector<std::uint8_t> wafer_gds;
  nlohmann::ordered_json drc_report;
  nlohmann::ordered_json tapeout_report;
  std::string step_plan_csv;
  nlohmann::ordered_json wafer_plan;
  std::vector<TrapezoidSet> mask;  // one .trap file each
  nlohmann::ordered_json jobdeck;
  std::size_t drc_violation_count = 0;
  std::string first_violation;  // named in the refusal message
  bool tapeout_pass = false;
  bool waiver = false;
  std::string waiver_note;
};

// Writes the package into `out_dir` via a temp directory + rename. Refuses
// (leaving no trace on disk) when the gate fails and no waiver is set.
inline std::filesystem::path export_package(const PackageInputs& in,
                                            const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  if ((in.drc_violation_count > 0 || !in.tapeout_pass) && !in.waiver) {
    std::string why;
    if (in.drc_violation_count > 0) {
      why = std::to_string(in.drc_violation_count) + " DRC violations";
      if (!in.first_violation.empty()) why += " (first: " + in.first_violation + ")";
    }
    if (!in.tapeout_pass) why += (why.empty() ? "" : ", ") + std::string("tape-out gate failed");
    throw Error("foundry package refused: " + why +
                " (use a waiver to override)");
  }
  if (fs::exists(out_dir))
    throw Error("output package directory '" + out_dir.string() +
                "' already exists");
  fs::path tmp = out_dir;
  tmp += ".tmp";
  std::error_code ec;
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp / "mask");

  std::map<std::string, std::string> checksums;
  auto write_bytes = [&](const std::string& rel, const void* data,
                         std::size_t size) {
    std::ofstream f(tmp / rel, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + rel);
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    f.close();
    detail::Sha256 h;
    h.update(data, size);
    checksums[rel] = h.hex_digest();
  };
  auto write_text = [&](const std::string& rel, const std::string& text) {
    write_bytes(rel, text.data(), text.size());
  };

  write_bytes("layout.gds", in.layout_gds.data(), in.layout_gds.size());
  write_bytes("wafer.gds", in.wafer_gds.data(), in.wafer_gds.size());
  write_text("drc_report.json", in.drc_report.dump(2) + "\n");
  write_text("tapeout_report.json", in.tapeout_report.dump(2) + "\n");
  write_text("step_plan.csv", in.step_plan_csv);
  write_text("wafer_plan.json", in.wafer_plan.dump(2) + "\n");
  for (const TrapezoidSet& set : in.mask)
    write_text("mask/" + std::to_string(set.layer) + "_" +
                   std::to_string(set.datatype) + ".trap",
               trap_file_text(set));
  write_text("jobdeck.json", in.jobdeck.dump(2) + "\n");

  nlohmann::ordered_json manifest;
  manifest["package"] = "foundry_submission";
  manifest["version"] = 1;
  manifest["gate"] = {{"drc_violations", in.drc_violation_count},
                      {"tapeout", in.tapeout_pass ? "pass" : "fail"},
                      {"waiver", in.waiver}};
  if (in.waiver && !in.waiver_note.empty())
    manifest["gate"]["waiver_note"] = in.waiver_note;
  manifest["files"] = nlohmann::ordered_json::array();
  for (const auto& [rel, digest] : checksums)
    manifest["files"].push_back({{"path", rel}, {"sha256", digest}});
  write_text("manifest.json", manifest.dump(2) + "\n");

  // verify by re-reading before the final rename
  for (const auto& [rel, digest] : checksums) {
    std::ifstream f(tmp / rel, std::ios::binary);
    std::string data((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
    if (detail::sha256_hex(data) != digest)
      throw Error("checksum verification failed for " + rel);
  }

  fs::rename(tmp, out_dir);
  return out_dir;
}

}  // namespace qflow::mdp
