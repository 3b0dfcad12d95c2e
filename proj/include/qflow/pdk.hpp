#pragma once

// PDK rule decks and process stacks: versioned JSON documents that bind
// GDS (layer, datatype) pairs to purposes, carry the DRC thresholds, the
// interlayer alignment table and the fabrication step stack. Decks are
// hot-swappable; the engine only understands the closed purpose/kind sets.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qflow/core.hpp"

namespace qflow::pdk {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Closed enumerations
// ---------------------------------------------------------------------------

enum class Purpose {
  Ground,
  CpwConductor,
  JjBottom,
  JjTop,
  JjLead,
  AirbridgePad,
  AirbridgeSpan,
  Wiring,
  ChipOutline,
  Scribe,
  Text,
};

inline const std::vector<std::pair<Purpose, std::string>>& purpose_names() {
  static const std::vector<std::pair<Purpose, std::string>> names = {
      {Purpose::Ground, "ground"},
      {Purpose::CpwConductor, "cpw_conductor"},
      {Purpose::JjBottom, "jj_bottom"},
      {Purpose::JjTop, "jj_top"},
      {Purpose::JjLead, "jj_lead"},
      {Purpose::AirbridgePad, "airbridge_pad"},
      {Purpose::AirbridgeSpan, "airbridge_span"},
      {Purpose::Wiring, "wiring"},
      {Purpose::ChipOutline, "chip_outline"},
      {Purpose::Scribe, "scribe"},
      {Purpose::Text, "text"},
  };
  return names;
}

inline std::string to_string(Purpose p) {
  for (const auto& [k, v] : purpose_names())
    if (k == p) return v;
  return "?";
}

inline std::optional<Purpose> purpose_from_string(const std::string& s) {
  for (const auto& [k, v] : purpose_names())
    if (v == s) return k;
  return std::nullopt;
}

enum class RuleKind {
  SpacingBetweenPurposes,
  MinWidth,
  OverlapMargin,
  RangeSpan,
  MinPad,
  EdgeClearance,
  SameLayerSpacing,
  Continuity,
};

inline const std::vector<std::pair<RuleKind, std::string>>& rule_kind_names() {
  static const std::vector<std::pair<RuleKind, std::string>> names = {
      {RuleKind::SpacingBetweenPurposes, "spacing_between_purposes"},
      {RuleKind::MinWidth, "min_width"},
      {RuleKind::OverlapMargin, "overlap_margin"},
      {RuleKind::RangeSpan, "range_span"},
      {RuleKind::MinPad, "min_pad"},
      {RuleKind::EdgeClearance, "edge_clearance"},
      {RuleKind::SameLayerSpacing, "same_layer_spacing"},
      {RuleKind::Continuity, "continuity"},
  };
  return names;
}

inline std::string to_string(RuleKind k) {
  for (const auto& [a, b] : rule_kind_names())
    if (a == k) return b;
  return "?";
}

enum class Litho { None, Optical, Ebeam, Oxidation };

inline std::string to_string(Litho l) {
  switch (l) {
    case Litho::None: return "none";
    case Litho::Optical: return "optical";
    case Litho::Ebeam: return "ebeam";
    case Litho::Oxidation: return "oxidation";
  }
  return "?";
}

inline std::optional<Litho> litho_from_string(const std::string& s) {
  if (s == "none") return Litho::None;
  if (s == "optical") return Litho::Optical;
  if (s == "ebeam") return Litho::Ebeam;
  if (s == "oxidation") return Litho::Oxidation;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct LayerPurpose {
  int gds_layer = 0;
  int gds_datatype = 0;
  Purpose purpose = Purpose::Ground;
};

struct RuleSpec {
  std::string id;  // R1..R9
  RuleKind kind = RuleKind::MinWidth;
  std::vector<Purpose> purposes;
  // primary threshold: min_nm / tolerance_nm (R3) / max_gap_nm (R9)
  std::int64_t threshold_nm = 0;
  std::int64_t max_nm = 0;       // range_span upper bound
  std::int64_t slot_max_nm = 0;  // continuity slot search radius
  bool enabled = true;
  std::string description;
};

struct AlignmentSpec {
  Purpose first = Purpose::Ground;
  Purpose second = Purpose::Ground;
  Litho lithography = Litho::Optical;
  std::int64_t sigma_align_nm = 500;  // 3-sigma registration error
  std::optional<std::int64_t> o_design_nm;  // compiles to a REG overlap check
};

struct Exposure {
  double dose = 0;            // mJ/cm^2 (optical) or uC/cm^2 (ebeam)
  std::int64_t focus_offset_nm = 0;
};

struct ProcessLayer {
  int step_order = 0;
  std::string name;
  std::string material;  // sapphire | Nb | Al | AlOx | HR-Si
  std::int64_t thickness_min_nm = 0;
  std::int64_t thickness_max_nm = 0;
  Litho lithography = Litho::None;
  std::string function;
  std::optional<int> gds_layer;  // datatype-wildcard binding
  std::optional<Exposure> exposure;
};

struct ProcessStack {
  std::vector<ProcessLayer> layers;  // ordered by step_order
  double substrate_permittivity = 10.0;

  const ProcessLayer* step_for_layer(int gds_layer) const {
    for (const ProcessLayer& l : layers)
      if (l.gds_layer && *l.gds_layer == gds_layer) return &l;
    return nullptr;
  }
};

struct PdkRuleSet {
  std::string name;
  int schema_version = 1;
  std::string source;
  double user_unit = 1e-6;  // meters per user unit expected by the fab
  std::vector<LayerPurpose> layer_map;
  std::vector<RuleSpec> rules;
  std::vector<AlignmentSpec> alignment;

  std::optional<Purpose> purpose_of(int layer, int datatype) const {
    for (const LayerPurpose& lp : layer_map)
      if (lp.gds_layer == layer && lp.gds_datatype == datatype)
        return lp.purpose;
    return std::nullopt;
  }
  std::vector<std::pair<int, int>> layers_of(Purpose p) const {
    std::vector<std::pair<int, int>> out;
    for (const LayerPurpose& lp : layer_map)
      if (lp.purpose == p) out.push_back({lp.gds_layer, lp.gds_datatype});
    return out;
  }
  const RuleSpec* rule(const std::string& id) const {
    for (const RuleSpec& r : rules)
      if (r.id == id) return &r;
    return nullptr;
  }
};

struct Pdk {
  PdkRuleSet rules;
  ProcessStack stack;
  std::vector<std::string> load_warnings;  // unknown fields etc.
};

// ---------------------------------------------------------------------------
// Loader
// ---------------------------------------------------------------------------

namespace detail {

inline Error schema_error(const std::string& path, const std::string& why) {
  return Error("pdk schema violation at " + path + ": " + why);
}

inline void note_unknown_fields(const json& obj, const std::string& path,
                                const std::set<std::string>& known,
                                std::vector<std::string>& warnings) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!known.count(it.key()))
      warnings.push_back("unknown field " + path + "." + it.key() + " ignored");
}

inline std::int64_t positive_nm(const json& obj, const std::string& key,
                                const std::string& path) {
  if (!obj.contains(key)) throw schema_error(path + "." + key, "missing");
  if (!obj[key].is_number_integer())
    throw schema_error(path + "." + key, "must be an integer (nm)");
  auto v = obj[key].get<std::int64_t>();
  if (v <= 0) throw schema_error(path + "." + key, "threshold must be > 0");
  return v;
}

}  // namespace detail

inline Pdk load_pdk(const json& doc) {
  Pdk pdk;
  auto& warn = pdk.load_warnings;
  if (!doc.is_object()) throw detail::schema_error("$", "document is not an object");
  if (!doc.contains("schema_version"))
    throw detail::schema_error("$.schema_version", "missing");
  pdk.rules.schema_version = doc["schema_version"].get<int>();
  if (!doc.contains("name")) throw detail::schema_error("$.name", "missing");
  pdk.rules.name = doc["name"].get<std::string>();
  pdk.rules.source = doc.value("source", "");
  pdk.rules.user_unit = doc.value("user_unit", 1e-6);
  detail::note_unknown_fields(
      doc, "$",
      {"schema_version", "name", "source", "user_unit", "layer_map", "rules",
       "alignment", "stack", "substrate_permittivity", "description"},
      warn);

  // ---- layer_map
  if (!doc.contains("layer_map") || !doc["layer_map"].is_array())
    throw detail::schema_error("$.layer_map", "missing array");
  std::set<std::pair<int, int>> seen_pairs;
  int outline_count = 0;
  for (std::size_t i = 0; i < doc["layer_map"].size(); ++i) {
    const json& e = doc["layer_map"][i];
    std::string path = "$.layer_map[" + std::to_string(i) + "]";
    LayerPurpose lp;
    lp.gds_layer = e.value("gds_layer", -1);
    lp.gds_datatype = e.value("gds_datatype", 0);
    if (lp.gds_layer < 0 || lp.gds_layer > 255 || lp.gds_datatype < 0 ||
        lp.gds_datatype > 255)
      throw detail::schema_error(path, "layer/datatype out of 0..255");
    std::string ps = e.value("purpose", "");
    auto p = purpose_from_string(ps);
    if (!p) throw detail::schema_error(path + ".purpose", "unknown purpose '" + ps + "'");
    lp.purpose = *p;
    if (!seen_pairs.insert({lp.gds_layer, lp.gds_datatype}).second)
      throw detail::schema_error(path, "duplicate (layer, datatype) pair");
    if (lp.purpose == Purpose::ChipOutline) ++outline_count;
    detail::note_unknown_fields(e, path, {"gds_layer", "gds_datatype", "purpose"},
                                warn);
    pdk.rules.layer_map.push_back(lp);
  }
  if (outline_count != 1)
    throw detail::schema_error("$.layer_map",
                               "chip_outline must map to exactly one pair");

  // ---- rules
  if (!doc.contains("rules") || !doc["rules"].is_array())
    throw detail::schema_error("$.rules", "missing array");
  std::set<std::string> seen_ids;
  for (std::size_t i = 0; i < doc["rules"].size(); ++i) {
    const json& e = doc["rules"][i];
    std::string path = "$.rules[" + std::to_string(i) + "]";
    RuleSpec r;
    r.id = e.value("id", "");
    if (r.id.size() != 2 || r.id[0] != 'R' || r.id[1] < '1' || r.id[1] > '9')
      throw detail::schema_error(path + ".id", "rule id must be R1..R9");
    if (!seen_ids.insert(r.id).second)
      throw detail::schema_error(path + ".id", "duplicate rule id " + r.id);
    std::string ks = e.value("kind", "");
    bool kind_ok = false;
    for (const auto& [k, name] : rule_kind_names())
      if (name == ks) {
        r.kind = k;
        kind_ok = true;
      }
    if (!kind_ok)
      throw detail::schema_error(path + ".kind", "unknown rule kind '" + ks + "'");
    if (!e.contains("purposes") || !e["purposes"].is_array() ||
        e["purposes"].empty())
      throw detail::schema_error(path + ".purposes", "missing array");
    for (const auto& pj : e["purposes"]) {
      auto p = purpose_from_string(pj.get<std::string>());
      if (!p)
        throw detail::schema_error(path + ".purposes",
                                   "unknown purpose '" + pj.get<std::string>() + "'");
      r.purposes.push_back(*p);
    }
    r.enabled = e.value("enabled", true);
    r.description = e.value("description", "");
    std::set<std::string> known = {"id", "kind", "purposes", "enabled",
                                   "description"};
    switch (r.kind) {
      case RuleKind::RangeSpan:
        if (!e.contains("min_nm") || !e.contains("max_nm"))
          throw detail::schema_error(
              path, r.id + " (range_span) requires a [min_nm, max_nm] range");
        r.threshold_nm = detail::positive_nm(e, "min_nm", path);
        r.max_nm = detail::positive_nm(e, "max_nm", path);
        if (r.max_nm < r.threshold_nm)
          throw detail::schema_error(path, "range upper bound below lower bound");
        known.insert({"min_nm", "max_nm"});
        break;
      case RuleKind::OverlapMargin:
        r.threshold_nm = detail::positive_nm(e, "tolerance_nm", path);
        known.insert("tolerance_nm");
        break;
      case RuleKind::Continuity:
        r.threshold_nm = detail::positive_nm(e, "max_gap_nm", path);
        r.slot_max_nm = e.contains("slot_max_nm")
                            ? detail::positive_nm(e, "slot_max_nm", path)
                            : 100000;
        known.insert({"max_gap_nm", "slot_max_nm"});
        break;
      default:
        r.threshold_nm = detail::positive_nm(e, "min_nm", path);
        known.insert("min_nm");
        break;
    }
    detail::note_unknown_fields(e, path, known, warn);
    // every purpose bound by a rule must exist in the layer map
    for (Purpose p : r.purposes) {
      bool found = false;
      for (const LayerPurpose& lp : pdk.rules.layer_map)
        if (lp.purpose == p) found = true;
      if (!found)
        warn.push_back(path + ": purpose " + to_string(p) +
                       " has no layer in layer_map");
    }
    pdk.rules.rules.push_back(std::move(r));
  }

  // ---- alignment
  if (doc.contains("alignment")) {
    for (std::size_t i = 0; i < doc["alignment"].size(); ++i) {
      const json& e = doc["alignment"][i];
      std::string path = "$.alignment[" + std::to_string(i) + "]";
      AlignmentSpec a;
      if (!e.contains("layers") || !e["layers"].is_array() ||
          e["layers"].size() != 2)
        throw detail::schema_error(path + ".layers", "needs a purpose pair");
      auto p1 = purpose_from_string(e["layers"][0].get<std::string>());
      auto p2 = purpose_from_string(e["layers"][1].get<std::string>());
      if (!p1 || !p2)
        throw detail::schema_error(path + ".layers", "unknown purpose");
      a.first = *p1;
      a.second = *p2;
      std::string ls = e.value("lithography", "optical");
      auto l = litho_from_string(ls);
      if (!l || *l == Litho::None || *l == Litho::Oxidation)
        throw detail::schema_error(path + ".lithography",
                                   "must be optical or ebeam");
      a.lithography = *l;
      a.sigma_align_nm = e.contains("sigma_align_nm")
                             ? detail::positive_nm(e, "sigma_align_nm", path)
                             : (a.lithography == Litho::Optical ? 500 : 50);
      if (e.contains("o_design_nm"))
        a.o_design_nm = detail::positive_nm(e, "o_design_nm", path);
      detail::note_unknown_fields(
          e, path, {"layers", "lithography", "sigma_align_nm", "o_design_nm"},
          warn);
      pdk.rules.alignment.push_back(a);
    }
  }

  // ---- stack
  pdk.stack.substrate_permittivity = doc.value("substrate_permittivity", 10.0);
  if (doc.contains("stack")) {
    static const std::set<std::string> materials = {"sapphire", "Nb", "Al",
                                                    "AlOx", "HR-Si"};
    std::set<int> seen_steps;
    std::set<int> seen_layers;
    for (std::size_t i = 0; i < doc["stack"].size(); ++i) {
      const json& e = doc["stack"][i];
      std::string path = "$.stack[" + std::to_string(i) + "]";
      ProcessLayer l;
      l.step_order = e.value("step", -1);
      if (l.step_order < 0) throw detail::schema_error(path + ".step", "missing");
      if (!seen_steps.insert(l.step_order).second)
        throw detail::schema_error(path + ".step", "duplicate step order");
      l.name = e.value("name", "");
      if (l.name.empty()) throw detail::schema_error(path + ".name", "missing");
      l.material = e.value("material", "");
      if (!materials.count(l.material))
        throw detail::schema_error(path + ".material",
                                   "unknown material '" + l.material + "'");
      if (!e.contains("thickness_nm") || !e["thickness_nm"].is_array() ||
          e["thickness_nm"].size() != 2)
        throw detail::schema_error(path + ".thickness_nm", "needs [min, max]");
      l.thickness_min_nm = e["thickness_nm"][0].get<std::int64_t>();
      l.thickness_max_nm = e["thickness_nm"][1].get<std::int64_t>();
      if (l.thickness_min_nm <= 0 || l.thickness_max_nm < l.thickness_min_nm)
        throw detail::schema_error(path + ".thickness_nm", "invalid range");
      auto lt = litho_from_string(e.value("lithography", "none"));
      if (!lt) throw detail::schema_error(path + ".lithography", "unknown kind");
      l.lithography = *lt;
      l.function = e.value("function", "");
      if (e.contains("gds_layer")) {
        l.gds_layer = e["gds_layer"].get<int>();
        if (!seen_layers.insert(*l.gds_layer).second)
          throw detail::schema_error(path + ".gds_layer", "duplicate binding");
      }
      if (e.contains("exposure")) {
        Exposure x;
        x.dose = e["exposure"].value("dose", 0.0);
        x.focus_offset_nm = e["exposure"].value("focus_offset_nm", 0);
        l.exposure = x;
      }
      detail::note_unknown_fields(e, path,
                                  {"step", "name", "material", "thickness_nm",
                                   "lithography", "function", "gds_layer",
                                   "exposure"},
                                  warn);
      pdk.stack.layers.push_back(std::move(l));
    }
    std::sort(pdk.stack.layers.begin(), pdk.stack.layers.end(),
              [](const ProcessLayer& a, const ProcessLayer& b) {
                return a.step_order < b.step_order;
              });
    int substrates = 0;
    for (std::size_t i = 0; i < pdk.stack.layers.size(); ++i) {
      if (pdk.stack.layers[i].step_order != static_cast<int>(i))
        throw detail::schema_error("$.stack",
                                   "step orders must be contiguous from 0");
      if (pdk.stack.layers[i].step_order == 0) {
        ++substrates;
        if (pdk.stack.layers[i].lithography != Litho::None)
          throw detail::schema_error("$.stack[0].lithography",
                                     "substrate must have lithography none");
      }
    }
    if (!pdk.stack.layers.empty() && substrates != 1)
      throw detail::schema_error("$.stack", "exactly one substrate required");
  }
  return pdk;
}

inline Pdk load_pdk_string(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("pdk document does not parse: ") + e.what());
  }
  return load_pdk(doc);
}

inline Pdk load_pdk_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open pdk file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_pdk_string(ss.str());
}

// ---------------------------------------------------------------------------
// Cross-validation (report-only)
// ---------------------------------------------------------------------------

struct ValidationReport {
  std::vector<std::string> gaps;   // must be fixed before the deck is usable
  std::vector<std::string> notes;  // informational
  bool clean() const { return gaps.empty(); }
};

inline ValidationReport validate_pdk(const Pdk& pdk) {
  ValidationReport report;
  // enabled rules need layers for each bound purpose
  for (const RuleSpec& r : pdk.rules.rules) {
    if (!r.enabled) continue;
    for (Purpose p : r.purposes)
      if (pdk.rules.layers_of(p).empty())
        report.gaps.push_back("rule " + r.id + ": purpose " + to_string(p) +
                              " has no (layer, datatype) mapping");
  }
  // every lithographic process layer needs alignment coverage
  for (const ProcessLayer& l : pdk.stack.layers) {
    if (l.lithography != Litho::Optical && l.lithography != Litho::Ebeam)
      continue;
    if (!l.gds_layer) {
      report.gaps.push_back("process step '" + l.name +
                            "' is lithographic but has no gds_layer binding");
      continue;
    }
    bool covered = false;
    for (const LayerPurpose& lp : pdk.rules.layer_map) {
      if (lp.gds_layer != *l.gds_layer) continue;
      for (const AlignmentSpec& a : pdk.rules.alignment)
        if (a.first == lp.purpose || a.second == lp.purpose) covered = true;
    }
    if (!covered)
      report.gaps.push_back("process step '" + l.name +
                            "' has no alignment specification");
  }
  // purposes present in the layer map but checked by no enabled rule
  for (const LayerPurpose& lp : pdk.rules.layer_map) {
    if (lp.purpose == Purpose::Text || lp.purpose == Purpose::Scribe ||
        lp.purpose == Purpose::ChipOutline)
      continue;
    bool covered = false;
    for (const RuleSpec& r : pdk.rules.rules)
      if (r.enabled &&
          std::find(r.purposes.begin(), r.purposes.end(), lp.purpose) !=
              r.purposes.end())
        covered = true;
    if (!covered)
      report.notes.push_back("purpose " + to_string(lp.purpose) +
                             " is mapped but no enabled rule checks it");
  }
  return report;
}

}  // namespace qflow::pdk
