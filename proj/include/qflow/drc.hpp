#pragma once

// DRC engine: evaluates the nine quantum-specific rules (plus the compiled
// interlayer registration rule REG) over a flattened layout. Candidate pairs
// come from per-purpose R-tree queries with threshold-expanded bounds; a
// brute-force mode replaces the index with linear scans for oracle runs.
// Reports are canonically ordered and independent of worker count.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qflow/core.hpp"
#include "qflow/gds.hpp"
#include "qflow/geometry.hpp"
#include "qflow/pdk.hpp"
#include "qflow/process.hpp"
#include "qflow/rtree.hpp"

namespace qflow::drc {

using geom::Coord;
using geom::Point;
using geom::Rect;

struct Violation {
  std::string rule_id;  // R1..R9 or REG
  Rect location;        // tight bounds of the offending geometry
  std::int64_t measured = 0;  // nm, nm^2, ppm or a count; rule-specific
  std::int64_t required = 0;
  std::vector<std::string> subjects;  // provenance of the polygons involved
  std::string message;
};

struct RuleStats {
  std::string rule_id;
  std::size_t checks = 0;
  std::size_t violations = 0;
};

struct ViolationReport {
  std::vector<Violation> violations;
  std::vector<RuleStats> stats;
  std::vector<std::string> errors;  // skipped rules etc.
  std::uint64_t candidate_pairs_examined = 0;
  std::size_t polygon_count = 0;
  double elapsed_ms = 0;  // informational; not part of the canonical report

  std::size_t total_checks() const {
    std::size_t n = 0;
    for (const RuleStats& s : stats) n += s.checks;
    return n;
  }
  bool clean() const { return violations.empty(); }
};

struct Options {
  bool brute_force = false;  // linear-scan candidate search (oracle mode)
  bool run_registration = true;  // compiled REG pass for alignment budgets
};

namespace detail {

// Closest pair of boundary points, for violation locations. Double precision
// is fine here; the measured distance itself is computed exactly elsewhere.
inline std::pair<Point, Point> closest_approach(const geom::Polygon& a,
                                                const geom::Polygon& b) {
  double best = std::numeric_limits<double>::max();
  std::pair<Point, Point> out{a[0], b[0]};
  auto foot = [](const Point& p, const Point& s1, const Point& s2) {
    double vx = double(s2.x - s1.x), vy = double(s2.y - s1.y);
    double len2 = vx * vx + vy * vy;
    double t = len2 == 0 ? 0
                         : ((double(p.x - s1.x)) * vx + (double(p.y - s1.y)) * vy) /
                               len2;
    t = std::clamp(t, 0.0, 1.0);
    return Point{static_cast<Coord>(std::llround(s1.x + t * vx)),
                 static_cast<Coord>(std::llround(s1.y + t * vy))};
  };
  const std::size_t na = a.size(), nb = b.size();
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      const Point &a1 = a[i], &a2 = a[(i + 1) % na];
      const Point &b1 = b[j], &b2 = b[(j + 1) % nb];
      for (const Point& p : {a1, a2}) {
        Point q = foot(p, b1, b2);
        double d = std::hypot(double(p.x - q.x), double(p.y - q.y));
        if (d < best) {
          best = d;
          out = {p, q};
        }
      }
      for (const Point& p : {b1, b2}) {
        Point q = foot(p, a1, a2);
        double d = std::hypot(double(p.x - q.x), double(p.y - q.y));
        if (d < best) {
          best = d;
          out = {q, p};
        }
      }
    }
  }
  return out;
}

inline Rect span_rect(const Point& a, const Point& b) {
  return {{std::min(a.x, b.x), std::min(a.y, b.y)},
          {std::max(a.x, b.x), std::max(a.y, b.y)}};
}

// Candidate search: R-tree or the linear-scan equivalent. Both return the
// same id set (ascending) for a given query rectangle.
class CandidateIndex {
public:
  CandidateIndex(const std::vector<std::uint32_t>& ids,
                 const std::vector<gds::FlatPolygon>& polys, bool brute)
      : ids_(ids), polys_(polys), brute_(brute) {
    if (!brute_) {
      std::vector<geom::SpatialIndex::Entry> es;
      es.reserve(ids.size());
      for (std::uint32_t id : ids) es.push_back({polys[id].bbox, id});
      index_ = geom::SpatialIndex(std::move(es));
    }
  }

  std::vector<std::uint32_t> query(const Rect& r) const {
    if (!brute_) return index_.query(r);
    std::vector<std::uint32_t> out;
    for (std::uint32_t id : ids_)
      if (polys_[id].bbox.intersects(r)) out.push_back(id);
    return out;
  }

  const std::vector<std::uint32_t>& ids() const { return ids_; }

private:
  std::vector<std::uint32_t> ids_;
  const std::vector<gds::FlatPolygon>& polys_;
  bool brute_;
  geom::SpatialIndex index_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

class Engine {
public:
  Engine(const gds::FlatLayout& flat, const pdk::Pdk& pdk, Options opt = {})
      : flat_(flat), pdk_(pdk), opt_(opt) {}

  ViolationReport run() {
    auto t0 = std::chrono::steady_clock::now();
    report_ = ViolationReport{};
    report_.polygon_count = flat_.polygons.size();
    resolve_purposes();
    for (const pdk::RuleSpec& rule : pdk_.rules.rules) {
      if (!rule.enabled) continue;
      run_rule(rule);
    }
    if (opt_.run_registration) run_registration();
    finalize();
    report_.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                  t0)
            .count();
    return report_;
  }

private:
  const gds::FlatLayout& flat_;
  const pdk::Pdk& pdk_;
  Options opt_;
  ViolationReport report_;
  std::map<pdk::Purpose, std::vector<std::uint32_t>> by_purpose_;
  std::map<pdk::Purpose, std::optional<detail::CandidateIndex>> index_cache_;
  std::map<std::string, RuleStats> stats_;

  const geom::Polygon& poly(std::uint32_t id) const {
    return flat_.polygons[id].poly;
  }
  const std::string& prov(std::uint32_t id) const {
    return flat_.polygons[id].provenance;
  }

  void resolve_purposes() {
    for (std::uint32_t i = 0; i < flat_.polygons.size(); ++i) {
      const gds::FlatPolygon& p = flat_.polygons[i];
      auto purpose = pdk_.rules.purpose_of(p.layer, p.datatype);
      if (purpose) by_purpose_[*purpose].push_back(i);
    }
  }

  const detail::CandidateIndex& index_for(pdk::Purpose p) {
    auto& slot = index_cache_[p];
    if (!slot) {
      static const std::vector<std::uint32_t> kEmpty;
      auto it = by_purpose_.find(p);
      slot.emplace(it == by_purpose_.end() ? kEmpty : it->second,
                   flat_.polygons, opt_.brute_force);
    }
    return *slot;
  }

  bool purposes_mapped(const pdk::RuleSpec& rule) {
    for (pdk::Purpose p : rule.purposes)
      if (pdk_.rules.layers_of(p).empty()) {
        report_.errors.push_back("rule " + rule.id + " skipped: purpose " +
                                 pdk::to_string(p) + " has no layer mapping");
        return false;
      }
    return true;
  }

  void add_violation(Violation v) {
    stats_[v.rule_id].violations++;
    report_.violations.push_back(std::move(v));
  }

  void run_rule(const pdk::RuleSpec& rule) {
    stats_[rule.id].rule_id = rule.id;
    if (!purposes_mapped(rule)) return;
    switch (rule.kind) {
      case pdk::RuleKind::SpacingBetweenPurposes:
        check_spacing_between(rule);
        break;
      case pdk::RuleKind::MinWidth:
        check_min_width(rule);
        break;
      case pdk::RuleKind::OverlapMargin:
        check_jj_overlap_margin(rule);
        break;
      case pdk::RuleKind::RangeSpan:
        check_airbridge(rule);
        break;
      case pdk::RuleKind::MinPad:
        check_min_pad(rule);
        break;
      case pdk::RuleKind::EdgeClearance:
        check_edge_clearance(rule);
        break;
      case pdk::RuleKind::SameLayerSpacing:
        check_same_layer_spacing(rule);
        break;
      case pdk::RuleKind::Continuity:
        check_ground_continuity(rule);
        break;
    }
  }

  // Shared worker for the two spacing rules. Chunks run concurrently and
  // merge under a mutex; determinism comes from the canonical final sort.
  void spacing_pass(const pdk::RuleSpec& rule,
                    const std::vector<std::uint32_t>& ids,
                    const detail::CandidateIndex& other, bool same_purpose,
                    const std::string& message) {
    const Coord thr = rule.threshold_nm;
    std::mutex merge_mutex;
    std::uint64_t checks_total = 0;
    std::vector<Violation> found;
    qflow::detail::parallel_chunks(ids.size(), [&](std::size_t, std::size_t begin,
                                                   std::size_t end) {
      std::vector<Violation> local;
      std::uint64_t checks = 0;
      for (std::size_t k = begin; k < end; ++k) {
        std::uint32_t i = ids[k];
        for (std::uint32_t j : other.query(flat_.polygons[i].bbox.expanded(thr))) {
          if (same_purpose && j <= i) continue;  // each unordered pair once
          ++checks;
          auto sp = geom::min_spacing(poly(i), poly(j));
          // touching or overlapping shapes are connected; spacing applies
          // only to positive gaps
          if (sp.kind == geom::SpacingKind::Disjoint && sp.dist < thr) {
            auto [pa, pb] = detail::closest_approach(poly(i), poly(j));
            Violation v;
            v.rule_id = rule.id;
            v.location = detail::span_rect(pa, pb);
            v.measured = sp.dist;
            v.required = thr;
            v.subjects = {prov(i), prov(j)};
            v.message = message;
            local.push_back(std::move(v));
          }
        }
      }
      std::lock_guard<std::mutex> lock(merge_mutex);
      checks_total += checks;
      for (Violation& v : local) found.push_back(std::move(v));
    });
    for (Violation& v : found) add_violation(std::move(v));
    stats_[rule.id].checks += checks_total;
    report_.candidate_pairs_examined += checks_total;
  }

  // ---- R1: spacing between two different purposes (CPW gap)
  void check_spacing_between(const pdk::RuleSpec& rule) {
    if (rule.purposes.size() != 2) return;
    spacing_pass(rule, by_purpose_[rule.purposes[0]],
                 index_for(rule.purposes[1]), /*same_purpose=*/false,
                 pdk::to_string(rule.purposes[0]) + " to " +
                     pdk::to_string(rule.purposes[1]) + " gap below minimum");
  }

  // ---- R8: same-purpose spacing with connected exemption
  void check_same_layer_spacing(const pdk::RuleSpec& rule) {
    for (pdk::Purpose purpose : rule.purposes)
      spacing_pass(rule, by_purpose_[purpose], index_for(purpose),
                   /*same_purpose=*/true,
                   "same-layer " + pdk::to_string(purpose) +
                       " spacing below minimum");
  }

  // ---- R2 / R4: minimum interior width per polygon
  void check_min_width(const pdk::RuleSpec& rule) {
    for (pdk::Purpose purpose : rule.purposes) {
      for (std::uint32_t i : by_purpose_[purpose]) {
        stats_[rule.id].checks++;
        Coord w = geom::min_width(poly(i));
        if (w < rule.threshold_nm) {
          Violation v;
          v.rule_id = rule.id;
          v.location = flat_.polygons[i].bbox;
          v.measured = w;
          v.required = rule.threshold_nm;
          v.subjects = {prov(i)};
          v.message = pdk::to_string(purpose) + " width below minimum";
          add_violation(std::move(v));
        }
      }
    }
  }

  // ---- R6: pad minimum width and bounding box
  void check_min_pad(const pdk::RuleSpec& rule) {
    const Coord thr = rule.threshold_nm;
    for (pdk::Purpose purpose : rule.purposes) {
      for (std::uint32_t i : by_purpose_[purpose]) {
        stats_[rule.id].checks++;
        const Rect& bb = flat_.polygons[i].bbox;
        Coord w = geom::min_width(poly(i));
        Coord worst = std::min({w, bb.width(), bb.height()});
        if (worst < thr) {
          Violation v;
          v.rule_id = rule.id;
          v.location = bb;
          v.measured = worst;
          v.required = thr;
          v.subjects = {prov(i)};
          v.message = pdk::to_string(purpose) + " smaller than minimum pad size";
          add_violation(std::move(v));
        }
      }
    }
  }

  // ---- R3: JJ overlap invariance under the alignment-tolerance shift grid
  void check_jj_overlap_margin(const pdk::RuleSpec& rule) {
    if (rule.purposes.size() != 2) return;
    auto bottoms = by_purpose_[rule.purposes[0]];
    const auto& top_index = index_for(rule.purposes[1]);
    const std::int64_t tol = rule.threshold_nm;
    for (std::uint32_t bi : bottoms) {
      for (std::uint32_t ti : top_index.query(flat_.polygons[bi].bbox.expanded(tol))) {
        report_.candidate_pairs_examined++;
        auto scan = process::scan_overlap(poly(bi), poly(ti), tol);
        if (scan.nominal_nm2 <= 0) continue;  // not an intersecting pair
        stats_[rule.id].checks++;
        std::int64_t dev = scan.max_nm2 - scan.min_nm2;
        // violation when the overlap is not invariant under worst-case shift
        if (static_cast<double>(dev) >
            1e-6 * static_cast<double>(scan.nominal_nm2)) {
          double rel = static_cast<double>(dev) /
                       static_cast<double>(scan.nominal_nm2);
          Violation v;
          v.rule_id = rule.id;
          Rect loc = flat_.polygons[bi].bbox;
          loc.lo.x = std::max(loc.lo.x, flat_.polygons[ti].bbox.lo.x);
          loc.lo.y = std::max(loc.lo.y, flat_.polygons[ti].bbox.lo.y);
          loc.hi.x = std::min(loc.hi.x, flat_.polygons[ti].bbox.hi.x);
          loc.hi.y = std::min(loc.hi.y, flat_.polygons[ti].bbox.hi.y);
          v.location = loc;
          v.measured = static_cast<std::int64_t>(std::llround(rel * 1e6));  // ppm
          v.required = 1;
          v.subjects = {prov(bi), prov(ti)};
          v.message = "junction overlap area varies under +/-" +
                      std::to_string(tol) + " nm misalignment";
          add_violation(std::move(v));
        }
      }
    }
  }

  // ---- R5: airbridge span between its two anchor pads
  void check_airbridge(const pdk::RuleSpec& rule) {
    if (rule.purposes.size() != 2) return;
    auto spans = by_purpose_[rule.purposes[0]];
    const auto& pad_index = index_for(rule.purposes[1]);
    for (std::uint32_t si : spans) {
      stats_[rule.id].checks++;
      std::vector<std::uint32_t> touching;
      for (std::uint32_t pi : pad_index.query(flat_.polygons[si].bbox.expanded(1))) {
        report_.candidate_pairs_examined++;
        if (geom::min_spacing(poly(si), poly(pi)).connected())
          touching.push_back(pi);
      }
      if (touching.size() != 2) {
        Violation v;
        v.rule_id = rule.id;
        v.location = flat_.polygons[si].bbox;
        v.measured = static_cast<std::int64_t>(touching.size());
        v.required = 2;
        v.subjects = {prov(si)};
        v.message = "dangling bridge: span touches " +
                    std::to_string(touching.size()) + " pads instead of 2";
        add_violation(std::move(v));
        continue;
      }
      auto sp = geom::min_spacing(poly(touching[0]), poly(touching[1]));
      Coord span_len = sp.connected() ? 0 : sp.dist;
      if (span_len < rule.threshold_nm || span_len > rule.max_nm) {
        Violation v;
        v.rule_id = rule.id;
        v.location = flat_.polygons[si].bbox;
        v.measured = span_len;
        v.required = span_len < rule.threshold_nm ? rule.threshold_nm : rule.max_nm;
        v.subjects = {prov(si), prov(touching[0]), prov(touching[1])};
        v.message = span_len < rule.threshold_nm
                        ? "airbridge span below minimum"
                        : "airbridge span exceeds maximum";
        add_violation(std::move(v));
      }
    }
  }

  // ---- R7: clearance of functional geometry from the chip outline
  void check_edge_clearance(const pdk::RuleSpec& rule) {
    auto outlines = by_purpose_[pdk::Purpose::ChipOutline];
    if (outlines.size() != 1) {
      report_.errors.push_back(
          "rule " + rule.id + " skipped: expected exactly 1 chip_outline, got " +
          std::to_string(outlines.size()));
      return;
    }
    const geom::Polygon& outline = poly(outlines[0]);
    const Coord thr = rule.threshold_nm;
    for (const auto& [purpose, ids] : by_purpose_) {
      if (purpose == pdk::Purpose::ChipOutline ||
          purpose == pdk::Purpose::Scribe || purpose == pdk::Purpose::Text)
        continue;
      for (std::uint32_t i : ids) {
        stats_[rule.id].checks++;
        const geom::Polygon& f = poly(i);
        bool all_in = true;
        for (const Point& p : f.v)
          if (outline.locate(p) == geom::Containment::Outside) all_in = false;
        bool boundary_contact = false;
        for (std::size_t e = 0; e < f.size() && !boundary_contact; ++e)
          for (std::size_t o = 0; o < outline.size(); ++o)
            if (geom::segments_intersect(f[e], f[(e + 1) % f.size()],
                                         outline[o],
                                         outline[(o + 1) % outline.size()])) {
              boundary_contact = true;
              break;
            }
        bool contained = all_in && !boundary_contact;
        Coord dist = 0;
        if (contained) {
          dist = std::numeric_limits<Coord>::max();
          for (std::size_t e = 0; e < f.size(); ++e)
            for (std::size_t o = 0; o < outline.size(); ++o)
              dist = std::min(dist, geom::detail::segment_dist_floor(
                                        f[e], f[(e + 1) % f.size()], outline[o],
                                        outline[(o + 1) % outline.size()]));
        }
        if (!contained || dist < thr) {
          Violation v;
          v.rule_id = rule.id;
          v.location = flat_.polygons[i].bbox;
          v.measured = contained ? dist : 0;
          v.required = thr;
          v.subjects = {prov(i)};
          v.message = contained
                          ? "functional geometry closer than the edge clearance"
                          : "functional geometry crosses or leaves the chip outline";
          add_violation(std::move(v));
        }
      }
    }
  }

  // ---- R9: ground connectivity + unstitched slot detection
  void check_ground_continuity(const pdk::RuleSpec& rule) {
    auto grounds = by_purpose_[rule.purposes[0]];
    pdk::Purpose bridge_purpose = rule.purposes.size() > 1
                                      ? rule.purposes[1]
                                      : pdk::Purpose::AirbridgeSpan;
    if (grounds.empty()) return;

    // (a) connectivity by union-find; adjacency = touching or overlapping
    std::vector<std::uint32_t> parent(grounds.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::uint32_t(std::uint32_t)> find =
        [&](std::uint32_t x) -> std::uint32_t {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    std::map<std::uint32_t, std::size_t> pos_of;
    for (std::size_t k = 0; k < grounds.size(); ++k) pos_of[grounds[k]] = k;
    const auto& gindex = index_for(rule.purposes[0]);
    for (std::size_t k = 0; k < grounds.size(); ++k) {
      stats_[rule.id].checks++;  // one membership check per ground polygon
      std::uint32_t i = grounds[k];
      for (std::uint32_t j : gindex.query(flat_.polygons[i].bbox)) {
        if (j <= i) continue;
        report_.candidate_pairs_examined++;
        if (geom::min_spacing(poly(i), poly(j)).connected()) {
          std::uint32_t ra = find(static_cast<std::uint32_t>(k));
          std::uint32_t rb = find(static_cast<std::uint32_t>(pos_of[j]));
          if (ra != rb) parent[rb] = ra;
        }
      }
    }
    std::map<std::uint32_t, std::vector<std::uint32_t>> components;
    for (std::size_t k = 0; k < grounds.size(); ++k)
      components[find(static_cast<std::uint32_t>(k))].push_back(grounds[k]);
    if (components.size() > 1) {
      // reference component: the one containing the lowest polygon index
      std::vector<std::pair<std::uint32_t, std::vector<std::uint32_t>>> comps(
          components.begin(), components.end());
      std::sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) {
        return a.second.front() < b.second.front();
      });
      for (std::size_t c = 1; c < comps.size(); ++c) {
        Rect bb = Rect::empty();
        for (std::uint32_t id : comps[c].second) bb.include(flat_.polygons[id].bbox);
        Violation v;
        v.rule_id = rule.id;
        v.location = bb;
        v.measured = static_cast<std::int64_t>(comps.size());
        v.required = 1;
        v.subjects = {prov(comps[c].second.front())};
        v.message = "ground island disconnected from the main ground plane";
        add_violation(std::move(v));
      }
    }

    // (b) slots: antiparallel facing ground edges, separation in
    // (0, slot_max], co-extension above max_gap, no bridge across
    struct GEdge {
      Point a, b;
      std::uint32_t poly_id;
      std::uint32_t edge_idx;
      Rect bbox;
    };
    std::vector<GEdge> gedges;
    for (std::uint32_t i : grounds) {
      const geom::Polygon& g = poly(i);
      geom::Polygon cc = g;
      cc.make_ccw();
      for (std::size_t e = 0; e < cc.size(); ++e) {
        GEdge ge{cc[e], cc[(e + 1) % cc.size()], i,
                 static_cast<std::uint32_t>(e), {}};
        ge.bbox = detail::span_rect(ge.a, ge.b);
        gedges.push_back(ge);
      }
    }
    std::vector<geom::SpatialIndex::Entry> entries;
    entries.reserve(gedges.size());
    for (std::uint32_t k = 0; k < gedges.size(); ++k)
      entries.push_back({gedges[k].bbox, k});
    geom::SpatialIndex eindex(std::move(entries));
    const Coord slot_max = rule.slot_max_nm > 0 ? rule.slot_max_nm : 100000;
    const Coord coext_thr = rule.threshold_nm;
    const auto& span_index = index_for(bridge_purpose);

    auto edge_candidates = [&](std::uint32_t k) {
      if (!opt_.brute_force) return eindex.query(gedges[k].bbox.expanded(slot_max));
      std::vector<std::uint32_t> out;
      Rect q = gedges[k].bbox.expanded(slot_max);
      for (std::uint32_t m = 0; m < gedges.size(); ++m)
        if (gedges[m].bbox.intersects(q)) out.push_back(m);
      return out;
    };

    for (std::uint32_t k = 0; k < gedges.size(); ++k) {
      const GEdge& ei = gedges[k];
      Point di = ei.b - ei.a;
      for (std::uint32_t m : edge_candidates(k)) {
        if (m <= k) continue;
        report_.candidate_pairs_examined++;
        const GEdge& ej = gedges[m];
        Point dj = ej.b - ej.a;
        // antiparallel
        if (geom::I128(di.x) * dj.y - geom::I128(di.y) * dj.x != 0) continue;
        if (geom::I128(di.x) * dj.x + geom::I128(di.y) * dj.y >= 0) continue;
        // facing across exterior: each edge on the other's outward side
        geom::Point no_i{di.y, -di.x};  // outward normal (CCW polygons)
        geom::I128 side_j =
            geom::I128(no_i.x) * ((ej.a.x + ej.b.x) - (ei.a.x + ei.b.x)) +
            geom::I128(no_i.y) * ((ej.a.y + ej.b.y) - (ei.a.y + ei.b.y));
        if (side_j <= 0) continue;
        // separation between the parallel lines
        geom::I128 c = geom::cross(ei.a, ei.b, ej.a);
        geom::I128 len2 = geom::dot(ei.a, ei.b, ei.b);
        Coord sep = geom::detail::isqrt_rational(c * c, len2);
        if (c == 0 || sep == 0 || sep > slot_max) continue;
        // mutual projection overlap (co-extension)
        geom::I128 t1 = geom::dot(ei.a, ei.b, ej.a);
        geom::I128 t2 = geom::dot(ei.a, ei.b, ej.b);
        geom::I128 tlo = std::min(t1, t2), thi = std::max(t1, t2);
        geom::I128 olo = std::max(tlo, geom::I128(0));
        geom::I128 ohi = std::min(thi, len2);
        if (ohi <= olo) continue;
        Coord len_i = geom::detail::isqrt_i128(len2);
        auto at = [&](geom::I128 t) {
          double f = static_cast<double>(t) / static_cast<double>(len2);
          return geom::detail::Vec2d{ei.a.x + f * double(di.x),
                                     ei.a.y + f * double(di.y)};
        };
        auto lift = [&](const geom::detail::Vec2d& p, double fx, double fy) {
          return Point{static_cast<Coord>(std::llround(p.x + fx)),
                       static_cast<Coord>(std::llround(p.y + fy))};
        };
        double nx = double(no_i.x), ny = double(no_i.y);
        double nlen = std::hypot(nx, ny);
        double gapx = nx / nlen * double(sep), gapy = ny / nlen * double(sep);
        auto region_between = [&](geom::I128 a, geom::I128 b) {
          geom::Polygon region;
          auto p0 = at(a);
          auto p1 = at(b);
          region.v = {lift(p0, 0, 0), lift(p1, 0, 0), lift(p1, gapx, gapy),
                      lift(p0, gapx, gapy)};
          region.make_ccw();
          return region;
        };
        // facing edges are only a slot where no ground fills the gap:
        // subtract the projected extent of ground polygons intersecting the
        // region, then examine each uncovered interval on its own
        geom::Polygon full_region = region_between(olo, ohi);
        std::vector<std::pair<geom::I128, geom::I128>> covered;
        for (std::uint32_t gi : gindex.query(full_region.bbox())) {
          report_.candidate_pairs_examined++;
          if (!geom::interiors_overlap(poly(gi), full_region)) continue;
          const Rect& gb = flat_.polygons[gi].bbox;
          geom::I128 g1 = geom::dot(ei.a, ei.b, gb.lo);
          geom::I128 g2 = geom::dot(ei.a, ei.b, gb.hi);
          geom::I128 g3 = geom::dot(ei.a, ei.b, Point{gb.lo.x, gb.hi.y});
          geom::I128 g4 = geom::dot(ei.a, ei.b, Point{gb.hi.x, gb.lo.y});
          covered.push_back({std::min({g1, g2, g3, g4}), std::max({g1, g2, g3, g4})});
        }
        std::sort(covered.begin(), covered.end());
        std::vector<std::pair<geom::I128, geom::I128>> open_spans;
        geom::I128 cursor = olo;
        for (const auto& [c0, c1] : covered) {
          if (c0 > cursor) open_spans.push_back({cursor, std::min(c0, ohi)});
          cursor = std::max(cursor, c1);
          if (cursor >= ohi) break;
        }
        if (cursor < ohi) open_spans.push_back({cursor, ohi});
        for (const auto& [s0, s1] : open_spans) {
          if (s1 <= s0) continue;
          Coord coext = static_cast<Coord>((s1 - s0) / len_i);
          if (coext <= coext_thr) continue;
          stats_[rule.id].checks++;  // an examined slot
          geom::Polygon region = region_between(s0, s1);
          bool bridged = false;
          for (std::uint32_t si : span_index.query(region.bbox())) {
            report_.candidate_pairs_examined++;
            if (geom::min_spacing(poly(si), region).connected()) {
              bridged = true;
              break;
            }
          }
          if (!bridged) {
            Violation v;
            v.rule_id = rule.id;
            v.location = region.bbox();
            v.measured = coext;
            v.required = coext_thr;
            v.subjects = {prov(ei.poly_id), prov(ej.poly_id)};
            v.message = "ground slot of " + std::to_string(sep) +
                        " nm runs unstitched for " + std::to_string(coext) +
                        " nm";
            add_violation(std::move(v));
          }
        }
      }
    }
  }

  // ---- REG: compiled interlayer registration budgets
  void run_registration() {
    bool any = false;
    for (const pdk::AlignmentSpec& a : pdk_.rules.alignment) {
      if (!a.o_design_nm) continue;
      any = true;
      auto budget = process::registration_budget(*a.o_design_nm, a);
      if (budget.infeasible) {
        report_.errors.push_back(
            "REG: infeasible registration budget for (" + pdk::to_string(a.first) +
            ", " + pdk::to_string(a.second) + "): o_min <= 0");
        continue;
      }
      auto firsts = by_purpose_[a.first];
      const auto& second_index = index_for(a.second);
      for (std::uint32_t i : firsts) {
        for (std::uint32_t j : second_index.query(flat_.polygons[i].bbox)) {
          report_.candidate_pairs_examined++;
          if (!geom::interiors_overlap(poly(i), poly(j))) continue;
          stats_["REG"].checks++;
          Rect obb = overlap_bbox(poly(i), poly(j));
          Coord extent = std::min(obb.width(), obb.height());
          if (extent < budget.o_min_nm) {
            Violation v;
            v.rule_id = "REG";
            v.location = obb;
            v.measured = extent;
            v.required = budget.o_min_nm;
            v.subjects = {prov(i), prov(j)};
            v.message = pdk::to_string(a.first) + "/" + pdk::to_string(a.second) +
                        " overlap below the registration budget";
            add_violation(std::move(v));
          }
        }
      }
    }
    if (any) stats_["REG"].rule_id = "REG";
  }

  static Rect overlap_bbox(const geom::Polygon& a, const geom::Polygon& b) {
    Rect out = Rect::empty();
    if (a.rectilinear() && b.rectilinear()) {
      for (const Rect& x : geom::detail::rect_decompose(a))
        for (const Rect& y : geom::detail::rect_decompose(b)) {
          Rect r{{std::max(x.lo.x, y.lo.x), std::max(x.lo.y, y.lo.y)},
                 {std::min(x.hi.x, y.hi.x), std::min(x.hi.y, y.hi.y)}};
          if (r.lo.x < r.hi.x && r.lo.y < r.hi.y) out.include(r);
        }
      return out;
    }
    auto qa = geom::detail::bands_double(a);
    auto qb = geom::detail::bands_double(b);
    for (auto& x : qa) geom::detail::ensure_ccw(x);
    for (auto& y : qb) {
      geom::detail::ensure_ccw(y);
      for (const auto& x : qa) {
        auto c = geom::detail::clip_convex(x, y);
        if (c.size() < 3 || geom::detail::poly_area_double(c) < 0.5) continue;
        for (const auto& p : c)
          out.include(Point{static_cast<Coord>(std::llround(p.x)),
                            static_cast<Coord>(std::llround(p.y))});
      }
    }
    return out;
  }

  void finalize() {
    std::sort(report_.violations.begin(), report_.violations.end(),
              [](const Violation& a, const Violation& b) {
                auto ka = std::tie(a.rule_id, a.location.lo.x, a.location.lo.y,
                                   a.subjects, a.measured, a.message);
                auto kb = std::tie(b.rule_id, b.location.lo.x, b.location.lo.y,
                                   b.subjects, b.measured, b.message);
                return ka < kb;
              });
    for (auto& [id, s] : stats_) {
      s.rule_id = id;
      report_.stats.push_back(s);
    }
    std::sort(report_.stats.begin(), report_.stats.end(),
              [](const RuleStats& a, const RuleStats& b) {
                return a.rule_id < b.rule_id;
              });
  }
};

inline ViolationReport run_drc(const gds::FlatLayout& flat, const pdk::Pdk& pdk,
                               Options opt = {}) {
  return Engine(flat, pdk, opt).run();
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json report_json(const ViolationReport& report,
                                          const std::string& deck_name) {
  nlohmann::ordered_json j;
  j["report"] = "drc";
  j["version"] = 1;
  j["deck"] = deck_name;
  j["polygon_count"] = report.polygon_count;
  j["total_checks"] = report.total_checks();
  j["total_violations"] = report.violations.size();
  j["candidate_pairs_examined"] = report.candidate_pairs_examined;
  j["violations"] = nlohmann::ordered_json::array();
  for (const Violation& v : report.violations) {
    nlohmann::ordered_json vj;
    vj["rule"] = v.rule_id;
    vj["location"] = {{"x_min", v.location.lo.x},
                      {"y_min", v.location.lo.y},
                      {"x_max", v.location.hi.x},
                      {"y_max", v.location.hi.y}};
    vj["measured"] = v.measured;
    vj["required"] = v.required;
    vj["subjects"] = v.subjects;
    vj["message"] = v.message;
    j["violations"].push_back(vj);
  }
  j["stats"] = nlohmann::ordered_json::array();
  for (const RuleStats& s : report.stats)
    j["stats"].push_back({{"rule", s.rule_id},
                          {"checks", s.checks},
                          {"violations", s.violations}});
  j["errors"] = report.errors;
  return j;
}

inline std::string report_text(const ViolationReport& report,
                               const std::string& deck_name) {
  char line[256];
  std::string out;
  out += "DRC report (deck " + deck_name + ")\n";
  std::snprintf(line, sizeof line,
                "polygons %zu, checks %zu, candidate pairs %llu\n",
                report.polygon_count, report.total_checks(),
                static_cast<unsigned long long>(report.candidate_pairs_examined));
  out += line;
  out += "rule   checks  violations\n";
  for (const RuleStats& s : report.stats) {
    std::snprintf(line, sizeof line, "%-5s %7zu %11zu\n", s.rule_id.c_str(),
                  s.checks, s.violations);
    out += line;
  }
  if (report.violations.empty()) {
    out += "clean: 0 violations\n";
  } else {
    out += "violations:\n";
    for (const Violation& v : report.violations) {
      std::snprintf(line, sizeof line,
                    "  %-4s measured %lld required %lld at (%lld, %lld) %s\n",
                    v.rule_id.c_str(), static_cast<long long>(v.measured),
                    static_cast<long long>(v.required),
                    static_cast<long long>(v.location.lo.x),
                    static_cast<long long>(v.location.lo.y), v.message.c_str());
      out += line;
    }
  }
  for (const std::string& e : report.errors) out += "error: " + e + "\n";
  return out;
}

// Violation map: grey layer outlines with red violation markers.
inline std::string report_svg(const ViolationReport& report,
                              const gds::FlatLayout& flat) {
  Rect bb = flat.bounds;
  if (!bb.valid()) bb = {{0, 0}, {1, 1}};
  double w = std::max<Coord>(1, bb.width());
  double h = std::max<Coord>(1, bb.height());
  char buf[512];
  std::string out;
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"%lld %lld "
                "%.0f %.0f\" width=\"800\" height=\"%.0f\">\n",
                static_cast<long long>(bb.lo.x), static_cast<long long>(-bb.hi.y),
                w, h, 800.0 * h / w);
  out += buf;
  for (const gds::FlatPolygon& p : flat.polygons) {
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%lld\" y=\"%lld\" width=\"%lld\" height=\"%lld\" "
                  "fill=\"none\" stroke=\"#999\" stroke-width=\"%.0f\"/>\n",
                  static_cast<long long>(p.bbox.lo.x),
                  static_cast<long long>(-p.bbox.hi.y),
                  static_cast<long long>(std::max<Coord>(1, p.bbox.width())),
                  static_cast<long long>(std::max<Coord>(1, p.bbox.height())),
                  w / 2000.0);
    out += buf;
  }
  for (const Violation& v : report.violations) {
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%lld\" y=\"%lld\" width=\"%lld\" height=\"%lld\" "
                  "fill=\"rgba(255,0,0,0.35)\" stroke=\"red\" "
                  "stroke-width=\"%.0f\"><title>%s: %s</title></rect>\n",
                  static_cast<long long>(v.location.lo.x),
                  static_cast<long long>(-v.location.hi.y),
                  static_cast<long long>(std::max<Coord>(1, v.location.width())),
                  static_cast<long long>(std::max<Coord>(1, v.location.height())),
                  w / 1000.0, v.rule_id.c_str(), v.message.c_str());
    out += buf;
  }
  out += "</svg>\n";
  return out;
}

}  // namespace qflow::drc
