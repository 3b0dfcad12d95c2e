#pragma once

// GDSII stream reader/writer and hierarchy flattener. Records are big-endian
// [u16 length][u8 record type][u8 data type]; coordinates are signed 32-bit
// database units. The database unit is normalized to 1 nm at flatten time
// (exact integer scaling); layouts keep the unit they were imported with so
// tape-out checks can flag off-grid files.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <deque>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qflow/core.hpp"
#include "qflow/geometry.hpp"

namespace qflow::gds {

using geom::Coord;
using geom::Point;

// ---------------------------------------------------------------------------
// Layout model
// ---------------------------------------------------------------------------

enum class ElementKind { Boundary, Path, Text };

struct Element {
  ElementKind kind = ElementKind::Boundary;
  int layer = 0;
  int datatype = 0;
  std::vector<Point> coords;  // boundary: open ring; path: centerline; text: 1 pt
  Coord width = 0;            // path only
  geom::Endcap endcap = geom::Endcap::Flush;
  std::string text;  // text only
};

struct ArraySpec {
  int columns = 1;
  int rows = 1;
  Point col_step;  // post-transform lattice vectors, as stored in the stream
  Point row_step;
};

struct CellRef {
  std::string target;
  Point translation;
  double rotation_deg = 0.0;  // CCW; multiples of 90 are applied exactly
  bool reflect = false;       // mirror about x before rotation
  double magnification = 1.0;
  std::optional<ArraySpec> array;
};

struct Cell {
  std::string name;
  std::vector<Element> elements;
  std::vector<CellRef> refs;
};

struct Layout {
  std::string library_name = "LIB";
  std::int64_t db_unit_nm = 1;  // nanometers per database unit
  double user_unit = 1e-6;      // meters per user unit
  std::deque<Cell> cells;  // deque: references stay valid as cells are added
  std::string top_cell;
  Warnings warnings;

  const Cell* find_cell(const std::string& name) const {
    for (const Cell& c : cells)
      if (c.name == name) return &c;
    return nullptr;
  }
  Cell& cell(const std::string& name) {
    for (Cell& c : cells)
      if (c.name == name) return c;
    cells.push_back(Cell{name, {}, {}});
    return cells.back();
  }

  // Unique names, resolvable references, acyclic reference graph, top present.
  // Throws Error on violation.
  void validate() const;
  // Max reference depth from `top` (1 = leaf cell).
  int reference_depth(const std::string& top) const;
};

namespace detail {

inline void check_acyclic(const Layout& layout) {
  std::map<std::string, int> color;  // 0 new, 1 active, 2 done
  std::vector<std::string> stack;
  struct Frame {
    const Cell* cell;
    std::size_t next_ref;
  };
  for (const Cell& start : layout.cells) {
    if (color[start.name] != 0) continue;
    std::vector<Frame> frames{{&start, 0}};
    color[start.name] = 1;
    stack.push_back(start.name);
    while (!frames.empty()) {
      Frame& f = frames.back();
      if (f.next_ref >= f.cell->refs.size()) {
        color[f.cell->name] = 2;
        stack.pop_back();
        frames.pop_back();
        continue;
      }
      const CellRef& r = f.cell->refs[f.next_ref++];
      const Cell* child = layout.find_cell(r.target);
      if (!child) throw Error("reference to undefined cell '" + r.target + "'");
      int c = color[child->name];
      if (c == 1) {
        std::string path;
        for (const std::string& s : stack) path += s + " -> ";
        throw Error("cyclic cell reference: " + path + child->name);
      }
      if (c == 0) {
        color[child->name] = 1;
        stack.push_back(child->name);
        frames.push_back({child, 0});
      }
    }
  }
}

}  // namespace detail

inline void Layout::validate() const {
  std::set<std::string> names;
  for (const Cell& c : cells) {
    if (c.name.empty()) throw Error("cell with empty name");
    if (!names.insert(c.name).second)
      throw Error("duplicate cell name '" + c.name + "'");
  }
  for (const Cell& c : cells)
    for (const CellRef& r : c.refs) {
      if (!find_cell(r.target))
        throw Error("cell '" + c.name + "' references undefined cell '" +
                    r.target + "'");
      if (r.array && (r.array->columns < 1 || r.array->rows < 1))
        throw Error("array reference in '" + c.name + "' has empty extent");
    }
  detail::check_acyclic(*this);
  if (top_cell.empty() || !find_cell(top_cell))
    throw Error("no top cell designated");
  if (db_unit_nm < 1) throw Error("database unit below 1 nm");
}

inline int Layout::reference_depth(const std::string& top) const {
  const Cell* c = find_cell(top);
  if (!c) throw Error("unknown cell '" + top + "'");
  int deepest = 1;
  for (const CellRef& r : c->refs)
    deepest = std::max(deepest, 1 + reference_depth(r.target));
  return deepest;
}

// ---------------------------------------------------------------------------
// Stream codec
// ---------------------------------------------------------------------------

namespace rec {
constexpr std::uint8_t HEADER = 0x00, BGNLIB = 0x01, LIBNAME = 0x02,
                       UNITS = 0x03, ENDLIB = 0x04, BGNSTR = 0x05,
                       STRNAME = 0x06, ENDSTR = 0x07, BOUNDARY = 0x08,
                       PATH = 0x09, SREF = 0x0A, AREF = 0x0B, TEXT = 0x0C,
                       LAYER = 0x0D, DATATYPE = 0x0E, WIDTH = 0x0F, XY = 0x10,
                       ENDEL = 0x11, SNAME = 0x12, COLROW = 0x13,
                       TEXTTYPE = 0x16, STRING = 0x19, STRANS = 0x1A,
                       MAG = 0x1B, ANGLE = 0x1C, PATHTYPE = 0x21;
}

namespace detail {

inline std::array<std::uint8_t, 8> encode_real8(double value) {
  std::array<std::uint8_t, 8> b{};
  if (value == 0.0) return b;
  bool neg = value < 0;
  double v = std::abs(value);
  int exp16 = 0;
  while (v >= 1.0) {
    v /= 16.0;
    ++exp16;
  }
  while (v < 1.0 / 16.0) {
    v *= 16.0;
    --exp16;
  }
  auto mant = static_cast<std::uint64_t>(std::llround(std::ldexp(v, 56)));
  if (mant >= (1ull << 56)) {
    mant >>= 4;
    ++exp16;
  }
  b[0] = static_cast<std::uint8_t>((neg ? 0x80 : 0x00) | ((exp16 + 64) & 0x7f));
  for (int i = 0; i < 7; ++i)
    b[1 + i] = static_cast<std::uint8_t>(mant >> (8 * (6 - i)));
  return b;
}

inline double decode_real8(const std::uint8_t* b) {
  int exp16 = (b[0] & 0x7f) - 64;
  std::uint64_t mant = 0;
  for (int i = 0; i < 7; ++i) mant = (mant << 8) | b[1 + i];
  double v = std::ldexp(static_cast<double>(mant), -56) * std::pow(16.0, exp16);
  return (b[0] & 0x80) ? -v : v;
}

class Writer {
public:
  std::vector<std::uint8_t> bytes;

  void record(std::uint8_t type, std::uint8_t dtype,
              const std::vector<std::uint8_t>& payload = {}) {
    std::size_t len = payload.size() + 4;
    if (len > 0xffff) throw Error("GDSII record too long");
    bytes.push_back(static_cast<std::uint8_t>(len >> 8));
    bytes.push_back(static_cast<std::uint8_t>(len & 0xff));
    bytes.push_back(type);
    bytes.push_back(dtype);
    bytes.insert(bytes.end(), payload.begin(), payload.end());
  }
  static void put_i16(std::vector<std::uint8_t>& p, std::int32_t v) {
    p.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    p.push_back(static_cast<std::uint8_t>(v & 0xff));
  }
  static void put_i32(std::vector<std::uint8_t>& p, std::int64_t v) {
    for (int s = 24; s >= 0; s -= 8)
      p.push_back(static_cast<std::uint8_t>((v >> s) & 0xff));
  }
  void i16(std::uint8_t type, std::initializer_list<std::int32_t> vals) {
    std::vector<std::uint8_t> p;
    for (auto v : vals) put_i16(p, v);
    record(type, 2, p);
  }
  void str(std::uint8_t type, const std::string& s) {
    std::vector<std::uint8_t> p(s.begin(), s.end());
    if (p.size() % 2) p.push_back(0);
    record(type, 6, p);
  }
  void real8(std::uint8_t type, std::initializer_list<double> vals) {
    std::vector<std::uint8_t> p;
    for (double v : vals) {
      auto b = encode_real8(v);
      p.insert(p.end(), b.begin(), b.end());
    }
    record(type, 5, p);
  }
  void xy(const std::vector<Point>& pts, bool close) {
    std::vector<std::uint8_t> p;
    auto put_pt = [&](const Point& q) {
      if (q.x < -2147483648LL || q.x > 2147483647LL || q.y < -2147483648LL ||
          q.y > 2147483647LL)
        throw Error("coordinate overflows 32-bit database units");
      put_i32(p, q.x);
      put_i32(p, q.y);
    };
    for (const Point& q : pts) put_pt(q);
    if (close && !pts.empty()) put_pt(pts.front());
    record(rec::XY, 3, p);
  }
};

struct RawRecord {
  std::size_t offset = 0;
  std::uint8_t type = 0;
  std::uint8_t dtype = 0;
  const std::uint8_t* data = nullptr;
  std::size_t len = 0;

  std::int32_t i16_at(std::size_t i) const {
    auto v = static_cast<std::int16_t>((data[2 * i] << 8) | data[2 * i + 1]);
    return v;
  }
  std::int64_t i32_at(std::size_t i) const {
    std::uint32_t u = 0;
    for (int k = 0; k < 4; ++k) u = (u << 8) | data[4 * i + k];
    return static_cast<std::int32_t>(u);
  }
  double real8_at(std::size_t i) const { return decode_real8(data + 8 * i); }
  std::string str() const {
    std::string s(reinterpret_cast<const char*>(data), len);
    while (!s.empty() && s.back() == '\0') s.pop_back();
    return s;
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// parse_gds
// ---------------------------------------------------------------------------

inline Layout parse_gds(const std::vector<std::uint8_t>& bytes) {
  Layout layout;
  layout.library_name.clear();
  bool saw_header = false, saw_units = false, saw_endlib = false;

  Cell* cur_cell = nullptr;
  std::optional<Element> cur_elem;
  std::optional<CellRef> cur_ref;
  bool cur_ref_is_array = false;
  int cur_colrow[2] = {1, 1};
  std::vector<Point> cur_ref_xy;
  // (cell index, ref index) -> byte offset, for undefined-reference reports
  std::vector<std::pair<std::pair<std::size_t, std::size_t>, std::size_t>>
      ref_offsets;

  std::size_t pos = 0;
  while (pos < bytes.size()) {
    if (pos + 4 > bytes.size())
      throw ParseError("truncated record header", pos);
    std::size_t len = (bytes[pos] << 8) | bytes[pos + 1];
    if (len < 4) {
      if (len == 0) break;  // optional zero padding at end of tape
      throw ParseError("record length below header size", pos);
    }
    if (pos + len > bytes.size()) throw ParseError("truncated record", pos);
    detail::RawRecord r{pos, bytes[pos + 2], bytes[pos + 3],
                        bytes.data() + pos + 4, len - 4};

    switch (r.type) {
      case rec::HEADER:
        saw_header = true;
        break;
      case rec::BGNLIB:
        break;  // timestamps ignored
      case rec::LIBNAME:
        layout.library_name = r.str();
        break;
      case rec::UNITS: {
        if (r.len < 16) throw ParseError("UNITS record too short", pos);
        saw_units = true;
        double dbu_user = r.real8_at(0);
        double dbu_m = r.real8_at(1);
        if (dbu_m <= 0 || dbu_user <= 0)
          throw ParseError("non-positive units", pos);
        double nm = dbu_m * 1e9;
        auto nm_int = static_cast<std::int64_t>(std::llround(nm));
        if (nm_int < 1 || std::abs(nm - static_cast<double>(nm_int)) > 1e-6 * nm)
          throw ParseError("database unit is not an integral number of nm", pos);
        layout.db_unit_nm = nm_int;
        layout.user_unit = dbu_m / dbu_user;
        if (nm_int != 1)
          layout.warnings.add("database unit is " + std::to_string(nm_int) +
                              " nm; geometry will be scaled to 1 nm on flatten");
        break;
      }
      case rec::BGNSTR:
        layout.cells.emplace_back();
        cur_cell = &layout.cells.back();
        break;
      case rec::STRNAME:
        if (!cur_cell) throw ParseError("STRNAME outside structure", pos);
        cur_cell->name = r.str();
        break;
      case rec::ENDSTR:
        if (cur_elem || cur_ref)
          throw ParseError("structure ends inside an open element", pos);
        cur_cell = nullptr;
        break;
      case rec::BOUNDARY:
      case rec::PATH:
      case rec::TEXT:
        if (!cur_cell) throw ParseError("element outside structure", pos);
        cur_elem = Element{};
        cur_elem->kind = r.type == rec::BOUNDARY ? ElementKind::Boundary
                         : r.type == rec::PATH   ? ElementKind::Path
                                                 : ElementKind::Text;
        break;
      case rec::SREF:
      case rec::AREF:
        if (!cur_cell) throw ParseError("reference outside structure", pos);
        cur_ref = CellRef{};
        cur_ref_is_array = r.type == rec::AREF;
        cur_colrow[0] = cur_colrow[1] = 1;
        cur_ref_xy.clear();
        ref_offsets.push_back(
            {{layout.cells.size() - 1, cur_cell->refs.size()}, pos});
        break;
      case rec::LAYER:
        if (cur_elem) cur_elem->layer = r.i16_at(0);
        break;
      case rec::DATATYPE:
      case rec::TEXTTYPE:
        if (cur_elem) cur_elem->datatype = r.i16_at(0);
        break;
      case rec::WIDTH:
        if (cur_elem) cur_elem->width = r.i32_at(0);
        break;
      case rec::PATHTYPE:
        if (cur_elem) {
          int pt = r.i16_at(0);
          cur_elem->endcap = pt == 1   ? geom::Endcap::Round
                             : pt == 2 ? geom::Endcap::HalfExt
                                       : geom::Endcap::Flush;
          if (pt > 2)
            layout.warnings.add("unsupported path type " + std::to_string(pt) +
                                ", treated as flush");
        }
        break;
      case rec::STRING:
        if (cur_elem) cur_elem->text = r.str();
        break;
      case rec::SNAME:
        if (cur_ref) cur_ref->target = r.str();
        break;
      case rec::STRANS:
        if (cur_ref && r.len >= 2)
          cur_ref->reflect = (r.data[0] & 0x80) != 0;
        break;
      case rec::MAG:
        if (cur_ref) cur_ref->magnification = r.real8_at(0);
        break;
      case rec::ANGLE:
        if (cur_ref) cur_ref->rotation_deg = r.real8_at(0);
        break;
      case rec::COLROW:
        cur_colrow[0] = r.i16_at(0);
        cur_colrow[1] = r.i16_at(1);
        break;
      case rec::XY: {
        std::size_t npts = r.len / 8;
        std::vector<Point> pts;
        pts.reserve(npts);
        for (std::size_t i = 0; i < npts; ++i)
          pts.push_back({r.i32_at(2 * i), r.i32_at(2 * i + 1)});
        if (cur_elem) {
          if (cur_elem->kind == ElementKind::Boundary) {
            if (pts.size() >= 2 && pts.front() == pts.back()) {
              pts.pop_back();
            } else {
              layout.warnings.add("boundary ring not explicitly closed at byte " +
                                  std::to_string(pos));
            }
          }
          cur_elem->coords = std::move(pts);
        } else if (cur_ref) {
          cur_ref_xy = std::move(pts);
        }
        break;
      }
      case rec::ENDEL:
        if (!cur_cell) throw ParseError("ENDEL outside structure", pos);
        if (cur_elem) {
          if (cur_elem->kind == ElementKind::Boundary &&
              cur_elem->coords.size() < 3)
            layout.warnings.add("degenerate boundary (<3 vertices) at byte " +
                                std::to_string(pos));
          if (cur_elem->kind == ElementKind::Path &&
              (cur_elem->coords.size() < 2 || cur_elem->width <= 0))
            layout.warnings.add("degenerate path at byte " + std::to_string(pos));
          cur_cell->elements.push_back(std::move(*cur_elem));
          cur_elem.reset();
        } else if (cur_ref) {
          if (cur_ref_xy.empty())
            throw ParseError("reference without XY", pos);
          cur_ref->translation = cur_ref_xy[0];
          if (cur_ref_is_array) {
            if (cur_ref_xy.size() != 3)
              throw ParseError("AREF requires 3 XY points", pos);
            if (cur_colrow[0] < 1 || cur_colrow[1] < 1)
              throw ParseError("AREF with empty extent", pos);
            ArraySpec arr;
            arr.columns = cur_colrow[0];
            arr.rows = cur_colrow[1];
            Point cd = cur_ref_xy[1] - cur_ref_xy[0];
            Point rd = cur_ref_xy[2] - cur_ref_xy[0];
            if (cd.x % arr.columns || cd.y % arr.columns || rd.x % arr.rows ||
                rd.y % arr.rows)
              layout.warnings.add("AREF step not on database grid at byte " +
                                  std::to_string(pos));
            arr.col_step = {cd.x / arr.columns, cd.y / arr.columns};
            arr.row_step = {rd.x / arr.rows, rd.y / arr.rows};
            cur_ref->array = arr;
          }
          cur_cell->refs.push_back(std::move(*cur_ref));
          cur_ref.reset();
        }
        break;
      case rec::ENDLIB:
        saw_endlib = true;
        break;
      default:
        layout.warnings.add("unknown record type 0x" + [&] {
          char buf[8];
          std::snprintf(buf, sizeof buf, "%02x", r.type);
          return std::string(buf);
        }() + " skipped at byte " + std::to_string(pos));
        break;
    }
    pos += len;
    if (saw_endlib) break;
  }

  if (!saw_header) throw ParseError("missing HEADER record", 0);
  if (!saw_units) throw ParseError("missing UNITS record", 0);
  if (!saw_endlib) throw ParseError("missing ENDLIB record", bytes.size());
  if (layout.library_name.empty()) layout.library_name = "LIB";

  // undefined references, with the offset of the offending SREF/AREF
  for (const auto& [key, offset] : ref_offsets) {
    const CellRef& r = layout.cells[key.first].refs[key.second];
    if (!layout.find_cell(r.target))
      throw ParseError("reference to undefined cell '" + r.target + "'", offset);
  }
  try {
    detail::check_acyclic(layout);
  } catch (const Error& e) {
    throw ParseError(e.what(), 0);
  }

  // top cell: the unique unreferenced cell (first in file order if several)
  std::set<std::string> referenced;
  for (const Cell& c : layout.cells)
    for (const CellRef& r : c.refs) referenced.insert(r.target);
  std::vector<std::string> roots;
  for (const Cell& c : layout.cells)
    if (!referenced.count(c.name)) roots.push_back(c.name);
  if (layout.cells.empty()) {
    layout.warnings.add("library contains no cells");
  } else if (roots.empty()) {
    throw ParseError("no unreferenced top cell found", 0);
  } else {
    layout.top_cell = roots.front();
    if (roots.size() > 1)
      layout.warnings.add("multiple root cells; '" + roots.front() +
                          "' designated top");
  }
  return layout;
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Layout parse_gds_file(const std::string& path) {
  return parse_gds(read_file(path));
}

// ---------------------------------------------------------------------------
// write_gds
// ---------------------------------------------------------------------------

inline std::vector<std::uint8_t> write_gds(const Layout& layout) {
  layout.validate();
  detail::Writer w;
  w.i16(rec::HEADER, {600});
  // zeroed timestamps keep output byte-identical run to run
  w.i16(rec::BGNLIB, {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  w.str(rec::LIBNAME, layout.library_name);
  double dbu_m = static_cast<double>(layout.db_unit_nm) * 1e-9;
  w.real8(rec::UNITS, {dbu_m / layout.user_unit, dbu_m});
  for (const Cell& c : layout.cells) {
    w.i16(rec::BGNSTR, {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
    w.str(rec::STRNAME, c.name);
    for (const Element& e : c.elements) {
      switch (e.kind) {
        case ElementKind::Boundary:
          w.record(rec::BOUNDARY, 0);
          w.i16(rec::LAYER, {e.layer});
          w.i16(rec::DATATYPE, {e.datatype});
          w.xy(e.coords, /*close=*/true);
          break;
        case ElementKind::Path:
          w.record(rec::PATH, 0);
          w.i16(rec::LAYER, {e.layer});
          w.i16(rec::DATATYPE, {e.datatype});
          if (e.endcap != geom::Endcap::Flush)
            w.i16(rec::PATHTYPE, {e.endcap == geom::Endcap::Round ? 1 : 2});
          {
            std::vector<std::uint8_t> p;
            detail::Writer::put_i32(p, e.width);
            w.record(rec::WIDTH, 3, p);
          }
          w.xy(e.coords, /*close=*/false);
          break;
        case ElementKind::Text:
          w.record(rec::TEXT, 0);
          w.i16(rec::LAYER, {e.layer});
          w.i16(rec::TEXTTYPE, {e.datatype});
          w.xy(e.coords, /*close=*/false);
          w.str(rec::STRING, e.text);
          break;
      }
      w.record(rec::ENDEL, 0);
    }
    for (const CellRef& r : c.refs) {
      w.record(r.array ? rec::AREF : rec::SREF, 0);
      w.str(rec::SNAME, r.target);
      if (r.reflect || r.rotation_deg != 0.0 || r.magnification != 1.0) {
        std::vector<std::uint8_t> p;
        detail::Writer::put_i16(p, r.reflect ? static_cast<std::int16_t>(0x8000)
                                             : 0);
        w.record(rec::STRANS, 1, p);
        if (r.magnification != 1.0) w.real8(rec::MAG, {r.magnification});
        if (r.rotation_deg != 0.0) w.real8(rec::ANGLE, {r.rotation_deg});
      }
      if (r.array) {
        w.i16(rec::COLROW, {r.array->columns, r.array->rows});
        Point pc = {r.translation.x + r.array->col_step.x * r.array->columns,
                    r.translation.y + r.array->col_step.y * r.array->columns};
        Point pr = {r.translation.x + r.array->row_step.x * r.array->rows,
                    r.translation.y + r.array->row_step.y * r.array->rows};
        w.xy({r.translation, pc, pr}, /*close=*/false);
      } else {
        w.xy({r.translation}, /*close=*/false);
      }
      w.record(rec::ENDEL, 0);
    }
    w.record(rec::ENDSTR, 0);
  }
  w.record(rec::ENDLIB, 0);
  return w.bytes;
}

inline void write_gds_file(const Layout& layout, const std::string& path) {
  auto bytes = write_gds(layout);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

// ---------------------------------------------------------------------------
// Structural equality (round-trip checks)
// ---------------------------------------------------------------------------

inline bool structurally_equal(const Layout& a, const Layout& b,
                               std::string* why = nullptr) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  if (a.library_name != b.library_name) return fail("library name");
  if (a.db_unit_nm != b.db_unit_nm) return fail("db unit");
  if (std::abs(a.user_unit - b.user_unit) > 1e-12 * std::abs(a.user_unit))
    return fail("user unit");
  if (a.top_cell != b.top_cell) return fail("top cell");
  if (a.cells.size() != b.cells.size()) return fail("cell count");
  for (const Cell& ca : a.cells) {
    const Cell* cb = b.find_cell(ca.name);
    if (!cb) return fail("missing cell " + ca.name);
    if (ca.elements.size() != cb->elements.size())
      return fail("element count in " + ca.name);
    for (std::size_t i = 0; i < ca.elements.size(); ++i) {
      const Element& x = ca.elements[i];
      const Element& y = cb->elements[i];
      if (x.kind != y.kind || x.layer != y.layer || x.datatype != y.datatype ||
          x.coords != y.coords || x.width != y.width || x.endcap != y.endcap ||
          x.text != y.text)
        return fail("element " + std::to_string(i) + " in " + ca.name);
    }
    if (ca.refs.size() != cb->refs.size()) return fail("ref count in " + ca.name);
    for (std::size_t i = 0; i < ca.refs.size(); ++i) {
      const CellRef& x = ca.refs[i];
      const CellRef& y = cb->refs[i];
      bool arr_eq = (!x.array && !y.array) ||
                    (x.array && y.array && x.array->columns == y.array->columns &&
                     x.array->rows == y.array->rows &&
                     x.array->col_step == y.array->col_step &&
                     x.array->row_step == y.array->row_step);
      if (x.target != y.target || x.translation != y.translation ||
          std::abs(x.rotation_deg - y.rotation_deg) > 1e-9 ||
          x.reflect != y.reflect ||
          std::abs(x.magnification - y.magnification) > 1e-12 || !arr_eq)
        return fail("ref " + std::to_string(i) + " in " + ca.name);
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Flatten
// ---------------------------------------------------------------------------

struct Transform {
  bool reflect = false;
  double angle_deg = 0.0;
  double mag = 1.0;
  Point translate;

  static Transform from_ref(const CellRef& r) {
    return {r.reflect, r.rotation_deg, r.magnification, r.translation};
  }

  // quarter-turn count when the rotation is an exact multiple of 90 degrees
  std::optional<int> quarter() const {
    double a = std::fmod(angle_deg, 360.0);
    if (a < 0) a += 360.0;
    for (int q = 0; q < 4; ++q)
      if (std::abs(a - 90.0 * q) < 1e-9) return q;
    return std::nullopt;
  }
  bool exact() const { return mag == 1.0 && quarter().has_value(); }

  Point apply(const Point& p, std::uint64_t* snaps = nullptr) const {
    Coord x = p.x, y = p.y;
    if (reflect) y = -y;
    if (auto q = quarter(); q && mag == 1.0) {
      for (int i = 0; i < *q; ++i) {
        Coord t = x;
        x = -y;
        y = t;
      }
      return {x + translate.x, y + translate.y};
    }
    double rad = angle_deg * M_PI / 180.0;
    double c = std::cos(rad), s = std::sin(rad);
    double fx = (static_cast<double>(x) * c - static_cast<double>(y) * s) * mag;
    double fy = (static_cast<double>(x) * s + static_cast<double>(y) * c) * mag;
    auto rx = static_cast<Coord>(std::llround(fx));
    auto ry = static_cast<Coord>(std::llround(fy));
    if (snaps && (std::abs(fx - static_cast<double>(rx)) > 1e-6 ||
                  std::abs(fy - static_cast<double>(ry)) > 1e-6))
      ++*snaps;
    return {rx + translate.x, ry + translate.y};
  }

  // apply `inner` first, then `outer`
  static Transform compose(const Transform& outer, const Transform& inner) {
    Transform t;
    t.reflect = outer.reflect != inner.reflect;
    t.angle_deg = outer.angle_deg +
                  (outer.reflect ? -inner.angle_deg : inner.angle_deg);
    t.mag = outer.mag * inner.mag;
    t.translate = outer.apply(inner.translate);
    return t;
  }
};

struct FlatPolygon {
  int layer = 0;
  int datatype = 0;
  geom::Polygon poly;
  geom::Rect bbox;
  std::string provenance;  // cell chain + element ordinal
};

struct FlatText {
  int layer = 0;
  int datatype = 0;
  Point position;
  std::string text;
  std::string provenance;
};

struct FlatLayout {
  std::int64_t db_unit_nm = 1;  // always 1 after flatten normalization
  std::vector<FlatPolygon> polygons;
  std::vector<FlatText> texts;
  geom::Rect bounds = geom::Rect::empty();
  Warnings warnings;

  std::map<std::pair<int, int>, std::size_t> layer_counts() const {
    std::map<std::pair<int, int>, std::size_t> m;
    for (const FlatPolygon& p : polygons) ++m[{p.layer, p.datatype}];
    return m;
  }
};

namespace detail {

struct Flattener {
  const Layout& layout;
  FlatLayout out;
  int depth = 0;

  void emit_cell(const Cell& cell, const Transform& t, const std::string& prov) {
    if (++depth > 64) throw Error("reference depth exceeds 64");
    const std::int64_t scale = layout.db_unit_nm;
    for (std::size_t ei = 0; ei < cell.elements.size(); ++ei) {
      const Element& e = cell.elements[ei];
      auto xf = [&](const Point& p) {
        Point q = t.apply({p.x * scale, p.y * scale}, &out.warnings.grid_snaps);
        return q;
      };
      switch (e.kind) {
        case ElementKind::Boundary: {
          FlatPolygon fp;
          fp.layer = e.layer;
          fp.datatype = e.datatype;
          fp.poly.v.reserve(e.coords.size());
          for (const Point& p : e.coords) fp.poly.v.push_back(xf(p));
          fp.poly.make_ccw();
          fp.bbox = fp.poly.bbox();
          fp.provenance = prov + ":b" + std::to_string(ei);
          out.bounds.include(fp.bbox);
          out.polygons.push_back(std::move(fp));
          break;
        }
        case ElementKind::Path: {
          std::vector<Point> line;
          line.reserve(e.coords.size());
          for (const Point& p : e.coords) line.push_back(xf(p));
          double w = static_cast<double>(e.width * scale) * std::abs(t.mag);
          auto wi = static_cast<Coord>(std::llround(w));
          if (wi <= 0) {
            out.warnings.add("path with non-positive width at " + prov);
            break;
          }
          auto pp = geom::path_to_polygon(line, wi, e.endcap);
          if (pp.self_overlap)
            out.warnings.add("self-overlapping path outline at " + prov + ":p" +
                             std::to_string(ei));
          FlatPolygon fp;
          fp.layer = e.layer;
          fp.datatype = e.datatype;
          fp.poly = std::move(pp.polygon);
          fp.bbox = fp.poly.bbox();
          fp.provenance = prov + ":p" + std::to_string(ei);
          out.bounds.include(fp.bbox);
          out.polygons.push_back(std::move(fp));
          break;
        }
        case ElementKind::Text: {
          FlatText ft;
          ft.layer = e.layer;
          ft.datatype = e.datatype;
          ft.position = e.coords.empty() ? t.translate : xf(e.coords[0]);
          ft.text = e.text;
          ft.provenance = prov + ":t" + std::to_string(ei);
          out.texts.push_back(std::move(ft));
          break;
        }
      }
    }
    for (const CellRef& r : cell.refs) {
      const Cell* child = layout.find_cell(r.target);
      if (!child) throw Error("undefined cell '" + r.target + "'");
      Transform base = Transform::from_ref(r);
      base.translate = {base.translate.x * layout.db_unit_nm,
                        base.translate.y * layout.db_unit_nm};
      int cols = r.array ? r.array->columns : 1;
      int rows = r.array ? r.array->rows : 1;
      int inst = 0;
      for (int row = 0; row < rows; ++row)
        for (int col = 0; col < cols; ++col, ++inst) {
          Transform t2 = base;
          if (r.array) {
            t2.translate.x += (r.array->col_step.x * col +
                               r.array->row_step.x * row) *
                              layout.db_unit_nm;
            t2.translate.y += (r.array->col_step.y * col +
                               r.array->row_step.y * row) *
                              layout.db_unit_nm;
          }
          std::string child_prov =
              prov + "/" + r.target + "[" + std::to_string(inst) + "]";
          emit_cell(*child, Transform::compose(t, t2), child_prov);
        }
    }
    --depth;
  }
};

}  // namespace detail

// Expands the hierarchy under `top` into per-layer polygons in 1 nm units.
// Composed transform order: reflection, rotation, magnification, translation.
inline FlatLayout flatten(const Layout& layout, const std::string& top = "") {
  layout.validate();
  const std::string& root = top.empty() ? layout.top_cell : top;
  const Cell* cell = layout.find_cell(root);
  if (!cell) throw Error("unknown top cell '" + root + "'");
  detail::Flattener f{layout, {}, 0};
  f.out.db_unit_nm = 1;
  f.out.warnings = layout.warnings;
  f.emit_cell(*cell, Transform{}, root);
  if (f.out.polygons.empty() && f.out.texts.empty())
    f.out.bounds = {{0, 0}, {0, 0}};
  return f.out;
}

}  // namespace qflow::gds
