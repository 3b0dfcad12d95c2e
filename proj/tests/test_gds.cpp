#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <vector>

#include "qflow/gds.hpp"

using namespace qflow;
using gds::ElementKind;

namespace {

// Independent little byte builder so the parser is checked against
// hand-constructed streams, not against the library writer.
struct StreamBuilder {
  std::vector<std::uint8_t> bytes;

  void rec(std::uint8_t type, std::uint8_t dtype,
           std::vector<std::uint8_t> payload = {}) {
    std::size_t len = payload.size() + 4;
    bytes.push_back(static_cast<std::uint8_t>(len >> 8));
    bytes.push_back(static_cast<std::uint8_t>(len & 0xff));
    bytes.push_back(type);
    bytes.push_back(dtype);
    bytes.insert(bytes.end(), payload.begin(), payload.end());
  }
  static void i16(std::vector<std::uint8_t>& p, int v) {
    p.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    p.push_back(static_cast<std::uint8_t>(v & 0xff));
  }
  static void i32(std::vector<std::uint8_t>& p, long v) {
    for (int s = 24; s >= 0; s -= 8)
      p.push_back(static_cast<std::uint8_t>((v >> s) & 0xff));
  }
  static std::vector<std::uint8_t> real8(double v) {
    std::vector<std::uint8_t> out(8, 0);
    if (v == 0) return out;
    bool neg = v < 0;
    double a = std::abs(v);
    int e = 0;
    while (a >= 1.0) {
      a /= 16;
      ++e;
    }
    while (a < 1.0 / 16.0) {
      a *= 16;
      --e;
    }
    auto mant = static_cast<std::uint64_t>(std::llround(std::ldexp(a, 56)));
    out[0] = static_cast<std::uint8_t>((neg ? 0x80 : 0) | ((e + 64) & 0x7f));
    for (int i = 0; i < 7; ++i)
      out[1 + i] = static_cast<std::uint8_t>(mant >> (8 * (6 - i)));
    return out;
  }
  void header() {
    std::vector<std::uint8_t> p;
    i16(p, 600);
    rec(0x00, 2, p);
    rec(0x01, 2, std::vector<std::uint8_t>(24, 0));  // BGNLIB
  }
  void libname(const std::string& s) {
    std::vector<std::uint8_t> p(s.begin(), s.end());
    if (p.size() % 2) p.push_back(0);
    rec(0x02, 6, p);
  }
  void units(double dbu_in_user, double dbu_m) {
    std::vector<std::uint8_t> p = real8(dbu_in_user);
    auto q = real8(dbu_m);
    p.insert(p.end(), q.begin(), q.end());
    rec(0x03, 5, p);
  }
  void bgnstr(const std::string& name) {
    rec(0x05, 2, std::vector<std::uint8_t>(24, 0));
    std::vector<std::uint8_t> p(name.begin(), name.end());
    if (p.size() % 2) p.push_back(0);
    rec(0x06, 6, p);
  }
  void boundary(int layer, int dt, std::vector<std::pair<long, long>> pts) {
    rec(0x08, 0);
    std::vector<std::uint8_t> p;
    i16(p, layer);
    rec(0x0d, 2, p);
    p.clear();
    i16(p, dt);
    rec(0x0e, 2, p);
    p.clear();
    for (auto [x, y] : pts) {
      i32(p, x);
      i32(p, y);
    }
    rec(0x10, 3, p);
    rec(0x11, 0);  // ENDEL
  }
  void endstr() { rec(0x07, 0); }
  void endlib() { rec(0x04, 0); }
};

StreamBuilder minimal_stream() {
  StreamBuilder b;
  b.header();
  b.libname("TESTLIB");
  b.units(1e-3, 1e-9);  // 1 nm database unit, micron user unit
  b.bgnstr("TOP");
  b.boundary(1, 0, {{0, 0}, {2000, 0}, {2000, 2000}, {0, 2000}, {0, 0}});
  b.endstr();
  b.endlib();
  return b;
}

gds::Element boundary_el(int layer, int dt, std::vector<geom::Point> pts) {
  gds::Element e;
  e.kind = ElementKind::Boundary;
  e.layer = layer;
  e.datatype = dt;
  e.coords = std::move(pts);
  return e;
}

}  // namespace

TEST_CASE("parse a minimal hand-built stream") {
  auto layout = gds::parse_gds(minimal_stream().bytes);
  CHECK(layout.library_name == "TESTLIB");
  CHECK(layout.db_unit_nm == 1);
  CHECK(layout.user_unit == Catch::Approx(1e-6).epsilon(1e-9));
  REQUIRE(layout.cells.size() == 1);
  CHECK(layout.top_cell == "TOP");
  REQUIRE(layout.cells[0].elements.size() == 1);
  const gds::Element& e = layout.cells[0].elements[0];
  CHECK(e.kind == ElementKind::Boundary);
  CHECK(e.layer == 1);
  CHECK(e.coords.size() == 4);  // closing vertex stripped
  geom::Polygon p{e.coords};
  CHECK(p.area2() == 2LL * 2000 * 2000);  // 4 um^2
}

TEST_CASE("parse errors carry byte offsets") {
  SECTION("truncated record") {
    auto bytes = minimal_stream().bytes;
    bytes.resize(bytes.size() - 3);
    CHECK_THROWS_AS(gds::parse_gds(bytes), qflow::ParseError);
  }
  SECTION("missing HEADER") {
    StreamBuilder b;
    b.libname("X");
    b.units(1e-3, 1e-9);
    b.endlib();
    CHECK_THROWS_WITH(gds::parse_gds(b.bytes),
                      Catch::Matchers::ContainsSubstring("HEADER"));
  }
  SECTION("missing UNITS") {
    StreamBuilder b;
    b.header();
    b.libname("X");
    b.endlib();
    CHECK_THROWS_WITH(gds::parse_gds(b.bytes),
                      Catch::Matchers::ContainsSubstring("UNITS"));
  }
  SECTION("missing ENDLIB") {
    StreamBuilder b;
    b.header();
    b.libname("X");
    b.units(1e-3, 1e-9);
    CHECK_THROWS_WITH(gds::parse_gds(b.bytes),
                      Catch::Matchers::ContainsSubstring("ENDLIB"));
  }
  SECTION("reference to an undefined cell reports the SREF offset") {
    StreamBuilder b;
    b.header();
    b.libname("X");
    b.units(1e-3, 1e-9);
    b.bgnstr("TOP");
    std::size_t sref_offset = b.bytes.size();
    b.rec(0x0a, 0);  // SREF
    std::vector<std::uint8_t> p = {'G', 'H', 'O', 'S', 'T', 0};
    b.rec(0x12, 6, p);  // SNAME
    p.clear();
    StreamBuilder::i32(p, 0);
    StreamBuilder::i32(p, 0);
    b.rec(0x10, 3, p);
    b.rec(0x11, 0);
    b.endstr();
    b.endlib();
    try {
      gds::parse_gds(b.bytes);
      FAIL("expected ParseError");
    } catch (const qflow::ParseError& e) {
      CHECK(e.byte_offset == sref_offset);
      CHECK(std::string(e.what()).find("GHOST") != std::string::npos);
    }
  }
  SECTION("non-integral database unit is rejected") {
    StreamBuilder b;
    b.header();
    b.libname("X");
    b.units(5e-4, 5e-10);  // 0.5 nm
    b.endlib();
    CHECK_THROWS_WITH(gds::parse_gds(b.bytes),
                      Catch::Matchers::ContainsSubstring("integral"));
  }
}

TEST_CASE("coarser integral units are normalized at flatten time") {
  StreamBuilder b;
  b.header();
  b.libname("X");
  b.units(2e-3, 2e-9);  // 2 nm database unit
  b.bgnstr("TOP");
  b.boundary(1, 0, {{0, 0}, {1000, 0}, {1000, 1000}, {0, 1000}, {0, 0}});
  b.endstr();
  b.endlib();
  auto layout = gds::parse_gds(b.bytes);
  CHECK(layout.db_unit_nm == 2);
  CHECK(!layout.warnings.messages.empty());
  auto flat = gds::flatten(layout);
  CHECK(flat.db_unit_nm == 1);
  REQUIRE(flat.polygons.size() == 1);
  CHECK(flat.polygons[0].bbox == geom::Rect{{0, 0}, {2000, 2000}});
}

TEST_CASE("write/parse round trip") {
  SECTION("empty cell") {
    gds::Layout l;
    l.library_name = "EMPTY";
    l.cell("TOP");
    l.top_cell = "TOP";
    auto back = gds::parse_gds(gds::write_gds(l));
    std::string why;
    CHECK(gds::structurally_equal(l, back, &why));
  }
  SECTION("rotated, mirrored SREF round-trips bit-exactly") {
    gds::Layout l;
    l.library_name = "REFS";
    auto& leaf = l.cell("LEAF");
    leaf.elements.push_back(
        boundary_el(3, 2, {{0, 0}, {500, 0}, {500, 200}, {0, 200}}));
    auto& top = l.cell("TOP");
    gds::CellRef ref;
    ref.target = "LEAF";
    ref.translation = {12345, -6789};
    ref.rotation_deg = 90.0;
    ref.reflect = true;
    top.refs.push_back(ref);
    l.top_cell = "TOP";
    auto bytes = gds::write_gds(l);
    auto back = gds::parse_gds(bytes);
    std::string why;
    REQUIRE(gds::structurally_equal(l, back, &why));
    CHECK(gds::write_gds(back) == bytes);  // stable byte stream
  }
  SECTION("paths with every end-cap style") {
    gds::Layout l;
    l.library_name = "PATHS";
    auto& c = l.cell("TOP");
    for (auto cap : {geom::Endcap::Flush, geom::Endcap::Round,
                     geom::Endcap::HalfExt}) {
      gds::Element e;
      e.kind = ElementKind::Path;
      e.layer = 1;
      e.datatype = 1;
      e.width = 2000;
      e.endcap = cap;
      e.coords = {{0, 0}, {10000, 0}};
      c.elements.push_back(e);
    }
    gds::Element t;
    t.kind = ElementKind::Text;
    t.layer = 10;
    t.datatype = 0;
    t.coords = {{5, 7}};
    t.text = "label";
    c.elements.push_back(t);
    l.top_cell = "TOP";
    auto back = gds::parse_gds(gds::write_gds(l));
    std::string why;
    CHECK(gds::structurally_equal(l, back, &why));
  }
  SECTION("AREF with rectangular lattice") {
    gds::Layout l;
    l.library_name = "ARR";
    auto& unit = l.cell("UNIT");
    unit.elements.push_back(
        boundary_el(1, 0, {{0, 0}, {1000, 0}, {1000, 1000}, {0, 1000}}));
    auto& top = l.cell("TOP");
    gds::CellRef ref;
    ref.target = "UNIT";
    ref.translation = {100, 200};
    ref.array = gds::ArraySpec{3, 2, {5000, 0}, {0, 7000}};
    top.refs.push_back(ref);
    l.top_cell = "TOP";
    auto back = gds::parse_gds(gds::write_gds(l));
    std::string why;
    CHECK(gds::structurally_equal(l, back, &why));
  }
}

TEST_CASE("flatten") {
  SECTION("single cell without references is the identity") {
    gds::Layout l;
    auto& top = l.cell("TOP");
    top.elements.push_back(
        boundary_el(1, 0, {{0, 0}, {1000, 0}, {1000, 1000}, {0, 1000}}));
    l.top_cell = "TOP";
    auto flat = gds::flatten(l);
    REQUIRE(flat.polygons.size() == 1);
    CHECK(flat.polygons[0].poly.area2() == 2 * 1000 * 1000);
  }
  SECTION("two translated copies land 100 um apart") {
    gds::Layout l;
    auto& leaf = l.cell("B");
    leaf.elements.push_back(
        boundary_el(1, 0, {{0, 0}, {1000, 0}, {1000, 1000}, {0, 1000}}));
    auto& top = l.cell("TOP");
    top.refs.push_back({"B", {0, 0}, 0, false, 1.0, {}});
    top.refs.push_back({"B", {100000, 0}, 0, false, 1.0, {}});
    l.top_cell = "TOP";
    auto flat = gds::flatten(l);
    REQUIRE(flat.polygons.size() == 2);
    CHECK(flat.polygons[1].bbox.lo.x - flat.polygons[0].bbox.lo.x == 100000);
  }
  SECTION("AREF of 3 columns x 2 rows expands on the lattice") {
    gds::Layout l;
    auto& unit = l.cell("UNIT");
    unit.elements.push_back(
        boundary_el(1, 0, {{0, 0}, {1000, 0}, {1000, 1000}, {0, 1000}}));
    auto& top = l.cell("TOP");
    gds::CellRef ref;
    ref.target = "UNIT";
    ref.translation = {0, 0};
    ref.array = gds::ArraySpec{3, 2, {5000, 0}, {0, 7000}};
    top.refs.push_back(ref);
    l.top_cell = "TOP";
    auto flat = gds::flatten(l);
    REQUIRE(flat.polygons.size() == 6);
    std::vector<geom::Point> expected = {{0, 0},     {5000, 0},    {10000, 0},
                                         {0, 7000},  {5000, 7000}, {10000, 7000}};
    for (std::size_t i = 0; i < 6; ++i)
      CHECK(flat.polygons[i].bbox.lo == expected[i]);
  }
  SECTION("nested AREF(2x2) of a rotated L conserves area fourfold") {
    gds::Layout l;
    auto& ell = l.cell("L");
    ell.elements.push_back(boundary_el(
        1, 0, {{0, 0}, {3000, 0}, {3000, 1000}, {1000, 1000}, {1000, 4000}, {0, 4000}}));
    auto& mid = l.cell("MID");
    gds::CellRef rot;
    rot.target = "L";
    rot.rotation_deg = 90.0;
    mid.refs.push_back(rot);
    auto& top = l.cell("TOP");
    gds::CellRef arr;
    arr.target = "MID";
    arr.array = gds::ArraySpec{2, 2, {20000, 0}, {0, 20000}};
    top.refs.push_back(arr);
    l.top_cell = "TOP";
    auto flat = gds::flatten(l);
    REQUIRE(flat.polygons.size() == 4);
    std::int64_t ell_area = geom::Polygon{ell.elements[0].coords}.area2();
    for (const auto& p : flat.polygons) CHECK(p.poly.area2() == ell_area);
    CHECK(flat.warnings.grid_snaps == 0);  // 90-degree rotations are exact
  }
  SECTION("transform composition equals pre-composed transforms") {
    // A references B at 90 degrees + offset; B references C mirrored.
    gds::Layout l;
    auto& c = l.cell("C");
    c.elements.push_back(
        boundary_el(1, 0, {{100, 200}, {700, 200}, {700, 500}, {100, 500}}));
    auto& bcell = l.cell("B");
    gds::CellRef rc;
    rc.target = "C";
    rc.reflect = true;
    rc.translation = {40, -30};
    bcell.refs.push_back(rc);
    auto& a = l.cell("A");
    gds::CellRef rb;
    rb.target = "B";
    rb.rotation_deg = 90.0;
    rb.translation = {1000, 2000};
    a.refs.push_back(rb);
    l.top_cell = "A";
    auto flat = gds::flatten(l);
    REQUIRE(flat.polygons.size() == 1);

    gds::Transform tb = gds::Transform::from_ref(rb);
    gds::Transform tc = gds::Transform::from_ref(rc);
    gds::Transform composed = gds::Transform::compose(tb, tc);
    geom::Polygon expect;
    for (const geom::Point& p : c.elements[0].coords)
      expect.v.push_back(composed.apply(p));
    expect.make_ccw();
    CHECK(flat.polygons[0].poly.v == expect.v);
  }
  SECTION("non-90-degree rotations snap to grid and are flagged") {
    gds::Layout l;
    auto& leaf = l.cell("B");
    leaf.elements.push_back(
        boundary_el(1, 0, {{0, 0}, {1000, 0}, {1000, 1000}, {0, 1000}}));
    auto& top = l.cell("TOP");
    gds::CellRef ref;
    ref.target = "B";
    ref.rotation_deg = 30.0;
    top.refs.push_back(ref);
    l.top_cell = "TOP";
    auto flat = gds::flatten(l);
    CHECK(flat.warnings.grid_snaps > 0);
  }
  SECTION("cycle detection") {
    gds::Layout l;
    l.cell("A").refs.push_back({"B", {0, 0}, 0, false, 1.0, {}});
    l.cell("B").refs.push_back({"A", {0, 0}, 0, false, 1.0, {}});
    l.top_cell = "A";
    CHECK_THROWS_WITH(gds::flatten(l),
                      Catch::Matchers::ContainsSubstring("cyclic"));
  }
  SECTION("unknown top cell") {
    gds::Layout l;
    l.cell("A");
    l.top_cell = "A";
    CHECK_THROWS(gds::flatten(l, "NOPE"));
  }
}

TEST_CASE("flatten conserves counts and areas over reference expansion") {
  gds::Layout l;
  auto& leaf = l.cell("LEAF");
  for (int i = 0; i < 5; ++i)
    leaf.elements.push_back(boundary_el(
        i % 3, 0,
        {{i * 3000, 0}, {i * 3000 + 1000, 0}, {i * 3000 + 1000, 900}, {i * 3000, 900}}));
  auto& top = l.cell("TOP");
  for (int k = 0; k < 7; ++k)
    top.refs.push_back({"LEAF", {k * 50000, 0}, 0, false, 1.0, {}});
  l.top_cell = "TOP";
  auto flat = gds::flatten(l);
  CHECK(flat.polygons.size() == 35);
  std::int64_t leaf_area = 0;
  for (const auto& e : leaf.elements) leaf_area += geom::Polygon{e.coords}.area2();
  std::int64_t flat_area = 0;
  for (const auto& p : flat.polygons) flat_area += p.poly.area2();
  CHECK(flat_area == 7 * leaf_area);
}

TEST_CASE("unknown records are skipped with a warning") {
  auto b = minimal_stream();
  // splice a NODE record (0x15) before ENDLIB
  std::vector<std::uint8_t> bytes = b.bytes;
  std::vector<std::uint8_t> node = {0x00, 0x04, 0x15, 0x00};
  bytes.insert(bytes.end() - 4, node.begin(), node.end());
  auto layout = gds::parse_gds(bytes);
  bool warned = false;
  for (const auto& w : layout.warnings.messages)
    if (w.find("unknown record") != std::string::npos) warned = true;
  CHECK(warned);
}

TEST_CASE("coordinate overflow is rejected on write") {
  gds::Layout l;
  auto& top = l.cell("TOP");
  top.elements.push_back(boundary_el(
      1, 0, {{0, 0}, {3000000000LL, 0}, {3000000000LL, 1000}, {0, 1000}}));
  l.top_cell = "TOP";
  CHECK_THROWS_WITH(gds::write_gds(l),
                    Catch::Matchers::ContainsSubstring("32-bit"));
}

TEST_CASE("structure ending inside an open element is a parse error") {
  StreamBuilder b;
  b.header();
  b.libname("X");
  b.units(1e-3, 1e-9);
  b.bgnstr("TOP");
  b.rec(0x08, 0);  // BOUNDARY opened...
  b.endstr();      // ...but the structure ends first
  b.rec(0x11, 0);  // stray ENDEL
  b.endlib();
  CHECK_THROWS_AS(gds::parse_gds(b.bytes), qflow::ParseError);
}
