#include <catch2/catch_amalgamated.hpp>

#include "qflow/pdk.hpp"

using namespace qflow;
using pdk::Purpose;

namespace {

nlohmann::json tiny_deck() {
  return nlohmann::json::parse(R"({
    "schema_version": 1,
    "name": "tiny",
    "layer_map": [
      {"gds_layer": 0, "gds_datatype": 0, "purpose": "chip_outline"},
      {"gds_layer": 1, "gds_datatype": 0, "purpose": "ground"},
      {"gds_layer": 1, "gds_datatype": 1, "purpose": "cpw_conductor"},
      {"gds_layer": 6, "gds_datatype": 0, "purpose": "airbridge_pad"},
      {"gds_layer": 6, "gds_datatype": 1, "purpose": "airbridge_span"}
    ],
    "rules": [
      {"id": "R1", "kind": "spacing_between_purposes",
       "purposes": ["cpw_conductor", "ground"], "min_nm": 3000},
      {"id": "R5", "kind": "range_span",
       "purposes": ["airbridge_span", "airbridge_pad"],
       "min_nm": 50000, "max_nm": 100000}
    ]
  })");
}

}  // namespace

TEST_CASE("shipped qeda deck carries the full quantum rule set") {
  auto deck = pdk::load_pdk_file("pdks/qeda.json");
  CHECK(deck.rules.name == "qeda");
  REQUIRE(deck.rules.rules.size() == 9);

  auto thr = [&](const char* id) { return deck.rules.rule(id)->threshold_nm; };
  CHECK(thr("R1") == 3000);    // CPW gap
  CHECK(thr("R2") == 5000);    // CPW conductor width
  CHECK(thr("R3") == 50);      // JJ overlap tolerance
  CHECK(thr("R4") == 100);     // JJ lead width
  CHECK(thr("R5") == 50000);   // airbridge span lower bound
  CHECK(deck.rules.rule("R5")->max_nm == 100000);
  CHECK(thr("R6") == 10000);   // airbridge pad
  CHECK(thr("R7") == 200000);  // edge clearance
  CHECK(thr("R8") == 2000);    // metal spacing
  CHECK(thr("R9") == 50000);   // ground continuity gap
  CHECK(deck.rules.rule("R9")->slot_max_nm == 100000);
  for (const auto& r : deck.rules.rules) CHECK(r.enabled);

  // every rule purpose resolves through the layer map
  for (const auto& r : deck.rules.rules)
    for (Purpose p : r.purposes) CHECK(!deck.rules.layers_of(p).empty());
}

TEST_CASE("shipped cmc deck matches the benchmark column") {
  auto deck = pdk::load_pdk_file("pdks/cmc.json");
  CHECK(deck.rules.name == "cmc");
  CHECK(deck.rules.rule("R1")->threshold_nm == 2000);
  CHECK(deck.rules.rule("R2")->threshold_nm == 4000);
  CHECK(deck.rules.rule("R3")->threshold_nm == 100);
  CHECK(deck.rules.rule("R7")->threshold_nm == 100000);
  CHECK(deck.rules.rule("R8")->threshold_nm == 2000);
  // airbridge rules are not defined
  CHECK(deck.rules.rule("R4") == nullptr);
  CHECK(deck.rules.rule("R5") == nullptr);
  CHECK(deck.rules.rule("R6") == nullptr);
  // ground continuity is recommended, not enforced
  REQUIRE(deck.rules.rule("R9") != nullptr);
  CHECK(!deck.rules.rule("R9")->enabled);
}

TEST_CASE("qeda thresholds are at least as strict as cmc") {
  auto qeda = pdk::load_pdk_file("pdks/qeda.json");
  auto cmc = pdk::load_pdk_file("pdks/cmc.json");
  for (const char* id : {"R1", "R2", "R7"})
    CHECK(qeda.rules.rule(id)->threshold_nm >= cmc.rules.rule(id)->threshold_nm);
  CHECK(qeda.rules.rule("R8")->threshold_nm == cmc.rules.rule("R8")->threshold_nm);
  // a tighter alignment tolerance is the stricter requirement
  CHECK(qeda.rules.rule("R3")->threshold_nm < cmc.rules.rule("R3")->threshold_nm);
}

TEST_CASE("schema violations are reported with field paths") {
  SECTION("R5 with a single value names the range requirement") {
    auto doc = tiny_deck();
    doc["rules"][1].erase("max_nm");
    try {
      pdk::load_pdk(doc);
      FAIL("expected schema error");
    } catch (const qflow::Error& e) {
      std::string msg = e.what();
      CHECK(msg.find("R5") != std::string::npos);
      CHECK(msg.find("range") != std::string::npos);
    }
  }
  SECTION("unknown purpose") {
    auto doc = tiny_deck();
    doc["layer_map"][1]["purpose"] = "magic_metal";
    CHECK_THROWS_WITH(pdk::load_pdk(doc),
                      Catch::Matchers::ContainsSubstring("magic_metal"));
  }
  SECTION("duplicate rule id") {
    auto doc = tiny_deck();
    doc["rules"][1] = doc["rules"][0];
    CHECK_THROWS_WITH(pdk::load_pdk(doc),
                      Catch::Matchers::ContainsSubstring("duplicate rule id"));
  }
  SECTION("non-positive threshold") {
    auto doc = tiny_deck();
    doc["rules"][0]["min_nm"] = 0;
    CHECK_THROWS_WITH(pdk::load_pdk(doc),
                      Catch::Matchers::ContainsSubstring("> 0"));
  }
  SECTION("duplicate layer pair") {
    auto doc = tiny_deck();
    doc["layer_map"][2]["gds_datatype"] = 0;
    CHECK_THROWS_WITH(pdk::load_pdk(doc),
                      Catch::Matchers::ContainsSubstring("duplicate"));
  }
  SECTION("missing schema_version") {
    auto doc = tiny_deck();
    doc.erase("schema_version");
    CHECK_THROWS_WITH(pdk::load_pdk(doc),
                      Catch::Matchers::ContainsSubstring("schema_version"));
  }
  SECTION("unknown extra fields warn instead of failing") {
    auto doc = tiny_deck();
    doc["future_extension"] = 42;
    doc["rules"][0]["vendor_note"] = "x";
    auto deck = pdk::load_pdk(doc);
    REQUIRE(deck.load_warnings.size() >= 2);
  }
}

TEST_CASE("validate_pdk cross checks") {
  SECTION("complete qeda deck has no gaps") {
    auto deck = pdk::load_pdk_file("pdks/qeda.json");
    auto report = pdk::validate_pdk(deck);
    CHECK(report.gaps.empty());
    CHECK(report.notes.empty());
  }
  SECTION("missing pad mapping with the pad rule enabled is a gap") {
    auto deck = pdk::load_pdk_file("pdks/qeda.json");
    std::erase_if(deck.rules.layer_map, [](const pdk::LayerPurpose& lp) {
      return lp.purpose == Purpose::AirbridgePad;
    });
    auto report = pdk::validate_pdk(deck);
    bool named = false;
    for (const auto& g : report.gaps)
      if (g.find("R6") != std::string::npos) named = true;
    CHECK(named);
  }
  SECTION("cmc deck with airbridge layers present yields notes, not gaps") {
    auto deck = pdk::load_pdk_file("pdks/cmc.json");
    auto report = pdk::validate_pdk(deck);
    CHECK(report.gaps.empty());
    bool pad_note = false;
    for (const auto& n : report.notes)
      if (n.find("airbridge") != std::string::npos) pad_note = true;
    CHECK(pad_note);
  }
  SECTION("lithographic step without alignment coverage is a gap") {
    auto deck = pdk::load_pdk_file("pdks/qeda.json");
    deck.rules.alignment.clear();
    auto report = pdk::validate_pdk(deck);
    CHECK(report.gaps.size() >= 5);  // five lithographic steps
  }
}
