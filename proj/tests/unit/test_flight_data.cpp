#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "nodefdm/flight_csv.hpp"
#include "nodefdm/flight_data.hpp"
#include "support.hpp"

using namespace nodefdm::data;

namespace {

FlightRecord record_at(double t) {
  FlightRecord r;
  r.time = t;
  r.x = {3000.0 + 2.0 * t, 150.0 * t, 0.01, 150.0 + 0.01 * t, 60000.0 - 0.8 * t};
  r.u = {5000.0, 140.0, 0.0, 0, 0, 0};
  r.e0 = {270.0, 5.0, -2.0};
  r.e = {0.45, 130.0, 1.5, 145.0, 2000.0, 10.0, 0.03, 0.04, 85.0, 0.8};
  return r;
}

FlightSeries series(std::size_t n, double dt = kSampleInterval, double start = 0.0) {
  FlightSeries f;
  f.tag = "synthetic";
  f.dt = kSampleInterval;
  for (std::size_t i = 0; i < n; ++i) f.records.push_back(record_at(start + dt * static_cast<double>(i)));
  return f;
}

std::string header_line() {
  std::string h;
  for (std::size_t c = 0; c < kColumnCount; ++c) {
    if (c) h += ',';
    h += std::string(column_name(static_cast<Column>(c)));
  }
  return h;
}

std::string row_line(double t, const std::string& bad_value = {}) {
  std::string line = std::to_string(t);
  for (std::size_t c = 1; c < kColumnCount; ++c) {
    line += ',';
    if (c == 2 && !bad_value.empty()) {
      line += bad_value;
    } else if (c == 9 || c == 10 || c == 11) {
      line += '0';
    } else {
      line += std::to_string(100.0 + static_cast<double>(c) + t);
    }
  }
  return line;
}

}  // namespace

TEST_SUITE("flight_data") {

TEST_CASE("schema sidecar converts recorder units to SI") {
  testing::TempDir dir;
  testing::write_file(dir / "schema.json",
             R"({"columns":{"alt":{"header":"altitude_ft","unit":"ft"},"tas":{"header":"tas_kt","unit":"kt"}}})");
  const auto schema = CsvSchema::load(dir / "schema.json");
  CHECK(schema[Column::alt].header == "altitude_ft");
  CHECK(schema[Column::mass].header == "mass");

  std::string text;
  for (std::size_t c = 0; c < kColumnCount; ++c) {
    if (c) text += ',';
    text += schema.columns[c].header;
  }
  text += '\n';
  for (int i = 0; i < 3; ++i) {
    std::string line = std::to_string(4 * i);
    for (std::size_t c = 1; c < kColumnCount; ++c) {
      line += ',';
      if (c == static_cast<std::size_t>(Column::alt)) line += "35000";
      else if (c == static_cast<std::size_t>(Column::tas)) line += "450";
      else if (c == 9 || c == 10 || c == 11) line += '0';
      else line += "1.5";
    }
    text += line + '\n';
  }
  testing::write_file(dir / "ft.csv", text);
  const auto f = ingest_csv(dir / "ft.csv", schema);
  REQUIRE(f.records.size() == 3);
  CHECK(f.records[0].x.h == doctest::Approx(10668.0).epsilon(1e-12));
  CHECK(std::abs(f.records[0].x.v_tas - 231.5) < 0.05);
  CHECK(f.tag == "ft");
}

TEST_CASE("unknown schema column is rejected") {
  CHECK_THROWS_AS(CsvSchema::from_json_text(R"({"columns":{"altitude":{"unit":"ft"}}})"), DataError);
  CHECK_THROWS_AS(CsvSchema::from_json_text(R"({"columns":{"alt":{"unit":"furlong"}}})"),
                  std::invalid_argument);
}

TEST_CASE("1 Hz recording is decimated to the 4 s grid") {
  testing::TempDir dir;
  std::string text = header_line() + '\n';
  for (int i = 0; i < 240; ++i) text += row_line(i) + '\n';
  testing::write_file(dir / "dense.csv", text);
  IngestReport report;
  const auto f = ingest_csv(dir / "dense.csv", {}, &report);
  CHECK(report.input_rows == 240);
  CHECK(report.decimation == 4);
  REQUIRE(f.records.size() == 60);
  for (std::size_t k = 0; k < f.records.size(); ++k) {
    CHECK(f.records[k].time == doctest::Approx(4.0 * static_cast<double>(k)));
  }
}

TEST_CASE("interval that does not divide 4 s is rejected") {
  testing::TempDir dir;
  std::string text = header_line() + '\n';
  for (int i = 0; i < 20; ++i) text += row_line(3.0 * i) + '\n';
  testing::write_file(dir / "odd.csv", text);
  CHECK_THROWS_AS(ingest_csv(dir / "odd.csv"), DataError);
}

TEST_CASE("missing column is a data error") {
  testing::TempDir dir;
  std::string text = header_line();
  text.replace(text.find("mass"), 4, "weight");
  text += '\n' + row_line(0) + '\n';
  testing::write_file(dir / "missing.csv", text);
  try {
    ingest_csv(dir / "missing.csv");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("missing column 'mass'") != std::string::npos);
  }
}

TEST_CASE("non-monotone time is a data error") {
  testing::TempDir dir;
  std::string text = header_line() + '\n';
  for (double t : {0.0, 4.0, 8.0, 8.0, 12.0}) text += row_line(t) + '\n';
  testing::write_file(dir / "repeat.csv", text);
  CHECK_THROWS_AS(ingest_csv(dir / "repeat.csv"), DataError);
}

TEST_CASE("bad rows are dropped up to 1 percent") {
  testing::TempDir dir;
  std::string text = header_line() + '\n';
  for (int i = 0; i < 200; ++i) text += row_line(4.0 * i, i == 50 ? "nan" : "") + '\n';
  testing::write_file(dir / "few.csv", text);
  IngestReport report;
  const auto f = ingest_csv(dir / "few.csv", {}, &report);
  CHECK(report.rejected_rows == 1);
  CHECK(f.records.size() == 199);

  std::string many = header_line() + '\n';
  for (int i = 0; i < 100; ++i) many += row_line(4.0 * i, (i == 10 || i == 20) ? "x" : "") + '\n';
  testing::write_file(dir / "many.csv", many);
  CHECK_THROWS_AS(ingest_csv(dir / "many.csv"), DataError);
}

TEST_CASE("write and ingest round trip in SI and recorder units") {
  testing::TempDir dir;
  const auto f = testing::flight(5);
  write_csv(f, dir / "si.csv");
  const auto back = ingest_csv(dir / "si.csv");
  REQUIRE(back.records.size() == f.records.size());
  CsvSchema schema = CsvSchema::from_json_text(
      R"({"columns":{"alt":{"unit":"ft"},"tas":{"unit":"kt"},"fpa":{"unit":"deg"},"oat":{"unit":"degC"},"fuel_flow":{"unit":"kg/h"},"dist":{"unit":"nm"},"vs":{"unit":"ft/min"}}})");
  write_csv(f, dir / "rec.csv", schema);
  const auto rec = ingest_csv(dir / "rec.csv", schema);
  REQUIRE(rec.records.size() == f.records.size());
  for (std::size_t k = 0; k < f.records.size(); ++k) {
    for (std::size_t i = 0; i < static_cast<std::size_t>(Feature::dv_tas_dt); ++i) {
      const auto feat = static_cast<Feature>(i);
      const double ref = feature_value(f.records[k], feat);
      CHECK(feature_value(back.records[k], feat) == ref);
      CHECK(std::abs(feature_value(rec.records[k], feat) - ref) <= 1e-9 * std::max(1.0, std::abs(ref)));
    }
    CHECK(back.records[k].time == f.records[k].time);
  }
}

TEST_CASE("slicing drops remainders and never spans gaps") {
  CHECK(slice_sequences(series(180)).size() == 3);
  CHECK(slice_sequences(series(179)).size() == 2);
  CHECK(slice_sequences(series(59)).empty());

  auto gap = series(100);
  auto tail = series(70, kSampleInterval, 1000.0);
  gap.records.insert(gap.records.end(), tail.records.begin(), tail.records.end());
  const auto seqs = slice_sequences(gap);
  REQUIRE(seqs.size() == 2);
  CHECK(seqs[0].start == 0);
  CHECK(seqs[1].start == 100);
  for (const auto& s : seqs) {
    CHECK(s.records.size() == kSequenceLength);
    for (std::size_t k = 1; k < s.records.size(); ++k) {
      CHECK(s.records[k].time - s.records[k - 1].time == doctest::Approx(kSampleInterval));
    }
  }
}

TEST_CASE("normalisation statistics") {
  // Two flights of two records each; every continuous channel varies.
  auto pair = [](double slope) {
    auto f = series(2);
    f.records[1].x.gamma = 0.01 + slope * 0.01;
    f.records[1].x.v_tas += slope;
    f.records[1].u = {6000.0, 150.0, 1.0, 1, 1, 1};
    f.records[1].e0 = {260.0, 3.0, 1.0};
    f.records[1].e = {0.5, 140.0, 2.5, 150.0, 3000.0, 12.0, 0.05, 0.06, 90.0, 0.9};
    f.records[0].x.h = 1.0;
    f.records[1].x.h = 3.0;
    return f;
  };
  std::vector<FlightSeries> train{pair(1.0), pair(3.0)};
  const auto stats = compute_norm_stats(train);
  CHECK(stats[Feature::h].mean == doctest::Approx(2.0));
  CHECK(stats[Feature::h].std == doctest::Approx(1.0));
  CHECK(stats.normalize(Feature::h, 2.0) == doctest::Approx(0.0));
  CHECK(stats[Feature::gear].mean == 0.0);
  CHECK(stats[Feature::gear].std == 1.0);
  CHECK(stats.normalize(Feature::gear, 1.0) == 1.0);
  CHECK(stats[Feature::dv_tas_dt].mean == doctest::Approx((1.04 + 3.04) / 8.0));

  auto constant = train;
  for (auto& f : constant) f.records[1].x.h = f.records[0].x.h;
  try {
    compute_norm_stats(constant);
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("'h'") != std::string::npos);
  }
  CHECK_THROWS_AS(compute_norm_stats(std::vector<FlightSeries>{}), std::invalid_argument);
}

TEST_CASE("normalize and denormalize are inverse") {
  const auto stats = compute_norm_stats(testing::sample_flights());
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    const auto f = static_cast<Feature>(i);
    CHECK(stats[f].std > 0.0);
    for (double v : {-3.5, 0.0, 1.0, 12345.0}) {
      CHECK(stats.denormalize(f, stats.normalize(f, v)) == doctest::Approx(v).epsilon(1e-12));
    }
  }
  CHECK(stats[Feature::dv_tas_dt].std > 0.0);
}

TEST_CASE("feature names round trip") {
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    const auto f = static_cast<Feature>(i);
    CHECK(feature_from_name(feature_name(f)) == f);
  }
  CHECK_FALSE(feature_from_name("altitude").has_value());
  CHECK(is_discrete(Feature::flap));
  CHECK_FALSE(is_discrete(Feature::h));
  CHECK_THROWS_AS(feature_value(FlightRecord{}, Feature::dgamma_dt), std::invalid_argument);
}

TEST_CASE("validate flags broken invariants") {
  CHECK(validate(testing::flight(7)).empty());
  auto f = series(61);
  CHECK(validate(f).empty());
  f.records[10].x.m = f.records[9].x.m + 50.0;
  f.records[20].x.v_tas = -1.0;
  f.records[30].u.gear = 3;
  const auto issues = validate(f);
  CHECK(issues.size() == 3);
  CHECK(validate(series(10)).size() == 1);
}

TEST_CASE("manifest round trip and split disjointness") {
  testing::TempDir dir;
  DatasetManifest m;
  m.train = {{"train/a.csv", "A1"}, {"train/b.csv", "A2"}};
  m.val = {{"val/c.csv", "B1"}};
  m.test = {{"test/d.csv", "C1"}};
  save_manifest(m, dir / "manifest.json");
  const auto back = load_manifest(dir / "manifest.json");
  CHECK(back.root == dir.path());
  CHECK(back.train.size() == 2);
  CHECK(back.split("test")[0].tag == "C1");
  CHECK_THROWS_AS(back.split("holdout"), std::invalid_argument);

  m.test.push_back({"test/e.csv", "A2"});
  CHECK_THROWS_AS(check_disjoint_splits(m), DataError);
  save_manifest(m, dir / "bad.json");
  CHECK_THROWS_AS(load_manifest(dir / "bad.json"), DataError);
}

}
