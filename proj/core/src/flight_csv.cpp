#include "nodefdm/flight_csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>

#include <fmt/format.h>

#include "json.hpp"

namespace nodefdm::data {
namespace {

using json = nlohmann::json;

constexpr std::array<std::string_view, kColumnCount> kColumnNames{
    "time_s", "alt", "dist", "fpa", "tas", "mass", "sel_alt", "sel_spd",
    "sel_vs", "flap", "gear", "spdbrk", "oat", "wind_par", "wind_perp", "mach",
    "cas",   "vs",   "gs",   "aoa", "pitch", "n1", "fuel_flow",
};

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return v;
}

void append_number(std::string& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

using Row = std::array<double, kColumnCount>;

FlightRecord record_from_row(const Row& row) {
  auto col = [&](Column c) { return row[static_cast<std::size_t>(c)]; };
  FlightRecord r;
  r.time = col(Column::time_s);
  r.x = {col(Column::alt), col(Column::dist), col(Column::fpa), col(Column::tas), col(Column::mass)};
  r.u.h_sel = col(Column::sel_alt);
  r.u.v_sel = col(Column::sel_spd);
  r.u.vz_sel = col(Column::sel_vs);
  r.u.flap = static_cast<int>(std::lround(col(Column::flap)));
  r.u.gear = static_cast<int>(std::lround(col(Column::gear)));
  r.u.speed_brake = static_cast<int>(std::lround(col(Column::spdbrk)));
  r.e0 = {col(Column::oat), col(Column::wind_par), col(Column::wind_perp)};
  r.e.mach = col(Column::mach);
  r.e.v_cas = col(Column::cas);
  r.e.vz = col(Column::vs);
  r.e.v_gs = col(Column::gs);
  r.e.dh_sel = r.u.h_sel - r.x.h;
  r.e.dv_sel = r.u.v_sel - r.e.v_cas;
  r.e.alpha = col(Column::aoa);
  r.e.theta = col(Column::pitch);
  r.e.n1 = col(Column::n1);
  r.e.fuel_flow = col(Column::fuel_flow);
  return r;
}

Row row_from_record(const FlightRecord& r) {
  Row row{};
  auto set = [&](Column c, double v) { row[static_cast<std::size_t>(c)] = v; };
  set(Column::time_s, r.time);
  set(Column::alt, r.x.h);
  set(Column::dist, r.x.d);
  set(Column::fpa, r.x.gamma);
  set(Column::tas, r.x.v_tas);
  set(Column::mass, r.x.m);
  set(Column::sel_alt, r.u.h_sel);
  set(Column::sel_spd, r.u.v_sel);
  set(Column::sel_vs, r.u.vz_sel);
  set(Column::flap, r.u.flap);
  set(Column::gear, r.u.gear);
  set(Column::spdbrk, r.u.speed_brake);
  set(Column::oat, r.e0.t_oat);
  set(Column::wind_par, r.e0.wind_par);
  set(Column::wind_perp, r.e0.wind_perp);
  set(Column::mach, r.e.mach);
  set(Column::cas, r.e.v_cas);
  set(Column::vs, r.e.vz);
  set(Column::gs, r.e.v_gs);
  set(Column::aoa, r.e.alpha);
  set(Column::pitch, r.e.theta);
  set(Column::n1, r.e.n1);
  set(Column::fuel_flow, r.e.fuel_flow);
  return row;
}

bool is_discrete_column(Column c) {
  return c == Column::flap || c == Column::gear || c == Column::spdbrk;
}

}  // namespace

std::string_view column_name(Column c) { return kColumnNames[static_cast<std::size_t>(c)]; }

CsvSchema::CsvSchema() {
  for (std::size_t i = 0; i < kColumnCount; ++i) columns[i].header = std::string(kColumnNames[i]);
}

CsvSchema CsvSchema::from_json_text(const std::string& text) {
  CsvSchema schema;
  const json j = json::parse(text);
  if (!j.contains("columns")) return schema;
  for (const auto& [key, value] : j.at("columns").items()) {
    const auto it = std::find(kColumnNames.begin(), kColumnNames.end(), key);
    if (it == kColumnNames.end()) throw DataError("schema names unknown column '" + key + "'");
    auto& entry = schema.columns[static_cast<std::size_t>(it - kColumnNames.begin())];
    if (value.contains("header")) entry.header = value.at("header").get<std::string>();
    if (value.contains("unit")) entry.unit = units::parse_unit(value.at("unit").get<std::string>());
  }
  return schema;
}

CsvSchema CsvSchema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

FlightSeries ingest_csv(const std::filesystem::path& path, const CsvSchema& schema,
                        IngestReport* report) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open flight file " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  const auto header = split_line(line);
  std::array<std::size_t, kColumnCount> position{};
  for (std::size_t c = 0; c < kColumnCount; ++c) {
    const auto& name = schema.columns[c].header;
    const auto it = std::find_if(header.begin(), header.end(),
                                 [&](std::string_view h) { return trim(h) == name; });
    if (it == header.end()) throw DataError(path.string() + ": missing column '" + name + "'");
    position[c] = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<Row> rows;
  std::vector<bool> bad;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_line(line);
    Row row{};
    bool ok = true;
    for (std::size_t c = 0; c < kColumnCount; ++c) {
      double v = position[c] < fields.size() ? parse_number(fields[position[c]])
                                             : std::numeric_limits<double>::quiet_NaN();
      if (!std::isfinite(v)) ok = false;
      row[c] = units::to_si(schema.columns[c].unit, v);
    }
    rows.push_back(row);
    bad.push_back(!ok);
  }

  constexpr auto kTime = static_cast<std::size_t>(Column::time_s);
  double last_time = -std::numeric_limits<double>::infinity();
  std::vector<double> diffs;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double t = rows[i][kTime];
    if (!std::isfinite(t)) continue;
    if (!(t > last_time)) {
      throw DataError(fmt::format("{}: time not strictly increasing at row {}", path.string(), i + 1));
    }
    if (std::isfinite(last_time) && diffs.size() < 101) diffs.push_back(t - last_time);
    last_time = t;
  }

  std::size_t stride = 1;
  if (!diffs.empty()) {
    std::nth_element(diffs.begin(), diffs.begin() + static_cast<std::ptrdiff_t>(diffs.size() / 2), diffs.end());
    const double dt_in = diffs[diffs.size() / 2];
    const double ratio = kSampleInterval / dt_in;
    stride = static_cast<std::size_t>(std::lround(ratio));
    if (stride < 1 || std::abs(ratio - static_cast<double>(stride)) > 1e-6 * ratio) {
      throw DataError(fmt::format("{}: sampling interval {} s does not divide 4 s", path.string(), dt_in));
    }
  }

  const std::size_t total = rows.size();
  const auto bad_count = static_cast<std::size_t>(std::count(bad.begin(), bad.end(), true));
  if (report) *report = {total, bad_count, stride};
  if (static_cast<double>(bad_count) > 0.01 * static_cast<double>(total)) {
    throw DataError(fmt::format("{}: {} of {} rows invalid, flight rejected", path.string(),
                                bad_count, total));
  }

  FlightSeries flight;
  flight.tag = path.stem().string();
  flight.dt = kSampleInterval;
  for (std::size_t i = 0; i < rows.size(); i += stride) {
    if (bad[i]) continue;
    flight.records.push_back(record_from_row(rows[i]));
  }
  return flight;
}

void write_csv(const FlightSeries& flight, const std::filesystem::path& path, const CsvSchema& schema) {
  std::string out;
  out.reserve(flight.records.size() * 320 + 256);
  for (std::size_t c = 0; c < kColumnCount; ++c) {
    if (c) out.push_back(',');
    out += schema.columns[c].header;
  }
  out.push_back('\n');
  for (const auto& r : flight.records) {
    const Row row = row_from_record(r);
    for (std::size_t c = 0; c < kColumnCount; ++c) {
      if (c) out.push_back(',');
      if (is_discrete_column(static_cast<Column>(c))) {
        out += std::to_string(static_cast<int>(row[c]));
      } else {
        append_number(out, units::from_si(schema.columns[c].unit, row[c]));
      }
    }
    out.push_back('\n');
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot write " + path.string());
  file << out;
  if (!file) throw DataError("write failed for " + path.string());
}

const std::vector<ManifestEntry>& DatasetManifest::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw std::invalid_argument("unknown split '" + name + "'");
}

void check_disjoint_splits(const DatasetManifest& manifest) {
  auto tags = [](const std::vector<ManifestEntry>& entries) {
    std::vector<std::string> t;
    for (const auto& e : entries) t.push_back(e.tag);
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
  };
  const std::array<std::pair<const char*, std::vector<std::string>>, 3> sets{{
      {"train", tags(manifest.train)}, {"val", tags(manifest.val)}, {"test", tags(manifest.test)}}};
  for (std::size_t a = 0; a < sets.size(); ++a) {
    for (std::size_t b = a + 1; b < sets.size(); ++b) {
      std::vector<std::string> common;
      std::set_intersection(sets[a].second.begin(), sets[a].second.end(), sets[b].second.begin(),
                            sets[b].second.end(), std::back_inserter(common));
      if (!common.empty()) {
        throw DataError(fmt::format("airframe '{}' appears in both {} and {} splits", common.front(),
                                    sets[a].first, sets[b].first));
      }
    }
  }
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  DatasetManifest m;
  m.root = path.parent_path();
  m.dt = j.value("dt", kSampleInterval);
  auto read = [&](const char* name, std::vector<ManifestEntry>& out) {
    if (!j.contains("splits") || !j["splits"].contains(name)) return;
    for (const auto& e : j["splits"][name]) {
      out.push_back({e.at("file").get<std::string>(), e.at("tag").get<std::string>()});
    }
  };
  read("train", m.train);
  read("val", m.val);
  read("test", m.test);
  check_disjoint_splits(m);
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  json j;
  j["format"] = "nodefdm-manifest";
  j["version"] = 1;
  j["dt"] = manifest.dt;
  auto write = [&](const char* name, const std::vector<ManifestEntry>& entries) {
    json arr = json::array();
    for (const auto& e : entries) arr.push_back({{"file", e.file}, {"tag", e.tag}});
    j["splits"][name] = arr;
  };
  write("train", manifest.train);
  write("val", manifest.val);
  write("test", manifest.test);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<FlightSeries> load_split(const DatasetManifest& manifest, const std::string& split) {
  std::vector<FlightSeries> flights;
  for (const auto& entry : manifest.split(split)) {
    auto flight = ingest_csv(manifest.root / entry.file);
    flight.tag = std::filesystem::path(entry.file).stem().string();
    flights.push_back(std::move(flight));
  }
  return flights;
}

}  // namespace nodefdm::data
