#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "nodefdm/flight_data.hpp"
#include "nodefdm/units.hpp"

namespace nodefdm::data {

/// Raised when a flight file cannot be turned into a usable FlightSeries.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Logical flight CSV columns, in canonical order.
enum class Column : std::size_t {
  time_s, alt, dist, fpa, tas, mass, sel_alt, sel_spd, sel_vs, flap, gear, spdbrk,
  oat, wind_par, wind_perp, mach, cas, vs, gs, aoa, pitch, n1, fuel_flow,
};
inline constexpr std::size_t kColumnCount = 23;

std::string_view column_name(Column c);

/// Maps each logical column to the header used in a file and the unit the
/// values are stored in. The default schema is SI with canonical headers.
struct CsvSchema {
  struct Entry {
    std::string header;
    units::Unit unit = units::Unit::si;
  };
  std::array<Entry, kColumnCount> columns;

  CsvSchema();
  const Entry& operator[](Column c) const { return columns[static_cast<std::size_t>(c)]; }
  Entry& operator[](Column c) { return columns[static_cast<std::size_t>(c)]; }

  /// Sidecar JSON: {"columns": {"alt": {"header": "altitude_ft", "unit": "ft"}, ...}}.
  /// Columns not listed keep their defaults.
  static CsvSchema load(const std::filesystem::path& path);
  static CsvSchema from_json_text(const std::string& text);
};

struct IngestReport {
  std::size_t input_rows = 0;
  std::size_t rejected_rows = 0;
  std::size_t decimation = 1;
};

/// Reads one flight. Values are converted to SI, denser recordings are
/// decimated to the 4 s grid, and rows with non-finite required fields are
/// dropped; more than 1% bad rows rejects the whole flight with DataError.
FlightSeries ingest_csv(const std::filesystem::path& path, const CsvSchema& schema = {},
                        IngestReport* report = nullptr);

/// Writes a flight with shortest round-trip number formatting.
void write_csv(const FlightSeries& flight, const std::filesystem::path& path,
               const CsvSchema& schema = {});

struct ManifestEntry {
  std::string file;  // relative to the manifest directory
  std::string tag;   // airframe tag
};

struct DatasetManifest {
  std::filesystem::path root;  // directory holding the manifest
  double dt = kSampleInterval;
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> val;
  std::vector<ManifestEntry> test;

  const std::vector<ManifestEntry>& split(const std::string& name) const;
};

/// Throws DataError if an airframe tag occurs in more than one split.
void check_disjoint_splits(const DatasetManifest& manifest);

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

std::vector<FlightSeries> load_split(const DatasetManifest& manifest, const std::string& split);

}  // namespace nodefdm::data
