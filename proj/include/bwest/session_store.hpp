#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "bwest/intercept_model.hpp"
#include "bwest/path_simulator.hpp"
#include "bwest/probe_engine.hpp"
#include "bwest/probe_sample.hpp"

namespace bwest {

inline constexpr int kSessionSchemaVersion = 1;

/// Descriptor of a simulated session: the path plus the experiment that ran on it.
struct SimPlan {
  SimPath path;
  std::vector<std::uint64_t> sizes_bits;
  std::size_t count_per_size = 1;
  double gap_s = kDefaultSimGapS;
  std::string rng_algorithm{SimRng::kAlgorithm};

  friend bool operator==(const SimPlan&, const SimPlan&) = default;
};

using SessionPlan = std::variant<ProbePlan, SimPlan>;

struct SessionRecord {
  std::string session_id;
  std::string created_at;  // UTC, ISO 8601
  SessionPlan plan;
  std::vector<ProbeSample> samples;
  std::optional<PathFeatures> features;
  /// Header fields this version does not know about, written back verbatim.
  nlohmann::ordered_json extra_header = nlohmann::ordered_json::object();
  /// Unknown per-sample fields keyed by sample seq.
  std::map<std::uint64_t, nlohmann::ordered_json> extra_sample_fields;

  friend bool operator==(const SessionRecord&, const SessionRecord&) = default;
};

/// Current wall-clock time as "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_timestamp_now();

/// Writes the JSONL session file (header line, then one line per sample) via a
/// synced temporary file renamed into place. Throws IoFailure.
void save_session(const SessionRecord& record, const std::filesystem::path& path);

/// Throws IoFailure, SchemaMismatch or CorruptLineError.
SessionRecord load_session(const std::filesystem::path& path);

nlohmann::ordered_json to_json(const ProbeSample& sample);
nlohmann::ordered_json to_json(const SimPath& path);
/// Throws InvalidArgument on missing or mistyped fields.
SimPath sim_path_from_json(const nlohmann::json& j);
SimPath load_sim_path(const std::filesystem::path& path);

enum class SizeUnit { Bytes, Bits };

/// Column names for import_csv. Optional columns are used when present in the header.
struct CsvMapping {
  std::string size_column = "wire_bits";
  SizeUnit size_unit = SizeUnit::Bits;
  std::string delay_column = "rtt_s";
  std::optional<std::string> payload_column = "payload_bytes";
  std::optional<std::string> timestamp_column = "sent_at_us";
  std::optional<std::string> lost_column = "lost";
  std::optional<std::string> seq_column = "seq";
  std::string path_id = "csv";

  /// Canonical export columns when present; otherwise looks for common
  /// names (size_bytes, size_bits, delay_s, ...).
  static CsvMapping detect(std::span<const std::string> header);
};

struct CsvImport {
  std::vector<ProbeSample> samples;
  /// Rows whose delay cell did not parse; they are imported as lost.
  std::size_t unparseable_delays = 0;
};

/// Throws IoFailure, EmptyFile or MissingColumn.
CsvImport import_csv(const std::filesystem::path& path, const CsvMapping& mapping);
CsvImport import_csv(const std::filesystem::path& path);  // detected mapping
CsvImport import_csv(std::istream& in, const CsvMapping& mapping);
std::vector<std::string> read_csv_header(const std::filesystem::path& path);

/// Canonical columns: seq, payload_bytes, wire_bits, sent_at_us, rtt_s, lost.
void export_csv(std::span<const ProbeSample> samples, std::ostream& out);
void export_csv(std::span<const ProbeSample> samples, const std::filesystem::path& path);

/// Intercept observations, columns path_id, n, l_km, a_s.
std::vector<InterceptObservation> load_intercept_observations(const std::filesystem::path& path);

nlohmann::ordered_json to_json(const InterceptModel& model);
InterceptModel intercept_model_from_json(const nlohmann::json& j);

}  // namespace bwest
