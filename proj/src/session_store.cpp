#include "bwest/session_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "bwest/error.hpp"

namespace bwest {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

std::optional<double> parse_double(std::string_view text) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::optional<std::uint64_t> parse_uint(std::string_view text) {
  std::uint64_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec == std::errc() && ptr == end) return value;
  // Accept integral values written as reals ("800.0").
  if (const auto d = parse_double(text); d && *d >= 0 && std::floor(*d) == *d) {
    return static_cast<std::uint64_t>(*d);
  }
  return std::nullopt;
}

bool parse_flag(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return lower == "1" || lower == "true" || lower == "yes" || lower == "y";
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "': " +
                                          std::strerror(errno));
  }
  return in;
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::InvalidArgument, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? field<T>(j, key) : fallback;
}

ordered_json plan_to_json(const SessionPlan& plan) {
  if (const auto* probe = std::get_if<ProbePlan>(&plan)) {
    ordered_json j;
    j["kind"] = "probe";
    j["target"] = probe->target;
    j["sizes_payload_bytes"] = probe->sizes_payload_bytes;
    j["count_per_size"] = probe->count_per_size;
    j["inter_probe_gap_s"] = probe->inter_probe_gap_s;
    j["timeout_s"] = probe->timeout_s;
    j["method"] = std::string(to_string(probe->method));
    j["udp_port"] = probe->udp_port;
    return j;
  }
  const auto& sim = std::get<SimPlan>(plan);
  ordered_json j;
  j["kind"] = "simulated";
  j["rng"] = sim.rng_algorithm;
  j["seed"] = sim.path.seed;
  j["hops"] = to_json(sim.path)["hops"];
  j["sizes_bits"] = sim.sizes_bits;
  j["count_per_size"] = sim.count_per_size;
  j["gap_s"] = sim.gap_s;
  return j;
}

SessionPlan plan_from_json(const json& j) {
  const auto kind = field<std::string>(j, "kind");
  if (kind == "probe") {
    ProbePlan p;
    p.target = field<std::string>(j, "target");
    p.sizes_payload_bytes = field<std::vector<std::uint32_t>>(j, "sizes_payload_bytes");
    p.count_per_size = field<std::uint32_t>(j, "count_per_size");
    p.inter_probe_gap_s = field<double>(j, "inter_probe_gap_s");
    p.timeout_s = field<double>(j, "timeout_s");
    p.method = parse_probe_method(field<std::string>(j, "method"));
    p.udp_port = field_or<std::uint16_t>(j, "udp_port", kDefaultEchoPort);
    return p;
  }
  if (kind == "simulated") {
    SimPlan s;
    s.rng_algorithm = field<std::string>(j, "rng");
    s.path = sim_path_from_json(j);
    s.sizes_bits = field<std::vector<std::uint64_t>>(j, "sizes_bits");
    s.count_per_size = field<std::size_t>(j, "count_per_size");
    s.gap_s = field<double>(j, "gap_s");
    return s;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown plan kind '" + kind + "'");
}

ordered_json features_to_json(const PathFeatures& f) {
  ordered_json j;
  j["path_id"] = f.path_id;
  j["hop_count"] = f.hop_count;
  j["route_length_km"] = f.route_length_km;
  return j;
}

PathFeatures features_from_json(const json& j) {
  PathFeatures f;
  f.path_id = field<std::string>(j, "path_id");
  f.hop_count = field<std::uint32_t>(j, "hop_count");
  f.route_length_km = field<double>(j, "route_length_km");
  return f;
}

const std::vector<std::string> kHeaderKeys{"schema", "session_id", "created_at", "plan",
                                           "features"};
const std::vector<std::string> kSampleKeys{"seq",        "path_id", "payload_bytes",
                                           "wire_bits",  "sent_at_us", "rtt_s",
                                           "lost",       "method"};

bool is_known(const std::vector<std::string>& keys, const std::string& key) {
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

ProbeSample sample_from_json(const json& j) {
  ProbeSample s;
  s.seq = field<std::uint64_t>(j, "seq");
  s.path_id = field<std::string>(j, "path_id");
  s.payload_bytes = field<std::uint32_t>(j, "payload_bytes");
  s.wire_bits = field<std::uint64_t>(j, "wire_bits");
  s.sent_at_us = field<std::int64_t>(j, "sent_at_us");
  const bool lost = field<bool>(j, "lost");
  const auto& rtt = j.at("rtt_s");
  if (lost != rtt.is_null()) {
    throw Error(ErrorCode::InvalidArgument, "lost flag disagrees with rtt_s");
  }
  if (!lost) s.rtt_s = field<double>(j, "rtt_s");
  s.method = parse_probe_method(field<std::string>(j, "method"));
  return s;
}

void write_all(int fd, const std::string& data, const std::filesystem::path& path) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::IoFailure, "write '" + path.string() + "': " + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

}  // namespace

std::string utc_timestamp_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  ::gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

ordered_json to_json(const ProbeSample& s) {
  ordered_json j;
  j["seq"] = s.seq;
  j["path_id"] = s.path_id;
  j["payload_bytes"] = s.payload_bytes;
  j["wire_bits"] = s.wire_bits;
  j["sent_at_us"] = s.sent_at_us;
  j["rtt_s"] = s.rtt_s ? ordered_json(*s.rtt_s) : ordered_json(nullptr);
  j["lost"] = s.lost();
  j["method"] = std::string(to_string(s.method));
  return j;
}

ordered_json to_json(const SimPath& path) {
  ordered_json j;
  j["seed"] = path.seed;
  j["hops"] = ordered_json::array();
  for (const auto& hop : path.hops) {
    ordered_json h;
    h["capacity_bps"] = hop.capacity_bps;
    h["propagation_s"] = hop.propagation_s;
    h["processing_s"] = hop.processing_s;
    h["queue_noise_mean_s"] = hop.queue_noise_mean_s;
    h["loss_prob"] = hop.loss_prob;
    j["hops"].push_back(std::move(h));
  }
  return j;
}

SimPath sim_path_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "path config must be an object");
  SimPath path;
  path.seed = field_or<std::uint64_t>(j, "seed", 0);
  if (!j.contains("hops") || !j.at("hops").is_array()) {
    throw Error(ErrorCode::InvalidArgument, "path config needs a 'hops' array");
  }
  for (const auto& h : j.at("hops")) {
    Hop hop;
    hop.capacity_bps = field<double>(h, "capacity_bps");
    hop.propagation_s = field_or<double>(h, "propagation_s", 0.0);
    hop.processing_s = field_or<double>(h, "processing_s", 0.0);
    hop.queue_noise_mean_s = field_or<double>(h, "queue_noise_mean_s", 0.0);
    hop.loss_prob = field_or<double>(h, "loss_prob", 0.0);
    path.hops.push_back(hop);
  }
  path.validate();
  return path;
}

SimPath load_sim_path(const std::filesystem::path& path) {
  auto in = open_input(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, "path config '" + path.string() + "': " + e.what());
  }
  return sim_path_from_json(j);
}

void save_session(const SessionRecord& record, const std::filesystem::path& path) {
  ordered_json header;
  header["schema"] = kSessionSchemaVersion;
  header["session_id"] = record.session_id;
  header["created_at"] = record.created_at;
  header["plan"] = plan_to_json(record.plan);
  header["features"] =
      record.features ? features_to_json(*record.features) : ordered_json(nullptr);
  for (const auto& [key, value] : record.extra_header.items()) header[key] = value;

  std::string data = header.dump() + '\n';
  for (const auto& s : record.samples) {
    auto line = to_json(s);
    if (const auto it = record.extra_sample_fields.find(s.seq);
        it != record.extra_sample_fields.end()) {
      for (const auto& [key, value] : it->second.items()) line[key] = value;
    }
    data += line.dump();
    data += '\n';
  }

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) {
    throw Error(ErrorCode::IoFailure, "open '" + tmp.string() + "': " + std::strerror(errno));
  }
  try {
    write_all(fd, data, tmp);
    if (::fsync(fd) != 0) {
      throw Error(ErrorCode::IoFailure, "fsync '" + tmp.string() + "': " + std::strerror(errno));
    }
  } catch (...) {
    ::close(fd);
    ::unlink(tmp.c_str());
    throw;
  }
  ::close(fd);
  if (::rename(tmp.c_str(), path.c_str()) != 0) {
    const int err = errno;
    ::unlink(tmp.c_str());
    throw Error(ErrorCode::IoFailure, "rename to '" + path.string() + "': " + std::strerror(err));
  }
}

SessionRecord load_session(const std::filesystem::path& path) {
  auto in = open_input(path);
  SessionRecord record;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const json::parse_error& e) {
      throw CorruptLineError(line_no, e.what());
    }
    if (!j.is_object()) throw CorruptLineError(line_no, "expected a JSON object");

    if (!have_header) {
      if (!j.contains("schema") || !j["schema"].is_number_integer()) {
        throw Error(ErrorCode::SchemaMismatch, "session header has no integer schema field");
      }
      const int schema = j["schema"].get<int>();
      if (schema != kSessionSchemaVersion) {
        throw Error(ErrorCode::SchemaMismatch, "schema " + std::to_string(schema) +
                                                   " is not supported (expected " +
                                                   std::to_string(kSessionSchemaVersion) + ")");
      }
      try {
        record.session_id = field<std::string>(j, "session_id");
        record.created_at = field<std::string>(j, "created_at");
        record.plan = plan_from_json(field<json>(j, "plan"));
        if (j.contains("features") && !j["features"].is_null()) {
          record.features = features_from_json(j["features"]);
        }
      } catch (const Error& e) {
        throw CorruptLineError(line_no, e.what());
      }
      for (const auto& [key, value] : j.items()) {
        if (!is_known(kHeaderKeys, key)) record.extra_header[key] = value;
      }
      have_header = true;
      continue;
    }

    try {
      auto sample = sample_from_json(j);
      if (!record.samples.empty() && sample.seq <= record.samples.back().seq) {
        throw Error(ErrorCode::InvalidArgument, "samples are not ordered by seq");
      }
      ordered_json extra = ordered_json::object();
      for (const auto& [key, value] : j.items()) {
        if (!is_known(kSampleKeys, key)) extra[key] = value;
      }
      if (!extra.empty()) record.extra_sample_fields[sample.seq] = std::move(extra);
      record.samples.push_back(std::move(sample));
    } catch (const Error& e) {
      throw CorruptLineError(line_no, e.what());
    } catch (const json::exception& e) {
      throw CorruptLineError(line_no, e.what());
    }
  }
  if (!have_header) throw Error(ErrorCode::SchemaMismatch, "session file has no header line");
  return record;
}

CsvMapping CsvMapping::detect(std::span<const std::string> header) {
  const auto has = [&](std::string_view name) {
    return std::find(header.begin(), header.end(), name) != header.end();
  };
  CsvMapping m;
  if (has("wire_bits") && has("rtt_s")) return m;

  for (const auto& [name, unit] : {std::pair{"wire_bits", SizeUnit::Bits},
                                   std::pair{"size_bits", SizeUnit::Bits},
                                   std::pair{"bits", SizeUnit::Bits},
                                   std::pair{"size_bytes", SizeUnit::Bytes},
                                   std::pair{"payload_bytes", SizeUnit::Bytes},
                                   std::pair{"bytes", SizeUnit::Bytes},
                                   std::pair{"size", SizeUnit::Bytes}}) {
    if (has(name)) {
      m.size_column = name;
      m.size_unit = unit;
      break;
    }
  }
  for (const char* name : {"rtt_s", "delay_s", "delay", "rtt"}) {
    if (has(name)) {
      m.delay_column = name;
      break;
    }
  }
  if (m.payload_column == m.size_column) m.payload_column.reset();
  return m;
}

CsvImport import_csv(std::istream& in, const CsvMapping& mapping) {
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) {
      header = split_csv_line(line);
      break;
    }
  }
  if (header.empty()) throw Error(ErrorCode::EmptyFile, "CSV has no header row");

  const auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto required = [&](const std::string& name) {
    const auto idx = column(name);
    if (!idx) throw Error(ErrorCode::MissingColumn, "CSV has no column '" + name + "'");
    return *idx;
  };
  const auto optional = [&](const std::optional<std::string>& name) {
    return name ? column(*name) : std::nullopt;
  };

  const std::size_t size_idx = required(mapping.size_column);
  const std::size_t delay_idx = required(mapping.delay_column);
  const auto payload_idx = optional(mapping.payload_column);
  const auto time_idx = optional(mapping.timestamp_column);
  const auto lost_idx = optional(mapping.lost_column);
  const auto seq_idx = optional(mapping.seq_column);

  CsvImport result;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    const auto cell = [&](std::size_t idx) -> std::string_view {
      return idx < cells.size() ? std::string_view(cells[idx]) : std::string_view{};
    };

    const auto size = parse_uint(cell(size_idx));
    if (!size || *size == 0) {
      throw Error(ErrorCode::InvalidArgument,
                  "row " + std::to_string(row + 1) + ": bad size '" +
                      std::string(cell(size_idx)) + "'");
    }

    ProbeSample s;
    s.path_id = mapping.path_id;
    s.method = ProbeMethod::Simulated;
    if (mapping.size_unit == SizeUnit::Bytes) {
      s.payload_bytes = static_cast<std::uint32_t>(*size);
      s.wire_bits = 8 * *size;
    } else {
      s.wire_bits = *size;
      s.payload_bytes = static_cast<std::uint32_t>(*size / 8);
    }
    if (payload_idx) {
      if (const auto p = parse_uint(cell(*payload_idx))) s.payload_bytes = static_cast<std::uint32_t>(*p);
    }
    s.seq = row;
    if (seq_idx) {
      if (const auto q = parse_uint(cell(*seq_idx))) s.seq = *q;
    }
    if (time_idx) {
      if (const auto t = parse_double(cell(*time_idx))) s.sent_at_us = std::llround(*t);
    }

    const bool marked_lost = lost_idx && parse_flag(cell(*lost_idx));
    if (!marked_lost) {
      const auto delay = parse_double(cell(delay_idx));
      if (delay && *delay >= 0.0) {
        s.rtt_s = *delay;
      } else {
        ++result.unparseable_delays;
      }
    }
    result.samples.push_back(std::move(s));
    ++row;
  }
  if (result.samples.empty()) throw Error(ErrorCode::EmptyFile, "CSV has no data rows");
  return result;
}

std::vector<std::string> read_csv_header(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) return split_csv_line(line);
  }
  throw Error(ErrorCode::EmptyFile, "CSV '" + path.string() + "' is empty");
}

CsvImport import_csv(const std::filesystem::path& path, const CsvMapping& mapping) {
  auto in = open_input(path);
  return import_csv(in, mapping);
}

CsvImport import_csv(const std::filesystem::path& path) {
  const auto header = read_csv_header(path);
  return import_csv(path, CsvMapping::detect(header));
}

void export_csv(std::span<const ProbeSample> samples, std::ostream& out) {
  out << "seq,payload_bytes,wire_bits,sent_at_us,rtt_s,lost\n";
  char buf[64];
  for (const auto& s : samples) {
    out << s.seq << ',' << s.payload_bytes << ',' << s.wire_bits << ',' << s.sent_at_us << ',';
    if (s.rtt_s) {
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, *s.rtt_s);
      out.write(buf, ptr - buf);
    }
    out << ',' << (s.lost() ? 1 : 0) << '\n';
  }
}

void export_csv(std::span<const ProbeSample> samples, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::IoFailure, "cannot write '" + path.string() + "': " +
                                          std::strerror(errno));
  }
  export_csv(samples, out);
  if (!out) throw Error(ErrorCode::IoFailure, "write to '" + path.string() + "' failed");
}

std::vector<InterceptObservation> load_intercept_observations(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) {
      header = split_csv_line(line);
      break;
    }
  }
  if (header.empty()) throw Error(ErrorCode::EmptyFile, "observations CSV has no header row");
  const auto column = [&](const char* name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw Error(ErrorCode::MissingColumn, std::string("observations CSV has no column '") +
                                                name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t id_idx = column("path_id");
  const std::size_t n_idx = column("n");
  const std::size_t l_idx = column("l_km");
  const std::size_t a_idx = column("a_s");

  std::vector<InterceptObservation> out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_csv_line(line);
    if (cells.size() < header.size()) {
      throw Error(ErrorCode::InvalidArgument, "row " + std::to_string(row) + " is short");
    }
    const auto n = parse_uint(cells[n_idx]);
    const auto l = parse_double(cells[l_idx]);
    const auto a = parse_double(cells[a_idx]);
    if (!n || !l || !a) {
      throw Error(ErrorCode::InvalidArgument, "row " + std::to_string(row) + " has bad numbers");
    }
    InterceptObservation obs;
    obs.features.path_id = cells[id_idx];
    obs.features.hop_count = static_cast<std::uint32_t>(*n);
    obs.features.route_length_km = *l;
    obs.features.validate();
    obs.intercept_s = *a;
    out.push_back(std::move(obs));
  }
  if (out.empty()) throw Error(ErrorCode::EmptyFile, "observations CSV has no data rows");
  return out;
}

ordered_json to_json(const InterceptModel& model) {
  ordered_json j;
  j["alpha_s_per_hop"] = model.alpha_s_per_hop;
  j["beta_s_per_km"] = model.beta_s_per_km;
  j["constant_s"] = model.constant_s;
  j["has_constant"] = model.has_constant;
  j["residual_rms_s"] = model.residual_rms_s;
  j["n_observations"] = model.n_observations;
  return j;
}

InterceptModel intercept_model_from_json(const json& j) {
  InterceptModel m;
  m.alpha_s_per_hop = field<double>(j, "alpha_s_per_hop");
  m.beta_s_per_km = field<double>(j, "beta_s_per_km");
  m.constant_s = field_or<double>(j, "constant_s", 0.0);
  m.has_constant = field_or<bool>(j, "has_constant", false);
  m.residual_rms_s = field_or<double>(j, "residual_rms_s", 0.0);
  m.n_observations = field_or<std::size_t>(j, "n_observations", 0);
  return m;
}

}  // namespace bwest
