#include "bwest/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "bwest/error.hpp"
#include "bwest/estimator.hpp"
#include "bwest/intercept_model.hpp"
#include "bwest/metrics_stats.hpp"
#include "bwest/path_simulator.hpp"
#include "bwest/probe_engine.hpp"
#include "bwest/session_store.hpp"

namespace bwest::cli {

using nlohmann::ordered_json;

namespace {

/// Error raised for bad command-line usage; mapped to exit code 64.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  T out{};
  is >> out;
  if (!is || !(is >> std::ws).eof()) {
    throw Error(ErrorCode::InvalidArgument, "config '" + key + "': bad value '" + value + "'");
  }
  return out;
}

std::vector<std::uint32_t> parse_sizes(const std::string& value) {
  std::vector<std::uint32_t> sizes;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) sizes.push_back(parse_number<std::uint32_t>("sizes", trim(item)));
  return sizes;
}

OutputFormat parse_format(const std::string& value) {
  if (value == "text") return OutputFormat::Text;
  if (value == "json") return OutputFormat::Json;
  if (value == "csv") return OutputFormat::Csv;
  throw Error(ErrorCode::InvalidArgument, "unknown output format '" + value + "'");
}

std::string ms(double seconds, int decimals = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(decimals) << seconds * 1e3 << " ms";
  return os.str();
}

std::string fixed(double value, int decimals) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(decimals) << value;
  return os.str();
}

int exit_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::AllProbesLost:
    case ErrorCode::NoReply:
      return exit_code::kUnreachable;
    case ErrorCode::NoUsableSizes:
    case ErrorCode::EqualSizes:
    case ErrorCode::NonPositiveDelayDifference:
    case ErrorCode::DelayNotAboveIntercept:
    case ErrorCode::InsufficientPoints:
    case ErrorCode::NonPositiveSlope:
    case ErrorCode::InsufficientObservations:
    case ErrorCode::RankDeficient:
    case ErrorCode::NoSamples:
    case ErrorCode::InsufficientSamples:
      return exit_code::kEstimation;
    case ErrorCode::SchemaMismatch:
    case ErrorCode::CorruptLine:
    case ErrorCode::MissingColumn:
    case ErrorCode::EmptyFile:
      return exit_code::kDataFormat;
    case ErrorCode::InvalidArgument:
      return exit_code::kUsage;
    default:
      return exit_code::kInternal;
  }
}

struct Loaded {
  std::vector<ProbeSample> samples;
  std::optional<PathFeatures> features;
  std::size_t unparseable_delays = 0;
};

struct CsvFlags {
  std::string size_column;
  std::string size_unit;
  std::string delay_column;
};

bool looks_like_session(const std::filesystem::path& path) {
  if (path.extension() == ".csv") return false;
  std::ifstream in(path);
  char c = 0;
  while (in.get(c)) {
    if (!std::isspace(static_cast<unsigned char>(c))) return c == '{';
  }
  return false;
}

Loaded load_input(const std::filesystem::path& path, const CsvFlags& csv) {
  Loaded loaded;
  if (looks_like_session(path)) {
    auto record = load_session(path);
    loaded.samples = std::move(record.samples);
    loaded.features = record.features;
    return loaded;
  }
  auto mapping = CsvMapping::detect(read_csv_header(path));
  if (!csv.size_column.empty()) {
    mapping.size_column = csv.size_column;
    if (mapping.payload_column == mapping.size_column) mapping.payload_column.reset();
  }
  if (!csv.delay_column.empty()) mapping.delay_column = csv.delay_column;
  if (csv.size_unit == "bytes") mapping.size_unit = SizeUnit::Bytes;
  if (csv.size_unit == "bits") mapping.size_unit = SizeUnit::Bits;
  mapping.path_id = path.stem().string();
  auto imported = import_csv(path, mapping);
  loaded.samples = std::move(imported.samples);
  loaded.unparseable_delays = imported.unparseable_delays;
  return loaded;
}

struct EstimateOptions {
  std::size_t min_samples = kDefaultMinSamplesPerSize;
  bool one_way_halve = false;
  std::string model_path;
  std::optional<std::uint32_t> hops;
  std::optional<double> route_km;
};

struct EstimateReport {
  std::size_t n_samples = 0;
  std::size_t n_lost = 0;
  DelayProfile profile;
  BandwidthEstimate estimate;
  std::optional<BandwidthEstimate> model_estimate;
  std::optional<double> ground_truth_bps;
  std::optional<double> ground_truth_intercept_s;
  std::vector<std::string> warnings;
};

EstimateReport build_estimate(std::vector<ProbeSample> samples, const EstimateOptions& opts,
                              const std::optional<PathFeatures>& session_features) {
  EstimateReport report;
  report.n_samples = samples.size();
  report.n_lost = static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [](const auto& s) { return s.lost(); }));
  if (opts.one_way_halve) {
    for (auto& s : samples) {
      if (s.rtt_s) *s.rtt_s /= 2.0;
    }
    report.warnings.emplace_back("one-way delays are half the RTT; this assumes a symmetric path");
  }

  report.profile = min_delay_profile(samples, opts.min_samples);
  if (report.profile.points.size() < 2) {
    std::string detail = "need at least 2 usable sizes, got " +
                         std::to_string(report.profile.points.size());
    for (const auto& d : report.profile.dropped) detail += "; " + d;
    throw Error(ErrorCode::NoUsableSizes, detail);
  }
  report.estimate = estimate_auto(report.profile);
  for (const auto& w : report.estimate.warnings) report.warnings.push_back(w);

  if (!opts.model_path.empty()) {
    std::ifstream in(opts.model_path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open model '" + opts.model_path + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::CorruptLine, std::string("model JSON: ") + e.what());
    }
    const auto model = intercept_model_from_json(j);
    PathFeatures features = session_features.value_or(PathFeatures{});
    if (opts.hops) features.hop_count = *opts.hops;
    if (opts.route_km) features.route_length_km = *opts.route_km;
    if (!session_features && !opts.hops) {
      throw UsageError("--model needs --hops (or a session with recorded features)");
    }
    features.validate();
    report.model_estimate = estimate_with_model(report.profile.points.front(), model, features);
  }
  return report;
}

ordered_json report_json(const EstimateReport& r) {
  ordered_json j;
  j["samples"] = r.n_samples;
  j["lost"] = r.n_lost;
  j["points"] = ordered_json::array();
  for (const auto& p : r.profile.points) {
    j["points"].push_back({{"size_bits", p.size_bits},
                           {"min_delay_s", p.delay_s},
                           {"samples", r.profile.samples_per_size.at(p.size_bits)}});
  }
  j["dropped"] = r.profile.dropped;
  j["method"] = std::string(to_string(r.estimate.method));
  j["b_av_bps"] = r.estimate.b_av_bps;
  j["intercept_s"] = r.estimate.intercept_s;
  j["intercept_ms"] = r.estimate.intercept_s * 1e3;
  j["residual_rms_s"] = r.estimate.residual_rms_s;
  if (r.model_estimate) {
    j["model_b_av_bps"] = r.model_estimate->b_av_bps;
    j["model_intercept_s"] = r.model_estimate->intercept_s;
  }
  if (r.ground_truth_bps) j["ground_truth_bps"] = *r.ground_truth_bps;
  if (r.ground_truth_intercept_s) j["ground_truth_intercept_s"] = *r.ground_truth_intercept_s;
  j["warnings"] = r.warnings;
  return j;
}

void print_report(const EstimateReport& r, bool json, std::ostream& out) {
  if (json) {
    out << report_json(r).dump(2) << '\n';
    return;
  }
  out << "samples: " << r.n_samples << " (" << r.n_lost << " lost)\n";
  for (const auto& p : r.profile.points) {
    out << "size " << p.size_bits << " bits: min delay " << ms(p.delay_s) << " over "
        << r.profile.samples_per_size.at(p.size_bits) << " samples\n";
  }
  for (const auto& d : r.profile.dropped) out << "dropped " << d << '\n';
  out << "method: " << to_string(r.estimate.method) << '\n';
  out << "B_av = " << format_rate(r.estimate.b_av_bps) << ", a = " << ms(r.estimate.intercept_s)
      << '\n';
  out << "B_av_bps = " << fixed(r.estimate.b_av_bps, 0) << '\n';
  if (r.estimate.method == EstimateMethod::Regression) {
    out << "residual rms = " << ms(r.estimate.residual_rms_s, 6) << '\n';
  }
  if (r.model_estimate) {
    out << "model: a = " << ms(r.model_estimate->intercept_s)
        << ", B_av = " << format_rate(r.model_estimate->b_av_bps) << '\n';
  }
  if (r.ground_truth_bps) {
    out << "ground truth = " << format_rate(*r.ground_truth_bps) << ", a = "
        << ms(*r.ground_truth_intercept_s) << '\n';
    out << "ground_truth_bps = " << fixed(*r.ground_truth_bps, 0) << '\n';
  }
  for (const auto& w : r.warnings) out << "warning: " << w << '\n';
}

std::string random_hex(std::size_t digits) {
  std::random_device rd;
  std::ostringstream os;
  for (std::size_t i = 0; i < digits; ++i) os << std::hex << (rd() & 0xf);
  return os.str();
}

struct GlobalFlags {
  std::string config_path;
  bool json = false;
  std::optional<std::uint64_t> seed;
  std::string output;
  int verbosity = 0;
};

/// Flags shared by probe/simulate for the plan parameters.
struct PlanFlags {
  std::vector<std::uint32_t> sizes;
  std::uint32_t count = 0;
  double gap = 0.0;
  double timeout = 0.0;
  std::string method;
  std::uint16_t port = 0;
  std::size_t min_samples = 0;
  CLI::Option* sizes_opt = nullptr;
  CLI::Option* count_opt = nullptr;
  CLI::Option* gap_opt = nullptr;
  CLI::Option* timeout_opt = nullptr;
  CLI::Option* method_opt = nullptr;
  CLI::Option* port_opt = nullptr;
  CLI::Option* min_samples_opt = nullptr;

  void add_sizes(CLI::App* app) {
    sizes_opt = app->add_option("--sizes", sizes, "Payload sizes in bytes, comma separated")
                    ->delimiter(',');
    count_opt = app->add_option("--count", count, "Probes per size");
    gap_opt = app->add_option("--gap", gap, "Seconds between probes");
    min_samples_opt =
        app->add_option("--min-samples", min_samples, "Samples a size needs to be used");
  }

  void add_live(CLI::App* app) {
    timeout_opt = app->add_option("--timeout", timeout, "Seconds to wait for a reply");
    method_opt = app->add_option("--method", method, "icmp or udp");
    port_opt = app->add_option("--port", port, "UDP echo port");
  }

  void apply(CliConfig& c) const {
    if (sizes_opt && sizes_opt->count()) c.sizes = sizes;
    if (count_opt && count_opt->count()) c.count = count;
    if (gap_opt && gap_opt->count()) c.gap_s = gap;
    if (timeout_opt && timeout_opt->count()) c.timeout_s = timeout;
    if (method_opt && method_opt->count()) c.method = parse_probe_method(method);
    if (port_opt && port_opt->count()) c.port = port;
    if (min_samples_opt && min_samples_opt->count()) c.min_samples = min_samples;
  }
};

class Runner {
 public:
  Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(const std::vector<std::string>& args) {
    CLI::App app{"Delay-based available bandwidth estimation", "bwest"};
    app.fallthrough();
    app.require_subcommand(1);
    app.add_option("--config", global_.config_path, "key=value defaults file");
    app.add_flag("--json", global_.json, "Machine-readable output");
    app.add_option("--seed", global_.seed, "Simulator seed (overrides the path config)");
    app.add_option("--output", global_.output, "Output file");
    app.add_flag("-v,--verbose", global_.verbosity, "More output");

    // probe
    auto* probe = app.add_subcommand("probe", "Probe a live path with echo packets");
    std::string target;
    bool discover = false;
    int max_ttl = 0;
    std::optional<double> probe_route_km;
    bool probe_halve = false;
    PlanFlags probe_flags;
    probe->add_option("target", target, "Host name or IPv4 address")->required();
    probe_flags.add_sizes(probe);
    probe_flags.add_live(probe);
    probe->add_flag("--discover-hops", discover, "Record the hop count via TTL probing");
    auto* max_ttl_opt = probe->add_option("--max-ttl", max_ttl, "Hop discovery limit");
    probe->add_option("--route-km", probe_route_km, "Route length to record with the session");
    probe->add_flag("--one-way-halve", probe_halve, "Halve RTTs (assumes a symmetric path)");

    // estimate
    auto* estimate = app.add_subcommand("estimate", "Estimate bandwidth from a session or CSV");
    std::string input;
    EstimateOptions est_opts;
    CsvFlags csv;
    std::size_t est_min_samples = 0;
    estimate->add_option("input", input, "Session JSONL or CSV file")->required();
    auto* est_min_opt =
        estimate->add_option("--min-samples", est_min_samples, "Samples a size needs to be used");
    estimate->add_flag("--one-way-halve", est_opts.one_way_halve,
                       "Halve RTTs (assumes a symmetric path)");
    estimate->add_option("--model", est_opts.model_path, "Intercept model JSON from calibrate");
    estimate->add_option("--hops", est_opts.hops, "Hop count for the intercept model");
    estimate->add_option("--route-km", est_opts.route_km, "Route length for the intercept model");
    estimate->add_option("--size-col", csv.size_column, "CSV size column");
    estimate->add_option("--size-unit", csv.size_unit, "CSV size unit")
        ->check(CLI::IsMember({"bytes", "bits"}));
    estimate->add_option("--delay-col", csv.delay_column, "CSV delay column (seconds)");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Run a seeded path simulation");
    std::string path_config;
    PlanFlags sim_flags;
    simulate->add_option("config", path_config, "Path configuration JSON")->required();
    sim_flags.add_sizes(simulate);

    // calibrate
    auto* calibrate = app.add_subcommand("calibrate", "Fit the hop/length intercept model");
    std::string observations;
    bool affine = false;
    calibrate->add_option("observations", observations, "CSV: path_id,n,l_km,a_s")->required();
    calibrate->add_flag("--affine", affine, "Fit an additional constant term");

    // stats
    auto* stats = app.add_subcommand("stats", "Delay, jitter and loss summary");
    std::string stats_input;
    std::size_t series_window = 0;
    stats->add_option("input", stats_input, "Session JSONL or CSV file")->required();
    stats->add_option("--series", series_window, "Emit a CSV jitter series with this window");

    try {
      std::vector<std::string> reversed(args.rbegin(), args.rend());
      app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
      out_ << app.help();
      return exit_code::kOk;
    } catch (const CLI::CallForAllHelp&) {
      out_ << app.help("", CLI::AppFormatMode::All);
      return exit_code::kOk;
    } catch (const CLI::ParseError& e) {
      err_ << "error: " << e.what() << '\n';
      return exit_code::kUsage;
    }

    try {
      if (!global_.config_path.empty()) apply_config_file(config_, global_.config_path);
      if (global_.json) config_.format = OutputFormat::Json;
      config_.verbosity = std::max(config_.verbosity, global_.verbosity);

      if (*probe) {
        probe_flags.apply(config_);
        if (max_ttl_opt->count()) config_.max_ttl = max_ttl;
        return cmd_probe(target, discover, probe_route_km, probe_halve);
      }
      if (*estimate) {
        est_opts.min_samples = est_min_opt->count() ? est_min_samples : config_.min_samples;
        return cmd_estimate(input, est_opts, csv);
      }
      if (*simulate) {
        sim_flags.apply(config_);
        return cmd_simulate(path_config);
      }
      if (*calibrate) return cmd_calibrate(observations, affine);
      if (*stats) return cmd_stats(stats_input, series_window);
    } catch (const UsageError& e) {
      err_ << "usage error: " << e.what() << '\n';
      return exit_code::kUsage;
    } catch (const Error& e) {
      err_ << "error: " << e.what() << '\n';
      return exit_for(e.code());
    } catch (const std::exception& e) {
      err_ << "internal error: " << e.what() << '\n';
      return exit_code::kInternal;
    }
    return exit_code::kUsage;
  }

 private:
  bool json() const { return config_.format == OutputFormat::Json; }

  int cmd_probe(const std::string& target, bool discover, std::optional<double> route_km,
                bool halve) {
    ProbePlan plan;
    plan.target = target;
    plan.sizes_payload_bytes = config_.sizes;
    plan.count_per_size = config_.count;
    plan.inter_probe_gap_s = config_.gap_s;
    plan.timeout_s = config_.timeout_s;
    plan.method = config_.method;
    plan.udp_port = config_.port;
    try {
      plan.validate();
    } catch (const Error& e) {
      throw UsageError(e.what());
    }

    SessionRecord record;
    record.created_at = utc_timestamp_now();
    record.session_id = "probe-" + random_hex(12);
    record.plan = plan;
    record.samples = run_session(plan);

    if (discover || route_km) {
      PathFeatures features;
      features.path_id = target;
      if (discover) features.hop_count = static_cast<std::uint32_t>(
                        discover_hops(target, config_.max_ttl, config_.timeout_s));
      if (route_km) features.route_length_km = *route_km;
      features.validate();
      record.features = features;
    }

    const std::filesystem::path out_path =
        global_.output.empty() ? record.session_id + ".jsonl" : global_.output;
    save_session(record, out_path);

    EstimateOptions opts;
    opts.min_samples = std::min<std::size_t>(config_.min_samples, config_.count);
    opts.one_way_halve = halve;
    if (!json()) {
      out_ << "session: " << out_path.string() << '\n';
      if (record.features) out_ << "hops: " << record.features->hop_count << '\n';
    }
    auto report = build_estimate(record.samples, opts, record.features);
    if (json()) {
      auto j = report_json(report);
      j["session"] = out_path.string();
      if (record.features) j["hop_count"] = record.features->hop_count;
      out_ << j.dump(2) << '\n';
    } else {
      print_report(report, false, out_);
    }
    return exit_code::kOk;
  }

  int cmd_estimate(const std::string& input, const EstimateOptions& opts, const CsvFlags& csv) {
    auto loaded = load_input(input, csv);
    auto report = build_estimate(std::move(loaded.samples), opts, loaded.features);
    if (loaded.unparseable_delays > 0) {
      report.warnings.push_back(std::to_string(loaded.unparseable_delays) +
                                " rows with unparseable delay imported as lost");
    }
    print_report(report, json(), out_);
    return exit_code::kOk;
  }

  int cmd_simulate(const std::string& config_path) {
    SimPath path;
    try {
      path = load_sim_path(config_path);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::IoFailure) throw;
      err_ << "error: " << e.what() << '\n';
      return exit_code::kDataFormat;
    }
    if (global_.seed) path.seed = *global_.seed;

    SimPlan plan;
    plan.path = path;
    for (const auto bytes : config_.sizes) plan.sizes_bits.push_back(8ULL * bytes);
    plan.count_per_size = config_.count;
    plan.gap_s = config_.gap_s;

    SessionRecord record;
    record.session_id = "sim-" + std::to_string(path.seed);
    // Simulated sessions run on simulated time, so the timestamp is the
    // simulation epoch; equal inputs give byte-identical files.
    record.created_at = "1970-01-01T00:00:00Z";
    try {
      record.samples = run_experiment(path, plan.sizes_bits, plan.count_per_size, plan.gap_s,
                                      record.session_id);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    record.plan = plan;

    const std::filesystem::path out_path =
        global_.output.empty() ? record.session_id + ".jsonl" : global_.output;
    save_session(record, out_path);

    EstimateOptions opts;
    opts.min_samples = std::min<std::size_t>(config_.min_samples, config_.count);
    auto report = build_estimate(record.samples, opts, std::nullopt);
    report.ground_truth_bps = ground_truth_rate(path);
    report.ground_truth_intercept_s = ground_truth_intercept(path);
    if (json()) {
      auto j = report_json(report);
      j["session"] = out_path.string();
      j["seed"] = path.seed;
      j["rng"] = std::string(SimRng::kAlgorithm);
      out_ << j.dump(2) << '\n';
    } else {
      out_ << "session: " << out_path.string() << '\n';
      out_ << "seed: " << path.seed << " (" << SimRng::kAlgorithm << ")\n";
      print_report(report, false, out_);
    }
    return exit_code::kOk;
  }

  int cmd_calibrate(const std::string& observations_path, bool affine) {
    const auto observations = load_intercept_observations(observations_path);
    const auto model = fit_intercept_model(observations, {.affine = affine});

    const std::filesystem::path model_path =
        global_.output.empty() ? "intercept_model.json" : global_.output;
    {
      std::ofstream out(model_path);
      if (!out) throw Error(ErrorCode::IoFailure, "cannot write '" + model_path.string() + "'");
      out << to_json(model).dump(2) << '\n';
    }

    if (json()) {
      auto j = to_json(model);
      j["alpha_ms_per_hop"] = model.alpha_s_per_hop * 1e3;
      j["beta_ms_per_km"] = model.beta_s_per_km * 1e3;
      j["residual_rms_ms"] = model.residual_rms_s * 1e3;
      j["model"] = model_path.string();
      out_ << j.dump(2) << '\n';
    } else {
      out_ << "observations: " << model.n_observations << '\n';
      out_ << "alpha = " << fixed(model.alpha_s_per_hop * 1e3, 6) << " ms/hop\n";
      out_ << "beta = " << fixed(model.beta_s_per_km * 1e3, 9) << " ms/km\n";
      if (model.has_constant) out_ << "constant = " << ms(model.constant_s, 6) << '\n';
      out_ << "residual rms = " << ms(model.residual_rms_s, 6) << '\n';
      out_ << "model: " << model_path.string() << '\n';
    }
    return exit_code::kOk;
  }

  int cmd_stats(const std::string& input, std::size_t series_window) {
    const auto loaded = load_input(input, {});
    const auto summary = summarize(loaded.samples);

    if (series_window > 0) {
      const auto series = jitter_series(loaded.samples, series_window);
      std::ofstream file;
      if (!global_.output.empty()) {
        file.open(global_.output);
        if (!file) throw Error(ErrorCode::IoFailure, "cannot write '" + global_.output + "'");
      }
      std::ostream& os = global_.output.empty() ? out_ : file;
      os << "timestamp_us,jitter_s\n";
      char buf[64];
      for (const auto& p : series) {
        std::snprintf(buf, sizeof buf, "%.17g", p.jitter_s);
        os << p.timestamp_us << ',' << buf << '\n';
      }
      return exit_code::kOk;
    }

    if (json()) {
      ordered_json j;
      j["n_total"] = summary.n_total;
      j["n_lost"] = summary.n_lost;
      j["loss_rate"] = summary.loss_rate;
      if (summary.delays) {
        j["mean_s"] = summary.delays->mean_s;
        j["lower_2_5_s"] = summary.delays->lower_2_5_s;
        j["upper_97_5_s"] = summary.delays->upper_97_5_s;
        j["jitter_s"] = summary.delays->jitter_s;
      }
      out_ << j.dump(2) << '\n';
    } else {
      out_ << "samples: " << summary.n_total << " (" << summary.n_lost << " lost)\n";
      out_ << "loss rate = " << fixed(summary.loss_rate * 100.0, 2) << " %\n";
      if (summary.delays) {
        out_ << "mean = " << ms(summary.delays->mean_s) << '\n';
        out_ << "2.5% = " << ms(summary.delays->lower_2_5_s) << '\n';
        out_ << "97.5% = " << ms(summary.delays->upper_97_5_s) << '\n';
        out_ << "jitter = " << ms(summary.delays->jitter_s) << '\n';
      }
    }
    if (!summary.delays) {
      err_ << "error: AllLost: every sample was lost\n";
      return exit_code::kEstimation;
    }
    return exit_code::kOk;
  }

  std::ostream& out_;
  std::ostream& err_;
  GlobalFlags global_;
  CliConfig config_;
};

}  // namespace

void apply_config(CliConfig& config, std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidArgument,
                  "config line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "sizes") {
      config.sizes = parse_sizes(value);
    } else if (key == "count") {
      config.count = parse_number<std::uint32_t>(key, value);
    } else if (key == "gap") {
      config.gap_s = parse_number<double>(key, value);
    } else if (key == "timeout") {
      config.timeout_s = parse_number<double>(key, value);
    } else if (key == "method") {
      config.method = parse_probe_method(value);
    } else if (key == "port") {
      config.port = parse_number<std::uint16_t>(key, value);
    } else if (key == "min_samples") {
      config.min_samples = parse_number<std::size_t>(key, value);
    } else if (key == "max_ttl") {
      config.max_ttl = parse_number<int>(key, value);
    } else if (key == "format") {
      config.format = parse_format(value);
    } else if (key == "verbosity") {
      config.verbosity = parse_number<int>(key, value);
    } else {
      throw Error(ErrorCode::InvalidArgument, "config line " + std::to_string(line_no) +
                                                  ": unknown key '" + key + "'");
    }
  }
}

void apply_config_file(CliConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open config '" + path.string() + "'");
  apply_config(config, in);
}

std::string format_rate(double bps) {
  static constexpr const char* kUnits[] = {"bit/s", "kbit/s", "Mbit/s", "Gbit/s", "Tbit/s"};
  std::size_t unit = 0;
  double value = bps;
  while (std::abs(value) >= 1000.0 && unit + 1 < std::size(kUnits)) {
    value /= 1000.0;
    ++unit;
  }
  const auto decimals_for = [](double v) {
    const double a = std::abs(v);
    if (a >= 100.0) return 1;
    if (a >= 10.0) return 2;
    return 3;
  };
  // Rounding can carry into the next decade (999.96 -> 1000.0).
  const int decimals = decimals_for(value);
  const double scale = std::pow(10.0, decimals);
  double rounded = std::round(value * scale) / scale;
  if (std::abs(rounded) >= 1000.0 && unit + 1 < std::size(kUnits)) {
    rounded /= 1000.0;
    ++unit;
  }
  return fixed(rounded, decimals_for(rounded)) + " " + kUnits[unit];
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Runner runner(out, err);
  return runner.run(args);
}

}  // namespace bwest::cli
