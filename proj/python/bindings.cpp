#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "bwest/cli.hpp"
#include "bwest/error.hpp"
#include "bwest/estimator.hpp"
#include "bwest/intercept_model.hpp"
#include "bwest/metrics_stats.hpp"
#include "bwest/path_simulator.hpp"
#include "bwest/probe_engine.hpp"
#include "bwest/session_store.hpp"

namespace py = pybind11;
using namespace bwest;

namespace {

std::string method_name(EstimateMethod m) { return std::string(to_string(m)); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Probe-size/delay bandwidth estimation";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&]() { return py::object(py::exception<Error>(m, "BwestError")); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error_type.get_stored()(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type.get_stored().ptr(), exc.ptr());
    }
  });

  py::enum_<ProbeMethod>(m, "ProbeMethod")
      .value("ICMP_ECHO", ProbeMethod::IcmpEcho)
      .value("UDP_ECHO", ProbeMethod::UdpEcho)
      .value("SIMULATED", ProbeMethod::Simulated);

  py::class_<ProbeSample>(m, "ProbeSample")
      .def(py::init<>())
      .def(py::init([](std::uint64_t seq, std::uint64_t wire_bits, std::optional<double> rtt_s,
                       std::int64_t sent_at_us) {
             ProbeSample s;
             s.seq = seq;
             s.wire_bits = wire_bits;
             s.payload_bytes = static_cast<std::uint32_t>(wire_bits / 8);
             s.rtt_s = rtt_s;
             s.sent_at_us = sent_at_us;
             s.method = ProbeMethod::Simulated;
             return s;
           }),
           py::arg("seq"), py::arg("wire_bits"), py::arg("rtt_s"), py::arg("sent_at_us") = 0)
      .def_readwrite("path_id", &ProbeSample::path_id)
      .def_readwrite("seq", &ProbeSample::seq)
      .def_readwrite("payload_bytes", &ProbeSample::payload_bytes)
      .def_readwrite("wire_bits", &ProbeSample::wire_bits)
      .def_readwrite("sent_at_us", &ProbeSample::sent_at_us)
      .def_readwrite("rtt_s", &ProbeSample::rtt_s)
      .def_readwrite("method", &ProbeSample::method)
      .def_property_readonly("lost", &ProbeSample::lost)
      .def(py::self == py::self)
      .def("__repr__", [](const ProbeSample& s) {
        std::ostringstream os;
        os << "ProbeSample(seq=" << s.seq << ", wire_bits=" << s.wire_bits << ", rtt_s=";
        if (s.rtt_s) os << *s.rtt_s;
        else os << "None";
        os << ")";
        return os.str();
      });

  // estimator
  py::class_<SizeDelayPoint>(m, "SizeDelayPoint")
      .def(py::init([](std::uint64_t size_bits, double delay_s) {
             return SizeDelayPoint{size_bits, delay_s};
           }),
           py::arg("size_bits"), py::arg("delay_s"))
      .def_readwrite("size_bits", &SizeDelayPoint::size_bits)
      .def_readwrite("delay_s", &SizeDelayPoint::delay_s)
      .def("__repr__", [](const SizeDelayPoint& p) {
        return "SizeDelayPoint(" + std::to_string(p.size_bits) + ", " + std::to_string(p.delay_s) +
               ")";
      });

  py::class_<DelayProfile>(m, "DelayProfile")
      .def(py::init<>())
      .def_readwrite("path_id", &DelayProfile::path_id)
      .def_readwrite("points", &DelayProfile::points)
      .def_readwrite("samples_per_size", &DelayProfile::samples_per_size)
      .def_readwrite("dropped", &DelayProfile::dropped);

  py::class_<BandwidthEstimate>(m, "BandwidthEstimate")
      .def_readonly("b_av_bps", &BandwidthEstimate::b_av_bps)
      .def_readonly("intercept_s", &BandwidthEstimate::intercept_s)
      .def_property_readonly("method", [](const BandwidthEstimate& e) { return method_name(e.method); })
      .def_readonly("residual_rms_s", &BandwidthEstimate::residual_rms_s)
      .def_readonly("warnings", &BandwidthEstimate::warnings);

  py::class_<LinearFit>(m, "LinearFit")
      .def_readonly("slope_s_per_bit", &LinearFit::slope_s_per_bit)
      .def_readonly("intercept_s", &LinearFit::intercept_s)
      .def_readonly("residual_rms_s", &LinearFit::residual_rms_s)
      .def_readonly("n_points", &LinearFit::n_points);

  m.attr("DEFAULT_MIN_SAMPLES_PER_SIZE") = kDefaultMinSamplesPerSize;
  m.def("min_delay_profile",
        [](const std::vector<ProbeSample>& samples, std::size_t min_samples) {
          return min_delay_profile(samples, min_samples);
        },
        py::arg("samples"), py::arg("min_samples_per_size") = kDefaultMinSamplesPerSize);
  m.def("estimate_direct", &estimate_direct, py::arg("point"));
  m.def("estimate_pairwise", &estimate_pairwise, py::arg("p1"), py::arg("p2"));
  m.def("estimate_intercept", &estimate_intercept, py::arg("p1"), py::arg("p2"));
  m.def("estimate_from_intercept", &estimate_from_intercept, py::arg("point"),
        py::arg("intercept_s"));
  m.def("fit_linear",
        [](const std::vector<SizeDelayPoint>& points) { return fit_linear(points); },
        py::arg("points"));
  m.def("invert_slope", &invert_slope, py::arg("slope_s_per_bit"));
  m.def("estimate_regression", &estimate_regression, py::arg("profile"));
  m.def("estimate_auto", &estimate_auto, py::arg("profile"));

  // simulator
  py::class_<Hop>(m, "Hop")
      .def(py::init([](double capacity_bps, double propagation_s, double processing_s,
                       double queue_noise_mean_s, double loss_prob) {
             return Hop{capacity_bps, propagation_s, processing_s, queue_noise_mean_s, loss_prob};
           }),
           py::arg("capacity_bps") = 1e6, py::arg("propagation_s") = 0.0,
           py::arg("processing_s") = 0.0, py::arg("queue_noise_mean_s") = 0.0,
           py::arg("loss_prob") = 0.0)
      .def_readwrite("capacity_bps", &Hop::capacity_bps)
      .def_readwrite("propagation_s", &Hop::propagation_s)
      .def_readwrite("processing_s", &Hop::processing_s)
      .def_readwrite("queue_noise_mean_s", &Hop::queue_noise_mean_s)
      .def_readwrite("loss_prob", &Hop::loss_prob);

  py::class_<SimPath>(m, "SimPath")
      .def(py::init([](std::vector<Hop> hops, std::uint64_t seed) {
             return SimPath{std::move(hops), seed};
           }),
           py::arg("hops"), py::arg("seed") = 0)
      .def_readwrite("hops", &SimPath::hops)
      .def_readwrite("seed", &SimPath::seed)
      .def("validate", &SimPath::validate);

  m.attr("RNG_ALGORITHM") = std::string(SimRng::kAlgorithm);
  m.def("fixed_delay", &fixed_delay, py::arg("path"), py::arg("wire_bits"));
  m.def("ground_truth_rate", &ground_truth_rate, py::arg("path"));
  m.def("ground_truth_intercept", &ground_truth_intercept, py::arg("path"));
  m.def("run_experiment",
        [](const SimPath& path, const std::vector<std::uint64_t>& sizes_bits, std::size_t count,
           double gap_s, const std::string& path_id) {
          return run_experiment(path, sizes_bits, count, gap_s, path_id);
        },
        py::arg("path"), py::arg("sizes_bits"), py::arg("count_per_size"),
        py::arg("gap_s") = kDefaultSimGapS, py::arg("path_id") = "sim");

  // intercept model
  py::class_<PathFeatures>(m, "PathFeatures")
      .def(py::init([](std::string path_id, std::uint32_t hop_count, double route_length_km) {
             return PathFeatures{std::move(path_id), hop_count, route_length_km};
           }),
           py::arg("path_id"), py::arg("hop_count"), py::arg("route_length_km"))
      .def_readwrite("path_id", &PathFeatures::path_id)
      .def_readwrite("hop_count", &PathFeatures::hop_count)
      .def_readwrite("route_length_km", &PathFeatures::route_length_km);

  py::class_<InterceptObservation>(m, "InterceptObservation")
      .def(py::init([](PathFeatures features, double intercept_s) {
             return InterceptObservation{std::move(features), intercept_s};
           }),
           py::arg("features"), py::arg("intercept_s"))
      .def_readwrite("features", &InterceptObservation::features)
      .def_readwrite("intercept_s", &InterceptObservation::intercept_s);

  py::class_<InterceptModel>(m, "InterceptModel")
      .def(py::init<>())
      .def_readwrite("alpha_s_per_hop", &InterceptModel::alpha_s_per_hop)
      .def_readwrite("beta_s_per_km", &InterceptModel::beta_s_per_km)
      .def_readwrite("constant_s", &InterceptModel::constant_s)
      .def_readwrite("has_constant", &InterceptModel::has_constant)
      .def_readonly("residual_rms_s", &InterceptModel::residual_rms_s)
      .def_readonly("n_observations", &InterceptModel::n_observations);

  m.def("fit_intercept_model",
        [](const std::vector<InterceptObservation>& obs, bool affine) {
          return fit_intercept_model(obs, {.affine = affine});
        },
        py::arg("observations"), py::arg("affine") = false);
  m.def("predict_intercept", &predict_intercept, py::arg("model"), py::arg("features"));
  m.def("estimate_with_model", &estimate_with_model, py::arg("point"), py::arg("model"),
        py::arg("features"));

  // statistics
  py::class_<DelayStats>(m, "DelayStats")
      .def_readonly("mean_s", &DelayStats::mean_s)
      .def_readonly("lower_2_5_s", &DelayStats::lower_2_5_s)
      .def_readonly("upper_97_5_s", &DelayStats::upper_97_5_s)
      .def_readonly("jitter_s", &DelayStats::jitter_s);

  py::class_<DelaySummary>(m, "DelaySummary")
      .def_readonly("n_total", &DelaySummary::n_total)
      .def_readonly("n_lost", &DelaySummary::n_lost)
      .def_readonly("loss_rate", &DelaySummary::loss_rate)
      .def_readonly("delays", &DelaySummary::delays);

  py::class_<JitterPoint>(m, "JitterPoint")
      .def_readonly("timestamp_us", &JitterPoint::timestamp_us)
      .def_readonly("jitter_s", &JitterPoint::jitter_s);

  m.def("summarize", [](const std::vector<ProbeSample>& s) { return summarize(s); },
        py::arg("samples"));
  m.def("jitter_series",
        [](const std::vector<ProbeSample>& s, std::size_t window) {
          return jitter_series(s, window);
        },
        py::arg("samples"), py::arg("window"));

  // probing
  py::class_<ProbePlan>(m, "ProbePlan")
      .def(py::init<>())
      .def_readwrite("target", &ProbePlan::target)
      .def_readwrite("sizes_payload_bytes", &ProbePlan::sizes_payload_bytes)
      .def_readwrite("count_per_size", &ProbePlan::count_per_size)
      .def_readwrite("inter_probe_gap_s", &ProbePlan::inter_probe_gap_s)
      .def_readwrite("timeout_s", &ProbePlan::timeout_s)
      .def_readwrite("method", &ProbePlan::method)
      .def_readwrite("udp_port", &ProbePlan::udp_port)
      .def("validate", &ProbePlan::validate);

  m.def("wire_size", &wire_size, py::arg("payload_bytes"), py::arg("method"));
  m.def("run_session", &run_session, py::arg("plan"), py::call_guard<py::gil_scoped_release>());
  m.def("discover_hops",
        py::overload_cast<const std::string&, int, double>(&discover_hops), py::arg("target"),
        py::arg("max_ttl") = 30, py::arg("timeout_s") = 1.0,
        py::call_guard<py::gil_scoped_release>());

  // storage
  m.def("load_samples",
        [](const std::filesystem::path& path) { return load_session(path).samples; },
        py::arg("path"));
  m.def("import_csv", [](const std::filesystem::path& path) { return import_csv(path).samples; },
        py::arg("path"));
  m.def("export_csv",
        [](const std::vector<ProbeSample>& samples, const std::filesystem::path& path) {
          export_csv(samples, path);
        },
        py::arg("samples"), py::arg("path"));

  m.def("run_cli",
        [](const std::vector<std::string>& args) {
          std::ostringstream out, err;
          const int code = cli::run(args, out, err);
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command line in-process; returns (exit_code, stdout, stderr).");
}
