#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "bwest/probe_sample.hpp"

namespace bwest::cli {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kInternal = 1;
inline constexpr int kUnreachable = 2;
inline constexpr int kEstimation = 3;
inline constexpr int kUsage = 64;
inline constexpr int kDataFormat = 65;
}  // namespace exit_code

enum class OutputFormat { Text, Json, Csv };

/// Defaults shared by the subcommands. Built-in values, overridden by a
/// key=value config file, overridden by flags.
struct CliConfig {
  std::vector<std::uint32_t> sizes{100, 1124};
  std::uint32_t count = 30;
  double gap_s = 0.05;
  double timeout_s = 2.0;
  ProbeMethod method = ProbeMethod::IcmpEcho;
  std::uint16_t port = 7;
  std::size_t min_samples = 30;
  int max_ttl = 30;
  OutputFormat format = OutputFormat::Text;
  int verbosity = 0;
};

/// Applies `key=value` lines ('#' starts a comment). Keys mirror CliConfig
/// fields: sizes, count, gap, timeout, method, port, min_samples, max_ttl,
/// format, verbosity. Throws InvalidArgument on unknown keys or bad values.
void apply_config(CliConfig& config, std::istream& in);
void apply_config_file(CliConfig& config, const std::filesystem::path& path);

/// "341.3 kbit/s": SI suffix, four significant digits.
std::string format_rate(double bps);

/// Runs the `bwest` command line. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bwest::cli
