#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>

#include <json.hpp>

#include "ctfem/wav.hpp"

namespace ctfem::app {

/// Where the clean-speech prior comes from:
///   "heuristic" | "file:<path>" | "constant:<value>".
struct PriorSpec {
  enum class Kind { heuristic, file, constant };
  Kind kind = Kind::heuristic;
  std::string path;
  double value = 1.0;

  static PriorSpec parse(std::string_view text);
  std::string to_string() const;
  bool operator==(const PriorSpec&) const = default;
};

struct RunConfig {
  std::string input_path;
  std::string output_path;
  /// Batch mode: every *.wav in input_dir is enhanced into output_dir.
  std::string input_dir;
  std::string output_dir;
  PriorSpec prior;
  double prior_smoothing = 0.5;
  std::size_t ctf_order = 30;
  std::size_t iterations = 100;
  long segment_frames = 320;
  std::size_t window_len = 1024;
  std::size_t hop = 256;
  unsigned workers = 1;
  std::string report_path;
  std::string reference_path;
  SampleFormat output_format = SampleFormat::float32;

  bool operator==(const RunConfig&) const = default;
};

enum class ExitCode : int {
  ok = 0,
  io = 2,
  format = 3,
  config = 4,
  numerical = 5,
  internal = 6,
};

nlohmann::json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

/// Enhances the configured input(s). Diagnostics go to `diag`, one line per
/// failure; the exit code encodes the failure class. No output file is
/// written unless the whole input was processed.
ExitCode run(const RunConfig& cfg, std::ostream& diag);

/// Shared IS/KL test vectors: {"version", "cases": [{name, inputs, expected}]}.
nlohmann::json make_loss_fixtures();

}  // namespace ctfem::app
