#include "app.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "ctfem/em.hpp"
#include "ctfem/errors.hpp"
#include "ctfem/metrics.hpp"
#include "ctfem/prior.hpp"
#include "ctfem/stft.hpp"

namespace ctfem::app {

namespace fs = std::filesystem;
using nlohmann::json;

PriorSpec PriorSpec::parse(std::string_view text) {
  PriorSpec spec;
  if (text == "heuristic") return spec;
  if (text.starts_with("file:")) {
    spec.kind = Kind::file;
    spec.path = std::string(text.substr(5));
    if (spec.path.empty()) throw InvalidInput("prior spec 'file:' needs a path");
    return spec;
  }
  if (text.starts_with("constant:")) {
    spec.kind = Kind::constant;
    const std::string number(text.substr(9));
    std::size_t used = 0;
    try {
      spec.value = std::stod(number, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != number.size() || !std::isfinite(spec.value) || spec.value <= 0.0) {
      throw InvalidInput("prior spec 'constant:' needs a positive number, got '" + number + "'");
    }
    return spec;
  }
  throw InvalidInput("unknown prior spec '" + std::string(text) +
                     "' (expected heuristic, file:<path> or constant:<value>)");
}

std::string PriorSpec::to_string() const {
  switch (kind) {
    case Kind::heuristic:
      return "heuristic";
    case Kind::file:
      return "file:" + path;
    case Kind::constant: {
      std::ostringstream os;
      os.precision(17);
      os << value;
      return "constant:" + os.str();
    }
  }
  return "heuristic";
}

json to_json(const RunConfig& cfg) {
  return json{
      {"input", cfg.input_path},
      {"output", cfg.output_path},
      {"input_dir", cfg.input_dir},
      {"output_dir", cfg.output_dir},
      {"prior", cfg.prior.to_string()},
      {"prior_smoothing", cfg.prior_smoothing},
      {"ctf_order", cfg.ctf_order},
      {"iterations", cfg.iterations},
      {"segment_frames", cfg.segment_frames},
      {"window_len", cfg.window_len},
      {"hop", cfg.hop},
      {"workers", cfg.workers},
      {"report", cfg.report_path},
      {"reference", cfg.reference_path},
      {"output_format", cfg.output_format == SampleFormat::pcm16 ? "pcm16" : "float32"},
  };
}

RunConfig run_config_from_json(const json& j) {
  RunConfig cfg;
  cfg.input_path = j.at("input").get<std::string>();
  cfg.output_path = j.at("output").get<std::string>();
  cfg.input_dir = j.at("input_dir").get<std::string>();
  cfg.output_dir = j.at("output_dir").get<std::string>();
  cfg.prior = PriorSpec::parse(j.at("prior").get<std::string>());
  cfg.prior_smoothing = j.at("prior_smoothing").get<double>();
  cfg.ctf_order = j.at("ctf_order").get<std::size_t>();
  cfg.iterations = j.at("iterations").get<std::size_t>();
  cfg.segment_frames = j.at("segment_frames").get<long>();
  cfg.window_len = j.at("window_len").get<std::size_t>();
  cfg.hop = j.at("hop").get<std::size_t>();
  cfg.workers = j.at("workers").get<unsigned>();
  cfg.report_path = j.at("report").get<std::string>();
  cfg.reference_path = j.at("reference").get<std::string>();
  const auto format = j.at("output_format").get<std::string>();
  if (format != "pcm16" && format != "float32") {
    throw InvalidInput("unknown output format '" + format + "'");
  }
  cfg.output_format = format == "pcm16" ? SampleFormat::pcm16 : SampleFormat::float32;
  return cfg;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

PriorVariance resolve_prior(const RunConfig& cfg, const Spectrogram& x) {
  switch (cfg.prior.kind) {
    case PriorSpec::Kind::heuristic:
      return heuristic_prior(x, cfg.prior_smoothing);
    case PriorSpec::Kind::constant:
      return constant_prior(x.bands(), x.frames(), cfg.prior.value);
    case PriorSpec::Kind::file: {
      PriorVariance p = load_prior(cfg.prior.path);
      if (p.bands() != x.bands() || p.frames() != x.frames()) {
        throw ShapeError("prior file is " + std::to_string(p.bands()) + "x" +
                         std::to_string(p.frames()) + " but the input spectrogram is " +
                         std::to_string(x.bands()) + "x" + std::to_string(x.frames()));
      }
      return p;
    }
  }
  throw InvalidInput("unhandled prior kind");
}

PriorVariance slice_prior(const PriorVariance& full, const Segment& seg, double floor) {
  PriorVariance p{RealGrid(full.bands(), seg.spec.frames(), floor)};
  for (std::size_t f = 0; f < full.bands(); ++f) {
    for (std::size_t n = 0; n < seg.valid_frames; ++n) {
      p.var(f, n) = full.var(f, seg.first_frame + n);
    }
  }
  return p;
}

json noise_summary(const std::vector<double>& power) {
  const auto [lo, hi] = std::minmax_element(power.begin(), power.end());
  double sum = 0.0;
  for (double v : power) sum += v;
  return json{{"min", *lo}, {"max", *hi}, {"mean", sum / static_cast<double>(power.size())}};
}

// Enhances one file and returns its report entry (segments, metrics, timing).
json enhance_file(const RunConfig& cfg, const fs::path& input, const fs::path& output,
                  std::ostream& diag) {
  const auto start = std::chrono::steady_clock::now();
  const Waveform wave = read_wav(input);
  const Spectrogram x = analyze(wave, cfg.window_len, cfg.hop);
  const PriorVariance prior = resolve_prior(cfg, x);

  EmConfig em;
  em.ctf_order = cfg.ctf_order;
  em.iterations = cfg.iterations;
  em.workers = cfg.workers;
  em.likelihood_tracking = true;

  auto segments = segment(x, cfg.segment_frames);
  json seg_reports = json::array();
  for (std::size_t s = 0; s < segments.size(); ++s) {
    auto& seg = segments[s];
    const auto seg_start = std::chrono::steady_clock::now();
    EmResult result = run_em(seg.spec, slice_prior(prior, seg, em.prior_floor), em);
    for (const auto& w : result.state.warnings) diag << "ctfem: warning: segment " << s << ": " << w << '\n';
    seg.spec.bins = std::move(result.estimate.bins);
    seg_reports.push_back(json{
        {"index", s},
        {"first_frame", seg.first_frame},
        {"valid_frames", seg.valid_frames},
        {"likelihood_history", result.state.history},
        {"evidence_history", result.state.evidence},
        {"noise_summary", noise_summary(result.state.noise.power)},
        {"warnings", result.state.warnings},
        {"seconds", seconds_since(seg_start)},
    });
  }

  Spectrogram enhanced = concatenate(segments);
  enhanced.source_length = wave.samples.size();
  const Waveform out_wave = synthesize(enhanced);

  json metrics = json::object();
  if (!cfg.reference_path.empty()) {
    const Waveform reference = read_wav(cfg.reference_path);
    const std::size_t len = std::min(reference.samples.size(), wave.samples.size());
    const std::span<const double> ref(reference.samples.data(), len);
    metrics["sisdr_input_db"] = sisdr(ref, std::span<const double>(wave.samples.data(), len));
    metrics["sisdr_output_db"] = sisdr(ref, std::span<const double>(out_wave.samples.data(), len));
    metrics["compared_samples"] = len;
  }

  write_wav(output, out_wave, cfg.output_format);
  return json{
      {"input", input.string()},
      {"output", output.string()},
      {"segments", seg_reports},
      {"metrics", metrics},
      {"timing", json{{"total_seconds", seconds_since(start)}}},
  };
}

ExitCode run_checked(const RunConfig& cfg, std::ostream& diag) {
  if (cfg.segment_frames <= 0 || static_cast<std::size_t>(cfg.segment_frames) <= cfg.ctf_order) {
    throw InvalidInput("segment length (" + std::to_string(cfg.segment_frames) +
                       " frames) must exceed the CTF order (" + std::to_string(cfg.ctf_order) + ")");
  }
  if (cfg.iterations == 0) throw InvalidInput("iterations must be at least 1");

  std::vector<std::pair<fs::path, fs::path>> jobs;
  if (!cfg.input_dir.empty()) {
    if (cfg.output_dir.empty()) throw InvalidInput("--input-dir requires --output-dir");
    if (!fs::is_directory(cfg.input_dir)) throw IoError("not a directory: " + cfg.input_dir);
    for (const auto& entry : fs::directory_iterator(cfg.input_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".wav") {
        jobs.emplace_back(entry.path(), fs::path(cfg.output_dir) / entry.path().filename());
      }
    }
    std::sort(jobs.begin(), jobs.end());
    fs::create_directories(cfg.output_dir);
  } else {
    if (cfg.input_path.empty() || cfg.output_path.empty()) {
      throw InvalidInput("both an input and an output path are required");
    }
    jobs.emplace_back(cfg.input_path, cfg.output_path);
  }

  json report{{"config", to_json(cfg)}};
  if (jobs.size() == 1 && cfg.input_dir.empty()) {
    json one = enhance_file(cfg, jobs[0].first, jobs[0].second, diag);
    report["segments"] = std::move(one["segments"]);
    report["metrics"] = std::move(one["metrics"]);
    report["timing"] = std::move(one["timing"]);
  } else {
    report["files"] = json::array();
    for (const auto& [in, out] : jobs) report["files"].push_back(enhance_file(cfg, in, out, diag));
  }

  if (!cfg.report_path.empty()) {
    std::ofstream rep(cfg.report_path);
    if (!rep) throw IoError("cannot write report: " + cfg.report_path);
    rep << report.dump(2) << '\n';
  }
  return ExitCode::ok;
}

}  // namespace

ExitCode run(const RunConfig& cfg, std::ostream& diag) {
  try {
    return run_checked(cfg, diag);
  } catch (const IoError& e) {
    diag << "ctfem: I/O error: " << e.what() << '\n';
    return ExitCode::io;
  } catch (const FormatError& e) {
    diag << "ctfem: format error: " << e.what() << '\n';
    return ExitCode::format;
  } catch (const DataError& e) {
    diag << "ctfem: format error: " << e.what() << '\n';
    return ExitCode::format;
  } catch (const NumericalError& e) {
    diag << "ctfem: numerical failure: " << e.what() << '\n';
    return ExitCode::numerical;
  } catch (const Error& e) {
    diag << "ctfem: configuration error: " << e.what() << '\n';
    return ExitCode::config;
  } catch (const fs::filesystem_error& e) {
    diag << "ctfem: I/O error: " << e.what() << '\n';
    return ExitCode::io;
  } catch (const std::exception& e) {
    diag << "ctfem: internal error: " << e.what() << '\n';
    return ExitCode::internal;
  }
}

}  // namespace ctfem::app
