#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "app.hpp"
#include "ctfem/errors.hpp"
#include "ctfem/prior.hpp"
#include "ctfem/stft.hpp"
#include "ctfem/wav.hpp"

namespace {

using ctfem::app::ExitCode;

int code(ExitCode c) { return static_cast<int>(c); }

int write_fixtures(const std::string& out_path) {
  std::ofstream out(out_path);
  if (!out) {
    std::cerr << "ctfem: I/O error: cannot write " << out_path << '\n';
    return code(ExitCode::io);
  }
  out << ctfem::app::make_loss_fixtures().dump(2) << '\n';
  return code(ExitCode::ok);
}

int export_prior(const std::string& input, const std::string& out_path, const std::string& spec,
                 double smoothing, std::size_t window_len, std::size_t hop) {
  try {
    const auto wave = ctfem::read_wav(input);
    const auto x = ctfem::analyze(wave, window_len, hop);
    const auto kind = ctfem::app::PriorSpec::parse(spec);
    ctfem::PriorVariance p;
    if (kind.kind == ctfem::app::PriorSpec::Kind::constant) {
      p = ctfem::constant_prior(x.bands(), x.frames(), kind.value);
    } else if (kind.kind == ctfem::app::PriorSpec::Kind::heuristic) {
      p = ctfem::heuristic_prior(x, smoothing);
    } else {
      throw ctfem::InvalidInput("prior export supports heuristic or constant:<value>");
    }
    ctfem::save_prior(p, out_path);
    return code(ExitCode::ok);
  } catch (const ctfem::IoError& e) {
    std::cerr << "ctfem: I/O error: " << e.what() << '\n';
    return code(ExitCode::io);
  } catch (const ctfem::FormatError& e) {
    std::cerr << "ctfem: format error: " << e.what() << '\n';
    return code(ExitCode::format);
  } catch (const ctfem::Error& e) {
    std::cerr << "ctfem: configuration error: " << e.what() << '\n';
    return code(ExitCode::config);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"ctfem: CTF-domain EM speech dereverberation"};
  cli.require_subcommand(1);

  ctfem::app::RunConfig cfg;
  std::string prior_text = "heuristic";
  std::string format_text = "float32";

  auto* enhance = cli.add_subcommand("enhance", "Dereverberate a WAV file (or a directory)");
  enhance->add_option("-i,--input", cfg.input_path, "Input mono WAV");
  enhance->add_option("-o,--output", cfg.output_path, "Output WAV");
  enhance->add_option("--input-dir", cfg.input_dir, "Enhance every *.wav in this directory");
  enhance->add_option("--output-dir", cfg.output_dir, "Destination for --input-dir");
  enhance->add_option("--prior", prior_text, "heuristic | file:<path> | constant:<value>")
      ->capture_default_str();
  enhance->add_option("--prior-smoothing", cfg.prior_smoothing,
                      "Recursive-average coefficient of the heuristic prior")
      ->capture_default_str();
  enhance->add_option("--ctf-len,-P", cfg.ctf_order, "CTF order P (P+1 taps)")->capture_default_str();
  enhance->add_option("--iterations", cfg.iterations, "EM iterations")->capture_default_str();
  enhance->add_option("--segment-frames", cfg.segment_frames, "Frames per EM segment")
      ->capture_default_str();
  enhance->add_option("--window", cfg.window_len, "STFT window length")->capture_default_str();
  enhance->add_option("--hop", cfg.hop, "STFT hop length")->capture_default_str();
  enhance->add_option("-j,--workers", cfg.workers, "Worker threads for per-band work (0 = all cores)")
      ->capture_default_str();
  enhance->add_option("--report", cfg.report_path, "Write a JSON run report here");
  enhance->add_option("--reference", cfg.reference_path, "Clean reference WAV for SISDR");
  enhance->add_option("--output-format", format_text, "float32 | pcm16")
      ->check(CLI::IsMember({"float32", "pcm16"}))
      ->capture_default_str();

  std::string fixtures_out;
  auto* fixtures = cli.add_subcommand("fixtures", "Write the shared IS/KL loss fixture JSON");
  fixtures->add_option("-o,--output", fixtures_out, "Destination JSON")->required();

  std::string prior_in, prior_out, prior_kind = "heuristic";
  double prior_smoothing = 0.5;
  std::size_t prior_window = 1024, prior_hop = 256;
  auto* prior = cli.add_subcommand("prior", "Export a prior file for a WAV input");
  prior->add_option("-i,--input", prior_in, "Input mono WAV")->required();
  prior->add_option("-o,--output", prior_out, "Destination prior file")->required();
  prior->add_option("--prior", prior_kind, "heuristic | constant:<value>")->capture_default_str();
  prior->add_option("--prior-smoothing", prior_smoothing)->capture_default_str();
  prior->add_option("--window", prior_window)->capture_default_str();
  prior->add_option("--hop", prior_hop)->capture_default_str();

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = cli.exit(e);
    return rc == 0 ? 0 : code(ExitCode::config);
  }

  if (*fixtures) return write_fixtures(fixtures_out);
  if (*prior) {
    return export_prior(prior_in, prior_out, prior_kind, prior_smoothing, prior_window, prior_hop);
  }

  try {
    cfg.prior = ctfem::app::PriorSpec::parse(prior_text);
  } catch (const ctfem::Error& e) {
    std::cerr << "ctfem: configuration error: " << e.what() << '\n';
    return code(ExitCode::config);
  }
  cfg.output_format = format_text == "pcm16" ? ctfem::SampleFormat::pcm16 : ctfem::SampleFormat::float32;
  return code(ctfem::app::run(cfg, std::cerr));
}
