// rmm: sample, analyze and sweep random Markov matrices.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rmm/markov_matrix.hpp"
#include "rmm/runner.hpp"
#include "rmm/sampler.hpp"
#include "rmm/spectral.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config = 1;
constexpr int exit_numerical = 2;

int exit_code_for(rmm::ErrorCode code) {
  using rmm::ErrorCode;
  switch (code) {
    case ErrorCode::NumericalFailure:
    case ErrorCode::NonConvergent:
    case ErrorCode::DegenerateStationary:
    case ErrorCode::QRNoConvergence:
    case ErrorCode::KrylovNoConvergence:
      return exit_numerical;
    default:
      return exit_config;
  }
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw rmm::Error(rmm::ErrorCode::IoError, "cannot write " + p.string());
  return out;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw rmm::Error(rmm::ErrorCode::IoError, "cannot read " + p.string());
  return in;
}

// Matrix files written by `sample --mode asymptotic` carry a "# raw" header.
struct LoadedMatrix {
  rmm::Matrix<double> values;
  bool stochastic = true;
};

LoadedMatrix load_matrix(const fs::path& p) {
  auto in = open_in(p);
  std::string first;
  std::getline(in, first);
  const bool raw = first.rfind("# raw", 0) == 0;
  in.clear();
  in.seekg(0);
  return {rmm::read_matrix_csv(in), !raw};
}

struct SampleArgs {
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::string mode = "exact";
  std::string out;
};

int run_sample(const SampleArgs& a) {
  const auto mode = rmm::parse_mode(a.mode);
  const auto raw = rmm::sample_entries(a.dim, {a.seed, a.stream}, mode);
  const std::string_view kind = raw.stochastic ? "markov" : "raw";
  if (a.out.empty()) {
    rmm::write_matrix_csv(std::cout, raw.values, kind);
  } else {
    auto out = open_out(a.out);
    rmm::write_matrix_csv(out, raw.values, kind);
  }
  return exit_ok;
}

struct AnalyzeArgs {
  std::string matrix;
  std::string spectrum;
  std::size_t full_spectrum_limit = 2048;
};

int run_analyze(const AnalyzeArgs& a) {
  auto loaded = load_matrix(a.matrix);
  rmm::SpectralOptions opt;
  opt.full_spectrum_limit = a.full_spectrum_limit;
  rmm::SampleAnalysis result;
  if (loaded.stochastic) {
    const auto m = rmm::MarkovMatrix::from_matrix(std::move(loaded.values));
    result = rmm::analyze_matrix(m, opt);
    if (!a.spectrum.empty()) {
      const auto& ev = result.spectrum.full ? result.spectrum.eigenvalues
                                            : rmm::full_spectrum(m, opt).eigenvalues;
      auto out = open_out(a.spectrum);
      rmm::write_spectrum_csv(out, ev);
    }
  } else {
    result = rmm::analyze_raw(loaded.values, opt);
    if (!a.spectrum.empty()) {
      auto out = open_out(a.spectrum);
      rmm::write_spectrum_csv(out, result.spectrum.eigenvalues);
    }
  }
  std::cout << rmm::to_json(result.record).dump(2) << '\n';
  return exit_ok;
}

struct SweepArgs {
  std::string config;
  std::string out_dir;
  bool resume = false;
  std::optional<std::size_t> workers;
  bool quiet = false;
};

int run_sweep(const SweepArgs& a) {
  auto in = open_in(a.config);
  auto config = rmm::parse_sweep_config(in);
  if (a.workers) config.worker_count = *a.workers;
  rmm::SweepOptions opt;
  opt.out_dir = fs::path(a.out_dir);
  opt.resume = a.resume;
  if (!a.quiet) opt.progress = &std::cerr;
  const auto result = rmm::run_sweep(config, opt);
  if (!config.outputs.summary) std::cout << rmm::to_json(result.summary).dump(2) << '\n';
  return exit_ok;
}

int run_fit(const std::string& dir) {
  const auto loaded = rmm::load_records_dir(dir);
  const auto summary = rmm::summarize(loaded.records, loaded.z_pi);
  const auto j = rmm::to_json(summary);
  std::cout << rmm::json{{"fits", j["fits"]}, {"deviation", j["deviation"]}, {"dims", j["dims"]}}.dump(2)
            << '\n';
  return exit_ok;
}

struct CdfArgs {
  std::string records;
  std::string which;
  std::optional<std::size_t> dim;
};

int run_cdf(const CdfArgs& a) {
  const auto loaded = rmm::load_records_dir(a.records);
  std::size_t d = 0;
  if (a.dim) {
    d = *a.dim;
    if (!loaded.records.count(d))
      throw rmm::Error(rmm::ErrorCode::ConfigError, "no records for d=" + std::to_string(d));
  } else if (loaded.records.size() == 1) {
    d = loaded.records.begin()->first;
  } else {
    throw rmm::Error(rmm::ErrorCode::ConfigError, "several dimensions present; pass --dim");
  }
  std::vector<double> values;
  if (a.which == "pi") {
    const auto it = loaded.z_pi.find(d);
    if (it == loaded.z_pi.end() || it->second.empty())
      throw rmm::Error(rmm::ErrorCode::IoError, "no stationary vector stored for d=" + std::to_string(d));
    values = it->second;
  } else {
    for (const auto& r : loaded.records.at(d))
      if (r.ok()) values.push_back(a.which == "h" ? r.h : r.abs_nu);
    if (a.which == "h") {
      const double mu = rmm::mean(values), sd = rmm::stddev(values);
      if (!(sd > 0.0)) throw rmm::Error(rmm::ErrorCode::ZeroVariance, "constant h samples");
      for (auto& v : values) v = (v - mu) / sd;
    } else {
      values = rmm::rescale_xi(values);
    }
  }
  rmm::write_cdf_csv(std::cout, values);
  return exit_ok;
}

int run_spectrum(const std::string& matrix, const std::string& out_path) {
  const auto loaded = load_matrix(matrix);
  const auto ev = rmm::raw_spectrum(loaded.values);
  if (out_path.empty()) {
    rmm::write_spectrum_csv(std::cout, ev);
  } else {
    auto out = open_out(out_path);
    rmm::write_spectrum_csv(out, ev);
  }
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random Markov matrix ensemble simulator"};
  app.require_subcommand(1);

  SampleArgs sample;
  auto* sc = app.add_subcommand("sample", "Draw one matrix and write it as CSV");
  sc->add_option("--dim", sample.dim, "Dimension")->required()->check(CLI::PositiveNumber);
  sc->add_option("--seed", sample.seed, "Master seed")->required();
  sc->add_option("--stream", sample.stream, "Stream id (default 0)");
  sc->add_option("--mode", sample.mode, "exact or asymptotic")
      ->check(CLI::IsMember({"exact", "asymptotic"}));
  sc->add_option("--out", sample.out, "Output file (default stdout)");

  AnalyzeArgs analyze;
  auto* ac = app.add_subcommand("analyze", "Analyze one matrix file and print its record as JSON");
  ac->add_option("--matrix", analyze.matrix, "Matrix CSV")->required();
  ac->add_option("--spectrum", analyze.spectrum, "Also write the full spectrum (re,im CSV)");
  ac->add_option("--full-spectrum-limit", analyze.full_spectrum_limit,
                 "Largest d solved by dense QR");

  SweepArgs sweep;
  auto* wc = app.add_subcommand("sweep", "Run an ensemble sweep from a JSON config");
  wc->add_option("--config", sweep.config, "sweep.json")->required();
  wc->add_option("--out-dir", sweep.out_dir, "Output directory")->required();
  wc->add_flag("--resume", sweep.resume, "Reuse finished per-dimension record files");
  wc->add_option("--workers", sweep.workers, "Override worker_count");
  wc->add_flag("--quiet", sweep.quiet, "No progress output");

  std::string fit_dir;
  auto* fc = app.add_subcommand("fit", "Power-law fits and entropy deviation table from records");
  fc->add_option("--records", fit_dir, "Sweep output directory")->required();

  CdfArgs cdf;
  auto* cc = app.add_subcommand("cdf", "Empirical CDF data (x,F) for plotting");
  cc->add_option("--records", cdf.records, "Sweep output directory")->required();
  cc->add_option("--which", cdf.which, "pi, h or xi")
      ->required()
      ->check(CLI::IsMember({"pi", "h", "xi"}));
  cc->add_option("--dim", cdf.dim, "Dimension (needed when several are present)");

  std::string spec_matrix, spec_out;
  auto* pc = app.add_subcommand("spectrum", "Full spectrum of a matrix file (re,im CSV)");
  pc->add_option("--matrix", spec_matrix, "Matrix CSV")->required();
  pc->add_option("--out", spec_out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_ok : exit_config;
  }

  try {
    if (*sc) return run_sample(sample);
    if (*ac) return run_analyze(analyze);
    if (*wc) return run_sweep(sweep);
    if (*fc) return run_fit(fit_dir);
    if (*cc) return run_cdf(cdf);
    if (*pc) return run_spectrum(spec_matrix, spec_out);
  } catch (const rmm::Error& e) {
    std::cerr << "error: " << rmm::to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_config;
  }
  return exit_config;
}
