#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rmm/error.hpp"
#include "rmm/markov_matrix.hpp"
#include "rmm/observables.hpp"
#include "rmm/sampler.hpp"
#include "rmm/spectral.hpp"
#include "rmm/statkit.hpp"

namespace rmm {

using json = nlohmann::ordered_json;

inline constexpr double bound_slack = 1e-10;
inline constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

inline std::string_view to_string(SampleMode mode) noexcept {
  return mode == SampleMode::exact ? "exact" : "asymptotic";
}

inline SampleMode parse_mode(std::string_view s) {
  if (s == "exact") return SampleMode::exact;
  if (s == "asymptotic") return SampleMode::asymptotic;
  throw Error(ErrorCode::ConfigError, "unknown mode '" + std::string(s) + "'");
}

//-----------------------------------------------------------------------------
// Configuration

struct OutputFlags {
  bool records = true;
  bool summary = true;
  bool cdf_pi = false;
  bool cdf_h = false;
  bool cdf_xi = false;
  bool spectrum_dump = false;
};

/// Desk-scale default sample counts.
inline std::size_t default_sample_count(std::size_t d) {
  if (d <= 64) return 10000;
  if (d <= 256) return 2000;
  return 200;
}

struct SweepConfig {
  std::vector<std::size_t> dims;
  std::map<std::size_t, std::size_t> samples_per_dim;  // missing dims use the default plan
  std::uint64_t master_seed = 0;
  SampleMode mode = SampleMode::exact;
  OutputFlags outputs{};
  std::size_t full_spectrum_limit = 2048;
  std::size_t worker_count = 0;  // 0: hardware concurrency

  [[nodiscard]] std::size_t count(std::size_t d) const {
    const auto it = samples_per_dim.find(d);
    return it == samples_per_dim.end() ? default_sample_count(d) : it->second;
  }

  void validate() const {
    if (dims.empty()) throw Error(ErrorCode::ConfigError, "dims must be nonempty");
    std::set<std::size_t> seen;
    for (auto d : dims) {
      if (d < 2) throw Error(ErrorCode::ConfigError, "every dim must be >= 2");
      if (!seen.insert(d).second)
        throw Error(ErrorCode::ConfigError, "dim " + std::to_string(d) + " listed twice");
    }
    for (const auto& [d, n] : samples_per_dim) {
      if (!seen.count(d))
        throw Error(ErrorCode::ConfigError,
                    "samples_per_dim names dim " + std::to_string(d) + " not in dims");
      if (n < 1) throw Error(ErrorCode::ConfigError, "sample counts must be >= 1");
    }
    if (full_spectrum_limit < 1)
      throw Error(ErrorCode::ConfigError, "full_spectrum_limit must be >= 1");
  }
};

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed,
                           std::string_view where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw Error(ErrorCode::ConfigError,
                  "unknown key '" + key + "' in " + std::string(where));
  }
}

template <class T>
T get_as(const json& j, std::string_view key) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, "bad value for '" + std::string(key) + "': " + e.what());
  }
}

inline std::size_t get_count(const json& j, std::string_view key) {
  if (!j.is_number_integer() || j.get<long long>() < 0)
    throw Error(ErrorCode::ConfigError, "'" + std::string(key) + "' must be a non-negative integer");
  return j.get<std::size_t>();
}

}  // namespace detail

inline SweepConfig parse_sweep_config(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
  detail::reject_unknown(j,
                         {"dims", "samples_per_dim", "master_seed", "mode", "outputs",
                          "full_spectrum_limit", "worker_count"},
                         "config");
  SweepConfig c;
  if (!j.contains("dims") || !j["dims"].is_array())
    throw Error(ErrorCode::ConfigError, "'dims' must be an array");
  for (const auto& d : j["dims"]) c.dims.push_back(detail::get_count(d, "dims"));
  if (j.contains("samples_per_dim")) {
    const auto& s = j["samples_per_dim"];
    if (!s.is_object()) throw Error(ErrorCode::ConfigError, "'samples_per_dim' must be an object");
    for (const auto& [key, value] : s.items()) {
      std::size_t pos = 0;
      std::size_t d = 0;
      try {
        d = std::stoul(key, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != key.size() || key.empty())
        throw Error(ErrorCode::ConfigError, "samples_per_dim key '" + key + "' is not a dimension");
      c.samples_per_dim[d] = detail::get_count(value, "samples_per_dim");
    }
  }
  if (j.contains("master_seed")) {
    if (!j["master_seed"].is_number_integer())
      throw Error(ErrorCode::ConfigError, "'master_seed' must be an integer");
    c.master_seed = j["master_seed"].get<std::uint64_t>();
  }
  if (j.contains("mode")) c.mode = parse_mode(detail::get_as<std::string>(j["mode"], "mode"));
  if (j.contains("outputs")) {
    const auto& o = j["outputs"];
    if (!o.is_object()) throw Error(ErrorCode::ConfigError, "'outputs' must be an object");
    detail::reject_unknown(o, {"records", "summary", "cdf_pi", "cdf_h", "cdf_xi", "spectrum_dump"},
                           "outputs");
    const auto flag = [&](const char* key, bool& dst) {
      if (o.contains(key)) {
        if (!o[key].is_boolean())
          throw Error(ErrorCode::ConfigError, std::string("outputs.") + key + " must be boolean");
        dst = o[key].get<bool>();
      }
    };
    flag("records", c.outputs.records);
    flag("summary", c.outputs.summary);
    flag("cdf_pi", c.outputs.cdf_pi);
    flag("cdf_h", c.outputs.cdf_h);
    flag("cdf_xi", c.outputs.cdf_xi);
    flag("spectrum_dump", c.outputs.spectrum_dump);
  }
  if (j.contains("full_spectrum_limit"))
    c.full_spectrum_limit = detail::get_count(j["full_spectrum_limit"], "full_spectrum_limit");
  if (j.contains("worker_count"))
    c.worker_count = detail::get_count(j["worker_count"], "worker_count");
  c.validate();
  return c;
}

inline SweepConfig parse_sweep_config(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("invalid JSON: ") + e.what());
  }
  return parse_sweep_config(j);
}

inline json to_json(const SweepConfig& c) {
  json j;
  j["dims"] = c.dims;
  json counts = json::object();
  for (auto d : c.dims) counts[std::to_string(d)] = c.count(d);
  j["samples_per_dim"] = counts;
  j["master_seed"] = c.master_seed;
  j["mode"] = std::string(to_string(c.mode));
  j["outputs"] = {{"records", c.outputs.records},         {"summary", c.outputs.summary},
                  {"cdf_pi", c.outputs.cdf_pi},           {"cdf_h", c.outputs.cdf_h},
                  {"cdf_xi", c.outputs.cdf_xi},           {"spectrum_dump", c.outputs.spectrum_dump}};
  j["full_spectrum_limit"] = c.full_spectrum_limit;
  j["worker_count"] = c.worker_count;
  return j;
}

//-----------------------------------------------------------------------------
// Per-sample records

struct SampleRecord {
  std::size_t dim = 0;
  std::size_t sample_index = 0;
  std::uint64_t stream_id = 0;
  double h = nan_value;
  double h_ave = nan_value;
  double h_osc = nan_value;
  double nu_re = nan_value;
  double nu_im = nan_value;
  double abs_nu = nan_value;
  double tau_inv = nan_value;
  double tau_c = nan_value;
  double sigma_bound = nan_value;
  double stationary_residual = nan_value;
  bool mixing = false;
  std::string error;  // empty on success

  [[nodiscard]] bool ok() const noexcept { return error.empty(); }
};

inline constexpr std::string_view records_header =
    "dim,sample_index,stream_id,h,h_ave,h_osc,nu_re,nu_im,abs_nu,tau_inv,tau_c,sigma_bound,"
    "stationary_residual,mixing,error";

inline std::string to_csv_line(const SampleRecord& r) {
  std::string s;
  s += std::to_string(r.dim) + ',' + std::to_string(r.sample_index) + ',' +
       std::to_string(r.stream_id);
  for (double v : {r.h, r.h_ave, r.h_osc, r.nu_re, r.nu_im, r.abs_nu, r.tau_inv, r.tau_c,
                   r.sigma_bound, r.stationary_residual}) {
    s += ',';
    s += format_double(v);
  }
  s += r.mixing ? ",1," : ",0,";
  s += r.error;
  return s;
}

inline SampleRecord parse_csv_line(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) f.push_back(tok);
  if (!line.empty() && line.back() == ',') f.emplace_back();
  if (f.size() != 15) throw Error(ErrorCode::IoError, "record line has " + std::to_string(f.size()) + " fields, expected 15");
  SampleRecord r;
  try {
    r.dim = std::stoull(f[0]);
    r.sample_index = std::stoull(f[1]);
    r.stream_id = std::stoull(f[2]);
  } catch (const std::exception&) {
    throw Error(ErrorCode::IoError, "bad integer field in record line");
  }
  double* dst[] = {&r.h,     &r.h_ave, &r.h_osc,       &r.nu_re,       &r.nu_im,
                   &r.abs_nu, &r.tau_inv, &r.tau_c, &r.sigma_bound, &r.stationary_residual};
  for (std::size_t k = 0; k < 10; ++k) *dst[k] = parse_double(f[3 + k]);
  r.mixing = f[13] == "1";
  r.error = f[14];
  if (!r.error.empty() && r.error.back() == '\r') r.error.pop_back();
  return r;
}

inline void write_records_csv(std::ostream& out, const std::vector<SampleRecord>& records) {
  out << records_header << '\n';
  for (const auto& r : records) out << to_csv_line(r) << '\n';
}

inline std::vector<SampleRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::IoError, "empty records file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != records_header) throw Error(ErrorCode::IoError, "unexpected records header");
  std::vector<SampleRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(parse_csv_line(line));
  }
  return out;
}

inline json to_json(const SampleRecord& r) {
  return json{{"dim", r.dim},
              {"sample_index", r.sample_index},
              {"stream_id", r.stream_id},
              {"h", r.h},
              {"h_ave", r.h_ave},
              {"h_osc", r.h_osc},
              {"nu_re", r.nu_re},
              {"nu_im", r.nu_im},
              {"abs_nu", r.abs_nu},
              {"tau_inv", r.tau_inv},
              {"tau_c", r.tau_c},
              {"sigma_bound", r.sigma_bound},
              {"stationary_residual", r.stationary_residual},
              {"mixing", r.mixing},
              {"error", r.error.empty() ? json(nullptr) : json(r.error)}};
}

//-----------------------------------------------------------------------------
// Rescalings

/// z_i = (d pi_i - 1) sqrt(d / 2); asymptotically standard normal.
inline std::vector<double> rescale_pi(std::span<const double> pi, std::size_t d) {
  const double dd = static_cast<double>(d);
  const double f = std::sqrt(dd / 2.0);
  std::vector<double> z(pi.size());
  for (std::size_t i = 0; i < pi.size(); ++i) z[i] = (dd * pi[i] - 1.0) * f;
  return z;
}

/// Standardizes |nu| samples by their own mean and (n - 1) standard deviation.
inline std::vector<double> rescale_xi(std::span<const double> abs_nu) {
  if (abs_nu.size() < 2) throw Error(ErrorCode::EmptyInput, "rescale_xi needs n >= 2");
  const double mu = mean(abs_nu);
  const double sd = stddev(abs_nu);
  if (!(sd > 0.0)) throw Error(ErrorCode::ZeroVariance, "constant |nu| samples");
  std::vector<double> xi(abs_nu.size());
  for (std::size_t i = 0; i < abs_nu.size(); ++i) xi[i] = (abs_nu[i] - mu) / sd;
  return xi;
}

/// CDF of the moment-normalized maximum of d standard normals.
class NormalizedMaxGaussianCdf {
 public:
  explicit NormalizedMaxGaussianCdf(std::size_t d) : d_(d), m_(max_gaussian_moments(d)) {}
  double operator()(double xi) const { return max_gaussian_cdf(m_.mean + m_.std * xi, d_); }

 private:
  std::size_t d_;
  Moments m_;
};

//-----------------------------------------------------------------------------
// Per-sample pipeline

/// Everything computed for one matrix. `pi` and `spectrum` are kept so
/// callers can dump them.
struct SampleAnalysis {
  SampleRecord record;
  std::vector<double> pi;
  SpectralSummary spectrum;
};

/// stationary -> subdominant (with bound) -> entropy -> decay. Numerical
/// failures propagate as rmm::Error; a non-mixing result is reported as the
/// NonMixing error tag in the record, with the computed values kept.
inline SampleAnalysis analyze_matrix(const MarkovMatrix& m, const SpectralOptions& opt = {}) {
  SampleAnalysis a;
  auto& r = a.record;
  r.dim = m.dim();
  const auto st = stationary(m, opt);
  r.stationary_residual = st.residual;
  a.spectrum = subdominant(m, st, opt);
  r.nu_re = a.spectrum.nu.real();
  r.nu_im = a.spectrum.nu.imag();
  r.abs_nu = a.spectrum.abs_nu;
  r.sigma_bound = a.spectrum.sigma_bound;
  r.mixing = a.spectrum.mixing;
  const auto ent = entropy_rate(m, st.pi);
  r.h = ent.h;
  r.h_ave = ent.h_ave;
  r.h_osc = ent.h_osc;
  const auto dec = decay_record(a.spectrum.nu);
  r.tau_inv = dec.tau_inv;
  r.tau_c = dec.tau_c;
  if (!r.mixing) r.error = std::string(to_string(ErrorCode::NonMixing));
  a.pi = st.pi;
  return a;
}

/// Asymptotic-mode draws are not stochastic: only the raw spectrum and raw
/// row entropies are meaningful, so h = h_ave with pi taken as uniform.
inline SampleAnalysis analyze_raw(const Matrix<double>& raw, const SpectralOptions& opt = {}) {
  SampleAnalysis a;
  auto& r = a.record;
  r.dim = raw.rows();
  if (raw.rows() > opt.full_spectrum_limit)
    throw Error(ErrorCode::DimensionTooLarge, "raw spectra need d <= full_spectrum_limit");
  auto ev = raw_spectrum(raw, opt.qr);
  a.spectrum = summarize_spectrum(ev, nan_value, opt);
  r.nu_re = a.spectrum.nu.real();
  r.nu_im = a.spectrum.nu.imag();
  r.abs_nu = a.spectrum.abs_nu;
  r.mixing = a.spectrum.mixing;
  const auto u = row_entropies(raw);
  r.h_ave = mean(u);
  r.h = r.h_ave;
  r.h_osc = 0.0;
  const auto dec = decay_record(a.spectrum.nu);
  r.tau_inv = dec.tau_inv;
  r.tau_c = dec.tau_c;
  return a;
}

using MatrixInjector =
    std::function<std::optional<MarkovMatrix>(std::size_t dim, std::size_t sample_index)>;

inline SpectralOptions spectral_options(const SweepConfig& c) {
  SpectralOptions opt;
  opt.full_spectrum_limit = c.full_spectrum_limit;
  return opt;
}

/// Runs one sample end to end. rmm::Error is caught and recorded as the
/// error tag; anything else propagates.
inline SampleAnalysis process_sample(const SweepConfig& c, std::size_t dim, std::size_t index,
                                     std::uint64_t stream_id, const MatrixInjector& inject = {}) {
  const SpectralOptions opt = spectral_options(c);
  const SeedSpec seed{c.master_seed, stream_id};
  SampleAnalysis a;
  try {
    if (c.mode == SampleMode::exact) {
      std::optional<MarkovMatrix> injected;
      if (inject) injected = inject(dim, index);
      a = analyze_matrix(injected ? *injected : sample_matrix(dim, seed), opt);
    } else {
      a = analyze_raw(sample_entries(dim, seed, SampleMode::asymptotic).values, opt);
    }
  } catch (const Error& e) {
    a = SampleAnalysis{};
    a.record.error = std::string(to_string(e.code()));
  }
  a.record.dim = dim;
  a.record.sample_index = index;
  a.record.stream_id = stream_id;
  return a;
}

//-----------------------------------------------------------------------------
// Aggregation

struct DimSummary {
  std::size_t dim = 0;
  std::size_t n = 0;  // successful samples
  std::size_t n_failed = 0;
  double mean_h = nan_value;
  std::optional<double> std_h;
  double mean_abs_nu = nan_value;
  std::optional<double> std_abs_nu;
  std::optional<double> mean_bound;
  std::size_t bound_violations = 0;
  std::optional<double> ks_pi;
  std::optional<double> ks_xi;
  std::optional<double> corr_tauinv_h;
  double ratio_halfcheck = nan_value;  // -log<|nu|> / <h>
  double product_h_tau = nan_value;    // <h> * (-1 / log<|nu|>)
  double predicted_h = nan_value;
};

struct DeviationRow {
  std::size_t dim = 0;
  double mean_h = 0.0;
  double predicted_h = 0.0;
  double relative_deviation = 0.0;
};

struct EnsembleSummary {
  std::vector<DimSummary> dims;
  std::optional<AsymptoticFit> fit_mean_abs_nu;
  std::optional<AsymptoticFit> fit_std_abs_nu;
  std::optional<AsymptoticFit> fit_std_h;
  std::vector<DeviationRow> deviation;

  [[nodiscard]] const DimSummary* find(std::size_t d) const {
    for (const auto& s : dims)
      if (s.dim == d) return &s;
    return nullptr;
  }
};

template <class F>
std::optional<double> try_stat(F&& f) {
  try {
    return f();
  } catch (const Error&) {
    return std::nullopt;
  }
}

/// Folds the records of one dimension. `z_pi` is the rescaled stationary
/// vector of one representative sample (empty when unavailable).
inline DimSummary summarize_dim(std::size_t d, const std::vector<SampleRecord>& records,
                                std::span<const double> z_pi = {}) {
  DimSummary s;
  s.dim = d;
  std::vector<double> h, nu, bound, tau_inv, h_for_tau;
  for (const auto& r : records) {
    if (!r.ok()) {
      ++s.n_failed;
      continue;
    }
    h.push_back(r.h);
    nu.push_back(r.abs_nu);
    if (std::isfinite(r.sigma_bound)) {
      bound.push_back(r.sigma_bound);
      if (r.abs_nu > r.sigma_bound + bound_slack) ++s.bound_violations;
    }
    if (std::isfinite(r.tau_inv)) {
      tau_inv.push_back(r.tau_inv);
      h_for_tau.push_back(r.h);
    }
  }
  s.n = h.size();
  if (s.n == 0) return s;
  s.mean_h = mean(h);
  s.mean_abs_nu = mean(nu);
  s.std_h = try_stat([&] { return stddev(h); });
  s.std_abs_nu = try_stat([&] { return stddev(nu); });
  if (!bound.empty()) s.mean_bound = mean(bound);
  s.ratio_halfcheck = -std::log(s.mean_abs_nu) / s.mean_h;
  s.product_h_tau = s.mean_h * (-1.0 / std::log(s.mean_abs_nu));
  s.predicted_h = predicted_h(static_cast<double>(d));
  s.corr_tauinv_h = try_stat([&] { return pearson(tau_inv, h_for_tau); });
  s.ks_xi = try_stat([&] {
    const auto xi = rescale_xi(nu);
    return ks_distance(EmpiricalCDF(xi), NormalizedMaxGaussianCdf(d));
  });
  if (!z_pi.empty())
    s.ks_pi = ks_distance(EmpiricalCDF({z_pi.begin(), z_pi.end()}), gaussian_cdf);
  return s;
}

inline EnsembleSummary summarize(const std::map<std::size_t, std::vector<SampleRecord>>& records,
                                 const std::map<std::size_t, std::vector<double>>& z_pi = {}) {
  EnsembleSummary out;
  std::vector<std::pair<double, double>> nu_mean, nu_std, h_std;
  for (const auto& [d, recs] : records) {
    const auto it = z_pi.find(d);
    auto s = summarize_dim(d, recs,
                           it == z_pi.end() ? std::span<const double>{}
                                            : std::span<const double>(it->second));
    if (s.n > 0) {
      const double dd = static_cast<double>(d);
      if (s.mean_abs_nu > 0.0) nu_mean.emplace_back(dd, s.mean_abs_nu);
      if (s.std_abs_nu && *s.std_abs_nu > 0.0) nu_std.emplace_back(dd, *s.std_abs_nu);
      if (s.std_h && *s.std_h > 0.0) h_std.emplace_back(dd, *s.std_h);
      out.deviation.push_back({d, s.mean_h, s.predicted_h, (s.mean_h - s.predicted_h) / s.predicted_h});
    }
    out.dims.push_back(std::move(s));
  }
  const auto fit = [](const std::vector<std::pair<double, double>>& p) -> std::optional<AsymptoticFit> {
    if (p.size() < 3) return std::nullopt;
    return power_law_fit(p);
  };
  out.fit_mean_abs_nu = fit(nu_mean);
  out.fit_std_abs_nu = fit(nu_std);
  out.fit_std_h = fit(h_std);
  return out;
}

inline json to_json(const AsymptoticFit& f) {
  return json{{"amplitude", f.amplitude}, {"exponent", f.exponent}, {"r_squared", f.r_squared}};
}

inline json to_json(const EnsembleSummary& s) {
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  const auto opt_fit = [](const std::optional<AsymptoticFit>& f) {
    return f ? to_json(*f) : json(nullptr);
  };
  json dims = json::array();
  for (const auto& d : s.dims) {
    dims.push_back(json{{"dim", d.dim},
                        {"n", d.n},
                        {"n_failed", d.n_failed},
                        {"mean_h", d.mean_h},
                        {"std_h", opt(d.std_h)},
                        {"mean_abs_nu", d.mean_abs_nu},
                        {"std_abs_nu", opt(d.std_abs_nu)},
                        {"mean_bound", opt(d.mean_bound)},
                        {"bound_violations", d.bound_violations},
                        {"ks_pi", opt(d.ks_pi)},
                        {"ks_xi", opt(d.ks_xi)},
                        {"corr_tauinv_h", opt(d.corr_tauinv_h)},
                        {"ratio_halfcheck", d.ratio_halfcheck},
                        {"product_h_tau", d.product_h_tau},
                        {"predicted_h", d.predicted_h}});
  }
  json dev = json::array();
  for (const auto& r : s.deviation)
    dev.push_back(json{{"dim", r.dim},
                       {"mean_h", r.mean_h},
                       {"predicted_h", r.predicted_h},
                       {"relative_deviation", r.relative_deviation}});
  return json{{"dims", dims},
              {"fits",
               {{"mean_abs_nu", opt_fit(s.fit_mean_abs_nu)},
                {"std_abs_nu", opt_fit(s.fit_std_abs_nu)},
                {"std_h", opt_fit(s.fit_std_h)}}},
              {"deviation", dev}};
}

//-----------------------------------------------------------------------------
// Files in a sweep output directory

namespace files {

inline std::filesystem::path records(const std::filesystem::path& dir, std::size_t d) {
  return dir / ("records_d" + std::to_string(d) + ".csv");
}
inline std::filesystem::path pi(const std::filesystem::path& dir, std::size_t d) {
  return dir / ("pi_d" + std::to_string(d) + ".csv");
}
inline std::filesystem::path cdf(const std::filesystem::path& dir, std::string_view which,
                                 std::size_t d) {
  return dir / ("cdf_" + std::string(which) + "_d" + std::to_string(d) + ".csv");
}
inline std::filesystem::path spectrum(const std::filesystem::path& dir, std::size_t d) {
  return dir / ("spectrum_d" + std::to_string(d) + ".csv");
}
inline std::filesystem::path summary(const std::filesystem::path& dir) {
  return dir / "summary.json";
}

}  // namespace files

inline void write_column_csv(std::ostream& out, std::string_view header,
                             std::span<const double> values) {
  out << header << '\n';
  for (double v : values) out << format_double(v) << '\n';
}

inline std::vector<double> read_column_csv(std::istream& in) {
  std::string line;
  std::getline(in, line);  // header
  std::vector<double> v;
  while (std::getline(in, line))
    if (!line.empty()) v.push_back(parse_double(line));
  return v;
}

/// Two-column (x, F(x)) step data of the empirical CDF.
inline void write_cdf_csv(std::ostream& out, std::span<const double> samples) {
  const EmpiricalCDF ecdf({samples.begin(), samples.end()});
  const auto xs = ecdf.sorted_samples();
  const double n = static_cast<double>(xs.size());
  out << "x,F\n";
  for (std::size_t i = 0; i < xs.size(); ++i)
    out << format_double(xs[i]) << ',' << format_double(static_cast<double>(i + 1) / n) << '\n';
}

inline void write_spectrum_csv(std::ostream& out, std::span<const complex_t> ev) {
  out << "re,im\n";
  for (const auto& z : ev) out << format_double(z.real()) << ',' << format_double(z.imag()) << '\n';
}

namespace detail {

// Writes through a temporary file so a partially written file is never
// mistaken for a finished one.
template <class Writer>
void write_atomically(const std::filesystem::path& path, Writer&& writer) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    writer(out);
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

/// Loads every records_d<dim>.csv (and pi_d<dim>.csv when present) in `dir`.
struct RecordsDir {
  std::map<std::size_t, std::vector<SampleRecord>> records;
  std::map<std::size_t, std::vector<double>> z_pi;
};

inline RecordsDir load_records_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw Error(ErrorCode::IoError, dir.string() + " is not a directory");
  RecordsDir out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    std::size_t d = 0;
    if (name.rfind("records_d", 0) == 0 && entry.path().extension() == ".csv") {
      d = std::stoul(name.substr(9));
      std::ifstream in(entry.path());
      out.records[d] = read_records_csv(in);
    } else if (name.rfind("pi_d", 0) == 0 && entry.path().extension() == ".csv") {
      d = std::stoul(name.substr(4));
      std::ifstream in(entry.path());
      out.z_pi[d] = read_column_csv(in);
    }
  }
  if (out.records.empty()) throw Error(ErrorCode::IoError, "no records files in " + dir.string());
  return out;
}

//-----------------------------------------------------------------------------
// Sweep

struct SweepOptions {
  std::optional<std::filesystem::path> out_dir;
  bool resume = false;  // reuse finished records_d<dim>.csv files
  MatrixInjector inject;
  std::ostream* progress = nullptr;
};

struct SweepResult {
  std::map<std::size_t, std::vector<SampleRecord>> records;
  std::map<std::size_t, std::vector<double>> z_pi;
  EnsembleSummary summary;
};

inline constexpr double max_failure_fraction = 0.01;

/// Samples and analyzes every (dim, sample_index) of the plan. Stream ids
/// are a global counter over the plan in config order, so results do not
/// depend on the number of workers or their scheduling.
inline SweepResult run_sweep(const SweepConfig& config, const SweepOptions& options = {}) {
  config.validate();
  const std::size_t workers =
      config.worker_count ? config.worker_count
                          : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  const auto& out_dir = options.out_dir;
  if (out_dir) std::filesystem::create_directories(*out_dir);
  const SpectralOptions opt = spectral_options(config);

  SweepResult result;
  std::uint64_t stream_base = 0;
  for (const std::size_t d : config.dims) {
    const std::size_t n = config.count(d);
    std::vector<SampleRecord> records;

    const bool reuse = options.resume && out_dir && std::filesystem::exists(files::records(*out_dir, d));
    if (reuse) {
      std::ifstream in(files::records(*out_dir, d));
      records = read_records_csv(in);
      if (records.size() != n)
        throw Error(ErrorCode::IoError, "resumed records for d=" + std::to_string(d) +
                                            " have the wrong sample count");
    } else {
      records.resize(n);
      std::atomic<std::size_t> next{0};
      std::exception_ptr failure;
      std::mutex failure_mutex;
      const auto work = [&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= n) return;
          try {
            records[i] = process_sample(config, d, i, stream_base + i, options.inject).record;
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = n;
          }
        }
      };
      if (workers == 1) {
        work();
      } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < std::min(workers, n); ++w) pool.emplace_back(work);
      }
      if (failure) std::rethrow_exception(failure);
    }

    const auto failed = static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [](const SampleRecord& r) { return !r.ok(); }));
    if (static_cast<double>(failed) > max_failure_fraction * static_cast<double>(n))
      throw Error(ErrorCode::NumericalFailure,
                  std::to_string(failed) + " of " + std::to_string(n) + " samples failed at d=" +
                      std::to_string(d));

    // Representative sample: the first successful one, recomputed.
    std::vector<double> z;
    const auto first_ok = std::find_if(records.begin(), records.end(),
                                       [](const SampleRecord& r) { return r.ok(); });
    if (reuse && out_dir && std::filesystem::exists(files::pi(*out_dir, d))) {
      std::ifstream in(files::pi(*out_dir, d));
      z = read_column_csv(in);
    } else if (first_ok != records.end() && config.mode == SampleMode::exact) {
      std::optional<MarkovMatrix> injected;
      if (options.inject) injected = options.inject(d, first_ok->sample_index);
      const auto m = injected ? *injected : sample_matrix(d, {config.master_seed, first_ok->stream_id});
      z = rescale_pi(stationary(m, opt).pi, d);
      if (out_dir && config.outputs.spectrum_dump && d <= config.full_spectrum_limit) {
        const auto sp = full_spectrum(m, opt);
        detail::write_atomically(files::spectrum(*out_dir, d),
                                 [&](std::ostream& o) { write_spectrum_csv(o, sp.eigenvalues); });
      }
    }

    if (out_dir) {
      if (config.outputs.records && !reuse) {
        detail::write_atomically(files::pi(*out_dir, d),
                                 [&](std::ostream& o) { write_column_csv(o, "z", z); });
        detail::write_atomically(files::records(*out_dir, d),
                                 [&](std::ostream& o) { write_records_csv(o, records); });
      }
      if (config.outputs.cdf_pi && !z.empty())
        detail::write_atomically(files::cdf(*out_dir, "pi", d),
                                 [&](std::ostream& o) { write_cdf_csv(o, z); });
      std::vector<double> hs, nus;
      for (const auto& r : records)
        if (r.ok()) {
          hs.push_back(r.h);
          nus.push_back(r.abs_nu);
        }
      if (config.outputs.cdf_h && hs.size() >= 2) {
        const double mu = mean(hs), sd = stddev(hs);
        if (sd > 0.0) {
          for (auto& v : hs) v = (v - mu) / sd;
          detail::write_atomically(files::cdf(*out_dir, "h", d),
                                   [&](std::ostream& o) { write_cdf_csv(o, hs); });
        }
      }
      if (config.outputs.cdf_xi && nus.size() >= 2 && stddev(nus) > 0.0) {
        const auto xi = rescale_xi(nus);
        detail::write_atomically(files::cdf(*out_dir, "xi", d),
                                 [&](std::ostream& o) { write_cdf_csv(o, xi); });
      }
    }
    if (options.progress)
      *options.progress << "d=" << d << " n=" << n << " failed=" << failed << '\n';

    if (!z.empty()) result.z_pi[d] = std::move(z);
    result.records[d] = std::move(records);
    stream_base += n;
  }

  result.summary = summarize(result.records, result.z_pi);
  if (out_dir && config.outputs.summary) {
    json j = to_json(result.summary);
    j["config"] = to_json(config);
    detail::write_atomically(files::summary(*out_dir),
                             [&](std::ostream& o) { o << j.dump(2) << '\n'; });
  }
  return result;
}

}  // namespace rmm
