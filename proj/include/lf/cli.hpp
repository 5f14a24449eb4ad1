#pragma once

// Experiment runner behind the lfsim tool.
//
// Configs are sectioned key=value files:
//
//   [problem]    dim, leaders, followers, horizon, dt, u_max, integrator, p
//   [initial]    sampler, center, scale, seed
//   [control]    pieces, breakpoints, values, file
//   [kernels]    h, h_amplitude, h_table, g, g_amplitude, g_table
//   [cost]       target, gamma, state_weight, scale, lambda
//   [optimizer]  step, max_iter, tol
//   [study]      n_list, reference_n, eps_list, seeds, limit_dt, gamma_list,
//                delta_list, u_bar, u_star, samples, certify_samples,
//                certify_radius, catalog
//   [output]     stride, plots, timing
//
// Lists are comma separated. Every key has a default; unknown keys are errors.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lf/binaryctrl.hpp"
#include "lf/gamma_limit.hpp"
#include "lf/kinetic.hpp"
#include "lf/meanfield.hpp"
#include "lf/optctrl.hpp"

namespace lf::cli {

struct Diagnostic {
  std::string field;  // section.key, or empty for file-level problems
  int line = 0;       // 0 when the value came from a default or an override
  std::string message;
};

std::string to_string(const Diagnostic& d);

/// Raw key=value view of a config file plus overrides.
struct RawConfig {
  std::map<std::string, std::string> values;  // "section.key" -> text
  std::map<std::string, int> lines;
  std::string source;                         // path, for messages

  /// Throws ConfigError when the file cannot be read or is not valid INI.
  static RawConfig load(const std::filesystem::path& path);
  static RawConfig parse(const std::string& text, const std::string& source = "<string>");
  /// "section.key=value"; an empty value removes the key. Returns a
  /// diagnostic on malformed input.
  std::optional<Diagnostic> apply_override(const std::string& assignment);
  /// Canonical text (sorted keys) used for the config hash.
  std::string canonical() const;
};

struct ExperimentConfig {
  // problem
  std::size_t dim = 1;
  Points leaders0;
  std::size_t followers = 100;
  double horizon = 1.0;
  double dt = 0.01;
  double u_max = std::numeric_limits<double>::infinity();
  Integrator integrator = Integrator::euler;
  double p = 0.5;
  // initial
  InitialSampler sampler;
  std::uint64_t seed = 0;
  // control
  ControlSignal control;
  // kernels
  KernelSet kernels;
  // cost
  Points target;
  double gamma = 1.0;
  double state_weight = 1.0;
  CostScale scale = CostScale::sum;
  double lambda = 0.0;
  // optimizer
  OptimizeOptions optimizer;
  // study
  std::vector<std::size_t> n_list;
  std::size_t reference_n = 0;
  std::vector<double> eps_list;
  std::vector<std::uint64_t> seeds;
  double limit_dt = 0.01;
  std::vector<double> gamma_list;
  std::vector<double> delta_list;
  std::vector<double> u_bar, u_star;
  std::size_t samples = 1000;
  std::size_t certify_samples = 20000;
  double certify_radius = 5.0;
  bool catalog = false;
  // output
  std::size_t stride = 1;
  bool plots = true;
  bool timing = false;
};

/// Parses and validates; every violation found is appended to `diagnostics`
/// (nothing is silently fixed). The returned config is only meaningful when
/// no diagnostics were added.
ExperimentConfig build_config(const RawConfig& raw, std::vector<Diagnostic>& diagnostics);

/// Diagnostics for a config file (empty when valid). Throws ConfigError if
/// the file is unreadable.
std::vector<Diagnostic> validate(const std::filesystem::path& path,
                                 const std::vector<std::string>& overrides = {});

enum class Subcommand {
  simulate,
  meanfield_converge,
  stability,
  optimize,
  gamma_sweep,
  kinetic_sweep,
  feedback_control,
  certify_kernels,
  validate,
};

std::optional<Subcommand> parse_subcommand(const std::string& name);
std::string to_string(Subcommand s);

struct RunOptions {
  Subcommand subcommand = Subcommand::simulate;
  std::filesystem::path config;
  std::vector<std::string> overrides;
  std::filesystem::path out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<bool> plots;
  std::optional<std::filesystem::path> check;  // frozen CSV for the primary output
  double check_rtol = 1e-6;
  double check_atol = 1e-12;
};

enum ExitCode { ok = 0, failure = 1, config_error = 2, numerical_error = 3, regression = 4 };

/// Runs one subcommand and returns the process exit code. Messages go to
/// `log`; artifacts go to options.out_dir.
int run(const RunOptions& options, std::ostream& log);

/// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& bytes);

/// Numeric CSV comparison (columns named runtime_s are ignored). Returns an
/// empty string on agreement, otherwise a description of the first mismatch.
std::string compare_csv(const std::string& actual, const std::string& expected, double rtol,
                        double atol);

struct PlotSeries {
  std::string name;
  std::vector<double> x, y;
};

/// Standalone SVG line plot with axes, tick labels and one polyline per series.
std::string svg_line_plot(const std::string& title, const std::string& x_label,
                          const std::string& y_label, const std::vector<PlotSeries>& series,
                          bool log_x = false, bool log_y = false);

}  // namespace lf::cli
