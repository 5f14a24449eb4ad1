#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "lf/cli.hpp"

namespace lf::cli {

namespace {

const std::set<std::string> known_keys = {
    "problem.dim", "problem.leaders", "problem.followers", "problem.horizon", "problem.dt",
    "problem.u_max", "problem.integrator", "problem.p",
    "initial.sampler", "initial.center", "initial.scale", "initial.seed",
    "control.pieces", "control.breakpoints", "control.values", "control.file",
    "kernels.h", "kernels.h_amplitude", "kernels.h_table", "kernels.g", "kernels.g_amplitude",
    "kernels.g_table",
    "cost.target", "cost.gamma", "cost.state_weight", "cost.scale", "cost.lambda",
    "optimizer.step", "optimizer.max_iter", "optimizer.tol",
    "study.n_list", "study.reference_n", "study.eps_list", "study.seeds", "study.limit_dt",
    "study.gamma_list", "study.delta_list", "study.u_bar", "study.u_star", "study.samples",
    "study.certify_samples", "study.certify_radius", "study.catalog",
    "output.stride", "output.plots", "output.timing",
};

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::optional<double> to_double(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || std::isnan(v)) return std::nullopt;
  return v;
}

std::optional<std::uint64_t> to_uint(const std::string& s) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

// Typed access to the raw map that records every problem as a diagnostic.
class Reader {
 public:
  Reader(const RawConfig& raw, std::vector<Diagnostic>& diags) : raw_(raw), diags_(diags) {}

  bool has(const std::string& key) const { return raw_.values.count(key) > 0; }

  void fail(const std::string& key, const std::string& message) {
    const auto it = raw_.lines.find(key);
    diags_.push_back({key, it == raw_.lines.end() ? 0 : it->second, message});
  }

  std::string text(const std::string& key, const std::string& fallback) const {
    const auto it = raw_.values.find(key);
    return it == raw_.values.end() ? fallback : it->second;
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const auto v = to_double(text(key, ""));
    if (!v) {
      fail(key, fmt::format("'{}' is not a number", text(key, "")));
      return fallback;
    }
    return *v;
  }

  std::uint64_t integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const auto v = to_uint(text(key, ""));
    if (!v) {
      fail(key, fmt::format("'{}' is not a non-negative integer", text(key, "")));
      return fallback;
    }
    return *v;
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> fallback = {}) {
    if (!has(key)) return fallback;
    std::vector<double> out;
    for (const auto& item : split_list(text(key, ""))) {
      const auto v = to_double(item);
      if (!v) {
        fail(key, fmt::format("list entry '{}' is not a number", item));
        return fallback;
      }
      out.push_back(*v);
    }
    return out;
  }

  std::vector<std::uint64_t> integers(const std::string& key, std::vector<std::uint64_t> fallback = {}) {
    if (!has(key)) return fallback;
    std::vector<std::uint64_t> out;
    for (const auto& item : split_list(text(key, ""))) {
      const auto v = to_uint(item);
      if (!v) {
        fail(key, fmt::format("list entry '{}' is not a non-negative integer", item));
        return fallback;
      }
      out.push_back(*v);
    }
    return out;
  }

  bool flag(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto t = text(key, "");
    if (t == "on" || t == "true" || t == "1") return true;
    if (t == "off" || t == "false" || t == "0") return false;
    fail(key, fmt::format("'{}' is not one of on, off", t));
    return fallback;
  }

  std::filesystem::path path(const std::string& key) const {
    std::filesystem::path p = text(key, "");
    if (p.is_relative() && !raw_.source.empty() && raw_.source.front() != '<')
      p = std::filesystem::path(raw_.source).parent_path() / p;
    return p;
  }

 private:
  const RawConfig& raw_;
  std::vector<Diagnostic>& diags_;
};

KernelSpec read_kernel(Reader& r, const std::string& kind_key, const std::string& amp_key,
                       const std::string& table_key, const std::string& kind_text, std::size_t dim) {
  const auto kind = parse_kernel_kind(kind_text);
  if (!kind) {
    r.fail(kind_key, fmt::format("unknown kernel '{}' (catalog: zero, constant, "
                                 "attraction_repulsion, stokes_like, table)", kind_text));
    return KernelSpec::zero(dim);
  }
  const double a = r.number(amp_key, 1.0);
  if (!std::isfinite(a)) r.fail(amp_key, "amplitude must be finite");
  switch (*kind) {
    case KernelKind::zero: return KernelSpec::zero(dim);
    case KernelKind::constant: return KernelSpec::constant(dim, a);
    case KernelKind::attraction_repulsion: return KernelSpec::attraction_repulsion(dim, a);
    case KernelKind::stokes_like: return KernelSpec::stokes_like(dim, a);
    case KernelKind::table:
      if (!r.has(table_key)) {
        r.fail(table_key, "table kernel needs a table file");
        return KernelSpec::zero(dim);
      }
      try {
        return KernelSpec::from_table(dim, RadialTable::load(r.path(table_key)));
      } catch (const std::exception& e) {
        r.fail(table_key, e.what());
        return KernelSpec::zero(dim);
      }
  }
  return KernelSpec::zero(dim);
}

bool multiple_of(double value, double dt) {
  const double ratio = value / dt;
  return std::abs(ratio - std::round(ratio)) <= 1e-9 * std::max(1.0, std::abs(ratio));
}

}  // namespace

std::string to_string(const Diagnostic& d) {
  if (d.field.empty()) return d.message;
  if (d.line > 0) return fmt::format("line {}: {}: {}", d.line, d.field, d.message);
  return fmt::format("{}: {}", d.field, d.message);
}

RawConfig RawConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

RawConfig RawConfig::parse(const std::string& text, const std::string& source) {
  boost::property_tree::ptree tree;
  std::istringstream is(text);
  try {
    boost::property_tree::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(fmt::format("{}:{}: {}", source, e.line(), e.message()));
  }
  RawConfig raw;
  raw.source = source;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      raw.values[section] = body.data();
      continue;
    }
    for (const auto& [key, value] : body) raw.values[section + "." + key] = value.data();
  }
  // Line numbers from a plain scan; the parser above has already accepted the text.
  std::istringstream lines(text);
  std::string line, section;
  for (int n = 1; std::getline(lines, line); ++n) {
    line = trim(line);
    if (line.empty() || line[0] == ';' || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const auto key = trim(line.substr(0, eq));
    raw.lines[section.empty() ? key : section + "." + key] = n;
  }
  return raw;
}

std::optional<Diagnostic> RawConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto key = trim(assignment.substr(0, eq));
  if (eq == std::string::npos || key.find('.') == std::string::npos)
    return Diagnostic{"", 0, fmt::format("override '{}' is not of the form section.key=value", assignment)};
  const auto value = trim(assignment.substr(eq + 1));
  if (value.empty()) values.erase(key);
  else values[key] = value;
  lines.erase(key);
  return std::nullopt;
}

std::string RawConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values) out += k + "=" + v + "\n";
  return out;
}

ExperimentConfig build_config(const RawConfig& raw, std::vector<Diagnostic>& diags) {
  Reader r(raw, diags);
  for (const auto& [key, value] : raw.values)
    if (!known_keys.count(key)) r.fail(key, "unknown key");

  ExperimentConfig c;

  // problem
  c.dim = r.integer("problem.dim", 1);
  if (c.dim == 0) {
    r.fail("problem.dim", "must be >= 1");
    c.dim = 1;
  }
  const std::size_t d = c.dim;
  const auto leaders = r.numbers("problem.leaders");
  if (leaders.size() % d != 0) r.fail("problem.leaders", fmt::format("{} coordinates is not a multiple of dim = {}", leaders.size(), d));
  else c.leaders0 = Points(d, leaders);
  if (c.leaders0.dim() != d) c.leaders0 = Points(0, d);
  if (!all_finite(c.leaders0.flat())) r.fail("problem.leaders", "non-finite coordinate");
  c.followers = r.integer("problem.followers", 100);
  if (c.followers == 0) r.fail("problem.followers", "must be >= 1");
  c.horizon = r.number("problem.horizon", 1.0);
  if (!(c.horizon > 0.0) || !std::isfinite(c.horizon)) r.fail("problem.horizon", "must be > 0");
  c.dt = r.number("problem.dt", 0.01);
  const bool dt_ok = c.dt > 0.0 && std::isfinite(c.dt);
  if (!dt_ok) r.fail("problem.dt", "must be > 0");
  c.u_max = r.number("problem.u_max", std::numeric_limits<double>::infinity());
  if (!(c.u_max >= 0.0)) r.fail("problem.u_max", "must be >= 0");
  const auto integrator = r.text("problem.integrator", "euler");
  if (integrator == "euler") c.integrator = Integrator::euler;
  else if (integrator == "rk4") c.integrator = Integrator::rk4;
  else r.fail("problem.integrator", fmt::format("'{}' is not one of euler, rk4", integrator));
  c.p = r.number("problem.p", 0.5);
  if (!(c.p >= 0.0 && c.p <= 1.0)) r.fail("problem.p", "must lie in [0, 1]");

  // initial
  const auto sampler = r.text("initial.sampler", "halton_box");
  if (sampler == "halton_box") c.sampler.kind = InitialSampler::Kind::halton_box;
  else if (sampler == "uniform_box") c.sampler.kind = InitialSampler::Kind::uniform_box;
  else if (sampler == "gaussian") c.sampler.kind = InitialSampler::Kind::gaussian;
  else r.fail("initial.sampler", fmt::format("'{}' is not one of halton_box, uniform_box, gaussian", sampler));
  c.sampler.center = r.numbers("initial.center", std::vector<double>(d, 0.0));
  if (c.sampler.center.size() != d) {
    r.fail("initial.center", fmt::format("needs {} coordinates", d));
    c.sampler.center.assign(d, 0.0);
  }
  c.sampler.scale = r.number("initial.scale", 1.0);
  if (!(c.sampler.scale > 0.0) || !std::isfinite(c.sampler.scale)) r.fail("initial.scale", "must be > 0");
  c.seed = r.integer("initial.seed", 0);

  // kernels
  c.kernels.h = read_kernel(r, "kernels.h", "kernels.h_amplitude", "kernels.h_table",
                            r.text("kernels.h", "zero"), d);
  auto g_kinds = split_list(r.text("kernels.g", "zero"));
  if (g_kinds.size() == 1) g_kinds.assign(d, g_kinds.front());
  if (g_kinds.size() != d) {
    r.fail("kernels.g", fmt::format("give one kind or {} kinds", d));
    g_kinds.assign(d, "zero");
  }
  for (const auto& kind : g_kinds)
    c.kernels.g.push_back(read_kernel(r, "kernels.g", "kernels.g_amplitude", "kernels.g_table", kind, d));

  // control
  const std::size_t m = c.leaders0.size();
  if (r.has("control.file")) {
    std::ifstream in(r.path("control.file"));
    if (!in) r.fail("control.file", fmt::format("cannot read '{}'", r.path("control.file").string()));
    else try {
      c.control = read_control_csv(in, c.u_max);
      if (c.control.leaders() != m || c.control.dim() != d)
        r.fail("control.file", fmt::format("control has {} x {} entries, expected {} x {}",
                                           c.control.leaders(), c.control.dim(), m, d));
    } catch (const std::exception& e) {
      r.fail("control.file", e.what());
    }
  } else {
    std::vector<double> breaks;
    if (r.has("control.breakpoints")) {
      breaks = r.numbers("control.breakpoints");
      if (r.has("control.pieces")) r.fail("control.pieces", "give either pieces or breakpoints");
    } else {
      const auto pieces = r.integer("control.pieces", 1);
      if (pieces == 0) r.fail("control.pieces", "must be >= 1");
      for (std::size_t k = 0; k <= std::max<std::size_t>(pieces, 1); ++k)
        breaks.push_back(k == std::max<std::size_t>(pieces, 1) ? c.horizon
                                                             : c.horizon * static_cast<double>(k) /
                                                                   static_cast<double>(pieces));
    }
    const std::size_t pieces = breaks.size() < 2 ? 0 : breaks.size() - 1;
    if (pieces == 0) r.fail("control.breakpoints", "needs at least two entries");
    const auto values = r.numbers("control.values", std::vector<double>(m * d, 0.0));
    std::vector<ControlMatrix> mats;
    if (values.size() == m * d) mats.assign(pieces, ControlMatrix(d, values));
    else if (values.size() == pieces * m * d)
      for (std::size_t k = 0; k < pieces; ++k)
        mats.emplace_back(d, std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(k * m * d),
                                                 values.begin() + static_cast<std::ptrdiff_t>((k + 1) * m * d)));
    else
      r.fail("control.values", fmt::format("needs {} (one piece) or {} ({} pieces) entries",
                                           m * d, pieces * m * d, pieces));
    if (pieces > 0 && mats.size() == pieces) try {
      c.control = ControlSignal(breaks, mats, c.u_max);
      if (!c.control.admissible(1e-12))
        r.fail("control.values", fmt::format("a control exceeds u_max = {}", c.u_max));
    } catch (const std::exception& e) {
      r.fail("control.breakpoints", e.what());
    }
  }
  if (c.control.pieces() > 0) {
    if (std::abs(c.control.horizon() - c.horizon) > 1e-12 * std::max(1.0, c.horizon))
      r.fail("control.breakpoints", fmt::format("last breakpoint {} differs from problem.horizon = {}",
                                                c.control.horizon(), c.horizon));
    if (dt_ok)
      for (double b : c.control.breakpoints())
        if (!multiple_of(b, c.dt))
          r.fail(r.has("control.file") ? "control.file" : "control.breakpoints",
                 fmt::format("breakpoint {} is not a multiple of dt = {}", b, c.dt));
  }

  // cost
  const auto target = r.numbers("cost.target", std::vector<double>(d, 0.0));
  if (target.size() != d && target.size() != c.followers * d)
    r.fail("cost.target", fmt::format("needs {} (shared point) or {} (one per follower) entries", d,
                                      c.followers * d));
  else c.target = Points(d, target);
  c.gamma = r.number("cost.gamma", 1.0);
  if (!(c.gamma > 0.0) || !std::isfinite(c.gamma)) r.fail("cost.gamma", "must be > 0");
  c.state_weight = r.number("cost.state_weight", 1.0);
  if (!(c.state_weight >= 0.0)) r.fail("cost.state_weight", "must be >= 0");
  const auto scale = r.text("cost.scale", "sum");
  if (scale == "sum") c.scale = CostScale::sum;
  else if (scale == "mean") c.scale = CostScale::mean;
  else r.fail("cost.scale", fmt::format("'{}' is not one of sum, mean", scale));
  c.lambda = r.number("cost.lambda", 0.0);
  if (!(c.lambda >= 0.0) || !std::isfinite(c.lambda)) r.fail("cost.lambda", "must be >= 0");

  // optimizer
  c.optimizer.step = r.number("optimizer.step", 0.25);
  if (!(c.optimizer.step > 0.0)) r.fail("optimizer.step", "must be > 0");
  c.optimizer.max_iter = static_cast<int>(r.integer("optimizer.max_iter", 2000));
  c.optimizer.tol = r.number("optimizer.tol", 1e-6);
  if (!(c.optimizer.tol > 0.0)) r.fail("optimizer.tol", "must be > 0");

  // study
  for (auto n : r.integers("study.n_list")) c.n_list.push_back(n);
  for (std::size_t i = 0; i < c.n_list.size(); ++i) {
    if (c.n_list[i] == 0) r.fail("study.n_list", "entries must be >= 1");
    if (i > 0 && c.n_list[i] <= c.n_list[i - 1]) r.fail("study.n_list", "must be strictly increasing");
  }
  c.reference_n = r.integer("study.reference_n", 0);
  if (r.has("study.reference_n") && !c.n_list.empty() && c.reference_n <= c.n_list.back())
    r.fail("study.reference_n", "must exceed every entry of study.n_list");
  c.limit_dt = r.number("study.limit_dt", 0.01);
  if (!(c.limit_dt > 0.0)) r.fail("study.limit_dt", "must be > 0");
  c.eps_list = r.numbers("study.eps_list");
  for (std::size_t i = 0; i < c.eps_list.size(); ++i) {
    const double e = c.eps_list[i];
    if (!(e > 0.0 && e <= 1.0)) r.fail("study.eps_list", fmt::format("eps = {} must lie in (0, 1]", e));
    else {
      if (!multiple_of(c.horizon, e))
        r.fail("study.eps_list", fmt::format("eps = {} does not divide problem.horizon = {}", e, c.horizon));
      if (c.limit_dt > 0.0 && !multiple_of(e, c.limit_dt))
        r.fail("study.eps_list", fmt::format("study.limit_dt = {} does not divide eps = {}", c.limit_dt, e));
    }
    if (i > 0 && !(e < c.eps_list[i - 1])) r.fail("study.eps_list", "must be strictly decreasing");
  }
  c.seeds = r.integers("study.seeds", {c.seed});
  if (c.seeds.empty()) r.fail("study.seeds", "needs at least one seed");
  c.gamma_list = r.numbers("study.gamma_list");
  for (double g : c.gamma_list)
    if (!(g > 0.0)) r.fail("study.gamma_list", fmt::format("gamma = {} must be > 0", g));
  c.delta_list = r.numbers("study.delta_list");
  for (double v : c.delta_list)
    if (!(v > 0.0 && v < 2.0)) r.fail("study.delta_list", fmt::format("delta = {} must lie in (0, 2)", v));
  c.u_bar = r.numbers("study.u_bar", std::vector<double>(d, 0.0));
  if (c.u_bar.size() != d) r.fail("study.u_bar", fmt::format("needs {} entries", d));
  c.u_star = r.numbers("study.u_star", std::vector<double>(d, 0.0));
  if (c.u_star.size() != d) r.fail("study.u_star", fmt::format("needs {} entries", d));
  c.samples = r.integer("study.samples", 1000);
  if (c.samples < 2) r.fail("study.samples", "must be >= 2");
  c.certify_samples = r.integer("study.certify_samples", 20000);
  if (c.certify_samples == 0) r.fail("study.certify_samples", "must be >= 1");
  c.certify_radius = r.number("study.certify_radius", 5.0);
  if (!(c.certify_radius > 0.0)) r.fail("study.certify_radius", "must be > 0");
  c.catalog = r.flag("study.catalog", false);

  // output
  c.stride = r.integer("output.stride", 1);
  if (c.stride == 0) r.fail("output.stride", "must be >= 1");
  c.plots = r.flag("output.plots", true);
  c.timing = r.flag("output.timing", false);
  return c;
}

std::vector<Diagnostic> validate(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  auto raw = RawConfig::load(path);
  std::vector<Diagnostic> diags;
  for (const auto& o : overrides)
    if (auto d = raw.apply_override(o)) diags.push_back(*d);
  build_config(raw, diags);
  return diags;
}

}  // namespace lf::cli
