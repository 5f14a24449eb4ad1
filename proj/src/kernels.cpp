#include "lf/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lf/rng.hpp"

namespace lf {

namespace {

double amplitude(const KernelSpec& spec) { return spec.params.empty() ? 1.0 : spec.params[0]; }

void check_dim(const KernelSpec& spec, std::span<const double> xi) {
  if (xi.size() != spec.dim) {
    throw InputError("kernel evaluation: argument has dimension " + std::to_string(xi.size()) +
                     ", kernel expects " + std::to_string(spec.dim));
  }
}

}  // namespace

double RadialTable::operator()(double r) const {
  if (radius.empty()) return 0.0;
  if (r <= radius.front()) return value.front();
  if (r >= radius.back()) return value.back();
  const auto it = std::upper_bound(radius.begin(), radius.end(), r);
  const std::size_t k = static_cast<std::size_t>(it - radius.begin());
  const double w = (r - radius[k - 1]) / (radius[k] - radius[k - 1]);
  return (1.0 - w) * value[k - 1] + w * value[k];
}

double RadialTable::slope(double r) const {
  if (radius.size() < 2 || r < radius.front() || r >= radius.back()) return 0.0;
  const auto it = std::upper_bound(radius.begin(), radius.end(), r);
  const std::size_t k = static_cast<std::size_t>(it - radius.begin());
  return (value[k] - value[k - 1]) / (radius[k] - radius[k - 1]);
}

RadialTable RadialTable::parse(std::string_view text) {
  RadialTable t;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    double r = 0.0, v = 0.0;
    if (!(fields >> r)) continue;  // blank line
    if (!(fields >> v)) {
      throw InputError("radial table line " + std::to_string(lineno) + ": expected two columns");
    }
    std::string extra;
    if (fields >> extra) {
      throw InputError("radial table line " + std::to_string(lineno) + ": trailing data");
    }
    if (!std::isfinite(r) || !std::isfinite(v) || r < 0.0) {
      throw InputError("radial table line " + std::to_string(lineno) +
                       ": radius must be finite and >= 0");
    }
    if (!t.radius.empty() && r <= t.radius.back()) {
      throw InputError("radial table line " + std::to_string(lineno) +
                       ": radii must be strictly increasing");
    }
    t.radius.push_back(r);
    t.value.push_back(v);
  }
  if (t.radius.empty()) throw InputError("radial table: no data rows");
  return t;
}

RadialTable RadialTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open radial table " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

bool KernelSpec::is_zero() const { return kind == KernelKind::zero; }

double KernelSpec::growth_constant() const {
  switch (kind) {
    case KernelKind::zero:
      return 0.0;
    case KernelKind::constant:
    case KernelKind::attraction_repulsion:
    case KernelKind::stokes_like:
      return std::abs(amplitude(*this));
    case KernelKind::table: {
      double c = 0.0;
      for (double v : table->value) c = std::max(c, std::abs(v));
      return c;
    }
  }
  return 0.0;
}

std::string_view to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::zero: return "zero";
    case KernelKind::constant: return "constant";
    case KernelKind::attraction_repulsion: return "attraction_repulsion";
    case KernelKind::stokes_like: return "stokes_like";
    case KernelKind::table: return "table";
  }
  return "?";
}

std::optional<KernelKind> parse_kernel_kind(std::string_view name) {
  for (auto k : {KernelKind::zero, KernelKind::constant, KernelKind::attraction_repulsion,
                 KernelKind::stokes_like, KernelKind::table}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

double profile(const KernelSpec& spec, double r) {
  switch (spec.kind) {
    case KernelKind::zero: return 0.0;
    case KernelKind::constant: return amplitude(spec);
    case KernelKind::attraction_repulsion: return amplitude(spec) / (1.0 + r);
    case KernelKind::stokes_like: return amplitude(spec) / (1.0 + r * r);
    case KernelKind::table: return (*spec.table)(r);
  }
  return 0.0;
}

double profile_slope(const KernelSpec& spec, double r) {
  switch (spec.kind) {
    case KernelKind::zero:
    case KernelKind::constant:
      return 0.0;
    case KernelKind::attraction_repulsion: {
      const double s = 1.0 + r;
      return -amplitude(spec) / (s * s);
    }
    case KernelKind::stokes_like: {
      const double s = 1.0 + r * r;
      return -2.0 * amplitude(spec) * r / (s * s);
    }
    case KernelKind::table:
      return spec.table->slope(r);
  }
  return 0.0;
}

void eval_h(const KernelSpec& spec, std::span<const double> xi, std::span<double> out) {
  check_dim(spec, xi);
  if (spec.kind == KernelKind::zero) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const double phi = profile(spec, norm(xi));
  for (std::size_t i = 0; i < xi.size(); ++i) out[i] = -xi[i] * phi;
}

std::vector<double> eval_h(const KernelSpec& spec, std::span<const double> xi) {
  std::vector<double> out(spec.dim);
  eval_h(spec, xi, out);
  return out;
}

void eval_g(const KernelSpec& spec, std::size_t direction, std::span<const double> xi,
            std::span<double> out) {
  check_dim(spec, xi);
  if (direction >= spec.dim) {
    throw InputError("eval_g: direction " + std::to_string(direction) + " out of range for d=" +
                     std::to_string(spec.dim));
  }
  std::fill(out.begin(), out.end(), 0.0);
  if (spec.kind == KernelKind::zero) return;
  out[direction] = profile(spec, norm(xi));
}

std::vector<double> eval_g(const KernelSpec& spec, std::size_t direction,
                           std::span<const double> xi) {
  std::vector<double> out(spec.dim);
  eval_g(spec, direction, xi, out);
  return out;
}

namespace {

template <class Eval>
void central_difference(std::size_t d, std::span<const double> xi, std::span<double> jac,
                        Eval&& eval) {
  const double h = 1e-5 * (1.0 + norm(xi));
  std::vector<double> xp(xi.begin(), xi.end()), fp(d), fm(d);
  for (std::size_t j = 0; j < d; ++j) {
    xp[j] = xi[j] + h;
    eval(std::span<const double>(xp), std::span<double>(fp));
    xp[j] = xi[j] - h;
    eval(std::span<const double>(xp), std::span<double>(fm));
    xp[j] = xi[j];
    for (std::size_t i = 0; i < d; ++i) jac[i * d + j] = (fp[i] - fm[i]) / (2.0 * h);
  }
}

}  // namespace

void jacobian_h(const KernelSpec& spec, std::span<const double> xi, std::span<double> jac) {
  check_dim(spec, xi);
  const std::size_t d = spec.dim;
  if (!spec.has_analytic_jacobian()) {
    central_difference(d, xi, jac, [&](auto x, auto out) { eval_h(spec, x, out); });
    return;
  }
  std::fill(jac.begin(), jac.end(), 0.0);
  if (spec.kind == KernelKind::zero) return;
  const double r = norm(xi);
  const double phi = profile(spec, r);
  for (std::size_t i = 0; i < d; ++i) jac[i * d + i] = -phi;
  if (r > 0.0) {
    const double c = profile_slope(spec, r) / r;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) jac[i * d + j] -= c * xi[i] * xi[j];
  }
}

void jacobian_g(const KernelSpec& spec, std::size_t direction, std::span<const double> xi,
                std::span<double> jac) {
  check_dim(spec, xi);
  const std::size_t d = spec.dim;
  if (direction >= d) throw InputError("jacobian_g: direction out of range");
  if (!spec.has_analytic_jacobian()) {
    central_difference(d, xi, jac, [&](auto x, auto out) { eval_g(spec, direction, x, out); });
    return;
  }
  std::fill(jac.begin(), jac.end(), 0.0);
  if (spec.kind == KernelKind::zero) return;
  const double r = norm(xi);
  // The profile is not differentiable at the origin for attraction_repulsion;
  // zero is used there (it is a valid Clarke subgradient element).
  if (r == 0.0) return;
  const double c = profile_slope(spec, r) / r;
  for (std::size_t j = 0; j < d; ++j) jac[direction * d + j] = c * xi[j];
}

KernelSet KernelSet::zero(std::size_t dim) {
  KernelSet k;
  k.h = KernelSpec::zero(dim);
  k.g.assign(dim, KernelSpec::zero(dim));
  return k;
}

bool KernelSet::g_is_zero() const {
  return std::all_of(g.begin(), g.end(), [](const KernelSpec& s) { return s.is_zero(); });
}

void KernelSet::validate() const {
  if (h.dim == 0) throw InputError("kernels: dimension must be positive");
  if (g.size() != h.dim) {
    throw InputError("kernels: expected " + std::to_string(h.dim) + " leader kernels, got " +
                     std::to_string(g.size()));
  }
  for (const auto& s : g)
    if (s.dim != h.dim) throw InputError("kernels: leader kernel dimension mismatch");
  for (const KernelSpec* s : {&h}) {
    if (s->kind == KernelKind::table && !s->table) throw InputError("kernels: table missing");
  }
  for (const auto& s : g)
    if (s.kind == KernelKind::table && !s.table) throw InputError("kernels: table missing");
}

GrowthCertificate certify_growth(const KernelSpec& spec, KernelRole role, double radius,
                                 std::size_t n_samples, std::uint64_t seed) {
  if (!(radius > 0.0)) throw InputError("certify_growth: radius must be positive");
  if (n_samples < 1) throw InputError("certify_growth: n_samples must be >= 1");
  const std::size_t d = spec.dim;
  const std::size_t directions = role == KernelRole::leader ? d : 1;

  auto eval = [&](std::size_t dir, std::span<const double> xi, std::span<double> out) {
    if (role == KernelRole::follower)
      eval_h(spec, xi, out);
    else
      eval_g(spec, dir, xi, out);
  };

  GrowthCertificate cert;
  cert.constant = spec.growth_constant();
  cert.n_samples = n_samples;
  cert.radius = radius;

  auto eng = make_stream(seed, StreamPurpose::kernel_certificate);
  std::vector<double> a(d), b(d), ka(d), kb(d), offset(d);
  for (std::size_t s = 0; s < n_samples; ++s) {
    // The first sample is the origin, where local slopes of radial kernels peak.
    if (s == 0)
      std::fill(a.begin(), a.end(), 0.0);
    else
      uniform_in_ball(eng, radius, a);
    // Partner point at a log-uniform distance in [1e-4, 1] * radius.
    const double h = radius * std::pow(10.0, -4.0 * uniform01(eng));
    uniform_in_ball(eng, 1.0, offset);
    const double on = norm(offset);
    for (std::size_t i = 0; i < d; ++i) b[i] = a[i] + h * offset[i] / (on > 0.0 ? on : 1.0);
    if (norm(b) > radius) b = a;  // stay on the stated ball
    const double gap = distance(a, b);

    for (std::size_t dir = 0; dir < directions; ++dir) {
      eval(dir, a, ka);
      cert.max_ratio = std::max(cert.max_ratio, norm(ka) / (1.0 + norm(a)));
      if (gap > 0.0) {
        eval(dir, b, kb);
        cert.lipschitz_estimate = std::max(cert.lipschitz_estimate, distance(ka, kb) / gap);
      }
    }
  }
  cert.pass = cert.max_ratio <= cert.constant;
  return cert;
}

}  // namespace lf
