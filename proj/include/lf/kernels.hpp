#pragma once

// Interaction kernels for the leader/follower system.
//
// Every kernel is radial: it is described by a scalar profile phi(r), r = |xi|,
// and used in one of two forms:
//
//   follower-follower form  H(xi)    = -xi * phi(|xi|)
//   leader-follower form    G^l(xi)  =  e_l * phi(|xi|)
//
// Catalog profiles (a = params[0], default 1):
//
//   zero                  phi = 0
//   constant              phi = a                 (H(xi) = -a xi, G^l = a e_l)
//   attraction_repulsion  phi = a / (1 + r)
//   stokes_like           phi = a / (1 + r^2)
//   table                 piecewise-linear in r, clamped outside the grid
//
// All catalog entries satisfy |K(xi)| <= C (1 + |xi|) with C = |a| (or
// max |value| for tables), H is odd and G^l is even.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lf/common.hpp"

namespace lf {

enum class KernelKind { zero, constant, attraction_repulsion, stokes_like, table };

/// Which form a kernel is used in (see the header comment).
enum class KernelRole { follower, leader };

/// Radial profile sampled on an increasing grid of radii.
struct RadialTable {
  std::vector<double> radius;
  std::vector<double> value;

  double operator()(double r) const;
  /// Slope of the interpolant at r (zero outside the grid).
  double slope(double r) const;

  /// Two whitespace-separated columns (radius value); '#' starts a comment.
  static RadialTable load(const std::filesystem::path& path);
  static RadialTable parse(std::string_view text);
};

struct KernelSpec {
  KernelKind kind = KernelKind::zero;
  std::vector<double> params;
  std::size_t dim = 1;
  std::shared_ptr<const RadialTable> table;

  static KernelSpec zero(std::size_t dim) { return {KernelKind::zero, {}, dim, nullptr}; }
  static KernelSpec constant(std::size_t dim, double a = 1.0) {
    return {KernelKind::constant, {a}, dim, nullptr};
  }
  static KernelSpec attraction_repulsion(std::size_t dim, double a = 1.0) {
    return {KernelKind::attraction_repulsion, {a}, dim, nullptr};
  }
  static KernelSpec stokes_like(std::size_t dim, double a = 1.0) {
    return {KernelKind::stokes_like, {a}, dim, nullptr};
  }
  static KernelSpec from_table(std::size_t dim, RadialTable t) {
    return {KernelKind::table, {}, dim, std::make_shared<const RadialTable>(std::move(t))};
  }

  bool is_zero() const;
  /// Growth constant C with |K(xi)| <= C (1 + |xi|) in either role.
  double growth_constant() const;
  /// True when an analytic Jacobian is available (all catalog kinds but table).
  bool has_analytic_jacobian() const { return kind != KernelKind::table; }
};

std::string_view to_string(KernelKind kind);
std::optional<KernelKind> parse_kernel_kind(std::string_view name);

double profile(const KernelSpec& spec, double r);
/// phi'(r); analytic for catalog kinds, interpolant slope for tables.
double profile_slope(const KernelSpec& spec, double r);

/// H(xi) written into out.
void eval_h(const KernelSpec& spec, std::span<const double> xi, std::span<double> out);
std::vector<double> eval_h(const KernelSpec& spec, std::span<const double> xi);

/// G^l(xi) written into out; `direction` is zero-based (0 <= direction < dim).
void eval_g(const KernelSpec& spec, std::size_t direction, std::span<const double> xi,
            std::span<double> out);
std::vector<double> eval_g(const KernelSpec& spec, std::size_t direction,
                           std::span<const double> xi);

/// Jacobian dH/dxi, row-major d x d. Analytic where available, otherwise
/// central differences with step 1e-5 (1 + |xi|).
void jacobian_h(const KernelSpec& spec, std::span<const double> xi, std::span<double> jac);
/// Jacobian dG^l/dxi, row-major d x d.
void jacobian_g(const KernelSpec& spec, std::size_t direction, std::span<const double> xi,
                std::span<double> jac);

/// H together with the d leader kernels G^1..G^d.
struct KernelSet {
  KernelSpec h;
  std::vector<KernelSpec> g;

  static KernelSet zero(std::size_t dim);
  std::size_t dim() const { return h.dim; }
  bool g_is_zero() const;
  /// Throws InputError on inconsistent dimensions.
  void validate() const;
};

struct GrowthCertificate {
  double constant = 0.0;     // claimed C
  std::size_t n_samples = 0;
  double max_ratio = 0.0;    // max |K(xi)| / (1 + |xi|) over samples
  double lipschitz_estimate = 0.0;
  double radius = 0.0;
  bool pass = false;         // max_ratio <= constant
};

/// Samples xi uniformly in B(0, radius) and records growth and Lipschitz
/// statistics. Deterministic for a fixed seed. For the leader role the
/// statistics are maximised over all directions.
GrowthCertificate certify_growth(const KernelSpec& spec, KernelRole role, double radius,
                                 std::size_t n_samples, std::uint64_t seed);

}  // namespace lf
