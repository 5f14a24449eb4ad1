#include "lf/measures.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

namespace lf {

namespace {

constexpr double kMassTol = 1e-12;

void require_transportable(const WeightedMeasure& mu, const WeightedMeasure& nu) {
  for (const auto* m : {&mu, &nu}) {
    if (m->kind != MeasureKind::probability) {
      throw DomainError("wasserstein1: W1 is only defined here for probability measures");
    }
    if (m->size() == 0) throw DomainError("wasserstein1: empty measure");
    for (double w : m->weights)
      if (w < 0.0) throw DomainError("wasserstein1: negative weight in a probability measure");
  }
  if (mu.dim() != nu.dim()) throw DomainError("wasserstein1: dimension mismatch");
  const double a = mu.total_mass(), b = nu.total_mass();
  if (std::abs(a - b) > kMassTol * std::max(1.0, std::max(a, b))) {
    throw DomainError(fmt::format("wasserstein1: mass mismatch ({:.17g} vs {:.17g})", a, b));
  }
  if (std::abs(a - 1.0) > kMassTol * static_cast<double>(std::max<std::size_t>(1, mu.size()))) {
    throw DomainError(fmt::format("wasserstein1: total mass {:.17g} is not 1", a));
  }
}

}  // namespace

WeightedMeasure::WeightedMeasure(Points atoms_, std::vector<double> weights_, MeasureKind kind_)
    : atoms(std::move(atoms_)), weights(std::move(weights_)), kind(kind_) {
  if (atoms.size() != weights.size()) {
    throw InputError("measure: atom and weight counts differ");
  }
  if (!all_finite(weights) || !all_finite(atoms.flat())) {
    throw InputError("measure: non-finite atom or weight");
  }
  if (!weights.empty()) validate();
}

double WeightedMeasure::total_mass() const {
  return std::accumulate(weights.begin(), weights.end(), 0.0);
}

bool WeightedMeasure::uniform_weights() const {
  return std::all_of(weights.begin(), weights.end(),
                     [&](double w) { return w == weights.front(); });
}

void WeightedMeasure::validate() const {
  if (weights.empty()) throw InputError("measure: needs at least one atom");
  if (atoms.size() != weights.size()) throw InputError("measure: atom and weight counts differ");
  if (kind == MeasureKind::probability) {
    for (double w : weights)
      if (w < 0.0) throw InputError("measure: negative weight in a probability measure");
    if (std::abs(total_mass() - 1.0) > kMassTol * static_cast<double>(size())) {
      throw InputError("measure: probability weights do not sum to 1");
    }
  }
}

WeightedMeasure empirical_from_followers(const Points& followers) {
  if (followers.size() == 0) throw InputError("empirical measure: no followers");
  const double w = 1.0 / static_cast<double>(followers.size());
  return WeightedMeasure(followers, std::vector<double>(followers.size(), w));
}

WeightedMeasure leader_control_measure(const Points& leaders, const Points& u,
                                       std::size_t direction) {
  if (leaders.size() == 0) throw InputError("leader control measure: no leaders");
  if (u.size() != leaders.size() || u.dim() != leaders.dim()) {
    throw InputError("leader control measure: control shape mismatch");
  }
  if (direction >= leaders.dim()) throw InputError("leader control measure: direction out of range");
  const double inv_m = 1.0 / static_cast<double>(leaders.size());
  std::vector<double> w(leaders.size());
  for (std::size_t k = 0; k < leaders.size(); ++k) w[k] = u[k][direction] * inv_m;
  return WeightedMeasure(leaders, std::move(w), MeasureKind::signed_measure);
}

std::vector<double> convolve_h(const KernelSpec& kernel, const WeightedMeasure& mu,
                               std::span<const double> x) {
  const std::size_t d = kernel.dim;
  if (x.size() != d || mu.dim() != d) throw InputError("convolve: dimension mismatch");
  std::vector<double> out(d, 0.0), xi(d), kv(d);
  for (std::size_t j = 0; j < mu.size(); ++j) {
    const auto a = mu.atoms[j];
    for (std::size_t c = 0; c < d; ++c) xi[c] = x[c] - a[c];
    eval_h(kernel, xi, kv);
    for (std::size_t c = 0; c < d; ++c) out[c] += mu.weights[j] * kv[c];
  }
  return out;
}

std::vector<double> convolve_g(const KernelSpec& kernel, std::size_t direction,
                               const WeightedMeasure& mu, std::span<const double> x) {
  const std::size_t d = kernel.dim;
  if (x.size() != d || mu.dim() != d) throw InputError("convolve: dimension mismatch");
  std::vector<double> out(d, 0.0), xi(d), kv(d);
  for (std::size_t j = 0; j < mu.size(); ++j) {
    const auto a = mu.atoms[j];
    for (std::size_t c = 0; c < d; ++c) xi[c] = x[c] - a[c];
    eval_g(kernel, direction, xi, kv);
    for (std::size_t c = 0; c < d; ++c) out[c] += mu.weights[j] * kv[c];
  }
  return out;
}

double wasserstein1_sorted(const WeightedMeasure& mu, const WeightedMeasure& nu) {
  require_transportable(mu, nu);
  if (mu.dim() != 1) throw DomainError("wasserstein1_sorted: requires d = 1");
  // W1 = integral |F_mu - F_nu| over the merged support.
  std::vector<std::pair<double, double>> events;
  events.reserve(mu.size() + nu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) events.emplace_back(mu.atoms[i][0], mu.weights[i]);
  for (std::size_t j = 0; j < nu.size(); ++j) events.emplace_back(nu.atoms[j][0], -nu.weights[j]);
  std::sort(events.begin(), events.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double cdf_gap = 0.0, total = 0.0;
  for (std::size_t k = 0; k + 1 < events.size(); ++k) {
    cdf_gap += events[k].second;
    total += std::abs(cdf_gap) * (events[k + 1].first - events[k].first);
  }
  return total;
}

std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n) {
  if (cost.size() != n * n) throw InputError("solve_assignment: cost matrix must be n x n");
  // Shortest augmenting paths with row/column potentials, O(n^3).
  // Index 0 is a virtual column; rows and columns are 1-based inside.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> row_pot(n + 1, 0.0), col_pot(n + 1, 0.0);
  std::vector<std::size_t> col_match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    col_match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = col_match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - row_pot[i0] - col_pot[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          row_pot[col_match[j]] += delta;
          col_pot[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (col_match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      col_match[j0] = col_match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[col_match[j] - 1] = j - 1;
  return row_to_col;
}

double wasserstein1_assignment(const WeightedMeasure& mu, const WeightedMeasure& nu) {
  require_transportable(mu, nu);
  if (mu.size() != nu.size() || !mu.uniform_weights() || !nu.uniform_weights()) {
    throw DomainError("wasserstein1_assignment: requires equal sizes and uniform weights");
  }
  const std::size_t n = mu.size();
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = distance(mu.atoms[i], nu.atoms[j]);
  const auto match = solve_assignment(cost, n);
  // Summing the matched costs in sorted order makes W1(mu, nu) == W1(nu, mu) bitwise.
  std::vector<double> matched(n);
  for (std::size_t i = 0; i < n; ++i) matched[i] = cost[i * n + match[i]];
  std::sort(matched.begin(), matched.end());
  double total = 0.0;
  for (double c : matched) total += c;
  return total / static_cast<double>(n);
}

double wasserstein1_flow(const WeightedMeasure& mu, const WeightedMeasure& nu) {
  require_transportable(mu, nu);
  // Successive shortest paths on source -> mu atoms -> nu atoms -> sink.
  // Node layout: 0 = source, 1..n = mu atoms, n+1..n+m = nu atoms, n+m+1 = sink.
  const std::size_t n = mu.size(), m = nu.size();
  const std::size_t source = 0, sink = n + m + 1, nodes = n + m + 2;
  constexpr double eps = 1e-15;
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<double> cost(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) cost[i * m + j] = distance(mu.atoms[i], nu.atoms[j]);
  std::vector<double> supply = mu.weights, demand = nu.weights, flow(n * m, 0.0);
  std::vector<double> pot(nodes, 0.0), dist(nodes);
  std::vector<std::size_t> prev(nodes);
  std::vector<char> done(nodes);

  auto remaining = [&] {
    double s = 0.0;
    for (double x : supply) s += x > eps ? x : 0.0;
    return s;
  };
  // Each pass saturates a supply, a demand or a reverse arc; bounded for safety.
  const std::size_t max_passes = 4 * (n + 1) * (m + 1) + 16;
  for (std::size_t pass = 0; remaining() > eps; ++pass) {
    if (pass > max_passes) throw NumericalError("wasserstein1_flow: no convergence");
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(done.begin(), done.end(), 0);
    dist[source] = 0.0;
    auto relax = [&](std::size_t from, std::size_t to, double c) {
      const double nd = dist[from] + std::max(0.0, c + pot[from] - pot[to]);
      if (nd < dist[to]) {
        dist[to] = nd;
        prev[to] = from;
      }
    };
    for (std::size_t it = 0; it < nodes; ++it) {
      std::size_t u = nodes;
      for (std::size_t v = 0; v < nodes; ++v)
        if (!done[v] && dist[v] < inf && (u == nodes || dist[v] < dist[u])) u = v;
      if (u == nodes) break;
      done[u] = 1;
      if (u == source) {
        for (std::size_t i = 0; i < n; ++i)
          if (supply[i] > eps) relax(source, 1 + i, 0.0);
      } else if (u <= n) {
        const std::size_t i = u - 1;
        for (std::size_t j = 0; j < m; ++j) relax(u, 1 + n + j, cost[i * m + j]);
      } else if (u < sink) {
        const std::size_t j = u - 1 - n;
        for (std::size_t i = 0; i < n; ++i)
          if (flow[i * m + j] > eps) relax(u, 1 + i, -cost[i * m + j]);
        if (demand[j] > eps) relax(u, sink, 0.0);
      }
    }
    if (!(dist[sink] < inf)) throw NumericalError("wasserstein1_flow: sink unreachable");
    for (std::size_t v = 0; v < nodes; ++v)
      if (dist[v] < inf) pot[v] += dist[v];

    // Bottleneck along the path.
    double push = inf;
    for (std::size_t v = sink; v != source; v = prev[v]) {
      const std::size_t u = prev[v];
      if (u == source) push = std::min(push, supply[v - 1]);
      else if (v == sink) push = std::min(push, demand[u - 1 - n]);
      else if (u > n) push = std::min(push, flow[(v - 1) * m + (u - 1 - n)]);
    }
    for (std::size_t v = sink; v != source; v = prev[v]) {
      const std::size_t u = prev[v];
      if (u == source) supply[v - 1] -= push;
      else if (v == sink) demand[u - 1 - n] -= push;
      else if (u <= n) flow[(u - 1) * m + (v - 1 - n)] += push;
      else flow[(v - 1) * m + (u - 1 - n)] -= push;
    }
  }
  double total = 0.0;
  for (std::size_t k = 0; k < n * m; ++k) total += flow[k] * cost[k];
  return total;
}

double wasserstein1(const WeightedMeasure& mu, const WeightedMeasure& nu) {
  require_transportable(mu, nu);
  if (mu.dim() == 1) return wasserstein1_sorted(mu, nu);
  if (mu.size() == nu.size() && mu.uniform_weights() && nu.uniform_weights()) {
    return wasserstein1_assignment(mu, nu);
  }
  return wasserstein1_flow(mu, nu);
}

double chi_distance(const Points& leaders_a, const WeightedMeasure& mu_a,
                    const Points& leaders_b, const WeightedMeasure& mu_b) {
  if (leaders_a.size() != leaders_b.size()) throw InputError("chi_distance: leader counts differ");
  double lead = 0.0;
  if (leaders_a.size() > 0) {
    for (std::size_t k = 0; k < leaders_a.size(); ++k)
      lead += distance(leaders_a[k], leaders_b[k]);
    lead /= static_cast<double>(leaders_a.size());
  }
  return lead + wasserstein1(mu_a, mu_b);
}

double support_radius(const WeightedMeasure& mu) {
  double r = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) r = std::max(r, norm(mu.atoms[j]));
  return r;
}

void write_measure_csv(std::ostream& os, const WeightedMeasure& mu) {
  os << "w";
  for (std::size_t c = 0; c < mu.dim(); ++c) os << ",x_" << c + 1;
  os << '\n';
  for (std::size_t j = 0; j < mu.size(); ++j) {
    os << fmt::format("{:.17g}", mu.weights[j]);
    for (double v : mu.atoms[j]) os << fmt::format(",{:.17g}", v);
    os << '\n';
  }
}

WeightedMeasure read_measure_csv(std::istream& is, MeasureKind kind) {
  std::string line;
  if (!std::getline(is, line)) throw InputError("measure csv: empty input");
  const std::size_t d = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  if (d == 0) throw InputError("measure csv: header must be w,x_1..x_d");
  std::vector<double> flat, weights;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(row, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw InputError("measure csv line " + std::to_string(lineno) + ": bad number");
      }
    }
    if (vals.size() != d + 1) {
      throw InputError("measure csv line " + std::to_string(lineno) + ": expected " +
                       std::to_string(d + 1) + " columns");
    }
    weights.push_back(vals[0]);
    flat.insert(flat.end(), vals.begin() + 1, vals.end());
  }
  WeightedMeasure mu(Points(d, std::move(flat)), std::move(weights), kind);
  mu.validate();
  return mu;
}

}  // namespace lf
