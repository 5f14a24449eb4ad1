#pragma once

// Independent oracles shared by the unit tests and the acceptance run.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "lf/binaryctrl.hpp"
#include "lf/optctrl.hpp"

namespace lf::test {

using V = std::vector<double>;

// Instantaneous objective written out directly from the two-agent step with
// the indicator products replaced by their Bernoulli expectations.
inline double objective_oracle(const V& xi, const V& xj, const V& ui, const V& uj, double p,
                               const InstantaneousProblem& prob, const KernelSet& k) {
  const std::size_t d = xi.size();
  const double q = 1 - p, a = prob.dt / 2;
  V dij(d), dji(d);
  for (std::size_t c = 0; c < d; ++c) {
    dij[c] = xi[c] - xj[c];
    dji[c] = xj[c] - xi[c];
  }
  const auto hij = eval_h(k.h, dij), hji = eval_h(k.h, dji);
  double cost = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    double gi = 0.0, gj = 0.0;
    for (std::size_t l = 0; l < d; ++l) {
      gi += eval_g(k.g[l], l, dij)[c] * uj[l];
      gj += eval_g(k.g[l], l, dji)[c] * ui[l];
    }
    const double ni = xi[c] + a * (q * q * hij[c] + p * q * gi + p * ui[c]);
    const double nj = xj[c] + a * (q * q * hji[c] + p * q * gj + p * uj[c]);
    cost += 0.5 * prob.beta * ((prob.target[c] - ni) * (prob.target[c] - ni) +
                               (prob.target[c] - nj) * (prob.target[c] - nj));
    cost += prob.gamma * (ui[c] * ui[c] + uj[c] * uj[c]);
  }
  return cost;
}

// Coarse-to-fine grid search over (u_i, u_j): 21 nodes per coordinate, the
// window shrinks around the best node until the spacing reaches `resolution`.
// Nodes outside the per-agent balls are skipped.
inline V grid_search(const std::function<double(const V&, const V&)>& f, std::size_t d,
                     double half_width, double resolution, double u_max) {
  const std::size_t dims = 2 * d;
  const int nodes = 21;
  V center(dims, 0.0);
  double spacing = 2 * half_width / (nodes - 1);
  for (;;) {
    const bool last = spacing <= resolution;
    if (last) spacing = resolution;
    V best = center, trial(dims);
    double best_value = std::numeric_limits<double>::infinity();
    std::size_t total = 1;
    for (std::size_t k = 0; k < dims; ++k) total *= nodes;
    for (std::size_t idx = 0; idx < total; ++idx) {
      std::size_t r = idx;
      for (std::size_t k = 0; k < dims; ++k) {
        trial[k] = center[k] + (static_cast<double>(r % nodes) - (nodes - 1) / 2.0) * spacing;
        r /= nodes;
      }
      const V ui(trial.begin(), trial.begin() + d), uj(trial.begin() + d, trial.end());
      if (norm(ui) > u_max || norm(uj) > u_max) continue;
      const double v = f(ui, uj);
      if (v < best_value) {
        best_value = v;
        best = trial;
      }
    }
    center = best;
    if (last) return center;
    spacing /= 5;
  }
}

// Constrained search with each agent's control in polar form (r, angle),
// r in [0, u_max], so that the ball boundary is on the grid. d = 2 only.
inline V polar_grid_search(const std::function<double(const V&, const V&)>& f, double u_max,
                           double resolution) {
  const int nodes = 21;
  const double two_pi = 6.283185307179586;
  V center{u_max / 2, 0.0, u_max / 2, 0.0};
  double dr = u_max / (nodes - 1), da = two_pi / (nodes - 1);
  auto to_cart = [](double r, double a) { return V{r * std::cos(a), r * std::sin(a)}; };
  const double da_final = resolution / u_max;
  for (;;) {
    dr = std::max(dr, resolution);
    da = std::max(da, da_final);
    const bool last = dr == resolution && da == da_final;
    V best = center, trial(4);
    double best_value = std::numeric_limits<double>::infinity();
    for (int a = 0; a < nodes * nodes * nodes * nodes; ++a) {
      int r = a;
      for (int k = 0; k < 4; ++k) {
        const double step = k % 2 ? da : dr;
        trial[k] = center[k] + (r % nodes - (nodes - 1) / 2.0) * step;
        r /= nodes;
      }
      if (trial[0] < 0 || trial[0] > u_max || trial[2] < 0 || trial[2] > u_max) continue;
      const double v = f(to_cart(trial[0], trial[1]), to_cart(trial[2], trial[3]));
      if (v < best_value) {
        best_value = v;
        best = trial;
      }
    }
    center = best;
    if (last) {
      const auto ui = to_cart(center[0], center[1]), uj = to_cart(center[2], center[3]);
      return {ui[0], ui[1], uj[0], uj[1]};
    }
    dr /= 5;
    da /= 5;
  }
}

// Central differences of the discrete cost with respect to every control entry.
inline std::vector<double> fd_gradient(const SwarmState& s0, const ControlSignal& u, const CostSpec& cost,
                                       const KernelSet& k, double dt, double h = 1e-6) {
  std::vector<double> out;
  for (std::size_t p = 0; p < u.pieces(); ++p)
    for (std::size_t q = 0; q < u.values()[p].flat().size(); ++q) {
      ControlSignal plus = u, minus = u;
      plus.values()[p].flat()[q] += h;
      minus.values()[p].flat()[q] -= h;
      out.push_back((evaluate_cost(s0, plus, cost, k, dt) - evaluate_cost(s0, minus, cost, k, dt)) /
                    (2 * h));
    }
  return out;
}

}  // namespace lf::test
