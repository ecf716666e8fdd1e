#pragma once

#include <cstddef>
#include <string>

#include "mcalf/mdp.hpp"
#include "mcalf/policies.hpp"
#include "mcalf/schedules.hpp"

namespace mcalf {

// Result of a grid extremization. The true extremum lies within error_bound of
// value, on the side stated by the producing function.
struct Extremum {
    double value = 0.0;
    double error_bound = 0.0;
    std::size_t evaluations = 0;
};

// v_min(d) = min { V_base(s) : goal_dist(s) <= d }, minimized over a
// deterministic grid with `resolution` points per axis (endpoints included).
// The true minimum is >= value - error_bound, where error_bound is the critic's
// Lipschitz constant times the grid half-diagonal (0 on finite environments;
// +inf if the critic declares no Lipschitz constant).
Extremum compute_v_min(const Critic& base_critic, const Mdp& env, double d_circ,
                       std::size_t resolution = 2001);

// d_pbar = sup { pbar(s, a) : V_base(s) >= v_min, a in A }. The superlevel set
// is located by doubling a search box until it no longer touches the box
// boundary; failure to do so within the expansion budget is reported as an
// unbounded superlevel set. On grid-resolved sets the true supremum is
// <= value + error_bound, with error_bound = L_s r_s + L_a r_a from the
// envelope's Lipschitz constants and the state/action grid half-diagonals.
Extremum compute_d_pbar(const Mdp& env, const Critic& base_critic, double v_min,
                        std::size_t resolution = 401);

// Inverse of a class-K-infinity function: closed form when registered,
// otherwise bisection to `tolerance` after expanding the bracket.
double invert(const ClassKInf& fn, double y, double tolerance = 1e-12);

// tau_f = max{1, ceil(-ln(xi^{-1}(d_star / kappa(d_max))))}. The ceiling
// absorbs a relative slack of 1e-9 so that exact integers are not bumped up by
// rounding in the inverse.
std::size_t compute_tau_f(const KLCertificate& certificate, double d_max, double d_star);

struct TailProduct {
    double value = 1.0;
    double log_value = 0.0;
    // The infinite product lies in [value * exp(-truncation_bound), value].
    double truncation_bound = 0.0;
    std::size_t terms = 0;
};

// prod_{k >= t} (1 - rho_bar_k), summed in log space with compensated
// summation and truncated once the closed-form tail bound makes the remaining
// factors contribute less than 1e-15 in log space.
TailProduct tail_product_detailed(const Schedule& schedule, std::size_t t);
double tail_product(const Schedule& schedule, std::size_t t);

// exp(-lambda^t p / ((1 - lambda)(1 - lambda^t p))), a lower bound on the
// geometric tail product for t >= 1.
double corollary_lower_bound(double lambda, double p_relax, std::size_t t);

struct SpatialBounds {
    double d_circ = 0.0;
    double v_min = 0.0;
    double v_min_error = 0.0;
    double d_pbar = 0.0;
    double d_pbar_error = 0.0;
    double d_max = 0.0;
    double delta = 0.0;
    double d_star = 0.0;
    std::size_t tau_f = 1;
};

// delta = beta(d_max, 0) = kappa(d_max) xi(1).
double overshoot_bound(const KLCertificate& certificate, const SpatialBounds& quantities);

// Full spatial-bound pipeline: v_min, d_pbar, d_max = max(d_circ, d_pbar),
// delta and tau_f.
SpatialBounds compute_spatial_bounds(const Mdp& env, const Critic& base_critic,
                                             const KLCertificate& certificate, double d_circ,
                                             double d_star, std::size_t state_resolution = 2001,
                                             std::size_t pbar_resolution = 401);

// Grid over a box with `resolution` points per axis, endpoints included.
std::vector<State> box_grid(const BoxRegion& box, std::size_t resolution);

}  // namespace mcalf
