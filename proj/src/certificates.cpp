#include "mcalf/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mcalf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Neumaier's compensated summation.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

void check_box(const BoxRegion& box) {
    if (box.lo.empty() || box.lo.size() != box.hi.size()) {
        throw ContractError("grid: malformed box region");
    }
    for (std::size_t i = 0; i < box.lo.size(); ++i) {
        if (!std::isfinite(box.lo[i]) || !std::isfinite(box.hi[i])) {
            throw ContractError("grid: region is unbounded; the extremum may not exist");
        }
    }
}

// Half-diagonal (Euclidean) of one grid cell.
double cell_radius(const BoxRegion& box, std::size_t resolution) {
    double acc = 0.0;
    for (std::size_t i = 0; i < box.lo.size(); ++i) {
        const double h = (box.hi[i] - box.lo[i]) / static_cast<double>(resolution - 1);
        acc += 0.25 * h * h;
    }
    return std::sqrt(acc);
}

template <typename Fn>
void for_each_grid_point(const BoxRegion& box, std::size_t resolution, Fn&& fn) {
    check_box(box);
    if (resolution < 2) throw ContractError("grid: resolution must be >= 2");
    const std::size_t dim = box.lo.size();
    std::vector<std::size_t> idx(dim, 0);
    State point(dim);
    while (true) {
        for (std::size_t i = 0; i < dim; ++i) {
            // Endpoints are hit exactly.
            point[i] = idx[i] + 1 == resolution
                           ? box.hi[i]
                           : box.lo[i] + (box.hi[i] - box.lo[i]) * static_cast<double>(idx[i]) /
                                             static_cast<double>(resolution - 1);
        }
        fn(point, idx);
        std::size_t axis = 0;
        while (axis < dim && ++idx[axis] == resolution) idx[axis++] = 0;
        if (axis == dim) break;
    }
}

std::vector<State> region_points(const Region& region, std::size_t resolution) {
    if (const auto* finite = std::get_if<FiniteRegion>(&region)) return *finite;
    return box_grid(std::get<BoxRegion>(region), resolution);
}

}  // namespace

std::vector<State> box_grid(const BoxRegion& box, std::size_t resolution) {
    std::vector<State> out;
    for_each_grid_point(box, resolution,
                        [&](const State& p, const std::vector<std::size_t>&) { out.push_back(p); });
    return out;
}

Extremum compute_v_min(const Critic& base_critic, const Mdp& env, double d_circ,
                       std::size_t resolution) {
    if (!(d_circ >= 0.0) || !std::isfinite(d_circ)) {
        throw ContractError("v_min: d_circ must be finite and non-negative");
    }
    const Region region = env.goal_neighborhood(d_circ);
    Extremum out{kInf, 0.0, 0};
    auto visit = [&](const State& s) {
        if (env.goal_dist(s) > d_circ) return;
        out.value = std::min(out.value, base_critic.value(s));
        ++out.evaluations;
    };
    if (const auto* finite = std::get_if<FiniteRegion>(&region)) {
        for (const auto& s : *finite) visit(s);
    } else {
        const auto& box = std::get<BoxRegion>(region);
        for_each_grid_point(box, resolution,
                            [&](const State& s, const std::vector<std::size_t>&) { visit(s); });
        const auto lip = base_critic.lipschitz();
        out.error_bound = lip ? *lip * cell_radius(box, resolution) : kInf;
    }
    if (out.evaluations == 0) throw ContractError("v_min: empty goal neighborhood");
    return out;
}

Extremum compute_d_pbar(const Mdp& env, const Critic& base_critic, double v_min,
                        std::size_t resolution) {
    if (!std::isfinite(v_min)) throw ContractError("d_pbar: v_min must be finite");
    const std::vector<State> actions = region_points(env.action_set(), resolution);

    Extremum out{-kInf, 0.0, 0};
    auto sup_over_actions = [&](const State& s) {
        for (const auto& a : actions) {
            out.value = std::max(out.value, env.envelope(s, a));
            ++out.evaluations;
        }
    };

    const Region probe = env.state_search_region(1.0);
    if (const auto* finite = std::get_if<FiniteRegion>(&probe)) {
        for (const auto& s : *finite) {
            if (base_critic.value(s) >= v_min) sup_over_actions(s);
        }
        if (out.evaluations == 0) throw ContractError("d_pbar: empty superlevel set");
        return out;
    }

    constexpr int kMaxDoublings = 48;
    double half_width = 1.0;
    for (int attempt = 0; attempt <= kMaxDoublings; ++attempt, half_width *= 2.0) {
        const auto box = std::get<BoxRegion>(env.state_search_region(half_width));
        std::vector<State> members;
        bool touches_boundary = false;
        for_each_grid_point(box, resolution, [&](const State& s, const std::vector<std::size_t>& idx) {
            if (base_critic.value(s) < v_min) return;
            members.push_back(s);
            for (std::size_t i : idx) {
                if (i == 0 || i + 1 == resolution) touches_boundary = true;
            }
        });
        if (members.empty() || touches_boundary) continue;

        for (const auto& s : members) sup_over_actions(s);
        const auto lip = env.envelope_lipschitz();
        if (!lip) {
            out.error_bound = kInf;
        } else {
            const double r_state = cell_radius(box, resolution);
            double r_action = 0.0;
            const Region action_region = env.action_set();
            if (const auto* abox = std::get_if<BoxRegion>(&action_region)) {
                r_action = cell_radius(*abox, resolution);
            }
            out.error_bound = lip->first * r_state + lip->second * r_action;
        }
        return out;
    }
    throw ContractError(
        "d_pbar: superlevel set of the base critic appears unbounded (grid expansion did not "
        "terminate); the base critic must be continuous with bounded superlevel sets");
}

double invert(const ClassKInf& fn, double y, double tolerance) {
    if (!(y >= 0.0) || !std::isfinite(y)) throw ContractError("invert: argument must be finite and >= 0");
    if (y == 0.0) return 0.0;
    if (fn.inverse) return fn.inverse(y);
    double lo = 0.0;
    double hi = 1.0;
    int expansions = 0;
    while (fn(hi) < y) {
        lo = hi;
        hi *= 2.0;
        if (++expansions > 1100 || !std::isfinite(hi)) {
            throw ContractError("invert: value " + std::to_string(y) + " lies outside the range of " +
                                fn.label);
        }
    }
    while (hi - lo > tolerance * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (fn(mid) < y ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

std::size_t compute_tau_f(const KLCertificate& certificate, double d_max, double d_star) {
    if (!(d_star > 0.0) || !(d_max > 0.0)) {
        throw ContractError("tau_f: d_star and d_max must be positive");
    }
    const double scale = certificate.kappa(d_max);
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ContractError("tau_f: kappa(d_max) must be positive");
    const double r = invert(certificate.xi, d_star / scale);
    if (!(r > 0.0)) throw ContractError("tau_f: xi^{-1}(d_star / kappa(d_max)) must be positive");
    const double steps = -std::log(r);
    const double slack = 1e-9 * std::max(1.0, std::abs(steps));
    const double rounded = std::ceil(steps - slack);
    return rounded < 1.0 ? 1 : static_cast<std::size_t>(rounded);
}

TailProduct tail_product_detailed(const Schedule& schedule, std::size_t t) {
    if (!schedule.tail_sum(t)) {
        throw ContractError("tail_product: " + schedule.describe() + " declares no tail bound");
    }
    constexpr double kLogTolerance = 1e-15;
    constexpr std::size_t kMaxTerms = std::size_t{1} << 26;

    TailProduct out;
    CompensatedSum log_sum;
    for (std::size_t k = t;; ++k) {
        const double rho = schedule.majorant(k);
        if (rho >= 1.0) {
            out = TailProduct{0.0, -kInf, 0.0, k - t + 1};
            return out;
        }
        log_sum.add(std::log1p(-rho));
        const double rest = *schedule.tail_sum(k + 1);
        // -sum_{j>k} log(1 - rho_j) <= sum rho_j / (1 - rho_j) <= rest / (1 - rest).
        const double bound = rest < 1.0 ? rest / (1.0 - rest) : kInf;
        if (bound < kLogTolerance) {
            out.log_value = log_sum.value();
            out.value = std::exp(out.log_value);
            out.truncation_bound = bound;
            out.terms = k - t + 1;
            return out;
        }
        if (k - t + 1 >= kMaxTerms) {
            throw ContractError("tail_product: tail bound did not converge for " + schedule.describe());
        }
    }
}

double tail_product(const Schedule& schedule, std::size_t t) {
    return tail_product_detailed(schedule, t).value;
}

double corollary_lower_bound(double lambda, double p_relax, std::size_t t) {
    if (!(lambda > 0.0 && lambda < 1.0)) throw ContractError("corollary bound: lambda in (0,1)");
    if (!(p_relax >= 0.0 && p_relax <= 1.0)) throw ContractError("corollary bound: p_relax in [0,1]");
    if (t < 1) throw ContractError("corollary bound: t must be >= 1");
    const double head = std::pow(lambda, static_cast<double>(t)) * p_relax;
    if (head >= 1.0) throw ContractError("corollary bound: lambda^t p_relax must be < 1");
    return std::exp(-head / ((1.0 - lambda) * (1.0 - head)));
}

double overshoot_bound(const KLCertificate& certificate, const SpatialBounds& quantities) {
    return beta(certificate, quantities.d_max, 0.0);
}

SpatialBounds compute_spatial_bounds(const Mdp& env, const Critic& base_critic,
                                             const KLCertificate& certificate, double d_circ,
                                             double d_star, std::size_t state_resolution,
                                             std::size_t pbar_resolution) {
    SpatialBounds q;
    q.d_circ = d_circ;
    q.d_star = d_star;
    const Extremum vmin = compute_v_min(base_critic, env, d_circ, state_resolution);
    q.v_min = vmin.value;
    q.v_min_error = vmin.error_bound;
    const Extremum pbar = compute_d_pbar(env, base_critic, q.v_min, pbar_resolution);
    q.d_pbar = pbar.value;
    q.d_pbar_error = pbar.error_bound;
    q.d_max = std::max(d_circ, q.d_pbar);
    q.delta = overshoot_bound(certificate, q);
    q.tau_f = compute_tau_f(certificate, q.d_max, d_star);
    return q;
}

}  // namespace mcalf
