#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mcalf/mdp.hpp"
#include "mcalf/types.hpp"

namespace mcalf {

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

// a(s) = gain * s, componentwise. Deterministic.
class LinearPolicy final : public StationaryPolicy {
public:
    explicit LinearPolicy(double gain) : gain_(gain) {}
    Action sample(const State& s, Rng& rng) const override;
    std::optional<double> density(const Action& a, const State& s) const override;
    std::string name() const override;
    double gain() const noexcept { return gain_; }

private:
    double gain_;
};

// a(s) = action for every s. On the scalar environment, where S' = a + W, this
// parks the state at the chosen point.
class ConstantPolicy final : public StationaryPolicy {
public:
    explicit ConstantPolicy(Action action) : action_(std::move(action)) {}
    Action sample(const State& s, Rng& rng) const override;
    std::string name() const override;

private:
    Action action_;
};

// a(s) = -(k . s). Scalar action from a vector state.
class LinearFeedbackPolicy final : public StationaryPolicy {
public:
    explicit LinearFeedbackPolicy(std::vector<double> gains);
    Action sample(const State& s, Rng& rng) const override;
    std::string name() const override;

private:
    std::vector<double> gains_;
};

// Finite-state policy with an explicit action distribution per state.
class TabularPolicy final : public StationaryPolicy {
public:
    // probabilities[s][a]; every row must sum to 1.
    explicit TabularPolicy(std::vector<std::vector<double>> probabilities);
    static TabularPolicy deterministic(const std::vector<std::size_t>& actions,
                                       std::size_t n_actions);

    Action sample(const State& s, Rng& rng) const override;
    std::optional<double> density(const Action& a, const State& s) const override;
    std::string name() const override;

    std::size_t n_states() const noexcept { return probabilities_.size(); }
    std::size_t n_actions() const noexcept { return probabilities_.front().size(); }
    double prob(std::size_t s, std::size_t a) const { return probabilities_[s][a]; }

private:
    std::size_t index_of(const State& s) const;
    std::vector<std::vector<double>> probabilities_;
};

// ---------------------------------------------------------------------------
// Critics
// ---------------------------------------------------------------------------

class ConstantCritic final : public Critic {
public:
    explicit ConstantCritic(double value) : value_(value) {}
    double value(const State&) const override { return value_; }
    std::optional<double> lipschitz() const override { return 0.0; }
    std::string name() const override;

private:
    double value_;
};

// V(s) = exp(-||s - center||^2 / scale^2). Continuous, range (0, 1], every
// superlevel set {V >= a}, a in (0, 1], is the closed ball of radius
// scale * sqrt(-ln a).
class GaussianBumpCritic final : public Critic {
public:
    GaussianBumpCritic(State center, double scale);
    double value(const State& s) const override;
    // sup |dV/dr| = sqrt(2) e^{-1/2} / scale, attained at r = scale / sqrt(2).
    std::optional<double> lipschitz() const override;
    std::string name() const override;

    double superlevel_radius(double level) const;
    const State& center() const noexcept { return center_; }
    double scale() const noexcept { return scale_; }

private:
    State center_;
    double scale_;
};

// Value vector over integer-embedded chain states.
class TabularCritic final : public Critic {
public:
    explicit TabularCritic(std::vector<double> values, std::string label = "tabular");
    double value(const State& s) const override;
    std::string name() const override { return label_; }
    const std::vector<double>& values() const noexcept { return values_; }

private:
    std::vector<double> values_;
    std::string label_;
};

// Adapter for ad-hoc critics in tests and bindings.
class FunctionCritic final : public Critic {
public:
    FunctionCritic(std::function<double(const State&)> fn, std::string label,
                   std::optional<double> lipschitz = std::nullopt)
        : fn_(std::move(fn)), label_(std::move(label)), lipschitz_(lipschitz) {}
    double value(const State& s) const override { return fn_(s); }
    std::optional<double> lipschitz() const override { return lipschitz_; }
    std::string name() const override { return label_; }

private:
    std::function<double(const State&)> fn_;
    std::string label_;
    std::optional<double> lipschitz_;
};

std::shared_ptr<const GaussianBumpCritic> make_gaussian_bump_critic(State center, double scale);

// Exact policy evaluation: solves (I - gamma P_pi) V = r_pi by LU.
std::shared_ptr<const TabularCritic> make_tabular_critic(const FiniteChainEnv& env,
                                                         const TabularPolicy& policy,
                                                         double gamma);

// ---------------------------------------------------------------------------
// Class-K-infinity functions and KL certificates
// ---------------------------------------------------------------------------

// Continuous, strictly increasing, zero at zero, unbounded. The closed-form
// inverse is optional; without it, inversion falls back to bisection.
struct ClassKInf {
    std::function<double(double)> fn;
    std::function<double(double)> inverse;  // may be empty
    std::string label;

    double operator()(double x) const { return fn(x); }

    // x -> scale * x
    static ClassKInf linear(double scale = 1.0);
    // x -> scale * x^exponent
    static ClassKInf power(double exponent, double scale = 1.0);
};

// beta(d, t) = kappa(d) * xi(exp(-t)), holding with probability >= 1 - eps.
struct KLCertificate {
    ClassKInf kappa;
    ClassKInf xi;
    double eps = 0.0;
};

double beta(const KLCertificate& certificate, double d, double t);

struct CertifiedPolicy {
    std::shared_ptr<const StationaryPolicy> policy;
    KLCertificate certificate;
};

// a(s) = c s on the contractive scalar environment. With g > w_max / (1 - c),
// goal_dist contracts by c each step surely, so beta(d, t) = d c^t with
// kappa(d) = d, xi(r) = r^{ln(1/c)} and eps = 0.
CertifiedPolicy make_scalar_certified_policy(double c, const ContractiveScalarEnv& env);

// True iff g > w_max / (1 - c), the admissibility condition above.
bool scalar_certificate_admissible(double c, double w_max, double goal_radius);

}  // namespace mcalf
