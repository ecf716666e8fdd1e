#pragma once

#include <memory>
#include <optional>
#include <string>

#include "mcalf/types.hpp"

namespace mcalf {

// Acceptance-probability schedule rho_t(s) with a state-independent majorant
// rho_bar_t >= sup_s rho_t(s). Implementations are pure functions of (t, s).
class Schedule {
public:
    virtual ~Schedule() = default;
    virtual double accept_prob(std::size_t t, const State& s) const = 0;
    virtual double majorant(std::size_t t) const = 0;
    // Closed-form sum_{k >= t} rho_bar_k, when the family admits one. An
    // infinite value declares a divergent series.
    virtual std::optional<double> tail_sum(std::size_t /*t*/) const { return std::nullopt; }
    virtual std::string describe() const = 0;
};

class GeometricSchedule final : public Schedule {
public:
    GeometricSchedule(double lambda, double p_relax);

    double accept_prob(std::size_t t, const State& s) const override;
    double majorant(std::size_t t) const override;
    std::optional<double> tail_sum(std::size_t t) const override;
    std::string describe() const override;

    double lambda() const noexcept { return lambda_; }
    double p_relax() const noexcept { return p_relax_; }

private:
    double lambda_;
    double p_relax_;
};

// rho_bar_t = value for all t. Summable only when value is zero.
class ConstantSchedule final : public Schedule {
public:
    explicit ConstantSchedule(double value);

    double accept_prob(std::size_t t, const State& s) const override;
    double majorant(std::size_t t) const override;
    std::optional<double> tail_sum(std::size_t t) const override;
    std::string describe() const override;

private:
    double value_;
};

// Closes the inner schedule on states whose base-critic value falls below the
// value at the rollout's initial state.
class GatedSchedule final : public Schedule {
public:
    GatedSchedule(std::shared_ptr<const Schedule> inner, std::shared_ptr<const Critic> base_critic,
                  double v_at_s0);

    double accept_prob(std::size_t t, const State& s) const override;
    double majorant(std::size_t t) const override;
    std::optional<double> tail_sum(std::size_t t) const override;
    std::string describe() const override;

    double v_at_s0() const noexcept { return v_at_s0_; }
    const Schedule& inner() const noexcept { return *inner_; }

private:
    std::shared_ptr<const Schedule> inner_;
    std::shared_ptr<const Critic> base_critic_;
    double v_at_s0_;
};

struct SummabilityResult {
    double sum = 0.0;
    bool pass = false;
    std::size_t horizon = 0;  // partial-sum horizon at which the tail dropped below tolerance
    std::string explanation;
};

// Certifies sum_t rho_bar_t < infinity from the schedule's closed-form tail.
// Schedules without a declared tail bound fail: a finite numeric sum alone
// cannot certify an infinite series.
SummabilityResult summability_check(const Schedule& schedule, double tolerance);

}  // namespace mcalf
