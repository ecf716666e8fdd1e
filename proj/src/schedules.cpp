#include "mcalf/schedules.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace mcalf {

GeometricSchedule::GeometricSchedule(double lambda, double p_relax)
    : lambda_(lambda), p_relax_(p_relax) {
    if (!(lambda > 0.0 && lambda < 1.0)) {
        throw ContractError("geometric schedule: lambda must lie in (0,1)");
    }
    if (!(p_relax >= 0.0 && p_relax <= 1.0)) {
        throw ContractError("geometric schedule: p_relax must lie in [0,1]");
    }
}

double GeometricSchedule::accept_prob(std::size_t t, const State&) const { return majorant(t); }

double GeometricSchedule::majorant(std::size_t t) const {
    return std::pow(lambda_, static_cast<double>(t)) * p_relax_;
}

std::optional<double> GeometricSchedule::tail_sum(std::size_t t) const {
    return majorant(t) / (1.0 - lambda_);
}

std::string GeometricSchedule::describe() const {
    std::ostringstream os;
    os.precision(17);
    os << "geometric(lambda=" << lambda_ << ", p_relax=" << p_relax_ << ")";
    return os.str();
}

ConstantSchedule::ConstantSchedule(double value) : value_(value) {
    if (!(value >= 0.0 && value <= 1.0)) {
        throw ContractError("constant schedule: value must lie in [0,1]");
    }
}

double ConstantSchedule::accept_prob(std::size_t, const State&) const { return value_; }
double ConstantSchedule::majorant(std::size_t) const { return value_; }

std::optional<double> ConstantSchedule::tail_sum(std::size_t) const {
    return value_ == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

std::string ConstantSchedule::describe() const {
    std::ostringstream os;
    os.precision(17);
    os << "constant(" << value_ << ")";
    return os.str();
}

GatedSchedule::GatedSchedule(std::shared_ptr<const Schedule> inner,
                             std::shared_ptr<const Critic> base_critic, double v_at_s0)
    : inner_(std::move(inner)), base_critic_(std::move(base_critic)), v_at_s0_(v_at_s0) {
    if (!inner_ || !base_critic_) {
        throw ContractError("gated schedule: inner schedule and base critic are required");
    }
    if (!std::isfinite(v_at_s0)) {
        throw ContractError("gated schedule: gate level must be finite");
    }
}

double GatedSchedule::accept_prob(std::size_t t, const State& s) const {
    if (base_critic_->value(s) < v_at_s0_) return 0.0;
    return inner_->accept_prob(t, s);
}

double GatedSchedule::majorant(std::size_t t) const { return inner_->majorant(t); }

std::optional<double> GatedSchedule::tail_sum(std::size_t t) const { return inner_->tail_sum(t); }

std::string GatedSchedule::describe() const {
    std::ostringstream os;
    os.precision(17);
    os << "gated(" << inner_->describe() << ", v_at_s0=" << v_at_s0_ << ")";
    return os.str();
}

SummabilityResult summability_check(const Schedule& schedule, double tolerance) {
    SummabilityResult result;
    if (!(tolerance > 0.0)) throw ContractError("summability_check: tolerance must be positive");

    const auto total = schedule.tail_sum(0);
    if (!total) {
        result.explanation = schedule.describe() +
                             " declares no closed-form tail bound; summability cannot be certified "
                             "from finitely many terms";
        return result;
    }
    if (!std::isfinite(*total)) {
        result.sum = *total;
        result.explanation = schedule.describe() + " has a divergent majorant series";
        return result;
    }

    // Locate the first horizon whose certified tail is below tolerance. The
    // cap only guards against pathological tail declarations.
    constexpr std::size_t kMaxHorizon = std::size_t{1} << 24;
    std::size_t horizon = 0;
    while (horizon < kMaxHorizon && *schedule.tail_sum(horizon) >= tolerance) ++horizon;
    result.sum = *total;
    result.horizon = horizon;
    result.pass = horizon < kMaxHorizon;
    result.explanation = result.pass ? "closed-form tail below tolerance beyond horizon " +
                                           std::to_string(horizon)
                                     : "tail bound did not fall below tolerance";
    return result;
}

}  // namespace mcalf
