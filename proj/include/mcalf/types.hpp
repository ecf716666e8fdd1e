#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcalf/rng.hpp"

namespace mcalf {

// States and actions are points of R^n. Finite environments embed their
// discrete states and actions at integer coordinates.
using State = std::vector<double>;
using Action = std::vector<double>;

enum class Norm { Sup, Euclidean };

double norm(std::span<const double> x, Norm kind);
double distance(std::span<const double> x, std::span<const double> y, Norm kind);
const char* to_string(Norm kind);

// Raised when an operation is called with arguments outside its contract.
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Raised by a rollout that cannot continue; carries the failing step.
class RolloutError : public std::runtime_error {
public:
    RolloutError(std::size_t step, const std::string& what)
        : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class StationaryPolicy {
public:
    virtual ~StationaryPolicy() = default;
    virtual Action sample(const State& s, Rng& rng) const = 0;
    // Density (or mass, for finite action sets) of a at s, when available.
    virtual std::optional<double> density(const Action& /*a*/, const State& /*s*/) const {
        return std::nullopt;
    }
    virtual std::string name() const = 0;
};

class Critic {
public:
    virtual ~Critic() = default;
    virtual double value(const State& s) const = 0;
    // Global Lipschitz constant with respect to the Euclidean state norm, when
    // known. Used to bound grid-extremization error.
    virtual std::optional<double> lipschitz() const { return std::nullopt; }
    virtual std::string name() const = 0;
};

}  // namespace mcalf
