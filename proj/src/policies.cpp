#include "mcalf/policies.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

namespace mcalf {

namespace {

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

Action LinearPolicy::sample(const State& s, Rng&) const {
    Action a(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) a[i] = gain_ * s[i];
    return a;
}

std::optional<double> LinearPolicy::density(const Action& a, const State& s) const {
    Rng unused(0);
    return a == sample(s, unused) ? 1.0 : 0.0;
}

std::string LinearPolicy::name() const { return "linear(gain=" + fmt_double(gain_) + ")"; }

Action ConstantPolicy::sample(const State&, Rng&) const { return action_; }

std::string ConstantPolicy::name() const {
    std::string out = "constant(";
    for (std::size_t i = 0; i < action_.size(); ++i) out += (i ? "," : "") + fmt_double(action_[i]);
    return out + ")";
}

LinearFeedbackPolicy::LinearFeedbackPolicy(std::vector<double> gains) : gains_(std::move(gains)) {
    if (gains_.empty()) throw ContractError("linear feedback policy: gains must be non-empty");
}

Action LinearFeedbackPolicy::sample(const State& s, Rng&) const {
    if (s.size() != gains_.size()) throw ContractError("linear feedback policy: dimension mismatch");
    double u = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) u -= gains_[i] * s[i];
    return {u};
}

std::string LinearFeedbackPolicy::name() const {
    std::string out = "linear_feedback(";
    for (std::size_t i = 0; i < gains_.size(); ++i) out += (i ? "," : "") + fmt_double(gains_[i]);
    return out + ")";
}

TabularPolicy::TabularPolicy(std::vector<std::vector<double>> probabilities)
    : probabilities_(std::move(probabilities)) {
    if (probabilities_.empty() || probabilities_.front().empty()) {
        throw ContractError("tabular policy: empty probability table");
    }
    const std::size_t n_actions = probabilities_.front().size();
    for (const auto& row : probabilities_) {
        if (row.size() != n_actions) throw ContractError("tabular policy: ragged probability table");
        for (double p : row) {
            if (!(p >= 0.0 && p <= 1.0)) throw ContractError("tabular policy: probability outside [0,1]");
        }
        const double total = std::accumulate(row.begin(), row.end(), 0.0);
        if (std::abs(total - 1.0) > 1e-12) throw ContractError("tabular policy: row does not sum to 1");
    }
}

TabularPolicy TabularPolicy::deterministic(const std::vector<std::size_t>& actions,
                                           std::size_t n_actions) {
    std::vector<std::vector<double>> table(actions.size(), std::vector<double>(n_actions, 0.0));
    for (std::size_t s = 0; s < actions.size(); ++s) {
        if (actions[s] >= n_actions) throw ContractError("tabular policy: action index out of range");
        table[s][actions[s]] = 1.0;
    }
    return TabularPolicy(std::move(table));
}

std::size_t TabularPolicy::index_of(const State& s) const {
    if (s.size() != 1) throw ContractError("tabular policy: states are one-dimensional");
    const double r = std::round(s[0]);
    if (!(r >= 0.0 && r < static_cast<double>(probabilities_.size()) && r == s[0])) {
        throw ContractError("tabular policy: state outside the table");
    }
    return static_cast<std::size_t>(r);
}

Action TabularPolicy::sample(const State& s, Rng& rng) const {
    const auto& row = probabilities_[index_of(s)];
    // Deterministic rows consume no randomness.
    for (std::size_t a = 0; a < row.size(); ++a) {
        if (row[a] == 1.0) return {static_cast<double>(a)};
    }
    return {static_cast<double>(rng.categorical(row))};
}

std::optional<double> TabularPolicy::density(const Action& a, const State& s) const {
    const auto& row = probabilities_[index_of(s)];
    if (a.size() != 1) return 0.0;
    const double r = std::round(a[0]);
    if (r != a[0] || r < 0.0 || r >= static_cast<double>(row.size())) return 0.0;
    return row[static_cast<std::size_t>(r)];
}

std::string TabularPolicy::name() const {
    return "tabular(" + std::to_string(n_states()) + "x" + std::to_string(n_actions()) + ")";
}

// ---------------------------------------------------------------------------

std::string ConstantCritic::name() const { return "constant(" + fmt_double(value_) + ")"; }

GaussianBumpCritic::GaussianBumpCritic(State center, double scale)
    : center_(std::move(center)), scale_(scale) {
    if (center_.empty()) throw ContractError("gaussian bump: empty center");
    if (!(scale > 0.0)) throw ContractError("gaussian bump: scale must be positive");
}

double GaussianBumpCritic::value(const State& s) const {
    const double r = distance(s, center_, Norm::Euclidean);
    return std::exp(-(r * r) / (scale_ * scale_));
}

std::optional<double> GaussianBumpCritic::lipschitz() const {
    return std::sqrt(2.0) * std::exp(-0.5) / scale_;
}

std::string GaussianBumpCritic::name() const {
    return "gaussian_bump(scale=" + fmt_double(scale_) + ")";
}

double GaussianBumpCritic::superlevel_radius(double level) const {
    if (!(level > 0.0 && level <= 1.0)) {
        throw ContractError("gaussian bump: superlevel threshold must lie in (0, 1]");
    }
    return scale_ * std::sqrt(-std::log(level));
}

TabularCritic::TabularCritic(std::vector<double> values, std::string label)
    : values_(std::move(values)), label_(std::move(label)) {
    if (values_.empty()) throw ContractError("tabular critic: empty value table");
    for (double v : values_) {
        if (!std::isfinite(v)) throw ContractError("tabular critic: non-finite value");
    }
}

double TabularCritic::value(const State& s) const {
    if (s.size() != 1) throw ContractError("tabular critic: states are one-dimensional");
    const double r = std::round(s[0]);
    if (!(r >= 0.0 && r < static_cast<double>(values_.size()) && r == s[0])) {
        throw ContractError("tabular critic: state outside the table");
    }
    return values_[static_cast<std::size_t>(r)];
}

std::shared_ptr<const GaussianBumpCritic> make_gaussian_bump_critic(State center, double scale) {
    return std::make_shared<const GaussianBumpCritic>(std::move(center), scale);
}

std::shared_ptr<const TabularCritic> make_tabular_critic(const FiniteChainEnv& env,
                                                         const TabularPolicy& policy,
                                                         double gamma) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ContractError("tabular critic: gamma must lie in [0,1)");
    const std::size_t n = env.n_states();
    if (policy.n_states() != n || policy.n_actions() != env.n_actions()) {
        throw ContractError("tabular critic: policy table does not match the environment");
    }
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                                       static_cast<Eigen::Index>(n));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t s = 0; s < n; ++s) {
        const auto row = static_cast<Eigen::Index>(s);
        for (std::size_t a = 0; a < env.n_actions(); ++a) {
            const double pa = policy.prob(s, a);
            if (pa == 0.0) continue;
            rhs(row) += pa * env.reward_of(s, a);
            for (std::size_t next = 0; next < n; ++next) {
                system(row, static_cast<Eigen::Index>(next)) -=
                    gamma * pa * env.transition_prob(s, a, next);
            }
        }
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    Eigen::VectorXd v = lu.solve(rhs);
    // One step of iterative refinement keeps the residual at rounding level.
    v += lu.solve(rhs - system * v);
    if (!v.allFinite()) throw std::logic_error("tabular critic: singular Bellman system");
    return std::make_shared<const TabularCritic>(std::vector<double>(v.data(), v.data() + v.size()),
                                                 "tabular(" + policy.name() + ")");
}

// ---------------------------------------------------------------------------

ClassKInf ClassKInf::linear(double scale) {
    if (!(scale > 0.0)) throw ContractError("class-K-infinity: scale must be positive");
    return ClassKInf{[scale](double x) { return scale * x; },
                     [scale](double y) { return y / scale; }, "linear(" + fmt_double(scale) + ")"};
}

ClassKInf ClassKInf::power(double exponent, double scale) {
    if (!(exponent > 0.0 && scale > 0.0)) {
        throw ContractError("class-K-infinity: exponent and scale must be positive");
    }
    return ClassKInf{[exponent, scale](double x) { return scale * std::pow(x, exponent); },
                     [exponent, scale](double y) { return std::pow(y / scale, 1.0 / exponent); },
                     "power(" + fmt_double(exponent) + ", " + fmt_double(scale) + ")"};
}

double beta(const KLCertificate& certificate, double d, double t) {
    if (d < 0.0 || t < 0.0) throw ContractError("beta: arguments must be non-negative");
    return certificate.kappa(d) * certificate.xi(std::exp(-t));
}

bool scalar_certificate_admissible(double c, double w_max, double goal_radius) {
    return c > 0.0 && c < 1.0 && goal_radius > w_max / (1.0 - c);
}

CertifiedPolicy make_scalar_certified_policy(double c, const ContractiveScalarEnv& env) {
    if (!(c > 0.0 && c < 1.0)) throw ContractError("certified policy: contraction c must lie in (0,1)");
    const auto& p = env.params();
    if (!scalar_certificate_admissible(c, p.w_max, p.goal_radius)) {
        throw ContractError("certified policy: certificate admissibility g > w_max/(1-c) fails (g=" +
                            fmt_double(p.goal_radius) + ", w_max/(1-c)=" +
                            fmt_double(p.w_max / (1.0 - c)) + ")");
    }
    const double rate = std::log(1.0 / c);
    ClassKInf xi = std::abs(rate - 1.0) < 1e-15 ? ClassKInf::linear(1.0) : ClassKInf::power(rate);
    return CertifiedPolicy{std::make_shared<const LinearPolicy>(c),
                           KLCertificate{ClassKInf::linear(1.0), std::move(xi), 0.0}};
}

}  // namespace mcalf
