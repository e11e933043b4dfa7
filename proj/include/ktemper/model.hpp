#pragma once

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ktemper {

using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Matrix = Eigen::MatrixXd;
using BigInt = boost::multiprecision::cpp_int;

/// Index into KoopmanModel::actions().
using Action = std::size_t;

/// The optimization variable: one action index per time step.
struct ControlSequence {
    std::vector<Action> steps;

    ControlSequence() = default;
    explicit ControlSequence(std::vector<Action> s) : steps(std::move(s)) {}

    std::size_t size() const { return steps.size(); }
    Action operator[](std::size_t t) const { return steps[t]; }
    Action& operator[](std::size_t t) { return steps[t]; }
    auto begin() const { return steps.begin(); }
    auto end() const { return steps.end(); }

    friend bool operator==(const ControlSequence&, const ControlSequence&) = default;
    friend auto operator<=>(const ControlSequence&, const ControlSequence&) = default;
};

/// Switched linear system in lifted coordinates with a linear final-state
/// cost:  psi_{t+1} = A(u_t) psi_t,  J(u) = c psi_{T+1}.
///
/// Time steps are 0-based here (t = 0 .. T-1). The optional action mask
/// restricts the admissible actions per step; without one every action is
/// admissible at every step.
class KoopmanModel {
public:
    using ActionMask = std::vector<std::vector<Action>>;

    /// Validates every invariant; throws ModelError on violation.
    KoopmanModel(std::vector<std::string> actions, std::vector<Matrix> dynamics, RowVector cost_row,
                 Vector initial_state, std::size_t horizon, std::optional<ActionMask> mask = {});

    std::size_t lifted_dim() const { return static_cast<std::size_t>(cost_row_.size()); }
    std::size_t horizon() const { return horizon_; }
    std::size_t action_count() const { return actions_.size(); }

    const std::vector<std::string>& actions() const { return actions_; }
    const Matrix& dynamics(Action a) const { return dynamics_[a]; }
    const std::vector<Matrix>& dynamics() const { return dynamics_; }
    const RowVector& cost_row() const { return cost_row_; }
    const Vector& initial_state() const { return initial_state_; }

    /// Admissible actions at step t, ascending.
    std::span<const Action> allowed(std::size_t t) const { return allowed_[t]; }
    bool is_allowed(std::size_t t, Action a) const;
    const std::optional<ActionMask>& mask() const { return mask_; }

    /// Throws SequenceError unless u has length T and respects the mask.
    void validate(const ControlSequence& u) const;

private:
    std::vector<std::string> actions_;
    std::vector<Matrix> dynamics_;
    RowVector cost_row_;
    Vector initial_state_;
    std::size_t horizon_;
    std::optional<ActionMask> mask_;
    std::vector<std::vector<Action>> allowed_;
};

/// J(u) = c A(u_T) ... A(u_1) psi_1, evaluated with T matrix-vector products.
double cost(const KoopmanModel& model, const ControlSequence& u);

/// Lifted state trajectory psi_1 .. psi_{T+1} under u.
std::vector<Vector> rollout(const KoopmanModel& model, const ControlSequence& u);

/// Number of feasible sequences, prod_t |U_t|, exactly.
BigInt sequence_count(const KoopmanModel& model);

}  // namespace ktemper
