#include "ktemper/model.hpp"

#include "ktemper/error.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace ktemper {

namespace {

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
    return m.allFinite();
}

}  // namespace

KoopmanModel::KoopmanModel(std::vector<std::string> actions, std::vector<Matrix> dynamics, RowVector cost_row,
                           Vector initial_state, std::size_t horizon, std::optional<ActionMask> mask)
    : actions_(std::move(actions)),
      dynamics_(std::move(dynamics)),
      cost_row_(std::move(cost_row)),
      initial_state_(std::move(initial_state)),
      horizon_(horizon),
      mask_(std::move(mask)) {
    if (actions_.empty()) throw ModelError("model has no actions");
    if (dynamics_.size() != actions_.size()) {
        std::ostringstream os;
        os << "model has " << actions_.size() << " actions but " << dynamics_.size() << " dynamics matrices";
        throw ModelError(os.str());
    }
    if (horizon_ == 0) throw ModelError("horizon must be positive");
    const auto n = cost_row_.size();
    if (n == 0) throw ModelError("lifted dimension must be positive");
    if (initial_state_.size() != n) {
        std::ostringstream os;
        os << "psi1 has length " << initial_state_.size() << ", expected n_psi = " << n;
        throw ModelError(os.str());
    }
    for (std::size_t a = 0; a < dynamics_.size(); ++a) {
        const auto& m = dynamics_[a];
        if (m.rows() != n || m.cols() != n) {
            std::ostringstream os;
            os << "A(" << actions_[a] << ") is " << m.rows() << "x" << m.cols() << ", expected " << n << "x" << n;
            throw ModelError(os.str());
        }
        if (!all_finite(m)) throw ModelError("A(" + actions_[a] + ") has non-finite entries");
    }
    if (!all_finite(cost_row_)) throw ModelError("c has non-finite entries");
    if (!all_finite(initial_state_)) throw ModelError("psi1 has non-finite entries");

    allowed_.resize(horizon_);
    if (mask_) {
        if (mask_->size() != horizon_) {
            std::ostringstream os;
            os << "action mask has " << mask_->size() << " entries, expected horizon " << horizon_;
            throw ModelError(os.str());
        }
        for (std::size_t t = 0; t < horizon_; ++t) {
            auto step = (*mask_)[t];
            if (step.empty()) throw ModelError("action mask entry " + std::to_string(t) + " is empty");
            std::sort(step.begin(), step.end());
            step.erase(std::unique(step.begin(), step.end()), step.end());
            if (step.back() >= actions_.size()) {
                throw ModelError("action mask entry " + std::to_string(t) + " references action " +
                                 std::to_string(step.back()) + " out of range");
            }
            allowed_[t] = std::move(step);
        }
    } else {
        std::vector<Action> all(actions_.size());
        std::iota(all.begin(), all.end(), Action{0});
        std::fill(allowed_.begin(), allowed_.end(), all);
    }
}

bool KoopmanModel::is_allowed(std::size_t t, Action a) const {
    const auto& step = allowed_[t];
    return std::binary_search(step.begin(), step.end(), a);
}

void KoopmanModel::validate(const ControlSequence& u) const {
    if (u.size() != horizon_) {
        std::ostringstream os;
        os << "sequence has length " << u.size() << ", expected horizon " << horizon_;
        throw SequenceError(os.str());
    }
    for (std::size_t t = 0; t < horizon_; ++t) {
        if (u[t] >= actions_.size() || !is_allowed(t, u[t])) {
            std::ostringstream os;
            os << "action " << u[t] << " is not admissible at step " << t;
            throw SequenceError(os.str());
        }
    }
}

double cost(const KoopmanModel& model, const ControlSequence& u) {
    model.validate(u);
    Vector x = model.initial_state();
    Vector next(x.size());
    for (std::size_t t = 0; t < model.horizon(); ++t) {
        next.noalias() = model.dynamics(u[t]) * x;
        x.swap(next);
    }
    return model.cost_row().dot(x);
}

std::vector<Vector> rollout(const KoopmanModel& model, const ControlSequence& u) {
    model.validate(u);
    std::vector<Vector> states;
    states.reserve(model.horizon() + 1);
    states.push_back(model.initial_state());
    for (std::size_t t = 0; t < model.horizon(); ++t) states.push_back(model.dynamics(u[t]) * states.back());
    return states;
}

BigInt sequence_count(const KoopmanModel& model) {
    BigInt count = 1;
    for (std::size_t t = 0; t < model.horizon(); ++t) count *= model.allowed(t).size();
    return count;
}

}  // namespace ktemper
