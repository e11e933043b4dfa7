#include "ktemper/reference.hpp"

namespace ktemper::reference {

std::vector<double> naive_conditional(const KoopmanModel& model, const ControlSequence& u, std::size_t step,
                                      double beta) {
    const auto allowed = model.allowed(step);
    std::vector<double> probs(allowed.size());
    ControlSequence trial = u;
    for (std::size_t k = 0; k < allowed.size(); ++k) {
        trial[step] = allowed[k];
        probs[k] = cost(model, trial);
    }
    boltzmann_from_energies(probs, beta, allowed);
    return probs;
}

void gibbs_sweep(const KoopmanModel& model, Replica& replica, RandomStream& rng, const SweepObserver& observer) {
    const std::size_t horizon = model.horizon();
    std::uint64_t products = 0;
    for (std::size_t t = 0; t < horizon; ++t) {
        const auto probs = naive_conditional(model, replica.u, t, replica.beta);
        products += probs.size() * horizon;
        if (observer) observer(t, replica.u, probs);
        replica.u[t] = model.allowed(t)[sample_index(probs, rng.uniform())];
    }
    rebuild_caches(model, replica);
    replica.matvec_count += products;
}

}  // namespace ktemper::reference
