#include "sparsepc/sampler.hpp"

#include <cmath>

namespace sparsepc {

Sampler::Sampler(const Circuit& circuit) : circuit_(&circuit) {
    linear_.resize(circuit.units.size());
    for (UnitId id = 0; id < circuit.units.size(); ++id) {
        const Unit& u = circuit.units[id];
        const std::vector<double>* logs = nullptr;
        if (u.isInput()) logs = &u.logProbs;
        else if (u.isSum()) logs = &u.logParams;
        else continue;
        linear_[id].reserve(logs->size());
        for (double lp : *logs) linear_[id].push_back(std::exp(lp));
    }
}

Sample Sampler::sampleImpl(Rng& rng, std::vector<std::uint64_t>* visitCounts) const {
    const Circuit& c = *circuit_;
    Sample out(c.numVars, kMarginalized);
    std::vector<UnitId> stack{c.root};
    while (!stack.empty()) {
        UnitId id = stack.back();
        stack.pop_back();
        if (visitCounts) ++(*visitCounts)[id];
        const Unit& u = c.units[id];
        switch (u.kind) {
            case UnitKind::Input:
                out[u.variable] = static_cast<std::int32_t>(drawCategorical(rng, linear_[id]));
                break;
            case UnitKind::Product:
                // disjoint scopes: no variable is written twice
                for (auto it = u.children.rbegin(); it != u.children.rend(); ++it)
                    stack.push_back(*it);
                break;
            case UnitKind::Sum:
                stack.push_back(u.children[drawCategorical(rng, linear_[id])]);
                break;
        }
    }
    return out;
}

Sample Sampler::sample(Rng& rng) const { return sampleImpl(rng, nullptr); }

Sample Sampler::sample(Rng& rng, std::vector<std::uint64_t>& visitCounts) const {
    return sampleImpl(rng, &visitCounts);
}

Dataset Sampler::sampleBatch(std::size_t count, std::uint64_t seed) const {
    const Circuit& c = *circuit_;
    Dataset d(c.numVars, c.cardinalities);
    d.numRows = count;
    d.cells.assign(count * c.numVars, 0);
    parallelChunks(count, 256, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            Rng rowRng = Rng::substream(seed, r);
            Sample s = sampleImpl(rowRng, nullptr);
            std::copy(s.begin(), s.end(), d.cells.begin() + r * c.numVars);
        }
    });
    return d;
}

}  // namespace sparsepc
