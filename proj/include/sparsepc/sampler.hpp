#pragma once

#include "sparsepc/circuit.hpp"

namespace sparsepc {

// Exact top-down sampling from the circuit distribution. Caches linear-space
// parameters once per circuit; the circuit must outlive the sampler.
class Sampler {
public:
    explicit Sampler(const Circuit& circuit);

    Sample sample(Rng& rng) const;

    // As above, also incrementing visitCounts[id] for every unit reached.
    Sample sample(Rng& rng, std::vector<std::uint64_t>& visitCounts) const;

    // `count` independent rows, deterministic given the seed; rows use per-row
    // substreams so the result is independent of scheduling.
    Dataset sampleBatch(std::size_t count, std::uint64_t seed) const;

private:
    Sample sampleImpl(Rng& rng, std::vector<std::uint64_t>* visitCounts) const;

    const Circuit* circuit_;
    std::vector<std::vector<double>> linear_;  // per unit: sum params or leaf probs
};

}  // namespace sparsepc
