#pragma once

#include "sparsepc/circuit.hpp"

namespace sparsepc {

struct GrowConfig {
    double sigma2 = 0.1;  // multiplicative Gaussian noise variance on sum parameters
    std::uint64_t seed = 0;
};

struct GrowResult {
    Circuit circuit;
    std::size_t removedUnits = 0;  // units unreachable after the root copy is discarded
};

// Duplicates every unit; each sum unit's child list becomes the originals plus
// the copies, with parameters from the doubled, noise-multiplied, renormalized
// vector. Input copies are exact deep copies. Keeps the old-root-position copy
// as the new root.
GrowResult grow(const Circuit& circuit, const GrowConfig& config);

}  // namespace sparsepc
