#pragma once

#include <cstdint>
#include <vector>

#include "sparsepc/circuit.hpp"
#include "sparsepc/dataset.hpp"

namespace sparsepc {

// Pairwise mutual information over all variable pairs, with additive
// smoothing of the joint counts. mi[i][j] == mi[j][i], diagonal is 0.
// If maxBuckets > 0, variables with larger cardinality are quantized into
// that many equal-width buckets before counting.
std::vector<std::vector<double>> estimateMutualInfo(const Dataset& data, double smoothing,
                                                    std::uint32_t maxBuckets = 0);

struct ChowLiuTree {
    std::uint32_t numVars = 0;
    std::uint32_t root = 0;
    // parent[v] == v for the root.
    std::vector<std::uint32_t> parent;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;  // (parent, child)
};

// Maximum spanning tree over the mutual information graph, rooted at `root`.
ChowLiuTree chowLiu(const std::vector<std::vector<double>>& mi, std::uint32_t root = 0);

struct HcltConfig {
    std::uint32_t hiddenStates = 16;
    double miSmoothing = 0.1;
    std::uint32_t miMaxBuckets = 0;
    double leafSmoothing = 0.01;
    std::uint64_t seed = 0;
    std::uint32_t root = 0;
};

// Compiles the Chow-Liu tree of the dataset into a hidden Chow-Liu tree
// circuit with `hiddenStates` latent states per tree edge. Sum parameters
// are random (Dirichlet with unit concentration); leaves use smoothed
// empirical marginals.
Circuit buildHclt(const Dataset& data, const HcltConfig& config);

// Same compilation from an explicit tree (for tests).
Circuit compileHclt(const ChowLiuTree& tree, const Dataset& data, const HcltConfig& config);

// Product of independent smoothed marginal leaves.
Circuit fullyFactorized(const Dataset& data, double smoothing);

// Mixture of `components` fully factorized circuits with random parameters.
Circuit denseMixture(const Dataset& data, std::uint32_t components, double smoothing,
                     std::uint64_t seed);

}  // namespace sparsepc
