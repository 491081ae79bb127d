#pragma once

#include <filesystem>
#include <vector>

#include "sparsepc/circuit.hpp"

namespace sparsepc {

// Sample-independent visit probabilities of the top-down sampling process.
// edgeProb[n][i] corresponds to the i-th child of sum unit n.
struct TopDownTable {
    std::vector<double> unitProb;
    std::vector<std::vector<double>> edgeProb;
};

// Visit probabilities conditioned on a sample being generated, optionally
// aggregated over many samples.
struct FlowTable {
    std::vector<double> unitFlow;
    std::vector<std::vector<double>> edgeFlow;
    std::size_t sampleCount = 0;

    void addInPlace(const FlowTable& other);
};

FlowTable zeroFlowTable(const Circuit& circuit);

// Single backward pass; root = 1.
TopDownTable topDown(const Circuit& circuit);

// One backward pass over a forward trace; root probability must be > 0.
FlowTable circuitFlow(const Circuit& circuit, const EvalTrace& trace);

// Elementwise sum of per-sample tables; rejects zero-likelihood rows
// (reported with the row index). Deterministic regardless of thread count.
FlowTable aggregateFlows(const Circuit& circuit, const Dataset& data);

// Edge triples (parent, child, value) for external histogram tooling.
void writeFlowCsv(const Circuit& circuit, const FlowTable& flows,
                  const std::filesystem::path& path);

}  // namespace sparsepc
