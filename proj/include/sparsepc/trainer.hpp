#pragma once

#include <filesystem>
#include <limits>

#include "sparsepc/flows.hpp"
#include "sparsepc/pruner.hpp"

namespace sparsepc {

struct EmSegment {
    double alphaStart = 1.0;
    double alphaEnd = 1.0;
    std::size_t epochs = 1;
};

struct EmConfig {
    std::size_t batchSize = 256;
    double smoothing = 0.01;  // Laplace pseudo-flow gamma
    std::vector<EmSegment> schedule{{1.0, 0.1, 50}};
    std::uint64_t seed = 0;
};

struct LoopConfig {
    double pruneFraction = 0.75;
    double growSigma2 = 0.1;
    std::size_t maxIterations = 5;
    std::size_t patience = 2;  // loop iterations without validation improvement
};

struct TrainLogRow {
    std::size_t epoch = 0;
    double trainLL = 0.0;
    double validLL = 0.0;  // NaN when no validation set
    double bpd = 0.0;
    double seconds = 0.0;
    std::size_t paramCount = 0;
};

struct TrainLog {
    std::vector<TrainLogRow> rows;
    void append(const TrainLog& other);
    void writeCsv(const std::filesystem::path& path) const;
};

struct TrainResult {
    Circuit circuit;
    TrainLog log;
};

// Expected-flow statistics of one pass: edge/unit flows plus per-leaf
// expected category counts (the leaf-side sufficient statistics).
struct EmStats {
    FlowTable flows;
    std::vector<std::vector<double>> leafCounts;  // per input unit, per category
};

EmStats aggregateEmStats(const Circuit& circuit, const Dataset& data,
                         std::span<const std::size_t> rows);

// One E+M step target: theta = (F_edge + gamma) / (F_unit + gamma*|ch|),
// leaves analogous. alpha blends target with current parameters.
Circuit emApply(const Circuit& circuit, const EmStats& stats, double gamma, double alpha);

TrainResult emFullBatch(const Circuit& circuit, const Dataset& data, double gamma,
                        std::size_t epochs, const Dataset* valid = nullptr);

TrainResult emStochastic(const Circuit& circuit, const Dataset& data, const EmConfig& config,
                         const Dataset* valid = nullptr);

// prune(eFlow) -> grow -> finetune loop with early stopping on validation LL;
// returns the best-validation checkpoint.
TrainResult structureLearn(const Circuit& initial, const Dataset& train, const Dataset& valid,
                           const LoopConfig& loop, const EmConfig& em);

struct CompressResult {
    Circuit circuit;
    TrainLog log;
    double compressionRate = 0.0;  // 1 - |C_com| / |C_init| in sum edges
};

// Iteratively prunes a stepFraction of edges (eFlow) and finetunes while the
// train LL stays within llBudget (relative) of the starting LL.
CompressResult compress(const Circuit& circuit, const Dataset& train, double stepFraction,
                        double llBudget, const EmConfig& em,
                        std::size_t maxSteps = std::numeric_limits<std::size_t>::max());

// Sum parameters from a symmetric Dirichlet(1) per unit, leaf distributions
// from smoothed empirical marginals of `data`.
Circuit randomizeParameters(const Circuit& circuit, const Dataset& data, double smoothing,
                            std::uint64_t seed);

}  // namespace sparsepc
