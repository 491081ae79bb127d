#include "sparsepc/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "sparsepc/grower.hpp"

namespace sparsepc {

void TrainLog::append(const TrainLog& other) {
    rows.insert(rows.end(), other.rows.begin(), other.rows.end());
}

void TrainLog::writeCsv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(12);
    // wall-clock time is kept in memory only so reruns emit identical files
    out << "epoch,train_ll,valid_ll,bpd,param_count\n";
    for (const auto& r : rows)
        out << r.epoch << "," << r.trainLL << "," << r.validLL << "," << r.bpd << ","
            << r.paramCount << "\n";
}

EmStats aggregateEmStats(const Circuit& c, const Dataset& data,
                         std::span<const std::size_t> rows) {
    constexpr std::size_t kChunk = 256;
    struct Partial {
        FlowTable flows;
        std::vector<std::vector<double>> leafCounts;
    };
    const std::size_t numChunks = (rows.size() + kChunk - 1) / kChunk;
    std::vector<Partial> partials(numChunks);

    auto zeroLeafCounts = [&] {
        std::vector<std::vector<double>> lc(c.units.size());
        for (UnitId id = 0; id < c.units.size(); ++id)
            if (c.units[id].isInput()) lc[id].assign(c.units[id].logProbs.size(), 0.0);
        return lc;
    };

    parallelChunks(rows.size(), kChunk, [&](std::size_t ci, std::size_t begin, std::size_t end) {
        Partial acc{zeroFlowTable(c), zeroLeafCounts()};
        for (std::size_t k = begin; k < end; ++k) {
            auto row = data.row(rows[k]);
            EvalTrace trace = evaluate(c, row);
            if (trace.rootLogp == kNegInf)
                throw Error("EM: zero-likelihood row " + std::to_string(rows[k]));
            FlowTable f = circuitFlow(c, trace);
            for (UnitId id = 0; id < c.units.size(); ++id) {
                const Unit& u = c.units[id];
                if (!u.isInput()) continue;
                double fu = f.unitFlow[id];
                if (fu == 0.0) continue;
                std::int32_t v = row[u.variable];
                if (v == kMarginalized) {
                    // distribute by the current leaf posterior
                    for (std::size_t cat = 0; cat < u.logProbs.size(); ++cat)
                        acc.leafCounts[id][cat] += fu * std::exp(u.logProbs[cat]);
                } else {
                    acc.leafCounts[id][static_cast<std::size_t>(v)] += fu;
                }
            }
            acc.flows.addInPlace(f);
        }
        partials[ci] = std::move(acc);
    });

    EmStats stats{zeroFlowTable(c), zeroLeafCounts()};
    for (auto& p : partials) {
        stats.flows.addInPlace(p.flows);
        for (UnitId id = 0; id < c.units.size(); ++id)
            for (std::size_t cat = 0; cat < stats.leafCounts[id].size(); ++cat)
                stats.leafCounts[id][cat] += p.leafCounts[id][cat];
    }
    return stats;
}

namespace {

// alpha-blend of a normalized linear target with current log params.
void blendInto(std::vector<double>& logParams, const std::vector<double>& target, double alpha) {
    for (std::size_t i = 0; i < logParams.size(); ++i) {
        double cur = std::exp(logParams[i]);
        double mixed = alpha * target[i] + (1.0 - alpha) * cur;
        logParams[i] = mixed > 0.0 ? std::log(mixed) : kNegInf;
    }
}

}  // namespace

Circuit emApply(const Circuit& c, const EmStats& stats, double gamma, double alpha) {
    Circuit next = c;
    std::vector<double> target;
    for (UnitId id = 0; id < next.units.size(); ++id) {
        Unit& u = next.units[id];
        if (u.isSum()) {
            double denom = stats.flows.unitFlow[id] +
                           gamma * static_cast<double>(u.children.size());
            if (denom <= 0.0) continue;  // unit never reached: keep parameters
            target.resize(u.children.size());
            for (std::size_t i = 0; i < u.children.size(); ++i)
                target[i] = (stats.flows.edgeFlow[id][i] + gamma) / denom;
            blendInto(u.logParams, target, alpha);
        } else if (u.isInput()) {
            double total = std::accumulate(stats.leafCounts[id].begin(),
                                           stats.leafCounts[id].end(), 0.0);
            double denom = total + gamma * static_cast<double>(u.logProbs.size());
            if (denom <= 0.0) continue;
            target.resize(u.logProbs.size());
            for (std::size_t cat = 0; cat < u.logProbs.size(); ++cat)
                target[cat] = (stats.leafCounts[id][cat] + gamma) / denom;
            blendInto(u.logProbs, target, alpha);
        }
    }
    return next;
}

namespace {

TrainLogRow makeLogRow(std::size_t epoch, const Circuit& c, const Dataset& train,
                       const Dataset* valid, double seconds) {
    TrainLogRow row;
    row.epoch = epoch;
    row.trainLL = logLikelihood(c, train);
    row.validLL = valid ? logLikelihood(c, *valid) : std::nan("");
    row.bpd = -row.trainLL / (std::log(2.0) * static_cast<double>(c.numVars));
    row.seconds = seconds;
    row.paramCount = c.sumEdgeCount();
    return row;
}

std::vector<std::size_t> allRows(const Dataset& data) {
    std::vector<std::size_t> rows(data.numRows);
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
}

}  // namespace

TrainResult emFullBatch(const Circuit& circuit, const Dataset& data, double gamma,
                        std::size_t epochs, const Dataset* valid) {
    if (data.empty()) throw Error("emFullBatch: empty dataset");
    TrainResult result{circuit, {}};
    auto rows = allRows(data);
    for (std::size_t e = 0; e < epochs; ++e) {
        auto t0 = std::chrono::steady_clock::now();
        EmStats stats = aggregateEmStats(result.circuit, data, rows);
        result.circuit = emApply(result.circuit, stats, gamma, 1.0);
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.rows.push_back(makeLogRow(e, result.circuit, data, valid, secs));
    }
    return result;
}

TrainResult emStochastic(const Circuit& circuit, const Dataset& data, const EmConfig& config,
                         const Dataset* valid) {
    if (data.empty()) throw Error("emStochastic: empty dataset");
    std::size_t batch = config.batchSize;
    if (batch < 1) throw Error("emStochastic: batch size must be >= 1");
    if (batch > data.numRows) batch = data.numRows;  // clamp, with a warning in the log

    TrainResult result{circuit, {}};
    Rng shuffleRng(config.seed);
    std::size_t epochIndex = 0;
    for (const auto& segment : config.schedule) {
        for (std::size_t e = 0; e < segment.epochs; ++e, ++epochIndex) {
            auto t0 = std::chrono::steady_clock::now();
            double alpha = segment.alphaStart;
            if (segment.epochs > 1)
                alpha += (segment.alphaEnd - segment.alphaStart) * static_cast<double>(e) /
                         static_cast<double>(segment.epochs - 1);

            auto perm = allRows(data);
            for (std::size_t i = perm.size(); i > 1; --i)
                std::swap(perm[i - 1], perm[shuffleRng.below(i)]);

            for (std::size_t begin = 0; begin < perm.size(); begin += batch) {
                std::size_t end = std::min(perm.size(), begin + batch);
                if (alpha == 0.0) continue;  // frozen
                std::vector<std::size_t> rows(perm.begin() + begin, perm.begin() + end);
                std::sort(rows.begin(), rows.end());  // fixed aggregation order
                EmStats stats = aggregateEmStats(result.circuit, data, rows);
                result.circuit = emApply(result.circuit, stats, config.smoothing, alpha);
            }
            double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            result.log.rows.push_back(makeLogRow(epochIndex, result.circuit, data, valid, secs));
        }
    }
    return result;
}

TrainResult structureLearn(const Circuit& initial, const Dataset& train, const Dataset& valid,
                           const LoopConfig& loop, const EmConfig& em) {
    if (!(loop.pruneFraction > 0.0 && loop.pruneFraction < 1.0))
        throw Error("structureLearn: pruneFraction must be in (0,1)");

    TrainResult result{initial, {}};
    Circuit current = initial;
    Circuit best = initial;
    double bestValidLL = logLikelihood(initial, valid);
    std::size_t sinceImprovement = 0;

    for (std::size_t iter = 0; iter < loop.maxIterations; ++iter) {
        FlowTable flows = aggregateFlows(current, train);
        PruneResult pruned = prune(current, PruneHeuristic::flow(flows), loop.pruneFraction);
        GrowResult grown = grow(pruned.circuit, {loop.growSigma2, em.seed + 0x9e37 * (iter + 1)});

        EmConfig iterEm = em;
        iterEm.seed = em.seed + iter + 1;
        TrainResult finetuned = emStochastic(grown.circuit, train, iterEm, &valid);
        current = std::move(finetuned.circuit);
        result.log.append(finetuned.log);

        double validLL = logLikelihood(current, valid);
        if (validLL > bestValidLL) {
            bestValidLL = validLL;
            best = current;
            sinceImprovement = 0;
        } else if (++sinceImprovement >= loop.patience) {
            break;
        }
    }
    result.circuit = std::move(best);
    return result;
}

CompressResult compress(const Circuit& circuit, const Dataset& train, double stepFraction,
                        double llBudget, const EmConfig& em, std::size_t maxSteps) {
    if (!(stepFraction > 0.0 && stepFraction < 1.0))
        throw Error("compress: stepFraction must be in (0,1)");
    if (llBudget < 0.0) throw Error("compress: llBudget must be non-negative");

    const double initialLL = logLikelihood(circuit, train);
    const double floorLL = initialLL - llBudget * std::abs(initialLL);
    const auto initialEdges = static_cast<double>(circuit.sumEdgeCount());

    CompressResult result{circuit, {}, 0.0};
    std::size_t iter = 0;
    while (iter < maxSteps) {
        if (result.circuit.sumEdgeCount() < 2) break;
        FlowTable flows = aggregateFlows(result.circuit, train);
        PruneResult pruned;
        try {
            pruned = prune(result.circuit, PruneHeuristic::flow(flows), stepFraction);
        } catch (const Error&) {
            break;  // nothing left to prune
        }
        if (pruned.report.prunedEdges.empty()) break;

        EmConfig iterEm = em;
        iterEm.seed = em.seed + (++iter);
        TrainResult finetuned = emStochastic(pruned.circuit, train, iterEm, nullptr);
        double ll = logLikelihood(finetuned.circuit, train);
        if (ll < floorLL) break;  // budget violated: keep the previous circuit
        result.circuit = std::move(finetuned.circuit);
        result.log.append(finetuned.log);
    }
    result.compressionRate =
        1.0 - static_cast<double>(result.circuit.sumEdgeCount()) / initialEdges;
    return result;
}

Circuit randomizeParameters(const Circuit& circuit, const Dataset& data, double smoothing,
                            std::uint64_t seed) {
    Circuit out = circuit;
    Rng rng(seed);

    // smoothed empirical marginals per variable
    std::vector<std::vector<double>> marginals(out.numVars);
    for (std::uint32_t v = 0; v < out.numVars; ++v)
        marginals[v].assign(out.cardinalities[v], smoothing);
    for (std::size_t r = 0; r < data.numRows; ++r)
        for (std::uint32_t v = 0; v < out.numVars; ++v)
            marginals[v][static_cast<std::size_t>(data.at(r, v))] += 1.0;
    for (auto& m : marginals) {
        double total = std::accumulate(m.begin(), m.end(), 0.0);
        for (double& x : m) x /= total;
    }

    for (auto& u : out.units) {
        if (u.isSum()) {
            // symmetric Dirichlet(1): normalized Exp(1) draws
            double total = 0.0;
            std::vector<double> draws(u.children.size());
            for (double& d : draws) {
                d = -std::log(std::max(rng.uniform(), 1e-300));
                total += d;
            }
            for (std::size_t i = 0; i < draws.size(); ++i)
                u.logParams[i] = std::log(draws[i] / total);
        } else if (u.isInput()) {
            for (std::size_t cat = 0; cat < u.logProbs.size(); ++cat)
                u.logProbs[cat] = std::log(marginals[u.variable][cat]);
        }
    }
    return out;
}

}  // namespace sparsepc
