#include "sparsepc/flows.hpp"

#include <cmath>
#include <fstream>

namespace sparsepc {

void FlowTable::addInPlace(const FlowTable& other) {
    for (std::size_t i = 0; i < unitFlow.size(); ++i) unitFlow[i] += other.unitFlow[i];
    for (std::size_t i = 0; i < edgeFlow.size(); ++i)
        for (std::size_t j = 0; j < edgeFlow[i].size(); ++j)
            edgeFlow[i][j] += other.edgeFlow[i][j];
    sampleCount += other.sampleCount;
}

FlowTable zeroFlowTable(const Circuit& c) {
    FlowTable t;
    t.unitFlow.assign(c.units.size(), 0.0);
    t.edgeFlow.resize(c.units.size());
    for (UnitId id = 0; id < c.units.size(); ++id)
        if (c.units[id].isSum()) t.edgeFlow[id].assign(c.units[id].children.size(), 0.0);
    return t;
}

TopDownTable topDown(const Circuit& c) {
    TopDownTable t;
    t.unitProb.assign(c.units.size(), 0.0);
    t.edgeProb.resize(c.units.size());
    t.unitProb[c.root] = 1.0;
    for (UnitId id = static_cast<UnitId>(c.units.size()); id-- > 0;) {
        const Unit& u = c.units[id];
        double q = t.unitProb[id];
        if (u.isSum()) {
            auto& edges = t.edgeProb[id];
            edges.resize(u.children.size());
            for (std::size_t i = 0; i < u.children.size(); ++i) {
                double eq = std::exp(u.logParams[i]) * q;
                edges[i] = eq;
                t.unitProb[u.children[i]] += eq;
            }
        } else if (u.isProduct()) {
            for (UnitId ch : u.children) t.unitProb[ch] += q;
        }
    }
    return t;
}

FlowTable circuitFlow(const Circuit& c, const EvalTrace& trace) {
    if (trace.logp.size() != c.units.size())
        throw Error("circuitFlow: trace size does not match circuit");
    if (trace.rootLogp == kNegInf)
        throw Error("circuitFlow: zero root probability, flow undefined");

    FlowTable t = zeroFlowTable(c);
    t.sampleCount = 1;
    t.unitFlow[c.root] = 1.0;
    for (UnitId id = static_cast<UnitId>(c.units.size()); id-- > 0;) {
        const Unit& u = c.units[id];
        double f = t.unitFlow[id];
        if (u.isSum()) {
            auto& edges = t.edgeFlow[id];
            if (f <= 0.0 || trace.logp[id] == kNegInf) continue;  // unreachable: zero edge flow
            for (std::size_t i = 0; i < u.children.size(); ++i) {
                UnitId ch = u.children[i];
                double ratio = u.logParams[i] + trace.logp[ch] - trace.logp[id];
                double ef = (ratio == kNegInf) ? 0.0 : std::exp(ratio) * f;
                edges[i] = ef;
                t.unitFlow[ch] += ef;
            }
        } else if (u.isProduct()) {
            for (UnitId ch : u.children) t.unitFlow[ch] += f;
        }
    }
    return t;
}

FlowTable aggregateFlows(const Circuit& c, const Dataset& data) {
    if (data.numCols != c.numVars) throw Error("aggregateFlows: column count != numVars");
    constexpr std::size_t kChunk = 256;
    const std::size_t numChunks = (data.numRows + kChunk - 1) / kChunk;
    std::vector<FlowTable> chunkTables(numChunks);
    std::vector<std::size_t> badRow(numChunks, static_cast<std::size_t>(-1));

    parallelChunks(data.numRows, kChunk, [&](std::size_t ci, std::size_t begin, std::size_t end) {
        FlowTable acc = zeroFlowTable(c);
        for (std::size_t r = begin; r < end; ++r) {
            EvalTrace trace = evaluate(c, data.row(r));
            if (trace.rootLogp == kNegInf) {
                badRow[ci] = std::min(badRow[ci], r);
                continue;
            }
            acc.addInPlace(circuitFlow(c, trace));
        }
        chunkTables[ci] = std::move(acc);
    });

    for (std::size_t ci = 0; ci < numChunks; ++ci)
        if (badRow[ci] != static_cast<std::size_t>(-1))
            throw Error("aggregateFlows: zero-likelihood row " + std::to_string(badRow[ci]));

    // pairwise combine in fixed chunk order
    std::vector<FlowTable> level = std::move(chunkTables);
    if (level.empty()) {
        FlowTable t = zeroFlowTable(c);
        return t;
    }
    while (level.size() > 1) {
        std::vector<FlowTable> nextLevel;
        nextLevel.reserve((level.size() + 1) / 2);
        for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
            level[i].addInPlace(level[i + 1]);
            nextLevel.push_back(std::move(level[i]));
        }
        if (level.size() % 2 == 1) nextLevel.push_back(std::move(level.back()));
        level = std::move(nextLevel);
    }
    return std::move(level.front());
}

void writeFlowCsv(const Circuit& c, const FlowTable& flows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "parent,child,flow\n";
    out.precision(17);
    for (UnitId id = 0; id < c.units.size(); ++id) {
        if (!c.units[id].isSum()) continue;
        for (std::size_t i = 0; i < c.units[id].children.size(); ++i)
            out << id << "," << c.units[id].children[i] << "," << flows.edgeFlow[id][i] << "\n";
    }
}

}  // namespace sparsepc
