#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "sparsepc/flows.hpp"

namespace sparsepc {

struct SumEdge {
    UnitId parent;
    std::uint32_t slot;  // index into the parent's child list
    UnitId child;
};

// All sum edges in (parent id, slot) order.
std::vector<SumEdge> sumEdges(const Circuit& circuit);

struct PruneHeuristic {
    enum class Kind { Rand, Param, Flow };
    Kind kind = Kind::Flow;
    std::uint64_t seed = 0;            // Rand
    const FlowTable* flows = nullptr;  // Flow: aggregate table over the scoring dataset

    static PruneHeuristic rand(std::uint64_t seed) { return {Kind::Rand, seed, nullptr}; }
    static PruneHeuristic param() { return {Kind::Param, 0, nullptr}; }
    static PruneHeuristic flow(const FlowTable& table) { return {Kind::Flow, 0, &table}; }
};

// Per-edge score aligned with sumEdges(); lower score = pruned first.
std::vector<double> scoreEdges(const Circuit& circuit, const PruneHeuristic& heuristic);

struct PruneReport {
    std::vector<std::pair<UnitId, UnitId>> prunedEdges;  // ids in the input circuit
    double keptFraction = 1.0;
    std::size_t exemptions = 0;  // edges spared to keep every sum unit non-empty
    std::optional<std::vector<double>> exactDropPerEdge;
    std::optional<double> boundedDrop;
    std::optional<double> approxDrop;

    std::string describe() const;
};

struct PruneResult {
    Circuit circuit;
    PruneReport report;
};

// Removes the given sum edges, renormalizes surviving parameters per parent
// by the surviving mass, drops unreachable units and reindexes. Every sum
// unit must keep at least one child.
Circuit pruneEdges(const Circuit& circuit, const std::vector<std::pair<UnitId, UnitId>>& edges);

// Scores, selects floor(fraction * |edges|) lowest-ranked edges (ties broken
// by (parent, child) ascending; edges that would empty a sum unit are
// exempted and next-worst edges substituted) and rebuilds.
PruneResult prune(const Circuit& circuit, const PruneHeuristic& heuristic, double fraction);

// Mean over rows of log((1-theta) / (1-theta + theta*F_n(x) - F_{n,c}(x))):
// the exact log-likelihood drop of pruning one edge with renormalization.
double exactSingleEdgeDrop(const Circuit& circuit, std::pair<UnitId, UnitId> edge,
                           const Dataset& data);

struct DropBound {
    double upperBound = 0.0;
    double approximation = 0.0;
};

// Upper bound and Taylor approximation of the multi-edge drop. Requires the
// per-row flow sum over the edge set to stay below 1; a violating row is an
// error naming its index.
DropBound multiEdgeDropBound(const Circuit& circuit,
                             const std::vector<std::pair<UnitId, UnitId>>& edges,
                             const Dataset& data);

// Cleanup pass: contracts single-child pass-through units where doing so
// preserves alternation, drops unreachable units, re-canonicalizes ids.
Circuit simplify(const Circuit& circuit);

}  // namespace sparsepc
