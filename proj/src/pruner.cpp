#include "sparsepc/pruner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace sparsepc {

namespace {
std::uint64_t edgeKey(UnitId parent, UnitId child) {
    return (static_cast<std::uint64_t>(parent) << 32) | child;
}
}  // namespace

std::vector<SumEdge> sumEdges(const Circuit& c) {
    std::vector<SumEdge> edges;
    edges.reserve(c.sumEdgeCount());
    for (UnitId id = 0; id < c.units.size(); ++id) {
        const Unit& u = c.units[id];
        if (!u.isSum()) continue;
        for (std::uint32_t i = 0; i < u.children.size(); ++i)
            edges.push_back({id, i, u.children[i]});
    }
    return edges;
}

std::vector<double> scoreEdges(const Circuit& c, const PruneHeuristic& h) {
    auto edges = sumEdges(c);
    std::vector<double> scores(edges.size());
    switch (h.kind) {
        case PruneHeuristic::Kind::Param:
            for (std::size_t i = 0; i < edges.size(); ++i)
                scores[i] = std::exp(c.units[edges[i].parent].logParams[edges[i].slot]);
            break;
        case PruneHeuristic::Kind::Rand: {
            Rng rng(h.seed);
            for (auto& s : scores) s = rng.uniform();
            break;
        }
        case PruneHeuristic::Kind::Flow: {
            if (h.flows == nullptr) throw Error("scoreEdges: eFlow requires a flow table");
            if (h.flows->edgeFlow.size() != c.units.size())
                throw Error("scoreEdges: flow table does not match circuit");
            for (std::size_t i = 0; i < edges.size(); ++i) {
                const auto& row = h.flows->edgeFlow[edges[i].parent];
                if (edges[i].slot >= row.size())
                    throw Error("scoreEdges: flow table edge set does not match circuit");
                scores[i] = row[edges[i].slot];
            }
            break;
        }
    }
    return scores;
}

Circuit pruneEdges(const Circuit& c, const std::vector<std::pair<UnitId, UnitId>>& edges) {
    std::unordered_set<std::uint64_t> removed;
    removed.reserve(edges.size() * 2);
    for (auto [p, ch] : edges) removed.insert(edgeKey(p, ch));

    Circuit rebuilt;
    rebuilt.numVars = c.numVars;
    rebuilt.cardinalities = c.cardinalities;
    rebuilt.units.reserve(c.units.size());
    for (UnitId id = 0; id < c.units.size(); ++id) {
        Unit u = c.units[id];
        if (u.isSum()) {
            std::vector<UnitId> kept;
            std::vector<double> keptParams;
            for (std::size_t i = 0; i < u.children.size(); ++i) {
                if (removed.count(edgeKey(id, u.children[i]))) continue;
                kept.push_back(u.children[i]);
                keptParams.push_back(u.logParams[i]);
            }
            if (kept.empty())
                throw Error("pruneEdges: sum unit " + std::to_string(id) + " left with no children");
            // renormalize by surviving mass
            double logMass = logSumExp(keptParams);
            for (double& lp : keptParams) lp -= logMass;
            u.children = std::move(kept);
            u.logParams = std::move(keptParams);
        }
        rebuilt.units.push_back(std::move(u));
    }
    rebuilt.root = c.root;
    return canonicalize(rebuilt, rebuilt.root);
}

PruneResult prune(const Circuit& c, const PruneHeuristic& h, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw Error("prune: fraction must be in (0,1)");
    auto edges = sumEdges(c);
    if (edges.size() < 2) throw Error("prune: circuit has fewer than 2 sum edges");
    auto scores = scoreEdges(c, h);

    const std::size_t target = static_cast<std::size_t>(
        std::floor(fraction * static_cast<double>(edges.size())));

    std::vector<std::size_t> order(edges.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] < scores[b];
        if (edges[a].parent != edges[b].parent) return edges[a].parent < edges[b].parent;
        return edges[a].child < edges[b].child;
    });

    std::vector<std::size_t> surviving(c.units.size(), 0);
    for (const auto& e : edges) ++surviving[e.parent];

    PruneReport report;
    for (std::size_t k = 0; k < order.size() && report.prunedEdges.size() < target; ++k) {
        const SumEdge& e = edges[order[k]];
        if (surviving[e.parent] <= 1) {
            ++report.exemptions;
            continue;  // next-worst edges substitute naturally
        }
        --surviving[e.parent];
        report.prunedEdges.emplace_back(e.parent, e.child);
    }
    report.keptFraction =
        1.0 - static_cast<double>(report.prunedEdges.size()) / static_cast<double>(edges.size());

    if (h.kind == PruneHeuristic::Kind::Flow && h.flows->sampleCount > 0) {
        double approx = 0.0;
        for (auto [p, ch] : report.prunedEdges) {
            const Unit& u = c.units[p];
            for (std::size_t i = 0; i < u.children.size(); ++i)
                if (u.children[i] == ch) approx += h.flows->edgeFlow[p][i];
        }
        report.approxDrop = approx / static_cast<double>(h.flows->sampleCount);
    }

    PruneResult result{report.prunedEdges.empty() ? c : pruneEdges(c, report.prunedEdges),
                       std::move(report)};
    return result;
}

namespace {

// Per-row flows restricted to a fixed edge list; calls sink(rowIndex, unitFlows, edgeFlows).
template <typename Sink>
void perRowFlows(const Circuit& c, const Dataset& data, Sink&& sink) {
    for (std::size_t r = 0; r < data.numRows; ++r) {
        EvalTrace trace = evaluate(c, data.row(r));
        if (trace.rootLogp == kNegInf)
            throw Error("row " + std::to_string(r) + " has zero likelihood");
        sink(r, circuitFlow(c, trace));
    }
}

std::size_t slotOf(const Circuit& c, UnitId parent, UnitId child) {
    const Unit& u = c.units[parent];
    if (!u.isSum()) throw Error("edge parent " + std::to_string(parent) + " is not a sum unit");
    for (std::size_t i = 0; i < u.children.size(); ++i)
        if (u.children[i] == child) return i;
    throw Error("no sum edge (" + std::to_string(parent) + "," + std::to_string(child) + ")");
}

}  // namespace

double exactSingleEdgeDrop(const Circuit& c, std::pair<UnitId, UnitId> edge, const Dataset& data) {
    if (data.empty()) throw Error("exactSingleEdgeDrop: empty dataset");
    auto [parent, child] = edge;
    std::size_t slot = slotOf(c, parent, child);
    double theta = std::exp(c.units[parent].logParams[slot]);

    double total = 0.0;
    perRowFlows(c, data, [&](std::size_t, const FlowTable& f) {
        double fn = f.unitFlow[parent];
        double fnc = f.edgeFlow[parent][slot];
        total += std::log((1.0 - theta) / (1.0 - theta + theta * fn - fnc));
    });
    return total / static_cast<double>(data.numRows);
}

DropBound multiEdgeDropBound(const Circuit& c,
                             const std::vector<std::pair<UnitId, UnitId>>& edges,
                             const Dataset& data) {
    if (data.empty()) throw Error("multiEdgeDropBound: empty dataset");
    DropBound out;
    if (edges.empty()) return out;

    std::vector<std::pair<UnitId, std::size_t>> slots;
    slots.reserve(edges.size());
    for (auto [p, ch] : edges) slots.emplace_back(p, slotOf(c, p, ch));

    double boundTotal = 0.0;
    double aggregate = 0.0;
    perRowFlows(c, data, [&](std::size_t r, const FlowTable& f) {
        double s = 0.0;
        for (auto [p, slot] : slots) s += f.edgeFlow[p][slot];
        if (s >= 1.0)
            throw Error("multiEdgeDropBound: flow-sum hypothesis violated on row " +
                        std::to_string(r) + " (sum = " + std::to_string(s) + ")");
        boundTotal += -std::log(1.0 - s);
        aggregate += s;
    });
    out.upperBound = boundTotal / static_cast<double>(data.numRows);
    out.approximation = aggregate / static_cast<double>(data.numRows);
    return out;
}

Circuit simplify(const Circuit& c) {
    Circuit cur = canonicalize(c, c.root);
    for (;;) {
        auto parents = parentsOf(cur);
        UnitId victim = cur.units.size();
        for (UnitId id = 0; id < cur.units.size(); ++id) {
            const Unit& u = cur.units[id];
            if (u.isInput() || u.children.size() != 1 || id == cur.root) continue;
            UnitId child = u.children[0];
            bool spliceable = true;
            for (UnitId p : parents[id]) {
                if (cur.units[p].kind == cur.units[child].kind) spliceable = false;
                for (UnitId sibling : cur.units[p].children)
                    if (sibling == child) spliceable = false;  // would duplicate
            }
            if (spliceable) {
                victim = id;
                break;
            }
        }
        if (victim == cur.units.size()) break;

        const double passWeight =
            cur.units[victim].isSum() ? cur.units[victim].logParams[0] : 0.0;
        const UnitId child = cur.units[victim].children[0];
        for (UnitId p : parents[victim]) {
            Unit& pu = cur.units[p];
            for (std::size_t i = 0; i < pu.children.size(); ++i) {
                if (pu.children[i] != victim) continue;
                pu.children[i] = child;
                if (pu.isSum()) pu.logParams[i] += passWeight;
            }
            if (pu.isSum()) {
                double logMass = logSumExp(pu.logParams);
                for (double& lp : pu.logParams) lp -= logMass;
            }
        }
        cur = canonicalize(cur, cur.root);
    }
    return cur;
}

std::string PruneReport::describe() const {
    std::ostringstream os;
    os << "pruned_edges " << prunedEdges.size() << "\n";
    os << "kept_fraction " << keptFraction << "\n";
    os << "exemptions " << exemptions << "\n";
    if (approxDrop) os << "approx_drop " << *approxDrop << "\n";
    if (boundedDrop) os << "bounded_drop " << *boundedDrop << "\n";
    if (exactDropPerEdge) {
        os << "exact_drop_per_edge";
        for (double d : *exactDropPerEdge) os << " " << d;
        os << "\n";
    }
    for (auto [p, ch] : prunedEdges) os << "edge " << p << " " << ch << "\n";
    return os.str();
}

}  // namespace sparsepc
