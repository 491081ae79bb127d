#include "sparsepc/circuit.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

namespace sparsepc {

std::size_t Scope::count() const {
    std::size_t n = 0;
    for (auto w : words_) n += std::popcount(w);
    return n;
}

std::vector<std::uint32_t> Scope::indices() const {
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < words_.size(); ++i) {
        std::uint64_t w = words_[i];
        while (w) {
            out.push_back(static_cast<std::uint32_t>(i * 64 + std::countr_zero(w)));
            w &= w - 1;
        }
    }
    return out;
}

std::size_t Circuit::sumEdgeCount() const {
    std::size_t n = 0;
    for (const auto& u : units)
        if (u.isSum()) n += u.children.size();
    return n;
}

std::string ruleName(Rule rule) {
    switch (rule) {
        case Rule::Topology: return "topology";
        case Rule::Arity: return "arity";
        case Rule::DuplicateChild: return "duplicate-child";
        case Rule::Smoothness: return "smoothness";
        case Rule::Decomposability: return "decomposability";
        case Rule::Alternation: return "alternation";
        case Rule::ScopeMismatch: return "scope-mismatch";
        case Rule::SumNormalization: return "sum-normalization";
        case Rule::InputNormalization: return "input-normalization";
        case Rule::InputCardinality: return "input-cardinality";
        case Rule::Reachability: return "reachability";
    }
    return "unknown";
}

namespace {

constexpr double kNormTol = 1e-9;

void checkUnit(const Circuit& c, UnitId id, std::vector<StructureViolation>& out) {
    const Unit& u = c.units[id];
    auto add = [&](Rule rule, std::string detail) {
        out.push_back({id, rule, std::move(detail)});
    };

    if (u.isInput()) {
        if (u.variable >= c.numVars) {
            add(Rule::InputCardinality, "variable index out of range");
            return;
        }
        if (u.logProbs.size() != c.cardinalities[u.variable])
            add(Rule::InputCardinality, "distribution length != variable cardinality");
        double mass = 0.0;
        for (double lp : u.logProbs) mass += std::exp(lp);
        if (std::abs(mass - 1.0) > kNormTol)
            add(Rule::InputNormalization, "leaf probabilities sum to " + std::to_string(mass));
        Scope expect(c.numVars);
        expect.set(u.variable);
        if (!(u.scope == expect)) add(Rule::ScopeMismatch, "input scope != {variable}");
        return;
    }

    if (u.children.empty()) {
        add(Rule::Arity, "inner unit with no children");
        return;
    }
    for (UnitId ch : u.children)
        if (ch >= id) add(Rule::Topology, "child id " + std::to_string(ch) + " >= unit id");
    {
        auto sorted = u.children;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            add(Rule::DuplicateChild, "repeated child in child list");
    }
    // only look at structurally sane children below
    for (UnitId ch : u.children)
        if (ch >= id) return;

    Scope unionScope(c.numVars);
    for (UnitId ch : u.children) unionScope.unite(c.units[ch].scope);
    if (!(u.scope == unionScope)) add(Rule::ScopeMismatch, "scope != union of child scopes");

    if (u.isSum()) {
        if (u.logParams.size() != u.children.size())
            add(Rule::Arity, "param list length != child list length");
        else {
            double mass = 0.0;
            for (double lp : u.logParams) mass += std::exp(lp);
            if (std::abs(mass - 1.0) > kNormTol)
                add(Rule::SumNormalization, "edge parameters sum to " + std::to_string(mass));
        }
        for (UnitId ch : u.children) {
            if (c.units[ch].isSum())
                add(Rule::Alternation, "sum unit " + std::to_string(id) + " has sum child " +
                                           std::to_string(ch));
            if (!(c.units[ch].scope == c.units[u.children[0]].scope)) {
                add(Rule::Smoothness, "children of sum have unequal scopes");
                break;
            }
        }
    } else {  // product
        for (std::size_t i = 0; i < u.children.size(); ++i) {
            if (c.units[u.children[i]].isProduct())
                add(Rule::Alternation, "product unit " + std::to_string(id) +
                                           " has product child " + std::to_string(u.children[i]));
            for (std::size_t j = i + 1; j < u.children.size(); ++j) {
                if (c.units[u.children[i]].scope.intersects(c.units[u.children[j]].scope)) {
                    add(Rule::Decomposability, "children " + std::to_string(u.children[i]) +
                                                   " and " + std::to_string(u.children[j]) +
                                                   " share scope");
                }
            }
        }
    }
}

}  // namespace

std::vector<StructureViolation> validate(const Circuit& c) {
    std::vector<StructureViolation> out;
    if (c.units.empty()) {
        out.push_back({0, Rule::Arity, "empty circuit"});
        return out;
    }
    if (c.root >= c.units.size()) {
        out.push_back({c.root, Rule::Reachability, "root id out of range"});
        return out;
    }
    for (UnitId id = 0; id < c.units.size(); ++id) checkUnit(c, id, out);

    // reachability from root
    std::vector<char> seen(c.units.size(), 0);
    std::vector<UnitId> stack{c.root};
    seen[c.root] = 1;
    while (!stack.empty()) {
        UnitId id = stack.back();
        stack.pop_back();
        for (UnitId ch : c.units[id].children) {
            if (ch < c.units.size() && !seen[ch]) {
                seen[ch] = 1;
                stack.push_back(ch);
            }
        }
    }
    for (UnitId id = 0; id < c.units.size(); ++id)
        if (!seen[id]) out.push_back({id, Rule::Reachability, "unit unreachable from root"});
    return out;
}

void requireValid(const Circuit& c) {
    auto violations = validate(c);
    if (violations.empty()) return;
    std::ostringstream os;
    os << "invalid circuit (" << violations.size() << " violations):";
    for (const auto& v : violations)
        os << "\n  unit " << v.unit << " [" << ruleName(v.rule) << "] " << v.detail;
    throw Error(os.str());
}

LayerPlan buildLayers(const Circuit& c) {
    std::vector<std::uint32_t> layer(c.units.size(), 0);
    std::uint32_t maxLayer = 0;
    for (UnitId id = 0; id < c.units.size(); ++id) {
        const Unit& u = c.units[id];
        std::uint32_t l = 0;
        for (UnitId ch : u.children) {
            if (ch >= id) throw Error("buildLayers: cycle or bad topology at unit " + std::to_string(id));
            l = std::max(l, layer[ch] + 1);
        }
        layer[id] = l;
        maxLayer = std::max(maxLayer, l);
    }
    LayerPlan plan;
    plan.groups.resize(maxLayer + 1);
    for (UnitId id = 0; id < c.units.size(); ++id) plan.groups[layer[id]].push_back(id);
    return plan;
}

EvalTrace evaluate(const Circuit& c, std::span<const std::int32_t> sample) {
    if (sample.size() != c.numVars)
        throw Error("evaluate: sample has " + std::to_string(sample.size()) + " values, expected " +
                    std::to_string(c.numVars));
    EvalTrace trace;
    trace.logp.resize(c.units.size());
    std::vector<double> scratch;
    for (UnitId id = 0; id < c.units.size(); ++id) {
        const Unit& u = c.units[id];
        double lp;
        switch (u.kind) {
            case UnitKind::Input: {
                std::int32_t v = sample[u.variable];
                if (v == kMarginalized) {
                    lp = 0.0;
                } else {
                    if (v < 0 || static_cast<std::size_t>(v) >= u.logProbs.size())
                        throw Error("evaluate: category " + std::to_string(v) +
                                    " out of range for variable " + std::to_string(u.variable));
                    lp = u.logProbs[static_cast<std::size_t>(v)];
                }
                break;
            }
            case UnitKind::Product: {
                lp = 0.0;
                for (UnitId ch : u.children) lp += trace.logp[ch];
                break;
            }
            case UnitKind::Sum: {
                scratch.resize(u.children.size());
                for (std::size_t i = 0; i < u.children.size(); ++i)
                    scratch[i] = u.logParams[i] + trace.logp[u.children[i]];
                lp = logSumExp(scratch);
                break;
            }
        }
        trace.logp[id] = lp;
    }
    trace.rootLogp = trace.logp[c.root];
    return trace;
}

std::vector<EvalTrace> evaluateBatch(const Circuit& c, const Dataset& data) {
    if (data.numCols != c.numVars) throw Error("evaluateBatch: column count != numVars");
    std::vector<EvalTrace> traces(data.numRows);
    parallelChunks(data.numRows, 64, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) traces[r] = evaluate(c, data.row(r));
    });
    return traces;
}

double logLikelihood(const Circuit& c, const Dataset& data) {
    if (data.empty()) throw Error("logLikelihood: empty dataset");
    std::vector<double> chunkSums((data.numRows + 255) / 256, 0.0);
    parallelChunks(data.numRows, 256, [&](std::size_t ci, std::size_t begin, std::size_t end) {
        double s = 0.0;
        for (std::size_t r = begin; r < end; ++r) s += evaluate(c, data.row(r)).rootLogp;
        chunkSums[ci] = s;
    });
    double total = 0.0;
    for (double s : chunkSums) total += s;
    return total / static_cast<double>(data.numRows);
}

double bitsPerDimension(const Circuit& c, const Dataset& data) {
    return -logLikelihood(c, data) / (std::log(2.0) * static_cast<double>(c.numVars));
}

std::vector<std::vector<UnitId>> parentsOf(const Circuit& c) {
    std::vector<std::vector<UnitId>> parents(c.units.size());
    for (UnitId id = 0; id < c.units.size(); ++id)
        for (UnitId ch : c.units[id].children) parents[ch].push_back(id);
    return parents;
}

Circuit canonicalize(const Circuit& c, UnitId root) {
    std::vector<char> keep(c.units.size(), 0);
    std::vector<UnitId> stack{root};
    keep[root] = 1;
    while (!stack.empty()) {
        UnitId id = stack.back();
        stack.pop_back();
        for (UnitId ch : c.units[id].children)
            if (!keep[ch]) {
                keep[ch] = 1;
                stack.push_back(ch);
            }
    }
    std::vector<UnitId> remap(c.units.size(), 0);
    Circuit out;
    out.numVars = c.numVars;
    out.cardinalities = c.cardinalities;
    for (UnitId id = 0; id < c.units.size(); ++id) {
        if (!keep[id]) continue;
        remap[id] = static_cast<UnitId>(out.units.size());
        Unit u = c.units[id];
        for (UnitId& ch : u.children) ch = remap[ch];
        out.units.push_back(std::move(u));
    }
    out.root = remap[root];
    return out;
}

CircuitBuilder::CircuitBuilder(std::uint32_t numVars, std::vector<std::uint32_t> cardinalities) {
    circuit_.numVars = numVars;
    circuit_.cardinalities = std::move(cardinalities);
    if (circuit_.cardinalities.size() != numVars)
        throw Error("CircuitBuilder: cardinalities length != numVars");
}

UnitId CircuitBuilder::input(std::uint32_t variable, const std::vector<double>& probs) {
    Unit u;
    u.kind = UnitKind::Input;
    u.variable = variable;
    u.logProbs.reserve(probs.size());
    for (double p : probs) u.logProbs.push_back(p > 0 ? std::log(p) : kNegInf);
    u.scope = Scope(circuit_.numVars);
    u.scope.set(variable);
    circuit_.units.push_back(std::move(u));
    return static_cast<UnitId>(circuit_.units.size() - 1);
}

UnitId CircuitBuilder::sum(std::vector<UnitId> children, const std::vector<double>& weights) {
    if (children.size() != weights.size()) throw Error("sum: child/weight length mismatch");
    Unit u;
    u.kind = UnitKind::Sum;
    u.children = std::move(children);
    u.logParams.reserve(weights.size());
    for (double w : weights) u.logParams.push_back(w > 0 ? std::log(w) : kNegInf);
    u.scope = Scope(circuit_.numVars);
    for (UnitId ch : u.children) u.scope.unite(circuit_.units[ch].scope);
    circuit_.units.push_back(std::move(u));
    return static_cast<UnitId>(circuit_.units.size() - 1);
}

UnitId CircuitBuilder::product(std::vector<UnitId> children) {
    Unit u;
    u.kind = UnitKind::Product;
    u.children = std::move(children);
    u.scope = Scope(circuit_.numVars);
    for (UnitId ch : u.children) u.scope.unite(circuit_.units[ch].scope);
    circuit_.units.push_back(std::move(u));
    return static_cast<UnitId>(circuit_.units.size() - 1);
}

Circuit CircuitBuilder::build(UnitId root) {
    return canonicalize(circuit_, root);
}

}  // namespace sparsepc
