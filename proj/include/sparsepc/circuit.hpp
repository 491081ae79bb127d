#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sparsepc/dataset.hpp"
#include "sparsepc/util.hpp"

namespace sparsepc {

using UnitId = std::uint32_t;

// Variable-index set, fixed universe size. Backed by 64-bit words.
class Scope {
public:
    Scope() = default;
    explicit Scope(std::size_t numVars) : words_((numVars + 63) / 64, 0) {}

    void set(std::size_t v) { words_[v >> 6] |= (1ull << (v & 63)); }
    bool test(std::size_t v) const { return (words_[v >> 6] >> (v & 63)) & 1; }

    bool intersects(const Scope& o) const {
        for (std::size_t i = 0; i < words_.size(); ++i)
            if (words_[i] & o.words_[i]) return true;
        return false;
    }
    void unite(const Scope& o) {
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= o.words_[i];
    }
    std::size_t count() const;
    std::vector<std::uint32_t> indices() const;

    bool operator==(const Scope&) const = default;

private:
    std::vector<std::uint64_t> words_;
};

enum class UnitKind : std::uint8_t { Input, Sum, Product };

// One computational unit. Input units hold a categorical distribution over
// their variable (log-space); sum units hold log-space edge parameters
// aligned with their child list.
struct Unit {
    UnitKind kind = UnitKind::Input;
    std::uint32_t variable = 0;       // input only
    std::vector<double> logProbs;     // input only
    std::vector<UnitId> children;     // sum/product
    std::vector<double> logParams;    // sum only
    Scope scope;

    bool isInput() const { return kind == UnitKind::Input; }
    bool isSum() const { return kind == UnitKind::Sum; }
    bool isProduct() const { return kind == UnitKind::Product; }
};

// Layer g contains units whose children all live in layers < g.
struct LayerPlan {
    std::vector<std::vector<UnitId>> groups;
};

// Immutable after construction. Units are stored in topological order
// (every child id < parent id); the root is the single top unit.
struct Circuit {
    std::vector<Unit> units;
    UnitId root = 0;
    std::uint32_t numVars = 0;
    std::vector<std::uint32_t> cardinalities;

    std::size_t numUnits() const { return units.size(); }
    std::size_t sumEdgeCount() const;
};

enum class Rule {
    Topology,
    Arity,
    DuplicateChild,
    Smoothness,
    Decomposability,
    Alternation,
    ScopeMismatch,
    SumNormalization,
    InputNormalization,
    InputCardinality,
    Reachability,
};

std::string ruleName(Rule rule);

struct StructureViolation {
    UnitId unit;
    Rule rule;
    std::string detail;
};

// Empty result iff the circuit is smooth, decomposable, alternating,
// parameter-normalized (within 1e-9) and fully reachable from the root.
std::vector<StructureViolation> validate(const Circuit& circuit);

// Throws Error listing all violations.
void requireValid(const Circuit& circuit);

// Per-unit log-probabilities for one sample.
struct EvalTrace {
    std::vector<double> logp;
    double rootLogp = kNegInf;
};

LayerPlan buildLayers(const Circuit& circuit);

EvalTrace evaluate(const Circuit& circuit, std::span<const std::int32_t> sample);
inline EvalTrace evaluate(const Circuit& circuit, const Sample& sample) {
    return evaluate(circuit, std::span<const std::int32_t>(sample));
}

// Identical results to per-sample evaluate; samples processed concurrently.
std::vector<EvalTrace> evaluateBatch(const Circuit& circuit, const Dataset& data);

// Mean root log-likelihood; empty dataset is an error.
double logLikelihood(const Circuit& circuit, const Dataset& data);

// -meanLL / (ln 2 * numVars).
double bitsPerDimension(const Circuit& circuit, const Dataset& data);

// parent lists, indexed by unit id
std::vector<std::vector<UnitId>> parentsOf(const Circuit& circuit);

// Drops units unreachable from `root` and reindexes ids densely, preserving
// relative order. Returns the cleaned circuit.
Circuit canonicalize(const Circuit& circuit, UnitId root);

// Incremental construction helper; children must be created before parents.
class CircuitBuilder {
public:
    CircuitBuilder(std::uint32_t numVars, std::vector<std::uint32_t> cardinalities);

    // probs/weights in linear space; converted to log internally.
    UnitId input(std::uint32_t variable, const std::vector<double>& probs);
    UnitId sum(std::vector<UnitId> children, const std::vector<double>& weights);
    UnitId product(std::vector<UnitId> children);

    Circuit build(UnitId root);

private:
    Circuit circuit_;
};

}  // namespace sparsepc
