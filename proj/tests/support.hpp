#pragma once

#include <cstdint>
#include <vector>

#include "sparsepc/circuit.hpp"
#include "sparsepc/dataset.hpp"
#include "sparsepc/flows.hpp"

namespace sparsepc::testing {

// Four binary variables, two latent layers; the running example used across
// the evaluation, flow, and pruning tests. Unit ids are fixed by build order.
struct DemoCircuit {
    Circuit circuit;
    UnitId v11, v31, v12, v32, v21, v22, v41, v42;
    UnitId p21, p22, s21, s22, p11, p12, root;
};

DemoCircuit demoCircuit();

// The sample all demo figures are computed on: {X1=0, X2=1, X3=0, X4=1}.
Sample demoSample();

// All joint states in odometer order (last variable fastest).
std::vector<Sample> enumerateStates(const std::vector<std::uint32_t>& cardinalities);

// Exact linear-space probability of every joint state, by enumeration.
// Only sensible for small domains.
std::vector<double> exactDistribution(const Circuit& circuit);

struct GenConfig {
    std::uint32_t minVars = 2;
    std::uint32_t maxVars = 6;
    std::uint32_t maxCardinality = 4;
    std::uint32_t minFanout = 2;   // sum unit children
    std::uint32_t maxFanout = 3;
    double shareProbability = 0.25;  // reuse an existing same-scope sum unit
    bool passThroughRoot = false;    // wrap in a single-child root sum
};

// Random smooth, decomposable, alternating circuit with full support
// (all parameters strictly positive). Deterministic given the rng state.
Circuit randomCircuit(Rng& rng, const GenConfig& config);

// Rows drawn uniformly over the cardinalities.
Dataset uniformDataset(Rng& rng, const std::vector<std::uint32_t>& cardinalities,
                       std::size_t rows);

// Copy of the circuit with each sum parameter replaced by
// theta * p_child(x) / p_parent(x), the conditioned-on-x parameterization
// whose top-down probabilities are the flows of x.
Circuit reparameterize(const Circuit& circuit, const EvalTrace& trace);

// Upper tail of the chi-square distribution: P(X >= stat) with dof degrees.
double chiSquareTail(double stat, double dof);

}  // namespace sparsepc::testing
