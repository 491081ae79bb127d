#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>

namespace sparsepc::testing {

DemoCircuit demoCircuit() {
    DemoCircuit d;
    CircuitBuilder b(4, {2, 2, 2, 2});
    d.v11 = b.input(0, {0.9, 0.1});
    d.v31 = b.input(2, {0.8, 0.2});
    d.v12 = b.input(0, {0.3, 0.7});
    d.v32 = b.input(2, {0.7, 0.3});
    d.v21 = b.input(1, {0.4, 0.6});
    d.v22 = b.input(3, {0.2, 0.8});
    d.v41 = b.input(1, {0.9, 0.1});
    d.v42 = b.input(3, {0.8, 0.2});
    d.p21 = b.product({d.v21, d.v22});
    d.p22 = b.product({d.v41, d.v42});
    d.s21 = b.sum({d.p21, d.p22}, {0.8, 0.2});
    d.s22 = b.sum({d.p21, d.p22}, {0.1, 0.9});
    d.p11 = b.product({d.v11, d.v31, d.s21});
    d.p12 = b.product({d.v12, d.v32, d.s22});
    d.root = b.sum({d.p11, d.p12}, {0.4, 0.6});
    d.circuit = b.build(d.root);
    return d;
}

Sample demoSample() { return {0, 1, 0, 1}; }

std::vector<Sample> enumerateStates(const std::vector<std::uint32_t>& cardinalities) {
    std::size_t total = 1;
    for (auto c : cardinalities) total *= c;
    std::vector<Sample> states;
    states.reserve(total);
    Sample state(cardinalities.size(), 0);
    for (std::size_t i = 0; i < total; ++i) {
        states.push_back(state);
        for (std::size_t v = cardinalities.size(); v-- > 0;) {
            if (++state[v] < static_cast<std::int32_t>(cardinalities[v])) break;
            state[v] = 0;
        }
    }
    return states;
}

std::vector<double> exactDistribution(const Circuit& circuit) {
    std::vector<double> probs;
    for (const Sample& state : enumerateStates(circuit.cardinalities))
        probs.push_back(std::exp(evaluate(circuit, state).rootLogp));
    return probs;
}

namespace {

std::vector<double> dirichlet(Rng& rng, std::size_t n) {
    std::vector<double> draws(n);
    double total = 0.0;
    for (double& d : draws) {
        d = -std::log(std::max(rng.uniform(), 1e-300));
        total += d;
    }
    for (double& d : draws) d /= total;
    return draws;
}

struct Generator {
    Rng& rng;
    const GenConfig& cfg;
    CircuitBuilder& builder;
    std::vector<std::uint32_t> cards;
    std::map<std::vector<std::uint32_t>, std::vector<UnitId>> sumMemo;

    std::uint32_t fanout() {
        return cfg.minFanout + static_cast<std::uint32_t>(
                                   rng.below(cfg.maxFanout - cfg.minFanout + 1));
    }

    UnitId leaf(std::uint32_t var) { return builder.input(var, dirichlet(rng, cards[var])); }

    UnitId sumUnit(std::vector<std::uint32_t> scope) {
        std::sort(scope.begin(), scope.end());
        auto it = sumMemo.find(scope);
        if (it != sumMemo.end() && !it->second.empty() && rng.uniform() < cfg.shareProbability)
            return it->second[rng.below(it->second.size())];

        std::uint32_t k = fanout();
        std::vector<UnitId> children;
        children.reserve(k);
        for (std::uint32_t i = 0; i < k; ++i)
            children.push_back(scope.size() == 1 ? leaf(scope[0]) : productUnit(scope));
        UnitId id = builder.sum(children, dirichlet(rng, k));
        sumMemo[scope].push_back(id);
        return id;
    }

    UnitId productUnit(const std::vector<std::uint32_t>& scope) {
        auto vars = scope;
        for (std::size_t i = vars.size(); i > 1; --i)
            std::swap(vars[i - 1], vars[rng.below(i)]);
        std::size_t parts = 2 + rng.below(std::min<std::size_t>(vars.size(), 3) - 1);
        std::vector<std::vector<std::uint32_t>> groups(parts);
        for (std::size_t i = 0; i < vars.size(); ++i)
            groups[i < parts ? i : rng.below(parts)].push_back(vars[i]);

        std::vector<UnitId> children;
        children.reserve(parts);
        for (auto& g : groups) {
            if (g.size() == 1 && rng.uniform() < 0.5)
                children.push_back(leaf(g[0]));
            else
                children.push_back(sumUnit(g));
        }
        return builder.product(children);
    }
};

}  // namespace

Circuit randomCircuit(Rng& rng, const GenConfig& cfg) {
    std::uint32_t numVars =
        cfg.minVars + static_cast<std::uint32_t>(rng.below(cfg.maxVars - cfg.minVars + 1));
    std::vector<std::uint32_t> cards(numVars);
    for (auto& c : cards) c = 2 + static_cast<std::uint32_t>(rng.below(cfg.maxCardinality - 1));

    CircuitBuilder builder(numVars, cards);
    Generator gen{rng, cfg, builder, cards, {}};
    std::vector<std::uint32_t> full(numVars);
    std::iota(full.begin(), full.end(), 0u);

    UnitId root;
    if (numVars == 1) {
        root = gen.sumUnit(full);
    } else if (cfg.passThroughRoot) {
        root = builder.sum({gen.productUnit(full)}, {1.0});
    } else {
        root = gen.sumUnit(full);
    }
    return builder.build(root);
}

Dataset uniformDataset(Rng& rng, const std::vector<std::uint32_t>& cardinalities,
                       std::size_t rows) {
    Dataset data(static_cast<std::uint32_t>(cardinalities.size()),
                 std::vector<std::uint32_t>(cardinalities));
    data.name = "uniform";
    Sample row(cardinalities.size());
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t v = 0; v < cardinalities.size(); ++v)
            row[v] = static_cast<std::int32_t>(rng.below(cardinalities[v]));
        data.appendRow(row);
    }
    return data;
}

Circuit reparameterize(const Circuit& circuit, const EvalTrace& trace) {
    Circuit out = circuit;
    for (UnitId id = 0; id < out.units.size(); ++id) {
        Unit& u = out.units[id];
        if (!u.isSum() || trace.logp[id] == kNegInf) continue;
        for (std::size_t i = 0; i < u.children.size(); ++i)
            u.logParams[i] += trace.logp[u.children[i]] - trace.logp[id];
    }
    return out;
}

namespace {

// regularized incomplete gamma, series form (x < a+1)
double gammaP(double a, double x) {
    double sum = 1.0 / a, term = sum, ap = a;
    for (int i = 0; i < 500; ++i) {
        term *= x / ++ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// regularized upper incomplete gamma, Lentz continued fraction (x >= a+1)
double gammaQ(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double chiSquareTail(double stat, double dof) {
    if (stat <= 0.0) return 1.0;
    double a = dof / 2.0, x = stat / 2.0;
    return x < a + 1.0 ? 1.0 - gammaP(a, x) : gammaQ(a, x);
}

}  // namespace sparsepc::testing
