#include "sparsepc/structures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sparsepc/util.hpp"

namespace sparsepc {

namespace {

std::uint32_t bucketOf(std::int32_t value, std::uint32_t card, std::uint32_t maxBuckets) {
    if (maxBuckets == 0 || card <= maxBuckets) return static_cast<std::uint32_t>(value);
    return static_cast<std::uint32_t>(static_cast<std::uint64_t>(value) * maxBuckets / card);
}

}  // namespace

std::vector<std::vector<double>> estimateMutualInfo(const Dataset& data, double smoothing,
                                                    std::uint32_t maxBuckets) {
    if (data.empty()) throw Error("estimateMutualInfo: empty dataset");
    const std::uint32_t m = static_cast<std::uint32_t>(data.numCols);

    std::vector<std::uint32_t> card(m);
    for (std::uint32_t v = 0; v < m; ++v) {
        std::uint32_t c = data.cardinalities[v];
        card[v] = (maxBuckets > 0 && c > maxBuckets) ? maxBuckets : c;
    }

    std::vector<std::vector<double>> mi(m, std::vector<double>(m, 0.0));
    std::vector<double> joint;
    for (std::uint32_t i = 0; i < m; ++i) {
        for (std::uint32_t j = i + 1; j < m; ++j) {
            const std::uint32_t ki = card[i], kj = card[j];
            joint.assign(static_cast<std::size_t>(ki) * kj, 0.0);
            for (std::size_t r = 0; r < data.numRows; ++r) {
                std::uint32_t a = bucketOf(data.at(r, i), data.cardinalities[i], maxBuckets);
                std::uint32_t b = bucketOf(data.at(r, j), data.cardinalities[j], maxBuckets);
                joint[static_cast<std::size_t>(a) * kj + b] += 1.0;
            }
            const double denom =
                static_cast<double>(data.numRows) + smoothing * static_cast<double>(ki) * kj;
            std::vector<double> pi(ki, 0.0), pj(kj, 0.0);
            for (std::uint32_t a = 0; a < ki; ++a)
                for (std::uint32_t b = 0; b < kj; ++b) {
                    double p = (joint[static_cast<std::size_t>(a) * kj + b] + smoothing) / denom;
                    joint[static_cast<std::size_t>(a) * kj + b] = p;
                    pi[a] += p;
                    pj[b] += p;
                }
            double value = 0.0;
            for (std::uint32_t a = 0; a < ki; ++a)
                for (std::uint32_t b = 0; b < kj; ++b) {
                    double p = joint[static_cast<std::size_t>(a) * kj + b];
                    if (p > 0.0) value += p * std::log(p / (pi[a] * pj[b]));
                }
            mi[i][j] = mi[j][i] = std::max(value, 0.0);
        }
    }
    return mi;
}

namespace {

struct UnionFind {
    std::vector<std::uint32_t> parent;
    explicit UnionFind(std::uint32_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), 0u);
    }
    std::uint32_t find(std::uint32_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    bool unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[b] = a;
        return true;
    }
};

}  // namespace

ChowLiuTree chowLiu(const std::vector<std::vector<double>>& mi, std::uint32_t root) {
    const auto m = static_cast<std::uint32_t>(mi.size());
    if (m == 0) throw Error("chowLiu: no variables");
    if (root >= m) throw Error("chowLiu: root out of range");

    struct Cand {
        double mi;
        std::uint32_t a, b;
    };
    std::vector<Cand> cands;
    cands.reserve(static_cast<std::size_t>(m) * (m - 1) / 2);
    for (std::uint32_t i = 0; i < m; ++i)
        for (std::uint32_t j = i + 1; j < m; ++j) cands.push_back({mi[i][j], i, j});
    std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
        if (x.mi != y.mi) return x.mi > y.mi;
        if (x.a != y.a) return x.a < y.a;
        return x.b < y.b;
    });

    UnionFind uf(m);
    std::vector<std::vector<std::uint32_t>> adj(m);
    std::uint32_t taken = 0;
    for (const Cand& c : cands) {
        if (taken + 1 == m) break;
        if (!uf.unite(c.a, c.b)) continue;
        adj[c.a].push_back(c.b);
        adj[c.b].push_back(c.a);
        ++taken;
    }

    ChowLiuTree tree;
    tree.numVars = m;
    tree.root = root;
    tree.parent.assign(m, root);
    tree.parent[root] = root;
    std::vector<std::uint32_t> order{root};
    std::vector<bool> seen(m, false);
    seen[root] = true;
    for (std::size_t head = 0; head < order.size(); ++head) {
        std::uint32_t v = order[head];
        for (std::uint32_t w : adj[v]) {
            if (seen[w]) continue;
            seen[w] = true;
            tree.parent[w] = v;
            tree.edges.emplace_back(v, w);
            order.push_back(w);
        }
    }
    if (order.size() != m) throw Error("chowLiu: disconnected tree");
    return tree;
}

namespace {

std::vector<std::vector<double>> smoothedMarginals(const Dataset& data, double smoothing) {
    std::vector<std::vector<double>> marg(data.numCols);
    for (std::size_t v = 0; v < data.numCols; ++v)
        marg[v].assign(data.cardinalities[v], smoothing);
    for (std::size_t r = 0; r < data.numRows; ++r)
        for (std::size_t v = 0; v < data.numCols; ++v)
            marg[v][static_cast<std::size_t>(data.at(r, v))] += 1.0;
    for (auto& m : marg) {
        double total = std::accumulate(m.begin(), m.end(), 0.0);
        for (double& x : m) x /= total;
    }
    return marg;
}

std::vector<double> dirichletUnit(Rng& rng, std::size_t n) {
    std::vector<double> draws(n);
    double total = 0.0;
    for (double& d : draws) {
        d = -std::log(std::max(rng.uniform(), 1e-300));
        total += d;
    }
    for (double& d : draws) d /= total;
    return draws;
}

// Marginal jittered per latent state so EM can break the symmetry between
// the state copies of a leaf.
std::vector<double> jitteredMarginal(const std::vector<double>& marginal, Rng& rng) {
    std::vector<double> probs(marginal.size());
    double total = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        probs[k] = marginal[k] * std::exp(0.1 * rng.gaussian());
        total += probs[k];
    }
    for (double& p : probs) p /= total;
    return probs;
}

}  // namespace

Circuit compileHclt(const ChowLiuTree& tree, const Dataset& data, const HcltConfig& config) {
    if (config.hiddenStates == 0) throw Error("compileHclt: hiddenStates must be >= 1");
    if (tree.numVars != data.numCols) throw Error("compileHclt: tree size mismatch");
    const std::uint32_t h = config.hiddenStates;
    auto marginals = smoothedMarginals(data, config.leafSmoothing);
    Rng rng(config.seed);

    std::vector<std::vector<std::uint32_t>> children(tree.numVars);
    for (auto [p, c] : tree.edges) children[p].push_back(c);

    CircuitBuilder builder(static_cast<std::uint32_t>(data.numCols), data.cardinalities);

    // sumOf[v][s]: for non-root v, the sum unit under parent state s mixing
    // v's own h states. Built bottom-up over the tree.
    std::vector<std::vector<UnitId>> sumOf(tree.numVars);

    std::vector<std::uint32_t> topo{tree.root};
    for (std::size_t head = 0; head < topo.size(); ++head)
        for (std::uint32_t c : children[topo[head]]) topo.push_back(c);

    std::vector<std::vector<UnitId>> stateUnit(tree.numVars);  // product (or leaf) per state
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        std::uint32_t v = *it;
        stateUnit[v].resize(h);
        for (std::uint32_t s = 0; s < h; ++s) {
            UnitId leaf = builder.input(v, jitteredMarginal(marginals[v], rng));
            if (children[v].empty()) {
                stateUnit[v][s] = leaf;
            } else {
                std::vector<UnitId> parts{leaf};
                for (std::uint32_t c : children[v]) parts.push_back(sumOf[c][s]);
                stateUnit[v][s] = builder.product(parts);
            }
        }
        if (v != tree.root) {
            sumOf[v].resize(h);
            for (std::uint32_t s = 0; s < h; ++s)
                sumOf[v][s] = builder.sum(stateUnit[v], dirichletUnit(rng, h));
        }
    }

    UnitId root = builder.sum(stateUnit[tree.root], dirichletUnit(rng, h));
    return builder.build(root);
}

Circuit buildHclt(const Dataset& data, const HcltConfig& config) {
    auto mi = estimateMutualInfo(data, config.miSmoothing, config.miMaxBuckets);
    ChowLiuTree tree = chowLiu(mi, config.root);
    return compileHclt(tree, data, config);
}

Circuit fullyFactorized(const Dataset& data, double smoothing) {
    auto marginals = smoothedMarginals(data, smoothing);
    CircuitBuilder builder(static_cast<std::uint32_t>(data.numCols), data.cardinalities);
    std::vector<UnitId> leaves;
    leaves.reserve(data.numCols);
    for (std::uint32_t v = 0; v < data.numCols; ++v) leaves.push_back(builder.input(v, marginals[v]));
    return builder.build(builder.product(leaves));
}

Circuit denseMixture(const Dataset& data, std::uint32_t components, double smoothing,
                     std::uint64_t seed) {
    if (components == 0) throw Error("denseMixture: components must be >= 1");
    auto marginals = smoothedMarginals(data, smoothing);
    Rng rng(seed);
    CircuitBuilder builder(static_cast<std::uint32_t>(data.numCols), data.cardinalities);
    std::vector<UnitId> parts;
    parts.reserve(components);
    for (std::uint32_t k = 0; k < components; ++k) {
        std::vector<UnitId> leaves;
        leaves.reserve(data.numCols);
        for (std::uint32_t v = 0; v < data.numCols; ++v)
            leaves.push_back(builder.input(v, jitteredMarginal(marginals[v], rng)));
        parts.push_back(builder.product(leaves));
    }
    return builder.build(builder.sum(parts, dirichletUnit(rng, components)));
}

}  // namespace sparsepc
