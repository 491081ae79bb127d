#include "sparsepc/grower.hpp"

#include <cmath>

namespace sparsepc {

GrowResult grow(const Circuit& c, const GrowConfig& config) {
    if (config.sigma2 < 0.0) throw Error("grow: sigma2 must be non-negative");
    const double sigma = std::sqrt(config.sigma2);
    Rng rng(config.seed);
    auto noise = [&]() {
        if (sigma == 0.0) return 1.0;
        double eps = 1.0 + sigma * rng.gaussian();
        return eps > 0.0 ? eps : 1e-3;  // a non-positive parameter would be invalid
    };

    Circuit grown;
    grown.numVars = c.numVars;
    grown.cardinalities = c.cardinalities;
    grown.units.reserve(c.units.size() * 2);

    auto emit = [&](Unit u) {
        grown.units.push_back(std::move(u));
        return static_cast<UnitId>(grown.units.size() - 1);
    };

    // per original unit: (kept copy, fresh copy)
    std::vector<std::pair<UnitId, UnitId>> copies(c.units.size());
    for (UnitId id = 0; id < c.units.size(); ++id) {
        const Unit& u = c.units[id];
        if (u.isInput()) {
            copies[id] = {emit(u), emit(u)};
            continue;
        }
        std::vector<UnitId> firsts, seconds;
        firsts.reserve(u.children.size());
        seconds.reserve(u.children.size());
        for (UnitId ch : u.children) {
            firsts.push_back(copies[ch].first);
            seconds.push_back(copies[ch].second);
        }
        if (u.isProduct()) {
            Unit a = u, b = u;
            a.children = firsts;
            b.children = std::move(seconds);
            copies[id] = {emit(std::move(a)), emit(std::move(b))};
            continue;
        }
        // sum: both copies mix old and new children; params = normalize([theta, theta] * eps)
        std::vector<UnitId> doubled = firsts;
        doubled.insert(doubled.end(), seconds.begin(), seconds.end());
        auto makeCopy = [&]() {
            Unit s = u;
            s.children = doubled;
            s.logParams.resize(doubled.size());
            for (std::size_t i = 0; i < doubled.size(); ++i)
                s.logParams[i] = u.logParams[i % u.children.size()] + std::log(noise());
            double logMass = logSumExp(s.logParams);
            for (double& lp : s.logParams) lp -= logMass;
            return emit(std::move(s));
        };
        UnitId a = makeCopy();
        UnitId b = makeCopy();
        copies[id] = {a, b};
    }

    GrowResult result;
    UnitId newRoot = copies[c.root].first;
    result.removedUnits = grown.units.size();
    result.circuit = canonicalize(grown, newRoot);
    result.removedUnits -= result.circuit.units.size();
    return result;
}

}  // namespace sparsepc
