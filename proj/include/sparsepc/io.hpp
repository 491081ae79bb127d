#pragma once

#include <filesystem>

#include "sparsepc/circuit.hpp"

namespace sparsepc {

enum class ModelFormat { Text, Binary };

// Text: one unit per line, log-parameters printed with 17 significant digits.
// Binary: little-endian, versioned header, exact float64 bits, trailing
// checksum; round trips are bit-exact. Loaded circuits are re-validated;
// parameters off by <= 1e-6 are renormalized, anything worse is rejected.
void saveCircuit(const Circuit& circuit, const std::filesystem::path& path, ModelFormat format);
Circuit loadCircuit(const std::filesystem::path& path);

// Linear-space sum-edge parameters bucketed into `bins` equal-width bins over
// [0,1]; returns per-bin counts.
std::vector<std::size_t> paramHistogram(const Circuit& circuit, std::size_t bins);

void writeHistogramCsv(const std::vector<std::size_t>& counts, std::size_t bins,
                       const std::filesystem::path& path);

}  // namespace sparsepc
