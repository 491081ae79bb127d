#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sparsepc {

// Observed value marker for marginal queries; dataset cells are never marginalized.
inline constexpr std::int32_t kMarginalized = -1;

// One (possibly partial) assignment: value per variable or kMarginalized.
using Sample = std::vector<std::int32_t>;

// Dense matrix of categorical observations with per-column cardinality.
struct Dataset {
    std::size_t numRows = 0;
    std::uint32_t numCols = 0;
    std::vector<std::int32_t> cells;  // row-major
    std::vector<std::uint32_t> cardinalities;
    std::string name;

    Dataset() = default;
    Dataset(std::uint32_t cols, std::vector<std::uint32_t> cards)
        : numCols(cols), cardinalities(std::move(cards)) {}

    std::int32_t at(std::size_t r, std::size_t c) const { return cells[r * numCols + c]; }
    std::span<const std::int32_t> row(std::size_t r) const {
        return {cells.data() + r * numCols, numCols};
    }
    void appendRow(std::span<const std::int32_t> values);
    bool empty() const { return numRows == 0; }
};

// CSV with a header row carrying per-column cardinalities. If declared
// cardinalities are given they override the header and values are checked
// against them.
Dataset loadDatasetCsv(const std::filesystem::path& path,
                       const std::optional<std::vector<std::uint32_t>>& declared = {});
void saveDatasetCsv(const Dataset& data, const std::filesystem::path& path);

// Binary format: little-endian, versioned header, trailing checksum.
Dataset loadDatasetBinary(const std::filesystem::path& path);
void saveDatasetBinary(const Dataset& data, const std::filesystem::path& path);

// Dispatch on extension (.csv vs anything else -> binary).
Dataset loadDataset(const std::filesystem::path& path);

}  // namespace sparsepc
