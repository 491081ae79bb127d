#include "sparsepc/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sparsepc/util.hpp"

namespace sparsepc {

void Dataset::appendRow(std::span<const std::int32_t> values) {
    if (values.size() != numCols) throw Error("appendRow: wrong number of columns");
    cells.insert(cells.end(), values.begin(), values.end());
    ++numRows;
}

namespace {

std::vector<std::string> splitCsvLine(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

void checkCells(const Dataset& d) {
    for (std::size_t r = 0; r < d.numRows; ++r) {
        for (std::uint32_t c = 0; c < d.numCols; ++c) {
            std::int32_t v = d.at(r, c);
            if (v < 0)
                throw Error("dataset: negative value at row " + std::to_string(r) + " col " +
                            std::to_string(c));
            if (static_cast<std::uint32_t>(v) >= d.cardinalities[c])
                throw Error("dataset: value " + std::to_string(v) + " >= cardinality " +
                            std::to_string(d.cardinalities[c]) + " at row " + std::to_string(r) +
                            " col " + std::to_string(c));
        }
    }
}

}  // namespace

Dataset loadDatasetCsv(const std::filesystem::path& path,
                       const std::optional<std::vector<std::uint32_t>>& declared) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw Error("empty CSV file " + path.string());
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    auto headerFields = splitCsvLine(line);

    Dataset d;
    d.numCols = static_cast<std::uint32_t>(headerFields.size());
    d.name = path.stem().string();
    std::vector<std::uint32_t> headerCards;
    headerCards.reserve(headerFields.size());
    for (const auto& f : headerFields) {
        long v = std::atol(f.c_str());
        if (v < 1) throw Error("bad cardinality '" + f + "' in header of " + path.string());
        headerCards.push_back(static_cast<std::uint32_t>(v));
    }
    d.cardinalities = declared ? *declared : headerCards;
    if (d.cardinalities.size() != d.numCols)
        throw Error("declared cardinalities length != column count");

    std::size_t lineNo = 1;
    std::vector<std::int32_t> row;
    while (std::getline(in, line)) {
        ++lineNo;
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (line.empty()) continue;
        auto fields = splitCsvLine(line);
        if (fields.size() != d.numCols)
            throw Error("ragged row at line " + std::to_string(lineNo) + " of " + path.string());
        row.clear();
        for (const auto& f : fields) row.push_back(static_cast<std::int32_t>(std::atol(f.c_str())));
        d.cells.insert(d.cells.end(), row.begin(), row.end());
        ++d.numRows;
    }
    checkCells(d);
    return d;
}

void saveDatasetCsv(const Dataset& d, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    for (std::uint32_t c = 0; c < d.numCols; ++c) out << (c ? "," : "") << d.cardinalities[c];
    out << "\n";
    for (std::size_t r = 0; r < d.numRows; ++r) {
        for (std::uint32_t c = 0; c < d.numCols; ++c) out << (c ? "," : "") << d.at(r, c);
        out << "\n";
    }
}

namespace {
constexpr char kDataMagic[4] = {'S', 'P', 'D', 'S'};
constexpr std::uint32_t kDataVersion = 1;

template <typename T>
void putBytes(std::string& buf, const T& v) {
    const char* p = reinterpret_cast<const char*>(&v);
    buf.append(p, sizeof(T));
}

template <typename T>
T takeBytes(const std::string& buf, std::size_t& off) {
    if (off + sizeof(T) > buf.size()) throw Error("truncated binary file");
    T v;
    std::memcpy(&v, buf.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}
}  // namespace

void saveDatasetBinary(const Dataset& d, const std::filesystem::path& path) {
    std::string buf;
    buf.append(kDataMagic, 4);
    putBytes(buf, kDataVersion);
    putBytes(buf, d.numCols);
    for (auto card : d.cardinalities) putBytes(buf, card);
    putBytes(buf, static_cast<std::uint64_t>(d.numRows));
    for (auto cell : d.cells) putBytes(buf, cell);
    std::uint64_t checksum = fnv1a64(buf.data(), buf.size());
    putBytes(buf, checksum);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

Dataset loadDatasetBinary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 16 || std::memcmp(buf.data(), kDataMagic, 4) != 0)
        throw Error("not a dataset binary file: " + path.string());
    std::uint64_t stored;
    std::memcpy(&stored, buf.data() + buf.size() - 8, 8);
    if (fnv1a64(buf.data(), buf.size() - 8) != stored)
        throw Error("checksum failure in " + path.string());

    std::size_t off = 4;
    auto version = takeBytes<std::uint32_t>(buf, off);
    if (version != kDataVersion) throw Error("unsupported dataset version");
    Dataset d;
    d.numCols = takeBytes<std::uint32_t>(buf, off);
    d.cardinalities.resize(d.numCols);
    for (auto& card : d.cardinalities) card = takeBytes<std::uint32_t>(buf, off);
    d.numRows = takeBytes<std::uint64_t>(buf, off);
    d.cells.resize(d.numRows * d.numCols);
    for (auto& cell : d.cells) cell = takeBytes<std::int32_t>(buf, off);
    d.name = path.stem().string();
    checkCells(d);
    return d;
}

Dataset loadDataset(const std::filesystem::path& path) {
    if (path.extension() == ".csv") return loadDatasetCsv(path);
    return loadDatasetBinary(path);
}

}  // namespace sparsepc
