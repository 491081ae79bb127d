#include "sparsepc/io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sparsepc {

namespace {

constexpr char kModelMagic[4] = {'S', 'P', 'P', 'C'};
constexpr std::uint32_t kModelVersion = 1;
constexpr double kRenormTol = 1e-6;

template <typename T>
void putBytes(std::string& buf, const T& v) {
    buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T takeBytes(const std::string& buf, std::size_t& off) {
    if (off + sizeof(T) > buf.size()) throw Error("truncated model file");
    T v;
    std::memcpy(&v, buf.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

// istream extraction does not accept "inf"/"-inf"; parse tokens by hand.
double readDouble(std::istream& in) {
    std::string token;
    if (!(in >> token)) throw Error("malformed model file: expected number");
    if (token == "-inf") return -std::numeric_limits<double>::infinity();
    if (token == "inf") return std::numeric_limits<double>::infinity();
    char* end = nullptr;
    double v = std::strtod(token.c_str(), &end);
    if (end == token.c_str()) throw Error("malformed number '" + token + "'");
    return v;
}

// Renormalize a log-probability vector if its mass is off by <= 1e-6,
// reject otherwise. -inf entries are preserved.
void renormalizeOrReject(std::vector<double>& logs, const char* what, UnitId id) {
    double mass = 0.0;
    for (double lp : logs) mass += std::exp(lp);
    if (std::abs(mass - 1.0) <= 1e-9) return;
    if (std::abs(mass - 1.0) > kRenormTol)
        throw Error(std::string("load: ") + what + " of unit " + std::to_string(id) +
                    " sum to " + std::to_string(mass));
    double shift = std::log(mass);
    for (double& lp : logs) lp -= shift;
}

void finalizeLoaded(Circuit& c) {
    for (UnitId id = 0; id < c.units.size(); ++id) {
        Unit& u = c.units[id];
        if (u.isInput()) {
            u.scope = Scope(c.numVars);
            u.scope.set(u.variable);
            renormalizeOrReject(u.logProbs, "leaf probabilities", id);
        } else {
            u.scope = Scope(c.numVars);
            for (UnitId ch : u.children) {
                if (ch >= id) throw Error("load: child id " + std::to_string(ch) +
                                          " out of order at unit " + std::to_string(id));
                u.scope.unite(c.units[ch].scope);
            }
            if (u.isSum()) renormalizeOrReject(u.logParams, "edge parameters", id);
        }
    }
    requireValid(c);
}

void saveText(const Circuit& c, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(17);
    out << "sparsepc-text " << kModelVersion << "\n";
    out << "numvars " << c.numVars << "\n";
    out << "cards";
    for (auto card : c.cardinalities) out << " " << card;
    out << "\n";
    out << "units " << c.units.size() << "\n";
    out << "root " << c.root << "\n";
    for (UnitId id = 0; id < c.units.size(); ++id) {
        const Unit& u = c.units[id];
        switch (u.kind) {
            case UnitKind::Input:
                out << "u " << id << " input " << u.variable << " :";
                for (double lp : u.logProbs) out << " " << lp;
                break;
            case UnitKind::Sum:
                out << "u " << id << " sum " << u.children.size();
                for (UnitId ch : u.children) out << " " << ch;
                out << " :";
                for (double lp : u.logParams) out << " " << lp;
                break;
            case UnitKind::Product:
                out << "u " << id << " prod " << u.children.size();
                for (UnitId ch : u.children) out << " " << ch;
                break;
        }
        out << "\n";
    }
}

Circuit loadText(std::istream& in) {
    Circuit c;
    std::string tag;
    std::uint32_t version = 0;
    in >> tag >> version;
    if (tag != "sparsepc-text") throw Error("not a text model file");
    if (version != kModelVersion) throw Error("unsupported model version");
    std::size_t numUnits = 0;
    in >> tag >> c.numVars;
    c.cardinalities.resize(c.numVars);
    in >> tag;
    for (auto& card : c.cardinalities) in >> card;
    in >> tag >> numUnits;
    in >> tag >> c.root;
    if (!in) throw Error("malformed model header");

    c.units.resize(numUnits);
    for (std::size_t k = 0; k < numUnits; ++k) {
        UnitId id;
        std::string kind;
        in >> tag >> id >> kind;
        if (!in || tag != "u" || id >= numUnits) throw Error("malformed unit line");
        Unit& u = c.units[id];
        if (kind == "input") {
            u.kind = UnitKind::Input;
            in >> u.variable >> tag;  // ':'
            if (u.variable >= c.numVars) throw Error("bad variable index");
            u.logProbs.resize(c.cardinalities[u.variable]);
            for (double& lp : u.logProbs) lp = readDouble(in);
        } else if (kind == "sum" || kind == "prod") {
            u.kind = (kind == "sum") ? UnitKind::Sum : UnitKind::Product;
            std::size_t nch = 0;
            in >> nch;
            u.children.resize(nch);
            for (UnitId& ch : u.children) in >> ch;
            if (u.isSum()) {
                in >> tag;  // ':'
                u.logParams.resize(nch);
                for (double& lp : u.logParams) lp = readDouble(in);
            }
        } else {
            throw Error("unknown unit kind '" + kind + "'");
        }
        if (!in) throw Error("malformed unit " + std::to_string(id));
    }
    finalizeLoaded(c);
    return c;
}

void saveBinary(const Circuit& c, const std::filesystem::path& path) {
    std::string buf;
    buf.append(kModelMagic, 4);
    putBytes(buf, kModelVersion);
    putBytes(buf, c.numVars);
    for (auto card : c.cardinalities) putBytes(buf, card);
    putBytes(buf, static_cast<std::uint64_t>(c.units.size()));
    putBytes(buf, c.root);
    for (const auto& u : c.units) {
        putBytes(buf, static_cast<std::uint8_t>(u.kind));
        if (u.isInput()) {
            putBytes(buf, u.variable);
            for (double lp : u.logProbs) putBytes(buf, lp);
        } else {
            putBytes(buf, static_cast<std::uint32_t>(u.children.size()));
            for (UnitId ch : u.children) putBytes(buf, ch);
            if (u.isSum())
                for (double lp : u.logParams) putBytes(buf, lp);
        }
    }
    putBytes(buf, fnv1a64(buf.data(), buf.size()));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

Circuit loadBinary(const std::string& buf) {
    if (buf.size() < 16) throw Error("truncated model file");
    std::uint64_t stored;
    std::memcpy(&stored, buf.data() + buf.size() - 8, 8);
    if (fnv1a64(buf.data(), buf.size() - 8) != stored) throw Error("checksum failure");

    std::size_t off = 4;
    auto version = takeBytes<std::uint32_t>(buf, off);
    if (version != kModelVersion) throw Error("unsupported model version");
    Circuit c;
    c.numVars = takeBytes<std::uint32_t>(buf, off);
    c.cardinalities.resize(c.numVars);
    for (auto& card : c.cardinalities) card = takeBytes<std::uint32_t>(buf, off);
    auto numUnits = takeBytes<std::uint64_t>(buf, off);
    c.root = takeBytes<UnitId>(buf, off);
    c.units.resize(numUnits);
    for (auto& u : c.units) {
        u.kind = static_cast<UnitKind>(takeBytes<std::uint8_t>(buf, off));
        if (u.isInput()) {
            u.variable = takeBytes<std::uint32_t>(buf, off);
            if (u.variable >= c.numVars) throw Error("bad variable index");
            u.logProbs.resize(c.cardinalities[u.variable]);
            for (double& lp : u.logProbs) lp = takeBytes<double>(buf, off);
        } else {
            auto nch = takeBytes<std::uint32_t>(buf, off);
            u.children.resize(nch);
            for (UnitId& ch : u.children) ch = takeBytes<UnitId>(buf, off);
            if (u.isSum()) {
                u.logParams.resize(nch);
                for (double& lp : u.logParams) lp = takeBytes<double>(buf, off);
            }
        }
    }
    finalizeLoaded(c);
    return c;
}

}  // namespace

void saveCircuit(const Circuit& c, const std::filesystem::path& path, ModelFormat format) {
    if (format == ModelFormat::Text) saveText(c, path);
    else saveBinary(c, path);
}

Circuit loadCircuit(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() >= 4 && std::memcmp(buf.data(), kModelMagic, 4) == 0) return loadBinary(buf);
    std::istringstream text(buf);
    return loadText(text);
}

std::vector<std::size_t> paramHistogram(const Circuit& c, std::size_t bins) {
    if (bins < 1) throw Error("paramHistogram: bins must be >= 1");
    std::vector<std::size_t> counts(bins, 0);
    for (const auto& u : c.units) {
        if (!u.isSum()) continue;
        for (double lp : u.logParams) {
            double p = std::exp(lp);
            auto b = static_cast<std::size_t>(p * static_cast<double>(bins));
            counts[std::min(b, bins - 1)]++;
        }
    }
    return counts;
}

void writeHistogramCsv(const std::vector<std::size_t>& counts, std::size_t bins,
                       const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "bin_low,bin_high,count\n";
    for (std::size_t b = 0; b < counts.size(); ++b)
        out << (static_cast<double>(b) / bins) << "," << (static_cast<double>(b + 1) / bins) << ","
            << counts[b] << "\n";
}

}  // namespace sparsepc
