#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "sparsepc/dataset.hpp"
#include "sparsepc/flows.hpp"
#include "sparsepc/grower.hpp"
#include "sparsepc/io.hpp"
#include "sparsepc/pruner.hpp"
#include "sparsepc/sampler.hpp"
#include "sparsepc/structures.hpp"
#include "sparsepc/trainer.hpp"

namespace fs = std::filesystem;
using namespace sparsepc;

namespace {

constexpr const char* kVersion = "spc 1.0.0";

// Rerun recipe written next to every output: tool version, subcommand, and
// the full resolved flag set (readable back through --config).
void writeManifest(const CLI::App& sub, const fs::path& primaryOutput) {
    fs::path dir = primaryOutput.has_parent_path() ? primaryOutput.parent_path() : fs::path(".");
    fs::create_directories(dir);
    std::ofstream out(dir / (primaryOutput.filename().string() + ".manifest"));
    out << "# " << kVersion << "\n# subcommand: " << sub.get_name() << "\n";
    out << sub.config_to_str(true, false);
}

ModelFormat formatFromName(const std::string& name) {
    if (name == "text") return ModelFormat::Text;
    if (name == "binary") return ModelFormat::Binary;
    throw Error("unknown model format: " + name);
}

EmConfig emFromFlags(std::size_t batch, double gamma, std::size_t epochs, double alphaStart,
                     double alphaEnd, std::uint64_t seed) {
    EmConfig em;
    em.batchSize = batch;
    em.smoothing = gamma;
    em.schedule = {{alphaStart, alphaEnd, epochs}};
    em.seed = seed;
    return em;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparse probabilistic circuit toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::string modelPath, dataPath, trainPath, validPath, outPath, treeOut, format = "binary";
    std::string heuristicName = "flow";
    std::uint64_t seed = 0;
    double fraction = 0.75, sigma2 = 0.1, gamma = 0.01, alphaStart = 1.0, alphaEnd = 0.1;
    double miSmoothing = 0.1, leafSmoothing = 0.01, budget = 0.01, stepFraction = 0.05;
    std::size_t hidden = 16, buckets = 0, epochs = 50, batch = 256, bins = 20, count = 1000;
    std::size_t maxIterations = 5, patience = 2;
    bool reportBounds = false, fullBatch = false;

    auto addConfig = [](CLI::App* sub) {
        sub->set_config("--config", "", "key=value config file; flags override");
    };

    auto* hclt = app.add_subcommand("build-hclt", "compile a hidden Chow-Liu tree circuit");
    hclt->add_option("--train", trainPath, "training data")->required();
    hclt->add_option("--hidden", hidden, "latent states per tree node");
    hclt->add_option("--smoothing", leafSmoothing, "leaf marginal smoothing");
    hclt->add_option("--mi-smoothing", miSmoothing, "mutual information count smoothing");
    hclt->add_option("--buckets", buckets, "quantization buckets for MI estimation (0 = off)");
    hclt->add_option("--seed", seed, "parameter seed");
    hclt->add_option("--out", outPath, "output model path")->required();
    hclt->add_option("--tree-out", treeOut, "also write the tree edge list");
    hclt->add_option("--format", format, "model format: text|binary");
    addConfig(hclt);

    auto* train = app.add_subcommand("train", "EM parameter learning");
    train->add_option("--model", modelPath, "input model")->required();
    train->add_option("--train", trainPath, "training data")->required();
    train->add_option("--valid", validPath, "validation data");
    train->add_option("--epochs", epochs, "EM epochs");
    train->add_option("--batch", batch, "minibatch size");
    train->add_option("--gamma", gamma, "Laplace smoothing pseudo-flow");
    train->add_option("--alpha-start", alphaStart, "step size at the first epoch");
    train->add_option("--alpha-end", alphaEnd, "step size at the last epoch");
    train->add_flag("--full-batch", fullBatch, "deterministic full-batch EM (alpha=1)");
    train->add_option("--seed", seed, "shuffle seed");
    train->add_option("--out", outPath, "output model path")->required();
    train->add_option("--format", format, "model format: text|binary");
    addConfig(train);

    auto* prunecmd = app.add_subcommand("prune", "drop low-scoring sum edges");
    prunecmd->add_option("--model", modelPath, "input model")->required();
    prunecmd->add_option("--dataset", dataPath, "scoring data (required for flow heuristic)");
    prunecmd->add_option("--heuristic", heuristicName, "rand|param|flow");
    prunecmd->add_option("--fraction", fraction, "fraction of sum edges to drop");
    prunecmd->add_option("--seed", seed, "seed for the rand heuristic");
    prunecmd->add_flag("--report-bounds", reportBounds,
                       "include exact and bounded likelihood-drop figures in the report");
    prunecmd->add_option("--out", outPath, "output model path")->required();
    prunecmd->add_option("--format", format, "model format: text|binary");
    addConfig(prunecmd);

    auto* growcmd = app.add_subcommand("grow", "duplicate units with parameter noise");
    growcmd->add_option("--model", modelPath, "input model")->required();
    growcmd->add_option("--sigma2", sigma2, "multiplicative noise variance");
    growcmd->add_option("--seed", seed, "noise seed");
    growcmd->add_option("--out", outPath, "output model path")->required();
    growcmd->add_option("--format", format, "model format: text|binary");
    addConfig(growcmd);

    auto* spgrow = app.add_subcommand("spgrow", "iterated prune-grow-finetune structure learning");
    spgrow->add_option("--model", modelPath, "initial model")->required();
    spgrow->add_option("--train", trainPath, "training data")->required();
    spgrow->add_option("--valid", validPath, "validation data")->required();
    spgrow->add_option("--fraction", fraction, "prune fraction per iteration");
    spgrow->add_option("--sigma2", sigma2, "grow noise variance");
    spgrow->add_option("--iterations", maxIterations, "max prune-grow iterations");
    spgrow->add_option("--patience", patience, "iterations without validation gain before stop");
    spgrow->add_option("--epochs", epochs, "finetune epochs per iteration");
    spgrow->add_option("--batch", batch, "minibatch size");
    spgrow->add_option("--gamma", gamma, "Laplace smoothing pseudo-flow");
    spgrow->add_option("--alpha-start", alphaStart, "step size at the first epoch");
    spgrow->add_option("--alpha-end", alphaEnd, "step size at the last epoch");
    spgrow->add_option("--seed", seed, "seed");
    spgrow->add_option("--out", outPath, "output model path")->required();
    spgrow->add_option("--format", format, "model format: text|binary");
    addConfig(spgrow);

    auto* compresscmd = app.add_subcommand("compress", "prune as far as the likelihood budget allows");
    compresscmd->add_option("--model", modelPath, "input model")->required();
    compresscmd->add_option("--train", trainPath, "training data")->required();
    compresscmd->add_option("--step-fraction", stepFraction, "edges dropped per round");
    compresscmd->add_option("--budget", budget, "allowed relative train-LL drop");
    compresscmd->add_option("--epochs", epochs, "finetune epochs per round");
    compresscmd->add_option("--batch", batch, "minibatch size");
    compresscmd->add_option("--gamma", gamma, "Laplace smoothing pseudo-flow");
    compresscmd->add_option("--alpha-start", alphaStart, "step size at the first epoch");
    compresscmd->add_option("--alpha-end", alphaEnd, "step size at the last epoch");
    compresscmd->add_option("--seed", seed, "seed");
    compresscmd->add_option("--out", outPath, "output model path")->required();
    compresscmd->add_option("--format", format, "model format: text|binary");
    addConfig(compresscmd);

    auto* evalcmd = app.add_subcommand("eval", "mean log-likelihood and bits per dimension");
    evalcmd->add_option("--model", modelPath, "model")->required();
    evalcmd->add_option("--data", dataPath, "evaluation data")->required();
    addConfig(evalcmd);

    auto* samplecmd = app.add_subcommand("sample", "draw rows from the model");
    samplecmd->add_option("--model", modelPath, "model")->required();
    samplecmd->add_option("--count", count, "rows to draw");
    samplecmd->add_option("--seed", seed, "sampling seed");
    samplecmd->add_option("--out", outPath, "output CSV path")->required();
    addConfig(samplecmd);

    auto* histcmd = app.add_subcommand("histogram", "sum-parameter histogram CSV");
    histcmd->add_option("--model", modelPath, "model")->required();
    histcmd->add_option("--bins", bins, "equal-width bins over [0,1]");
    histcmd->add_option("--out", outPath, "output CSV path")->required();
    addConfig(histcmd);

    auto* validatecmd = app.add_subcommand("validate", "check structural invariants");
    validatecmd->add_option("--model", modelPath, "model")->required();
    addConfig(validatecmd);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*hclt) {
            Dataset data = loadDataset(trainPath);
            HcltConfig config;
            config.hiddenStates = static_cast<std::uint32_t>(hidden);
            config.miSmoothing = miSmoothing;
            config.miMaxBuckets = static_cast<std::uint32_t>(buckets);
            config.leafSmoothing = leafSmoothing;
            config.seed = seed;
            if (!treeOut.empty()) {
                auto mi = estimateMutualInfo(data, miSmoothing, config.miMaxBuckets);
                ChowLiuTree tree = chowLiu(mi, config.root);
                std::ofstream out(treeOut);
                for (auto [p, c] : tree.edges) out << p << "," << c << "\n";
                Circuit circuit = compileHclt(tree, data, config);
                saveCircuit(circuit, outPath, formatFromName(format));
            } else {
                saveCircuit(buildHclt(data, config), outPath, formatFromName(format));
            }
            writeManifest(*hclt, outPath);
        } else if (*train) {
            Circuit circuit = loadCircuit(modelPath);
            Dataset trainData = loadDataset(trainPath);
            Dataset validData;
            if (!validPath.empty()) validData = loadDataset(validPath);
            const Dataset* valid = validPath.empty() ? nullptr : &validData;
            TrainResult result =
                fullBatch ? emFullBatch(circuit, trainData, gamma, epochs, valid)
                          : emStochastic(circuit, trainData,
                                         emFromFlags(batch, gamma, epochs, alphaStart, alphaEnd,
                                                     seed),
                                         valid);
            saveCircuit(result.circuit, outPath, formatFromName(format));
            result.log.writeCsv(fs::path(outPath).string() + ".trainlog.csv");
            writeManifest(*train, outPath);
        } else if (*prunecmd) {
            Circuit circuit = loadCircuit(modelPath);
            PruneHeuristic heuristic;
            FlowTable flows;
            Dataset data;
            if (!dataPath.empty()) data = loadDataset(dataPath);
            if (heuristicName == "rand") {
                heuristic = PruneHeuristic::rand(seed);
            } else if (heuristicName == "param") {
                heuristic = PruneHeuristic::param();
            } else if (heuristicName == "flow") {
                if (data.empty()) throw Error("flow heuristic needs --dataset");
                flows = aggregateFlows(circuit, data);
                heuristic = PruneHeuristic::flow(flows);
            } else {
                throw Error("unknown heuristic: " + heuristicName);
            }
            PruneResult result = prune(circuit, heuristic, fraction);
            if (reportBounds) {
                if (data.empty()) throw Error("--report-bounds needs --dataset");
                std::vector<double> exact;
                exact.reserve(result.report.prunedEdges.size());
                for (auto edge : result.report.prunedEdges)
                    exact.push_back(exactSingleEdgeDrop(circuit, edge, data));
                result.report.exactDropPerEdge = std::move(exact);
                DropBound bound = multiEdgeDropBound(circuit, result.report.prunedEdges, data);
                result.report.boundedDrop = bound.upperBound;
                result.report.approxDrop = bound.approximation;
            }
            saveCircuit(result.circuit, outPath, formatFromName(format));
            std::ofstream report(fs::path(outPath).string() + ".report.txt");
            report << result.report.describe();
            std::cout << result.report.describe();
            writeManifest(*prunecmd, outPath);
        } else if (*growcmd) {
            Circuit circuit = loadCircuit(modelPath);
            GrowResult result = grow(circuit, {sigma2, seed});
            saveCircuit(result.circuit, outPath, formatFromName(format));
            writeManifest(*growcmd, outPath);
        } else if (*spgrow) {
            Circuit circuit = loadCircuit(modelPath);
            Dataset trainData = loadDataset(trainPath);
            Dataset validData = loadDataset(validPath);
            LoopConfig loop{fraction, sigma2, maxIterations, patience};
            TrainResult result =
                structureLearn(circuit, trainData, validData, loop,
                               emFromFlags(batch, gamma, epochs, alphaStart, alphaEnd, seed));
            saveCircuit(result.circuit, outPath, formatFromName(format));
            result.log.writeCsv(fs::path(outPath).string() + ".trainlog.csv");
            writeManifest(*spgrow, outPath);
        } else if (*compresscmd) {
            Circuit circuit = loadCircuit(modelPath);
            Dataset trainData = loadDataset(trainPath);
            CompressResult result =
                compress(circuit, trainData, stepFraction, budget,
                         emFromFlags(batch, gamma, epochs, alphaStart, alphaEnd, seed));
            saveCircuit(result.circuit, outPath, formatFromName(format));
            result.log.writeCsv(fs::path(outPath).string() + ".trainlog.csv");
            std::cout << "compression_rate " << result.compressionRate << "\n";
            writeManifest(*compresscmd, outPath);
        } else if (*evalcmd) {
            Circuit circuit = loadCircuit(modelPath);
            Dataset data = loadDataset(dataPath);
            double ll = logLikelihood(circuit, data);
            std::cout.precision(12);
            std::cout << "mean_ll " << ll << "\nbpd " << bitsPerDimension(circuit, data) << "\n";
        } else if (*samplecmd) {
            Circuit circuit = loadCircuit(modelPath);
            Sampler sampler(circuit);
            saveDatasetCsv(sampler.sampleBatch(count, seed), outPath);
            writeManifest(*samplecmd, outPath);
        } else if (*histcmd) {
            Circuit circuit = loadCircuit(modelPath);
            writeHistogramCsv(paramHistogram(circuit, bins), bins, outPath);
            writeManifest(*histcmd, outPath);
        } else if (*validatecmd) {
            Circuit circuit = loadCircuit(modelPath);
            auto violations = validate(circuit);
            for (const auto& v : violations)
                std::cerr << "unit " << v.unit << " " << ruleName(v.rule) << ": " << v.detail
                          << "\n";
            if (!violations.empty()) return 2;
            std::cout << "ok: " << circuit.units.size() << " units, " << circuit.sumEdgeCount()
                      << " sum edges\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
