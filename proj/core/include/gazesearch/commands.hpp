#pragma once
// Command implementations behind the CLI. Each throws DataError for bad
// inputs and NumericError for numeric failures; the CLI maps those to exit
// codes 2 and 3.

#include "gazesearch/metrics.hpp"
#include "gazesearch/model.hpp"
#include "gazesearch/pipeline.hpp"
#include "gazesearch/synth.hpp"
#include "gazesearch/train.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gazesearch::commands {

namespace fs = std::filesystem;

// Vocabulary from a file, or the CheXpert labels when `path` is empty.
FindingVocabulary vocabulary_or_default(const fs::path& path);

struct ConvertOptions {
    fs::path samples_dir;
    fs::path relation_matrix;  // empty: <samples_dir>/relation_matrix.json, else built-in
    fs::path vocabulary;
    fs::path out_dir;
    pipeline::PipelineConfig pipeline;
    bool split = false;
    pipeline::SplitRatios ratios;
    std::uint64_t seed = 0;
};

struct ConvertSummary {
    std::vector<Scanpath> scanpaths;
    std::vector<pipeline::ConversionReport> reports;
    int emitted = 0;
    int skipped = 0;
};

// Writes scanpaths.jsonl and conversion_report.jsonl; with `split`, also
// scanpaths.{train,val,test}.jsonl.
ConvertSummary convert(const ConvertOptions& options);

struct EvaluateOptions {
    fs::path predictions;
    fs::path references;
    fs::path out_dir;  // report.json and report.csv
    metrics::MetricParams params;
};

metrics::MetricReport evaluate(const EvaluateOptions& options);

struct TrainOptions {
    fs::path samples_dir;  // images/<id>.png, and the samples when `scanpaths` is empty
    fs::path scanpaths;    // empty: convert samples_dir in memory
    fs::path vocabulary;
    fs::path out_dir;      // loss.csv, checkpoint.bin, checkpoint_step<N>.bin
    model::ModelConfig model;  // num_queries and seed are overridden
    long steps = 200;
    int batch_size = 8;
    long checkpoint_every = 0;  // 0 disables periodic checkpoints
    std::uint64_t seed = 0;
};

struct TrainResult {
    std::vector<model::LossRecord> log;
    model::ChestSearch model;
};

TrainResult train(const TrainOptions& options);

// Model-ready examples, in scanpath order. Extents come from the scanpath,
// falling back to the PNG size.
std::vector<model::TrainExample> build_examples(std::span<const Scanpath> scanpaths,
                                                const fs::path& images_dir,
                                                const FindingVocabulary& vocabulary,
                                                int image_size);

// Runs training on prepared examples. `log_path` may be empty.
std::vector<model::LossRecord> fit(model::ChestSearch& model,
                                   std::span<const model::TrainExample> examples, long steps,
                                   int batch_size, std::uint64_t seed,
                                   const fs::path& log_path = {},
                                   const fs::path& checkpoint_dir = {}, long checkpoint_every = 0);

enum class Baseline { None, Random };

struct PredictOptions {
    fs::path checkpoint;  // unused for the random baseline
    fs::path samples_dir; // images/<id>.png
    fs::path requests;    // scanpath file naming the (image_id, finding) pairs
    fs::path vocabulary;
    fs::path out;         // scanpath file
    model::DecodeMode mode = model::DecodeMode::Sample;
    Baseline baseline = Baseline::None;
    std::uint64_t seed = 0;
};

std::vector<Scanpath> predict(const PredictOptions& options);

// Uniform coordinates over the image, durations uniform in [0.1, 1] s and
// length uniform in {1, ..., max_length}.
std::vector<Scanpath> random_scanpaths(std::span<const Scanpath> requests, int max_length,
                                       std::uint64_t seed);

struct SynthOptions {
    synth::SyntheticSpec spec;
    fs::path vocabulary;
    fs::path out_dir;
};

synth::SyntheticDataset synthesize(const SynthOptions& options);

struct ReportOptions {
    std::vector<std::pair<std::string, fs::path>> inputs;  // (method name, report.json)
    fs::path out;  // empty: not written
};

std::string report(const ReportOptions& options);

}  // namespace gazesearch::commands
