// gazesearch: convert, evaluate, train, predict, synth, report.

#include "gazesearch/commands.hpp"
#include "gazesearch/error.hpp"
#include "gazesearch/io.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>

namespace fs = std::filesystem;
using namespace gazesearch;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Active subcommand only, in a form --config accepts back.
// Echoed configs carry empty strings for unset paths; accept those.
const CLI::Validator kOptionalFile(
    [](std::string& v) { return v.empty() ? std::string() : CLI::ExistingFile(v); }, "FILE");

void echo_config(const CLI::App& sub, const fs::path& dir) {
    fs::create_directories(dir);
    std::ofstream out(dir / "effective_config.toml");
    out << '[' << sub.get_name() << "]\n" << sub.config_to_str(true, false);
}

const std::map<std::string, pipeline::Containment> kContainment{
    {"union", pipeline::Containment::Union}, {"intersection", pipeline::Containment::Intersection}};
const std::map<std::string, model::MapChoice> kMaps{{"low", model::MapChoice::Low},
                                                    {"high", model::MapChoice::High}};
const std::map<std::string, model::DecodeMode> kModes{{"sample", model::DecodeMode::Sample},
                                                      {"argmax", model::DecodeMode::Argmax}};
const std::map<std::string, commands::Baseline> kBaselines{{"none", commands::Baseline::None},
                                                           {"random", commands::Baseline::Random}};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finding-aware scanpath toolkit for chest X-ray reading"};
    app.set_config("--config", "", "TOML-style config file; [section] names a subcommand");
    app.require_subcommand(1);

    // convert
    commands::ConvertOptions conv;
    auto* c = app.add_subcommand("convert", "Turn free-view gaze into finding-aware scanpaths");
    c->add_option("--samples", conv.samples_dir, "Sample directory")->required()->check(CLI::ExistingDirectory);
    c->add_option("--relation-matrix", conv.relation_matrix, "Finding-to-anatomy JSON")->check(kOptionalFile);
    c->add_option("--vocabulary", conv.vocabulary, "Finding names file")->check(kOptionalFile);
    c->add_option("--out", conv.out_dir, "Output directory")->required();
    c->add_option("--max-length", conv.pipeline.max_length, "Maximum scanpath length, center included")
        ->capture_default_str();
    c->add_option("--radius", conv.pipeline.radius, "Clustering radius in pixels (default width/16)");
    c->add_option("--center-duration", conv.pipeline.center_duration, "Duration of the center fixation")
        ->capture_default_str();
    c->add_option("--containment", conv.pipeline.containment, "Box containment: union or intersection")
        ->transform(CLI::CheckedTransformer(kContainment, CLI::ignore_case))
        ->default_str("union");
    c->add_flag("--center-in-constraint", conv.pipeline.center_in_constraint,
                "Count the center fixation in the time constraint");
    auto* split_flag = c->add_flag("--split", conv.split, "Also write train/val/test scanpath files");
    c->add_option("--train-ratio", conv.ratios.train, "Train fraction of images")->capture_default_str()->needs(split_flag);
    c->add_option("--val-ratio", conv.ratios.val, "Validation fraction of images")->capture_default_str()->needs(split_flag);
    c->add_option("--test-ratio", conv.ratios.test, "Test fraction of images")->capture_default_str()->needs(split_flag);
    c->add_option("--seed", conv.seed, "Seed for the split")->capture_default_str();

    // evaluate
    commands::EvaluateOptions eval;
    auto* e = app.add_subcommand("evaluate", "Score predicted scanpaths against references");
    e->add_option("--predictions", eval.predictions, "Predicted scanpaths")->required()->check(CLI::ExistingFile);
    e->add_option("--references", eval.references, "Reference scanpaths")->required()->check(CLI::ExistingFile);
    e->add_option("--out", eval.out_dir, "Output directory for report.json and report.csv")->required();
    e->add_option("--grid-cols", eval.params.scanmatch.cols, "ScanMatch grid columns")->capture_default_str();
    e->add_option("--grid-rows", eval.params.scanmatch.rows, "ScanMatch grid rows")->capture_default_str();
    e->add_option("--threshold", eval.params.scanmatch.substitution_threshold, "ScanMatch substitution threshold (default diagonal/4)");
    e->add_option("--gap", eval.params.scanmatch.gap_penalty, "ScanMatch gap penalty")->capture_default_str();
    e->add_option("--duration-bin", eval.params.scanmatch.duration_bin, "ScanMatch duration bin, seconds")
        ->capture_default_str();
    e->add_option("--sed-cols", eval.params.sed_cols, "SED grid columns")->capture_default_str();
    e->add_option("--sed-rows", eval.params.sed_rows, "SED grid rows")->capture_default_str();
    e->add_option("--stde-k", eval.params.stde_k, "STDE window")->capture_default_str();
    e->add_flag("--simplify", eval.params.multimatch_simplify, "Simplify scanpaths before MultiMatch");
    e->add_option("--simplify-amplitude", eval.params.simplify_amplitude, "Amplitude threshold, fraction of diagonal")
        ->capture_default_str();
    e->add_option("--simplify-direction", eval.params.simplify_direction, "Direction threshold, radians")
        ->capture_default_str();

    // train
    commands::TrainOptions tr;
    auto& mc = tr.model;
    auto* t = app.add_subcommand("train", "Train the scanpath model");
    t->add_option("--samples", tr.samples_dir, "Sample directory with images/")->required()->check(CLI::ExistingDirectory);
    t->add_option("--scanpaths", tr.scanpaths, "Training scanpaths (default: convert --samples)")->check(kOptionalFile);
    t->add_option("--vocabulary", tr.vocabulary, "Finding names file")->check(kOptionalFile);
    t->add_option("--out", tr.out_dir, "Output directory")->required();
    t->add_option("--steps", tr.steps, "Optimizer steps")->capture_default_str();
    t->add_option("--batch-size", tr.batch_size, "Examples per step")->capture_default_str();
    t->add_option("--checkpoint-every", tr.checkpoint_every, "Checkpoint interval in steps (0: only at the end)")
        ->capture_default_str();
    t->add_option("--image-size", mc.image_size, "Model input size, multiple of 32")->capture_default_str();
    t->add_option("--embed-dim", mc.embed_dim, "Embedding width")->capture_default_str();
    t->add_option("--decoder-layers", mc.decoder_layers, "Decoder layers")->capture_default_str();
    t->add_option("--embed-layers", mc.embed_layers, "Self-attention layers over fixation tokens")->capture_default_str();
    t->add_option("--heads", mc.heads, "Attention heads")->capture_default_str();
    t->add_option("--max-length", mc.max_length, "Maximum scanpath length")->capture_default_str();
    t->add_option("--mlp-layers", mc.mlp_layers, "Distribution head MLP depth")->capture_default_str();
    t->add_option("--focal-alpha", mc.focal_alpha, "Focal loss alpha")->capture_default_str();
    t->add_option("--focal-gamma", mc.focal_gamma, "Focal loss gamma")->capture_default_str();
    t->add_option("--heatmap-sigma", mc.heatmap_sigma, "Target heatmap sigma in cells")->capture_default_str();
    t->add_option("--reference-map", mc.reference_map, "Reference tokens from the low or high map")
        ->transform(CLI::CheckedTransformer(kMaps, CLI::ignore_case))
        ->default_str("low");
    t->add_option("--indexing-map", mc.indexing_map, "Fixation features from the low or high map")
        ->transform(CLI::CheckedTransformer(kMaps, CLI::ignore_case))
        ->default_str("high");
    t->add_option("--termination-threshold", mc.termination_threshold, "Stop probability at inference")
        ->capture_default_str();
    t->add_option("--positional-heatmap", mc.positional_heatmap, "Add cell positions to the heatmap map")
        ->capture_default_str();
    t->add_option("--center-duration", mc.center_duration, "Duration of the center fixation")->capture_default_str();
    t->add_option("--lr", mc.learning_rate, "AdamW learning rate")->capture_default_str();
    t->add_option("--weight-decay", mc.weight_decay, "AdamW weight decay")->capture_default_str();
    t->add_option("--seed", tr.seed, "Seed for initialization, batching and noise")->capture_default_str();

    // predict
    commands::PredictOptions pr;
    auto* p = app.add_subcommand("predict", "Predict scanpaths for (image, finding) requests");
    p->add_option("--checkpoint", pr.checkpoint, "Model checkpoint")->check(kOptionalFile);
    p->add_option("--samples", pr.samples_dir, "Sample directory with images/")->required()->check(CLI::ExistingDirectory);
    p->add_option("--requests", pr.requests, "Scanpath file naming the (image_id, finding) pairs")
        ->required()
        ->check(CLI::ExistingFile);
    p->add_option("--vocabulary", pr.vocabulary, "Finding names file")->check(kOptionalFile);
    p->add_option("--out", pr.out, "Output scanpath file")->required();
    p->add_option("--mode", pr.mode, "Cell choice: sample or argmax")
        ->transform(CLI::CheckedTransformer(kModes, CLI::ignore_case))
        ->default_str("sample");
    p->add_option("--baseline", pr.baseline, "none, or random for the uniform baseline")
                             ->transform(CLI::CheckedTransformer(kBaselines, CLI::ignore_case))
                             ->default_str("none");
    p->add_option("--seed", pr.seed, "Sampling seed")->capture_default_str();

    // synth
    commands::SynthOptions sy;
    auto& ss = sy.spec;
    auto* s = app.add_subcommand("synth", "Generate a synthetic sample directory");
    s->add_option("--out", sy.out_dir, "Output sample directory")->required();
    s->add_option("--vocabulary", sy.vocabulary, "Finding names file")->check(kOptionalFile);
    s->add_option("--images", ss.images, "Number of images")->capture_default_str();
    s->add_option("--min-findings", ss.min_findings, "Fewest findings per image")->capture_default_str();
    s->add_option("--max-findings", ss.max_findings, "Most findings per image")->capture_default_str();
    s->add_option("--min-wander", ss.min_wander, "Fewest wandering fixations per finding")->capture_default_str();
    s->add_option("--max-wander", ss.max_wander, "Most wandering fixations per finding")->capture_default_str();
    s->add_option("--min-dwell", ss.min_dwell, "Fewest dwell fixations per finding")->capture_default_str();
    s->add_option("--max-dwell", ss.max_dwell, "Most dwell fixations per finding")->capture_default_str();
    s->add_option("--noise-radius", ss.noise_radius, "Dwell scatter radius in pixels")->capture_default_str();
    s->add_option("--width", ss.width, "Image width")->capture_default_str();
    s->add_option("--height", ss.height, "Image height")->capture_default_str();
    s->add_option("--box-jitter", ss.box_jitter, "Anatomy box jitter, fraction of extent")->capture_default_str();
    s->add_option("--seed", ss.seed, "Generator seed")->capture_default_str();

    // report
    std::vector<std::string> inputs;
    fs::path report_out;
    auto* r = app.add_subcommand("report", "Render MetricReport JSONs as a comparison table");
    r->add_option("--input", inputs, "NAME=PATH of a report.json; repeatable")->required();
    r->add_option("--out", report_out, "Also write the table here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        if (err.get_exit_code() == 0) return app.exit(err);
        std::cerr << "gazesearch: " << err.what() << '\n';
        return 1;
    }

    try {
        if (c->parsed()) {
            try {
                pipeline::check_config(conv.pipeline);
            } catch (const std::invalid_argument& ex) {
                throw UsageError(ex.what());
            }
            echo_config(*c, conv.out_dir);
            const auto out = commands::convert(conv);
            std::cout << "emitted " << out.emitted << " scanpaths, skipped " << out.skipped << '\n';
        } else if (e->parsed()) {
            echo_config(*e, eval.out_dir);
            const auto rep = commands::evaluate(eval);
            std::cout << io::report_json(rep) << '\n';
        } else if (t->parsed()) {
            try {
                auto check = mc;
                check.num_queries = static_cast<int>(commands::vocabulary_or_default(tr.vocabulary).size());
                model::check_config(check);
            } catch (const std::invalid_argument& ex) {
                throw UsageError(ex.what());
            }
            if (tr.steps < 1 || tr.batch_size < 1 || tr.checkpoint_every < 0) {
                throw UsageError("--steps and --batch-size must be >= 1, --checkpoint-every >= 0");
            }
            echo_config(*t, tr.out_dir);
            const auto res = commands::train(tr);
            std::cout << "step " << res.log.back().step << " loss " << res.log.back().total << '\n';
        } else if (p->parsed()) {
            if (pr.baseline == commands::Baseline::None && pr.checkpoint.empty()) {
                throw UsageError("--checkpoint is required unless --baseline random");
            }
            if (pr.baseline == commands::Baseline::Random && !pr.checkpoint.empty()) {
                throw UsageError("--checkpoint and --baseline random are mutually exclusive");
            }
            echo_config(*p, pr.out.has_parent_path() ? pr.out.parent_path() : fs::path("."));
            const auto out = commands::predict(pr);
            std::cout << "predicted " << out.size() << " scanpaths\n";
        } else if (s->parsed()) {
            try {
                synth::check_spec(ss);
            } catch (const std::invalid_argument& ex) {
                throw UsageError(ex.what());
            }
            echo_config(*s, sy.out_dir);
            const auto data = commands::synthesize(sy);
            std::cout << "wrote " << data.samples.size() << " samples\n";
        } else if (r->parsed()) {
            commands::ReportOptions ro;
            ro.out = report_out;
            for (const auto& in : inputs) {
                const auto eq = in.find('=');
                if (eq == std::string::npos || eq == 0 || eq + 1 == in.size()) {
                    throw UsageError("--input expects NAME=PATH, got '" + in + "'");
                }
                ro.inputs.emplace_back(in.substr(0, eq), in.substr(eq + 1));
            }
            if (!report_out.empty() && report_out.has_parent_path()) echo_config(*r, report_out.parent_path());
            std::cout << commands::report(ro);
        }
    } catch (const UsageError& ex) {
        std::cerr << "gazesearch: " << ex.what() << '\n';
        return 1;
    } catch (const NumericError& ex) {
        std::cerr << "gazesearch: numeric failure: " << ex.what() << '\n';
        return 3;
    } catch (const DataError& ex) {
        std::cerr << "gazesearch: data error: " << ex.what() << '\n';
        return 2;
    } catch (const std::exception& ex) {
        std::cerr << "gazesearch: data error: " << ex.what() << '\n';
        return 2;
    }
    return 0;
}
