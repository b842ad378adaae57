#include "gazesearch/commands.hpp"

#include "gazesearch/checkpoint.hpp"
#include "gazesearch/error.hpp"
#include "gazesearch/image.hpp"
#include "gazesearch/io.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>

namespace gazesearch::commands {

FindingVocabulary vocabulary_or_default(const fs::path& path) {
    return path.empty() ? FindingVocabulary::chexpert() : io::load_vocabulary(path);
}

namespace {

RelationMatrix relation_matrix_for(const ConvertOptions& o) {
    if (!o.relation_matrix.empty()) return io::load_relation_matrix(o.relation_matrix);
    const auto beside = o.samples_dir / "relation_matrix.json";
    if (fs::exists(beside)) return io::load_relation_matrix(beside);
    return RelationMatrix::chexpert_default();
}

template <class Fn>
auto as_data_error(Fn fn) {
    try {
        return fn();
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
}

}  // namespace

ConvertSummary convert(const ConvertOptions& o) {
    as_data_error([&] {
        pipeline::check_config(o.pipeline);
        return 0;
    });
    const auto vocabulary = vocabulary_or_default(o.vocabulary);
    const auto matrix = relation_matrix_for(o);
    const auto samples = io::load_samples(o.samples_dir, vocabulary);

    ConvertSummary out;
    for (const auto& s : samples) {
        auto r = pipeline::convert_sample(s, matrix, vocabulary, o.pipeline);
        // Vocabulary order, not label order, keeps files stable across renames.
        for (const auto& name : vocabulary.names()) {
            auto it = r.scanpaths.find(FindingLabel{name});
            if (it != r.scanpaths.end()) out.scanpaths.push_back(std::move(it->second));
        }
        out.emitted += r.report.emitted;
        out.skipped += r.report.total_skipped();
        out.reports.push_back(std::move(r.report));
    }
    io::save_scanpaths(o.out_dir / "scanpaths.jsonl", out.scanpaths);
    io::save_conversion_reports(o.out_dir / "conversion_report.jsonl", out.reports);
    if (o.split) {
        const auto split = as_data_error(
            [&] { return pipeline::split_dataset(out.scanpaths, o.ratios, o.seed); });
        io::save_scanpaths(o.out_dir / "scanpaths.train.jsonl", split.train);
        io::save_scanpaths(o.out_dir / "scanpaths.val.jsonl", split.val);
        io::save_scanpaths(o.out_dir / "scanpaths.test.jsonl", split.test);
    }
    return out;
}

metrics::MetricReport evaluate(const EvaluateOptions& o) {
    const auto predictions = io::load_scanpaths(o.predictions);
    const auto references = io::load_scanpaths(o.references);
    const auto report =
        as_data_error([&] { return metrics::evaluate(predictions, references, o.params); });
    io::save_report_json(o.out_dir / "report.json", report);
    io::save_report_csv(o.out_dir / "report.csv", report);
    return report;
}

namespace {

class ImageCache {
public:
    explicit ImageCache(fs::path dir) : dir_(std::move(dir)) {}
    const image::GrayImage& get(const std::string& id) {
        auto it = cache_.find(id);
        if (it == cache_.end()) it = cache_.emplace(id, image::read_png(dir_ / (id + ".png"))).first;
        return it->second;
    }

private:
    fs::path dir_;
    std::map<std::string, image::GrayImage> cache_;
};

std::pair<double, double> extent_of(const Scanpath& s, const image::GrayImage& img) {
    if (s.width > 0.0 && s.height > 0.0) return {s.width, s.height};
    return {static_cast<double>(img.width), static_cast<double>(img.height)};
}

int finding_index(const FindingVocabulary& vocabulary, const Scanpath& s) {
    if (!vocabulary.contains(s.finding.name)) {
        throw DataError("scanpath " + s.image_id + ": finding '" + s.finding.name +
                        "' is not in the vocabulary");
    }
    return static_cast<int>(vocabulary.index_of(s.finding.name));
}

}  // namespace

std::vector<model::TrainExample> build_examples(std::span<const Scanpath> scanpaths,
                                                const fs::path& images_dir,
                                                const FindingVocabulary& vocabulary,
                                                int image_size) {
    ImageCache images(images_dir);
    std::map<std::string, model::Matrix> inputs;
    std::vector<model::TrainExample> out;
    for (const auto& s : scanpaths) {
        const auto& img = images.get(s.image_id);
        auto it = inputs.find(s.image_id);
        if (it == inputs.end()) it = inputs.emplace(s.image_id, image::to_model_input(img, image_size)).first;
        const auto [w, h] = extent_of(s, img);
        out.push_back({it->second, finding_index(vocabulary, s),
                       model::to_model_space(s.fixations, w, h, image_size)});
    }
    return out;
}

std::vector<model::LossRecord> fit(model::ChestSearch& model,
                                   std::span<const model::TrainExample> examples, long steps,
                                   int batch_size, std::uint64_t seed, const fs::path& log_path,
                                   const fs::path& checkpoint_dir, long checkpoint_every) {
    if (examples.empty()) throw DataError("no training examples");
    if (steps < 1 || batch_size < 1) throw DataError("steps and batch size must be >= 1");
    const auto& cfg = model.config();
    model::AdamW optimizer(cfg.learning_rate, cfg.weight_decay);
    std::mt19937_64 rng(seed);

    std::ofstream log;
    if (!log_path.empty()) {
        if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
        log.open(log_path);
        if (!log) throw DataError("cannot write " + log_path.string());
        log << "step,l_tau,l_h,l_d,l\n" << std::setprecision(17);
    }

    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();
    const std::size_t bs = std::min<std::size_t>(batch_size, examples.size());

    std::vector<model::LossRecord> records;
    std::vector<model::TrainExample> batch;
    for (long step = 0; step < steps; ++step) {
        batch.clear();
        while (batch.size() < bs) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            batch.push_back(examples[order[cursor++]]);
        }
        const auto record = model::train_step(model, optimizer, batch, rng);
        records.push_back(record);
        if (log) {
            log << record.step << ',' << record.termination << ',' << record.heatmap << ','
                << record.duration << ',' << record.total << '\n';
        }
        if (!checkpoint_dir.empty() && checkpoint_every > 0 && record.step % checkpoint_every == 0) {
            checkpoint::save(checkpoint_dir / ("checkpoint_step" + std::to_string(record.step) + ".bin"),
                             model, record.step);
        }
    }
    if (!checkpoint_dir.empty()) checkpoint::save(checkpoint_dir / "checkpoint.bin", model, steps);
    return records;
}

TrainResult train(const TrainOptions& o) {
    const auto vocabulary = vocabulary_or_default(o.vocabulary);
    auto cfg = o.model;
    cfg.seed = o.seed;
    cfg.num_queries = static_cast<int>(vocabulary.size());
    as_data_error([&] {
        model::check_config(cfg);
        return 0;
    });

    std::vector<Scanpath> scanpaths;
    if (!o.scanpaths.empty()) {
        scanpaths = io::load_scanpaths(o.scanpaths);
    } else {
        ConvertOptions c;
        c.samples_dir = o.samples_dir;
        c.vocabulary = o.vocabulary;
        c.out_dir = o.out_dir / "converted";
        c.pipeline.max_length = cfg.max_length;
        c.pipeline.center_duration = cfg.center_duration;
        scanpaths = convert(c).scanpaths;
    }
    for (const auto& s : scanpaths) {
        if (static_cast<int>(s.fixations.size()) > cfg.max_length) {
            throw DataError("scanpath " + s.image_id + "/" + s.finding.name + " is longer than max_length");
        }
    }

    const auto examples = build_examples(scanpaths, o.samples_dir / "images", vocabulary, cfg.image_size);
    TrainResult result{{}, model::ChestSearch(cfg)};
    result.log = fit(result.model, examples, o.steps, o.batch_size, o.seed, o.out_dir / "loss.csv",
                     o.out_dir, o.checkpoint_every);
    return result;
}

std::vector<Scanpath> random_scanpaths(std::span<const Scanpath> requests, int max_length,
                                       std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> duration(0.1, 1.0);
    std::uniform_int_distribution<int> length(1, max_length);
    std::vector<Scanpath> out;
    for (const auto& r : requests) {
        if (!(r.width > 0.0 && r.height > 0.0)) {
            throw DataError("random baseline needs the image extent of " + r.image_id);
        }
        Scanpath s{r.image_id, r.finding, {}, r.width, r.height};
        const int n = length(rng);
        for (int i = 0; i < n; ++i) {
            const double x = unit(rng) * r.width;
            const double y = unit(rng) * r.height;
            s.fixations.push_back({x, y, duration(rng)});
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Scanpath> predict(const PredictOptions& o) {
    auto requests = io::load_scanpaths(o.requests);
    std::vector<Scanpath> out;
    if (o.baseline == Baseline::Random) {
        ImageCache images(o.samples_dir / "images");
        for (auto& r : requests) {
            if (!(r.width > 0.0 && r.height > 0.0)) {
                const auto [w, h] = extent_of(r, images.get(r.image_id));
                r.width = w;
                r.height = h;
            }
        }
        out = random_scanpaths(requests, 7, o.seed);
    } else {
        const auto loaded = checkpoint::load(o.checkpoint);
        const auto& net = loaded.model;
        const int S = net.config().image_size;
        const auto vocabulary = vocabulary_or_default(o.vocabulary);
        ImageCache images(o.samples_dir / "images");
        std::mt19937_64 seeds(o.seed);
        for (const auto& r : requests) {
            const auto& img = images.get(r.image_id);
            const auto [w, h] = extent_of(r, img);
            out.push_back(model::predict_scanpath(net, image::to_model_input(img, S),
                                                  finding_index(vocabulary, r), r.image_id,
                                                  r.finding, w, h, seeds(), o.mode));
        }
    }
    io::save_scanpaths(o.out, out);
    return out;
}

synth::SyntheticDataset synthesize(const SynthOptions& o) {
    const auto vocabulary = vocabulary_or_default(o.vocabulary);
    auto data = as_data_error([&] { return synth::generate(o.spec, vocabulary); });
    synth::write(o.out_dir, data);
    return data;
}

std::string report(const ReportOptions& o) {
    if (o.inputs.empty()) throw DataError("report needs at least one input");
    std::vector<io::ReportSummary> rows;
    for (const auto& [name, path] : o.inputs) rows.push_back(io::load_report_summary(path, name));
    const auto table = io::render_table(rows);
    if (!o.out.empty()) {
        if (o.out.has_parent_path()) fs::create_directories(o.out.parent_path());
        std::ofstream f(o.out);
        if (!f) throw DataError("cannot write " + o.out.string());
        f << table;
    }
    return table;
}

}  // namespace gazesearch::commands
