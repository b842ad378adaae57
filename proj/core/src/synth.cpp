#include "gazesearch/synth.hpp"

#include "gazesearch/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

namespace gazesearch::synth {

void check_spec(const SyntheticSpec& s) {
    auto range = [](int lo, int hi, const char* what) {
        if (lo < 1 || hi < lo) throw std::invalid_argument(std::string("invalid ") + what + " range");
    };
    if (s.images < 1) throw std::invalid_argument("images must be >= 1");
    range(s.min_findings, s.max_findings, "findings");
    range(s.min_wander, s.max_wander, "wander");
    range(s.min_dwell, s.max_dwell, "dwell");
    if (s.width < 32 || s.height < 32) throw std::invalid_argument("image extent must be >= 32");
    if (!(s.noise_radius >= 0.0)) throw std::invalid_argument("noise_radius must be >= 0");
    if (!(s.box_jitter >= 0.0 && s.box_jitter < 0.1)) {
        throw std::invalid_argument("box_jitter must lie in [0, 0.1)");
    }
}

std::map<std::string, Box> anatomy_template(double w, double h) {
    auto box = [&](double l, double t, double r, double b) { return Box{l * w, t * h, r * w, b * h}; };
    return {
        {"right lung", box(0.12, 0.15, 0.47, 0.80)},
        {"left lung", box(0.53, 0.15, 0.88, 0.80)},
        {"cardiac silhouette", box(0.40, 0.45, 0.70, 0.78)},
        {"mediastinum", box(0.42, 0.15, 0.58, 0.55)},
        {"trachea", box(0.46, 0.05, 0.54, 0.35)},
        {"right clavicle", box(0.10, 0.10, 0.45, 0.22)},
        {"left clavicle", box(0.55, 0.10, 0.90, 0.22)},
        {"right costophrenic angle", box(0.10, 0.72, 0.28, 0.88)},
        {"left costophrenic angle", box(0.72, 0.72, 0.90, 0.88)},
        {"right apical zone", box(0.15, 0.12, 0.45, 0.30)},
        {"left apical zone", box(0.55, 0.12, 0.85, 0.30)},
    };
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

void splat(std::vector<double>& canvas, int w, int h, double cx, double cy, double sigma,
           double amplitude) {
    const int reach = static_cast<int>(std::ceil(3.0 * sigma));
    for (int y = std::max(0, static_cast<int>(cy) - reach); y <= std::min(h - 1, static_cast<int>(cy) + reach); ++y) {
        for (int x = std::max(0, static_cast<int>(cx) - reach); x <= std::min(w - 1, static_cast<int>(cx) + reach); ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            canvas[static_cast<std::size_t>(y) * w + x] +=
                amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        }
    }
}

void fill_box(std::vector<double>& canvas, int w, int h, const Box& b, double level) {
    for (int y = std::max(0, static_cast<int>(b.top)); y < std::min(h, static_cast<int>(b.bottom)); ++y) {
        for (int x = std::max(0, static_cast<int>(b.left)); x < std::min(w, static_cast<int>(b.right)); ++x) {
            canvas[static_cast<std::size_t>(y) * w + x] = level;
        }
    }
}

}  // namespace

SyntheticDataset generate(const SyntheticSpec& spec, const FindingVocabulary& vocabulary) {
    check_spec(spec);
    SyntheticDataset out;
    out.relations = RelationMatrix::chexpert_default();
    std::vector<std::string> usable;
    for (const auto& name : vocabulary.names()) {
        if (out.relations.anatomies.count(name)) usable.push_back(name);
    }
    if (usable.empty()) throw std::invalid_argument("no vocabulary finding has related anatomies");

    Rng rng(spec.seed);
    const int W = spec.width, H = spec.height;
    const auto base = anatomy_template(W, H);
    const int width_digits = static_cast<int>(std::to_string(spec.images - 1).size());

    for (int i = 0; i < spec.images; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "syn%0*d", width_digits, i);
        Sample s{id, static_cast<double>(W), static_cast<double>(H), {}, {}, {}};

        for (const auto& [name, b] : base) {
            const double jx = uniform(rng, -spec.box_jitter, spec.box_jitter) * W;
            const double jy = uniform(rng, -spec.box_jitter, spec.box_jitter) * H;
            s.anatomy_boxes[name] = {std::clamp(b.left + jx, 0.0, W - 1.0), std::clamp(b.top + jy, 0.0, H - 1.0),
                                     std::clamp(b.right + jx, 1.0, static_cast<double>(W)),
                                     std::clamp(b.bottom + jy, 1.0, static_cast<double>(H))};
        }

        std::vector<double> canvas(static_cast<std::size_t>(W) * H, 25.0);
        fill_box(canvas, W, H, s.anatomy_boxes["right lung"], 70.0);
        fill_box(canvas, W, H, s.anatomy_boxes["left lung"], 70.0);
        fill_box(canvas, W, H, s.anatomy_boxes["mediastinum"], 120.0);
        fill_box(canvas, W, H, s.anatomy_boxes["cardiac silhouette"], 135.0);
        for (auto& v : canvas) v += uniform(rng, -8.0, 8.0);

        const int n_findings = std::min<int>(uniform_int(rng, spec.min_findings, spec.max_findings),
                                             static_cast<int>(usable.size()));
        std::vector<std::string> pool = usable;
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(n_findings);
        std::sort(pool.begin(), pool.end(), [&](const std::string& a, const std::string& b) {
            return vocabulary.index_of(a) < vocabulary.index_of(b);
        });

        const Box& rl = s.anatomy_boxes["right lung"];
        const Box& ll = s.anatomy_boxes["left lung"];
        double t = uniform(rng, 0.0, 0.3);
        for (const auto& finding : pool) {
            const auto& anatomies = out.relations.anatomies.at(finding);
            const std::string anatomy = anatomies[uniform_int(rng, 0, static_cast<int>(anatomies.size()) - 1)];
            const Box& target = s.anatomy_boxes.at(anatomy);
            const double margin_x = std::min(spec.noise_radius, (target.right - target.left) / 4.0);
            const double margin_y = std::min(spec.noise_radius, (target.bottom - target.top) / 4.0);
            const double lx = uniform(rng, target.left + margin_x, target.right - margin_x);
            const double ly = uniform(rng, target.top + margin_y, target.bottom - margin_y);
            const int findex = static_cast<int>(vocabulary.index_of(finding));
            splat(canvas, W, H, lx, ly, 3.0 + (findex % 4), 140.0);
            out.lesions[s.image_id].push_back({finding, anatomy, lx, ly});

            const double begin = t;
            const int wander = uniform_int(rng, spec.min_wander, spec.max_wander);
            for (int k = 0; k < wander; ++k) {
                double x, y;
                if (uniform(rng, 0.0, 1.0) < 0.8) {
                    const Box& lung = uniform(rng, 0.0, 1.0) < 0.5 ? rl : ll;
                    x = uniform(rng, lung.left, lung.right);
                    y = uniform(rng, lung.top, lung.bottom);
                } else {
                    x = uniform(rng, 0.0, W - 1.0);
                    y = uniform(rng, 0.0, H - 1.0);
                }
                const double d = uniform(rng, 0.15, 0.4);
                s.fixations.push_back({x, y, t, d});
                t += d + uniform(rng, 0.02, 0.05);
            }
            const int dwell = uniform_int(rng, spec.min_dwell, spec.max_dwell);
            for (int k = 0; k < dwell; ++k) {
                const double a = uniform(rng, 0.0, 2.0 * 3.141592653589793);
                const double r = spec.noise_radius * std::sqrt(uniform(rng, 0.0, 1.0));
                const double x = std::clamp(lx + r * std::cos(a), target.left, target.right);
                const double y = std::clamp(ly + r * std::sin(a), target.top, target.bottom);
                const double d = uniform(rng, 0.3, 0.7);
                s.fixations.push_back({x, y, t, d});
                t += d + uniform(rng, 0.02, 0.05);
            }
            s.transcript.push_back({"There is evidence of " + finding + ".", begin, t, {{finding}}});
            t += uniform(rng, 0.1, 0.4);
        }

        image::GrayImage img{W, H, std::vector<std::uint8_t>(canvas.size())};
        for (std::size_t k = 0; k < canvas.size(); ++k) {
            img.pixels[k] = static_cast<std::uint8_t>(std::clamp(std::lround(canvas[k]), 0L, 255L));
        }
        out.images.emplace(s.image_id, std::move(img));
        out.samples.push_back(std::move(s));
    }
    return out;
}

void write(const std::filesystem::path& dir, const SyntheticDataset& data) {
    io::save_samples(dir, data.samples);
    io::save_relation_matrix(dir / "relation_matrix.json", data.relations);
    for (const auto& [id, img] : data.images) image::write_png(dir / "images" / (id + ".png"), img);
}

}  // namespace gazesearch::synth
