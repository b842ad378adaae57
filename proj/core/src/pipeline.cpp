#include "gazesearch/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gazesearch::pipeline {

void check_config(const PipelineConfig& config) {
    if (config.max_length < 2) throw std::invalid_argument("max length M must be >= 2");
    if (config.radius && !(*config.radius > 0.0)) throw std::invalid_argument("radius must be > 0");
    if (!(config.center_duration > 0.0)) {
        throw std::invalid_argument("center duration must be > 0");
    }
}

double finding_cutoff(std::span<const TranscriptSentence> transcript, const FindingLabel& target) {
    if (transcript.empty()) {
        throw PipelineSkip(SkipReason::NotMentioned, "empty transcript");
    }
    std::optional<double> cutoff;
    for (const auto& s : transcript) {
        if (s.mentions(target)) cutoff = s.end;  // last mention wins
    }
    if (!cutoff) {
        throw PipelineSkip(SkipReason::NotMentioned, "finding '" + target.name + "' not mentioned");
    }
    return *cutoff;
}

std::vector<Fixation> map_finding_fixations(std::span<const FreeViewFixation> fixations,
                                            double cutoff) {
    std::vector<Fixation> out;
    for (const auto& f : fixations) {
        if (f.t >= 0.0 && f.t <= cutoff) out.push_back({f.x, f.y, f.d});
    }
    if (out.empty()) {
        throw PipelineSkip(SkipReason::NoFixationsBeforeCutoff, "no fixation before cutoff");
    }
    return out;
}

BoundingBoxSet boxes_for_finding(const RelationMatrix& matrix,
                                 const std::map<std::string, Box>& anatomy_boxes,
                                 const FindingLabel& target) {
    auto it = matrix.anatomies.find(target.name);
    if (it == matrix.anatomies.end()) {
        throw PipelineSkip(SkipReason::NoAnatomyBoxes,
                           "finding '" + target.name + "' missing from relation matrix");
    }
    BoundingBoxSet set{target, {}};
    for (const auto& anatomy : it->second) {
        auto box = anatomy_boxes.find(anatomy);
        if (box != anatomy_boxes.end()) set.boxes.push_back(box->second);
    }
    if (set.boxes.empty()) {
        throw PipelineSkip(SkipReason::NoAnatomyBoxes,
                           "no anatomy box available for '" + target.name + "'");
    }
    return set;
}

bool point_in_boxes(double x, double y, const BoundingBoxSet& boxes, Containment containment) {
    if (boxes.boxes.empty()) return false;
    auto inside = [&](const Box& b) { return b.contains(x, y); };
    if (containment == Containment::Union) {
        return std::any_of(boxes.boxes.begin(), boxes.boxes.end(), inside);
    }
    return std::all_of(boxes.boxes.begin(), boxes.boxes.end(), inside);
}

std::vector<Fixation> RadiusFilterResult::scanpath() const {
    std::vector<Fixation> out;
    out.reserve(clusters.size() + 1);
    out.push_back(center);
    for (const auto& c : clusters) out.push_back(c.centroid);
    return out;
}

namespace {

Cluster aggregate(std::span<const Fixation> fixations, std::vector<std::size_t> members) {
    double sx = 0.0, sy = 0.0, sd = 0.0;
    for (auto i : members) {
        sx += fixations[i].x;
        sy += fixations[i].y;
        sd += fixations[i].d;
    }
    const double n = static_cast<double>(members.size());
    return Cluster{{sx / n, sy / n, sd}, std::move(members)};
}

}  // namespace

RadiusFilterResult radius_filter_clusters(std::span<const Fixation> fixations,
                                          const BoundingBoxSet& boxes, double width,
                                          double height, const PipelineConfig& config) {
    check_config(config);
    if (fixations.empty()) {
        throw PipelineSkip(SkipReason::NoTargetFixation, "no fixations to filter");
    }
    const double r = config.effective_radius(width);
    const auto M = static_cast<std::size_t>(config.max_length);

    // The latest fixation must lie in the target region.
    std::optional<std::size_t> last_inside;
    for (std::size_t i = fixations.size(); i-- > 0;) {
        if (point_in_boxes(fixations[i].x, fixations[i].y, boxes, config.containment)) {
            last_inside = i;
            break;
        }
    }
    if (!last_inside) {
        throw PipelineSkip(SkipReason::NoTargetFixation, "no fixation inside the target boxes");
    }

    RadiusFilterResult result;
    result.center = {width / 2.0, height / 2.0, config.center_duration};
    std::size_t emitted = 1;  // the center counts toward M

    std::vector<std::size_t> current{*last_inside};
    bool full = false;
    for (std::size_t i = *last_inside; i-- > 0;) {
        const double dx = fixations[i].x - fixations[i + 1].x;
        const double dy = fixations[i].y - fixations[i + 1].y;
        if (std::hypot(dx, dy) <= r) {
            current.push_back(i);
            continue;
        }
        result.clusters.push_back(aggregate(fixations, std::move(current)));
        current = {i};
        if (++emitted == M) {
            full = true;
            break;
        }
    }
    if (!full && !current.empty() && emitted < M) {
        result.clusters.push_back(aggregate(fixations, std::move(current)));
    }
    std::reverse(result.clusters.begin(), result.clusters.end());
    return result;
}

std::vector<Fixation> radius_filter(std::span<const Fixation> fixations,
                                    const BoundingBoxSet& boxes, double width, double height,
                                    const PipelineConfig& config) {
    return radius_filter_clusters(fixations, boxes, width, height, config).scanpath();
}

std::size_t constrain_start(std::span<const Fixation> body, const BoundingBoxSet& boxes,
                            Containment containment) {
    const std::size_t n = body.size();
    std::vector<double> in(n + 1, 0.0), out(n + 1, 0.0);
    for (std::size_t k = n; k-- > 0;) {
        const bool inside = point_in_boxes(body[k].x, body[k].y, boxes, containment);
        in[k] = in[k + 1] + (inside ? body[k].d : 0.0);
        out[k] = out[k + 1] + (inside ? 0.0 : body[k].d);
    }
    for (std::size_t k = 0; k < n; ++k) {
        if (in[k] >= out[k]) return k;
    }
    throw PipelineSkip(SkipReason::Unconstrainable,
                       "no suffix with in-box duration >= out-of-box duration");
}

std::vector<Fixation> time_constrain(std::span<const Fixation> scanpath,
                                     const BoundingBoxSet& boxes, const PipelineConfig& config) {
    if (scanpath.empty()) {
        throw PipelineSkip(SkipReason::Unconstrainable, "empty scanpath");
    }
    if (config.center_in_constraint) {
        const auto start = constrain_start(scanpath, boxes, config.containment);
        return {scanpath.begin() + static_cast<std::ptrdiff_t>(start), scanpath.end()};
    }
    const auto body = scanpath.subspan(1);
    if (body.empty()) {
        throw PipelineSkip(SkipReason::Unconstrainable, "scanpath has no body");
    }
    const auto start = constrain_start(body, boxes, config.containment);
    std::vector<Fixation> out;
    out.reserve(body.size() - start + 1);
    out.push_back(scanpath.front());
    out.insert(out.end(), body.begin() + static_cast<std::ptrdiff_t>(start), body.end());
    return out;
}

int ConversionReport::total_skipped() const {
    int n = 0;
    for (const auto& [reason, count] : skipped) n += count;
    return n;
}

ConversionResult convert_sample(const Sample& sample, const RelationMatrix& matrix,
                                const FindingVocabulary& vocabulary,
                                const PipelineConfig& config) {
    check_config(config);
    if (auto violations = validate_sample(sample, vocabulary); !violations.empty()) {
        throw DataError("sample '" + sample.image_id + "': " + violations.front());
    }
    ConversionResult result;
    result.report.image_id = sample.image_id;
    for (const auto& name : vocabulary.names()) {
        const FindingLabel finding{name};
        try {
            const double cutoff = finding_cutoff(sample.transcript, finding);
            const auto mapped = map_finding_fixations(sample.fixations, cutoff);
            const auto boxes = boxes_for_finding(matrix, sample.anatomy_boxes, finding);
            const auto filtered =
                radius_filter(mapped, boxes, sample.width, sample.height, config);
            auto constrained = time_constrain(filtered, boxes, config);
            result.scanpaths.emplace(
                finding, Scanpath{sample.image_id, finding, std::move(constrained), sample.width,
                                  sample.height});
            ++result.report.emitted;
        } catch (const PipelineSkip& skip) {
            ++result.report.skipped[skip.reason()];
        }
    }
    return result;
}

Split split_dataset(std::span<const Scanpath> scanpaths, SplitRatios ratios, std::uint64_t seed) {
    if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9 || ratios.train < 0.0 ||
        ratios.val < 0.0 || ratios.test < 0.0) {
        throw std::invalid_argument("split ratios must be non-negative and sum to 1");
    }
    std::set<std::string> unique;
    for (const auto& s : scanpaths) unique.insert(s.image_id);
    std::vector<std::string> images(unique.begin(), unique.end());
    if (images.size() < 3) {
        throw std::invalid_argument("need at least three images to split");
    }

    std::mt19937_64 rng(seed);
    for (std::size_t i = images.size() - 1; i > 0; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i);
        std::swap(images[i], images[pick(rng)]);
    }

    const double n = static_cast<double>(images.size());
    const auto n_val = static_cast<std::size_t>(std::floor(n * ratios.val + 1e-9));
    const auto n_test = static_cast<std::size_t>(std::floor(n * ratios.test + 1e-9));
    const std::size_t n_train = images.size() - n_val - n_test;

    std::map<std::string, int> bucket;
    for (std::size_t i = 0; i < images.size(); ++i) {
        bucket[images[i]] = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
    }
    Split split;
    for (const auto& s : scanpaths) {
        switch (bucket[s.image_id]) {
            case 0: split.train.push_back(s); break;
            case 1: split.val.push_back(s); break;
            default: split.test.push_back(s); break;
        }
    }
    return split;
}

}  // namespace gazesearch::pipeline
