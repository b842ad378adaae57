#include "gazesearch/types.hpp"

#include "gazesearch/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gazesearch {

const char* to_string(SkipReason reason) {
    switch (reason) {
        case SkipReason::NotMentioned: return "not_mentioned";
        case SkipReason::NoFixationsBeforeCutoff: return "no_fixations_before_cutoff";
        case SkipReason::NoAnatomyBoxes: return "no_anatomy_boxes";
        case SkipReason::NoTargetFixation: return "no_target_fixation";
        case SkipReason::Unconstrainable: return "unconstrainable";
    }
    return "unknown";
}

FindingVocabulary::FindingVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        for (std::size_t j = i + 1; j < names_.size(); ++j) {
            if (names_[i] == names_[j]) {
                throw std::invalid_argument("duplicate finding in vocabulary: " + names_[i]);
            }
        }
    }
}

FindingVocabulary FindingVocabulary::chexpert() {
    return FindingVocabulary({
        "atelectasis",
        "cardiomegaly",
        "consolidation",
        "edema",
        "enlarged cardiomediastinum",
        "fracture",
        "lung lesion",
        "lung opacity",
        "pleural effusion",
        "pleural other",
        "pneumonia",
        "pneumothorax",
        "support devices",
    });
}

bool FindingVocabulary::contains(const std::string& name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t FindingVocabulary::index_of(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw std::out_of_range("unknown finding: " + name);
    return static_cast<std::size_t>(it - names_.begin());
}

bool TranscriptSentence::mentions(const FindingLabel& f) const {
    return std::find(findings.begin(), findings.end(), f) != findings.end();
}

RelationMatrix RelationMatrix::chexpert_default() {
    RelationMatrix m;
    const std::vector<std::string> lungs = {"left lung", "right lung"};
    m.anatomies = {
        {"atelectasis", lungs},
        {"cardiomegaly", {"cardiac silhouette"}},
        {"consolidation", lungs},
        {"edema", lungs},
        {"enlarged cardiomediastinum", {"mediastinum", "cardiac silhouette"}},
        {"fracture", {"left clavicle", "right clavicle"}},
        {"lung lesion", lungs},
        {"lung opacity", lungs},
        {"pleural effusion", {"left costophrenic angle", "right costophrenic angle"}},
        {"pleural other", {"left costophrenic angle", "right costophrenic angle"}},
        {"pneumonia", lungs},
        {"pneumothorax", {"left apical zone", "right apical zone"}},
        {"support devices", {"trachea", "mediastinum"}},
    };
    return m;
}

namespace {

bool finite(double v) { return std::isfinite(v); }

}  // namespace

std::vector<std::string> validate_sample(const Sample& sample,
                                         const FindingVocabulary& vocabulary) {
    std::vector<std::string> out;
    auto report = [&](const std::string& s) { out.push_back(s); };

    const double W = sample.width;
    const double H = sample.height;
    if (!(W > 0.0) || !(H > 0.0)) {
        std::ostringstream os;
        os << "image extent must be positive (width=" << W << ", height=" << H << ")";
        report(os.str());
    }

    for (std::size_t i = 0; i < sample.fixations.size(); ++i) {
        const auto& f = sample.fixations[i];
        std::ostringstream pre;
        pre << "fixation " << i << ": ";
        if (!finite(f.x) || !finite(f.y) || !finite(f.t) || !finite(f.d)) {
            report(pre.str() + "non-finite field");
            continue;
        }
        if (f.x < 0.0 || f.x > W || f.y < 0.0 || f.y > H) report(pre.str() + "outside image bounds");
        if (!(f.d > 0.0)) report(pre.str() + "duration must be positive");
        if (f.t < 0.0) report(pre.str() + "negative onset");
        if (i > 0 && f.t < sample.fixations[i - 1].t) {
            report(pre.str() + "onset precedes previous fixation (fixations must be time-ordered)");
        }
    }

    for (std::size_t i = 0; i < sample.transcript.size(); ++i) {
        const auto& s = sample.transcript[i];
        std::ostringstream pre;
        pre << "sentence " << i << ": ";
        if (!(s.begin <= s.end)) report(pre.str() + "begin after end");
        if (i > 0 && s.begin < sample.transcript[i - 1].begin) {
            report(pre.str() + "begins before previous sentence (transcript must be sorted)");
        }
        for (const auto& f : s.findings) {
            if (!vocabulary.contains(f.name)) report(pre.str() + "unknown finding '" + f.name + "'");
        }
    }

    for (const auto& [name, b] : sample.anatomy_boxes) {
        const std::string pre = "box '" + name + "': ";
        if (!(b.left < b.right) || !(b.top < b.bottom)) report(pre + "degenerate extent");
        if (b.left < 0.0 || b.top < 0.0 || b.right > W || b.bottom > H) {
            report(pre + "outside image bounds");
        }
    }
    return out;
}

std::vector<std::string> validate_scanpath(const Scanpath& scanpath, int max_length) {
    std::vector<std::string> out;
    const auto n = static_cast<int>(scanpath.fixations.size());
    if (n < 1 || n > max_length) {
        std::ostringstream os;
        os << "length " << n << " outside [1, " << max_length << "]";
        out.push_back(os.str());
    }
    const bool bounded = scanpath.width > 0.0 && scanpath.height > 0.0;
    for (int i = 0; i < n; ++i) {
        const auto& f = scanpath.fixations[static_cast<std::size_t>(i)];
        std::ostringstream pre;
        pre << "fixation " << i << ": ";
        if (!finite(f.x) || !finite(f.y) || !finite(f.d)) {
            out.push_back(pre.str() + "non-finite field");
            continue;
        }
        if (!(f.d > 0.0)) out.push_back(pre.str() + "duration must be positive");
        if (f.x < 0.0 || f.y < 0.0 || (bounded && (f.x > scanpath.width || f.y > scanpath.height))) {
            out.push_back(pre.str() + "outside image bounds");
        }
    }
    return out;
}

}  // namespace gazesearch
