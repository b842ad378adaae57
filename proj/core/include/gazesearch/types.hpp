#pragma once
// Domain types shared by the pipeline, metrics, model and harness.
//
// All coordinates are floating-point pixels in the native image frame
// (origin top-left). Durations and timestamps are seconds.

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gazesearch {

// Raw gaze stop from a free-view recording.
struct FreeViewFixation {
    double x = 0.0;  // horizontal pixel
    double y = 0.0;  // vertical pixel
    double t = 0.0;  // onset, seconds
    double d = 0.0;  // duration, seconds

    bool operator==(const FreeViewFixation&) const = default;
};

// Gaze stop after the onset timestamp has been dropped.
struct Fixation {
    double x = 0.0;
    double y = 0.0;
    double d = 0.0;

    bool operator==(const Fixation&) const = default;
};

struct FindingLabel {
    std::string name;

    auto operator<=>(const FindingLabel&) const = default;
};

// Ordered finding vocabulary. Query row c of the model corresponds to
// names()[c].
class FindingVocabulary {
public:
    FindingVocabulary() = default;
    explicit FindingVocabulary(std::vector<std::string> names);

    // The 13 CheXpert observation labels (everything except "no finding").
    static FindingVocabulary chexpert();

    const std::vector<std::string>& names() const { return names_; }
    std::size_t size() const { return names_.size(); }
    bool contains(const std::string& name) const;
    // Throws std::out_of_range for unknown names.
    std::size_t index_of(const std::string& name) const;
    const std::string& at(std::size_t index) const { return names_.at(index); }

private:
    std::vector<std::string> names_;
};

struct TranscriptSentence {
    std::string text;
    double begin = 0.0;
    double end = 0.0;
    std::vector<FindingLabel> findings;  // precomputed sentence labels

    bool mentions(const FindingLabel& f) const;
    bool operator==(const TranscriptSentence&) const = default;
};

struct Box {
    double left = 0.0;
    double top = 0.0;
    double right = 0.0;
    double bottom = 0.0;

    // Closed on all four edges.
    bool contains(double x, double y) const {
        return left <= x && x <= right && top <= y && y <= bottom;
    }
    bool operator==(const Box&) const = default;
};

struct BoundingBoxSet {
    FindingLabel finding;
    std::vector<Box> boxes;

    bool operator==(const BoundingBoxSet&) const = default;
};

// finding name -> anatomy names
struct RelationMatrix {
    std::map<std::string, std::vector<std::string>> anatomies;

    // CheXpert finding -> Chest ImaGenome style anatomy regions.
    static RelationMatrix chexpert_default();

    bool operator==(const RelationMatrix&) const = default;
};

struct Sample {
    std::string image_id;
    double width = 0.0;
    double height = 0.0;
    std::vector<FreeViewFixation> fixations;     // sorted by onset
    std::vector<TranscriptSentence> transcript;  // sorted by begin
    std::map<std::string, Box> anatomy_boxes;

    bool operator==(const Sample&) const = default;
};

struct Scanpath {
    std::string image_id;
    FindingLabel finding;
    std::vector<Fixation> fixations;
    // Native image extent; zero when the producer did not record it.
    double width = 0.0;
    double height = 0.0;

    bool operator==(const Scanpath&) const = default;
};

// Violations of the type invariants, one human-readable line each. An empty
// result means the sample is accepted by every pipeline operation.
std::vector<std::string> validate_sample(const Sample& sample,
                                         const FindingVocabulary& vocabulary);

std::vector<std::string> validate_scanpath(const Scanpath& scanpath, int max_length);

}  // namespace gazesearch
