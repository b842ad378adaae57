#pragma once
// Free-view fixations -> finding-aware visual search scanpaths.
//
// Per finding: transcript cutoff -> fixation mapping -> anatomy box lookup
// -> backward radius clustering -> in-box time-spent constraint.
// Operations that cannot produce a scanpath for a finding throw PipelineSkip.

#include "gazesearch/error.hpp"
#include "gazesearch/types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace gazesearch::pipeline {

enum class Containment { Union, Intersection };

struct PipelineConfig {
    int max_length = 7;                 // M, includes the center fixation
    std::optional<double> radius;       // clustering radius in pixels; unset -> W/16
    double center_duration = 0.3;       // seconds
    Containment containment = Containment::Union;
    // When true the center fixation takes part in the time-spent suffix
    // sums and may be trimmed, as a literal reading of the procedure.
    bool center_in_constraint = false;

    double effective_radius(double width) const { return radius.value_or(width / 16.0); }
};

// Throws std::invalid_argument when M < 2, r <= 0 or center_duration <= 0.
void check_config(const PipelineConfig& config);

// End time of the last sentence that mentions `target`.
double finding_cutoff(std::span<const TranscriptSentence> transcript, const FindingLabel& target);

// Fixations with 0 <= t <= cutoff, onset dropped, order preserved.
std::vector<Fixation> map_finding_fixations(std::span<const FreeViewFixation> fixations,
                                            double cutoff);

BoundingBoxSet boxes_for_finding(const RelationMatrix& matrix,
                                 const std::map<std::string, Box>& anatomy_boxes,
                                 const FindingLabel& target);

bool point_in_boxes(double x, double y, const BoundingBoxSet& boxes, Containment containment);

// One aggregated cluster of raw fixations. `members` index the input of
// radius_filter and are listed latest first.
struct Cluster {
    Fixation centroid;
    std::vector<std::size_t> members;
};

struct RadiusFilterResult {
    Fixation center;
    std::vector<Cluster> clusters;  // time-ordered, latest last

    std::vector<Fixation> scanpath() const;
};

RadiusFilterResult radius_filter_clusters(std::span<const Fixation> fixations,
                                          const BoundingBoxSet& boxes, double width,
                                          double height, const PipelineConfig& config);

// Center fixation followed by at most M-1 cluster aggregates.
std::vector<Fixation> radius_filter(std::span<const Fixation> fixations,
                                    const BoundingBoxSet& boxes, double width, double height,
                                    const PipelineConfig& config);

// Input is radius_filter output (center first). Returns the center followed
// by the shortest-trimmed suffix of the body whose in-box duration is at
// least its out-of-box duration.
std::vector<Fixation> time_constrain(std::span<const Fixation> scanpath,
                                     const BoundingBoxSet& boxes, const PipelineConfig& config);

// Index into the body (0-based, center excluded) where time_constrain starts
// the retained suffix. Throws PipelineSkip(Unconstrainable).
std::size_t constrain_start(std::span<const Fixation> body, const BoundingBoxSet& boxes,
                            Containment containment);

struct ConversionReport {
    std::string image_id;
    std::map<SkipReason, int> skipped;
    int emitted = 0;

    int total_skipped() const;
};

struct ConversionResult {
    std::map<FindingLabel, Scanpath> scanpaths;
    ConversionReport report;
};

// Runs the full pipeline for every finding of the vocabulary. Throws
// DataError if the sample does not validate.
ConversionResult convert_sample(const Sample& sample, const RelationMatrix& matrix,
                                const FindingVocabulary& vocabulary,
                                const PipelineConfig& config);

struct Split {
    std::vector<Scanpath> train;
    std::vector<Scanpath> val;
    std::vector<Scanpath> test;
};

struct SplitRatios {
    double train = 0.70;
    double val = 0.10;
    double test = 0.20;
};

// Partition by image_id. val and test get floor(n * ratio) images, train
// gets the remainder. Throws std::invalid_argument when ratios do not sum to
// one or there are fewer than three distinct images.
Split split_dataset(std::span<const Scanpath> scanpaths, SplitRatios ratios, std::uint64_t seed);

}  // namespace gazesearch::pipeline
