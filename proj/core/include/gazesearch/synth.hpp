#pragma once
// Procedural chest-like samples for desk-scale runs and tests.
//
// Each image gets jittered anatomy boxes and, for every mentioned finding, a
// bright blob inside one of the finding's related anatomies. The reading for
// that finding wanders for a while, then dwells on the blob; its sentence
// ends right after the dwell, so the latest in-box fixations precede the
// cutoff by construction.

#include "gazesearch/image.hpp"
#include "gazesearch/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace gazesearch::synth {

struct SyntheticSpec {
    int images = 16;
    int min_findings = 1;  // per image
    int max_findings = 2;
    int min_wander = 2;  // fixations before the dwell
    int max_wander = 6;
    int min_dwell = 3;
    int max_dwell = 5;
    double noise_radius = 5.0;  // dwell scatter, pixels
    int width = 256;
    int height = 256;
    double box_jitter = 0.03;  // fraction of the extent
    std::uint64_t seed = 0;
};

// Throws std::invalid_argument when a count is below 1 or a range is empty.
void check_spec(const SyntheticSpec& spec);

struct Lesion {
    std::string finding;
    std::string anatomy;
    double x = 0.0;
    double y = 0.0;
};

struct SyntheticDataset {
    std::vector<Sample> samples;
    std::map<std::string, image::GrayImage> images;
    std::map<std::string, std::vector<Lesion>> lesions;
    RelationMatrix relations;
};

// Anatomy boxes of the unjittered template for a width x height image.
std::map<std::string, Box> anatomy_template(double width, double height);

SyntheticDataset generate(const SyntheticSpec& spec, const FindingVocabulary& vocabulary);

// Writes the sample directory layout plus images/<id>.png and
// relation_matrix.json.
void write(const std::filesystem::path& dir, const SyntheticDataset& data);

}  // namespace gazesearch::synth
