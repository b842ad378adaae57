#pragma once
// Scanpath similarity metrics: ScanMatch (with and without duration),
// MultiMatch (five dimensions), string edit distance and scaled time-delay
// embedding, plus dataset-level aggregation.

#include "gazesearch/types.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gazesearch::metrics {

struct GridSpec {
    int cols = 12;
    int rows = 8;
    double width = 0.0;   // image W, pixels
    double height = 0.0;  // image H, pixels

    double cell_width() const { return width / cols; }
    double cell_height() const { return height / rows; }
    int cells() const { return cols * rows; }
};

// Throws std::invalid_argument for non-positive sizes or more than 676 cells.
void check_grid(const GridSpec& grid);

struct ScanMatchConfig {
    int cols = 12;
    int rows = 8;
    std::optional<double> substitution_threshold;  // pixels; unset -> diagonal / 4
    double gap_penalty = 0.0;                      // score per gap, <= 0
    double duration_bin = 0.05;                    // seconds

    GridSpec grid(double width, double height) const { return {cols, rows, width, height}; }
    double threshold(double width, double height) const;
};

struct MetricParams {
    ScanMatchConfig scanmatch;
    int sed_cols = 5;
    int sed_rows = 5;
    int stde_k = 3;
    bool multimatch_simplify = false;
    double simplify_amplitude = 0.1;      // fraction of the image diagonal
    double simplify_direction = 0.785398;  // radians (45 degrees)
};

// Cell index of (x, y); points on a cell boundary go to the lower-index cell.
int cell_of(double x, double y, const GridSpec& grid);

// One symbol per fixation; with_duration repeats each symbol
// ceil(d / duration_bin) times (at least once).
std::vector<int> quantize(std::span<const Fixation> fixations, const GridSpec& grid,
                          bool with_duration, double duration_bin);

// Substitution score between two cells, in [0, 1].
double substitution_score(int p, int q, const GridSpec& grid, double threshold);

// Needleman-Wunsch over symbol strings, normalised by the longer length.
double scanmatch_symbols(std::span<const int> a, std::span<const int> b, const GridSpec& grid,
                         double threshold, double gap_penalty);

double scanmatch(const Scanpath& a, const Scanpath& b, const ScanMatchConfig& config,
                 bool with_duration, double width, double height);

struct MultiMatchScores {
    std::optional<double> vector;
    std::optional<double> direction;
    std::optional<double> length;
    std::optional<double> position;
    std::optional<double> duration;

    bool degenerate() const { return !vector.has_value(); }
};

// Saccade alignment path as (i, j) index pairs into the saccade lists.
std::vector<std::pair<std::size_t, std::size_t>> align_saccades(
    std::span<const Fixation> a, std::span<const Fixation> b);

// Merges consecutive saccades with small amplitude or similar direction.
std::vector<Fixation> simplify_scanpath(std::span<const Fixation> fixations, double diagonal,
                                        double amplitude_fraction, double direction_threshold);

// All dimensions are absent when either scanpath has fewer than two
// fixations (no saccades to align).
MultiMatchScores multimatch(std::span<const Fixation> a, std::span<const Fixation> b,
                            double width, double height);

int edit_distance(std::span<const int> a, std::span<const int> b);

int sed(std::span<const Fixation> a, std::span<const Fixation> b, const GridSpec& grid);

// Directional: prediction sub-sequences are matched against ground truth.
double stde(std::span<const Fixation> pred, std::span<const Fixation> gt, int k, double width,
            double height);

struct PairScores {
    std::string image_id;
    std::string finding;
    double scanmatch_wo_dur = 0.0;
    double scanmatch_w_dur = 0.0;
    MultiMatchScores multimatch;
    double sed = 0.0;
    double stde = 0.0;
};

struct MetricReport {
    std::vector<PairScores> pairs;
    double scanmatch_wo_dur = 0.0;
    double scanmatch_w_dur = 0.0;
    double mm_vector = 0.0;
    double mm_direction = 0.0;
    double mm_length = 0.0;
    double mm_position = 0.0;
    double mm_duration = 0.0;
    double sed = 0.0;
    double stde = 0.0;
    int n_pairs = 0;
    int n_multimatch = 0;            // pairs contributing MultiMatch values
    int unmatched_references = 0;    // references with no prediction
    MetricParams params;
};

// Every prediction must have a reference with the same (image_id, finding);
// otherwise throws MissingReference. Image extents come from the reference
// record, falling back to the prediction, then to `default_width/height`.
MetricReport evaluate(std::span<const Scanpath> predictions, std::span<const Scanpath> references,
                      const MetricParams& params, double default_width = 0.0,
                      double default_height = 0.0);

}  // namespace gazesearch::metrics
