#pragma once
// Finding-conditioned scanpath predictor.
//
// image -> feature pyramid (low H/32, high H/4) -> spatiotemporal embedding
// of the previous fixations -> query decoder (one learnable query per
// finding) -> termination / duration / distribution heads.
//
// Feature maps are stored as (cells x channels) matrices whose rows walk the
// grid row-major. Channels equal the embedding width D so that the
// distribution head can multiply decoded queries with the high-resolution map.

#include "gazesearch/autodiff.hpp"
#include "gazesearch/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gazesearch::model {

using ad::Matrix;
using ad::Tape;
using ad::Var;

enum class MapChoice { Low, High };

const char* to_string(MapChoice m);
MapChoice map_choice_from_string(const std::string& s);

struct ModelConfig {
    int image_size = 64;          // square model input; multiple of 32
    int embed_dim = 64;           // D, also the pyramid channel count C
    int decoder_layers = 2;       // L
    int embed_layers = 2;         // self-attention layers in the embedding
    int num_queries = 13;         // |q|
    int heads = 4;
    int max_length = 7;           // M, includes the center fixation
    int mlp_layers = 3;           // distribution head MLP depth
    double focal_alpha = 4.0;
    double focal_gamma = 2.0;
    double heatmap_sigma = 2.0;   // cells
    MapChoice reference_map = MapChoice::Low;
    MapChoice indexing_map = MapChoice::High;
    double termination_threshold = 0.5;
    // Adds the fixed 2D sinusoidal code of each high-resolution cell to the
    // map used by the distribution head, so location can be decoded even
    // from a shallow extractor without padding artifacts.
    bool positional_heatmap = true;
    double center_duration = 0.3;
    double learning_rate = 1e-3;
    double weight_decay = 0.01;
    std::uint64_t seed = 0;

    int ffn_dim() const { return 2 * embed_dim; }
    int high_grid() const { return image_size / 4; }
    int low_grid() const { return image_size / 32; }
};

// Throws std::invalid_argument when an invariant does not hold.
void check_config(const ModelConfig& config);

// Pyramid data, e.g. produced by an external extractor.
struct FeaturePyramid {
    Matrix low;    // (low_grid^2) x C
    Matrix high;   // (high_grid^2) x C
    int low_grid = 0;
    int high_grid = 0;
};

struct PyramidVars {
    Var low;
    Var high;
    int low_grid = 0;
    int high_grid = 0;
};

struct EmbeddedVars {
    Var tokens;           // reference tokens followed by fixation tokens
    int reference_count = 0;
    int fixation_count = 0;
};

struct HeadVars {
    Var termination;  // rows x 1, in (0, 1)
    Var mu;           // rows x 1
    Var log_var;      // rows x 1
    Var duration;     // rows x 1, mu + eps * exp(0.5 * log_var)
    Var heatmap;      // rows x cells, in (0, 1)
};

struct HeadOutputs {
    Matrix termination;
    Matrix mu;
    Matrix log_var;
    Matrix duration;
    Matrix heatmap;
};

// Training-time perturbations used by the gradient check's negative control.
struct ForwardOptions {
    double duration_grad_scale = 1.0;
};

// Fixation in model pixel coordinates ([0, image_size]).
struct ModelFixation {
    double x = 0.0;
    double y = 0.0;
    double d = 0.0;
};

// sin/cos code of one grid position: first D/2 channels encode x, the next
// D/2 encode y. Channel 2k is sin(pos / 10000^(2k / (D/2))), 2k+1 the cosine.
Matrix positional_encoding_2d(int col, int row, int dim);
// Codes for every cell of a grid x grid map, row-major.
Matrix positional_grid(int grid, int dim);

// Cell of a model-space coordinate at a map resolution, floor-scaled and
// clamped to the last cell.
std::pair<int, int> index_cell(double x, double y, int image_size, int grid);

// Gaussian target over a grid x grid map (row vector, row-major): exactly 1
// at the target cell, exp(-(di^2 + dj^2) / (2 sigma^2)) elsewhere. sigma <= 0
// gives a one-hot map.
Matrix target_heatmap(int col, int row, int grid, double sigma);

class ChestSearch {
public:
    explicit ChestSearch(ModelConfig config);

    const ModelConfig& config() const { return config_; }
    ad::ParameterSet& params() { return params_; }
    const ad::ParameterSet& params() const { return params_; }

    // image_size x image_size grid of intensities.
    PyramidVars extract_pyramid(Tape& tape, const Matrix& image) const;
    PyramidVars external_pyramid(Tape& tape, const FeaturePyramid& pyramid) const;

    // Fixation tokens before self-attention: gathered cell feature plus 2D
    // positional code plus the learnable per-step embedding.
    Var fixation_tokens(Tape& tape, const PyramidVars& pyramid,
                        std::span<const ModelFixation> previous) const;
    EmbeddedVars embed(Tape& tape, const PyramidVars& pyramid,
                       std::span<const ModelFixation> previous) const;

    Var query_bank(Tape& tape) const;
    // queries: |q| x D; memory: tokens x D.
    Var decode(Tape& tape, Var queries, Var memory) const;

    // decoded: rows x D (all queries or a selection). eps: one noise value
    // per row.
    HeadVars heads(Tape& tape, Var decoded, const PyramidVars& pyramid,
                   std::span<const double> eps, const ForwardOptions& options = {}) const;

    // Full forward for one step, returning the rows of `query_rows`
    // (all queries when empty).
    HeadVars step(Tape& tape, const PyramidVars& pyramid, std::span<const ModelFixation> previous,
                  std::span<const Eigen::Index> query_rows, std::span<const double> eps,
                  const ForwardOptions& options = {}) const;

private:
    Var multi_head_attention(Tape& tape, const std::string& prefix, Var queries, Var keys) const;
    Var feed_forward(Tape& tape, const std::string& prefix, Var x) const;
    Var norm(Tape& tape, const std::string& prefix, Var x) const;
    Var p(Tape& tape, const std::string& name) const;
    void init_parameters();

    ModelConfig config_;
    ad::ParameterSet params_;
    Matrix high_positions_;
    Matrix low_positions_;
};

HeadOutputs values(const HeadVars& heads);

struct StepTargets {
    double termination = 0.0;                 // tau_t
    std::optional<ModelFixation> fixation;    // absent on the stop step
};

struct LossTerms {
    Var termination;
    Var heatmap;
    Var duration;
    Var total;
};

// Loss on a single query row (the target finding). heads must hold exactly
// one row.
LossTerms losses(Tape& tape, const HeadVars& heads, const StepTargets& targets,
                 const ModelConfig& config, int grid);

}  // namespace gazesearch::model
