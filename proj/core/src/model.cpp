#include "gazesearch/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace gazesearch::model {

const char* to_string(MapChoice m) { return m == MapChoice::Low ? "low" : "high"; }

MapChoice map_choice_from_string(const std::string& s) {
    if (s == "low") return MapChoice::Low;
    if (s == "high") return MapChoice::High;
    throw std::invalid_argument("map choice must be 'low' or 'high', got '" + s + "'");
}

void check_config(const ModelConfig& c) {
    auto fail = [](const std::string& what) { throw std::invalid_argument("model config: " + what); };
    if (c.image_size <= 0 || c.image_size % 32 != 0) fail("image_size must be a positive multiple of 32");
    if (c.embed_dim <= 0 || c.embed_dim % 4 != 0) fail("embed_dim must be a positive multiple of 4");
    if (c.heads <= 0 || c.embed_dim % c.heads != 0) fail("embed_dim must be divisible by heads");
    if (c.decoder_layers < 0 || c.embed_layers < 0) fail("layer counts must be >= 0");
    if (c.num_queries <= 0) fail("num_queries must be > 0");
    if (c.max_length < 2) fail("max_length must be >= 2");
    if (c.mlp_layers < 1) fail("mlp_layers must be >= 1");
    if (!(c.termination_threshold > 0.0 && c.termination_threshold < 1.0)) {
        fail("termination_threshold must lie in (0, 1)");
    }
    if (c.focal_alpha < 0.0 || c.focal_gamma < 0.0) fail("focal exponents must be >= 0");
    if (!(c.learning_rate >= 0.0)) fail("learning_rate must be >= 0");
}

Matrix positional_encoding_2d(int col, int row, int dim) {
    const int half = dim / 2;
    Matrix out(1, dim);
    auto encode = [&](double pos, int offset) {
        for (int k = 0; k < half / 2; ++k) {
            const double freq = std::pow(10000.0, -2.0 * k / half);
            out(0, offset + 2 * k) = std::sin(pos * freq);
            out(0, offset + 2 * k + 1) = std::cos(pos * freq);
        }
    };
    encode(col, 0);
    encode(row, half);
    return out;
}

Matrix positional_grid(int grid, int dim) {
    Matrix out(static_cast<Eigen::Index>(grid) * grid, dim);
    for (int r = 0; r < grid; ++r)
        for (int c = 0; c < grid; ++c) out.row(r * grid + c) = positional_encoding_2d(c, r, dim);
    return out;
}

std::pair<int, int> index_cell(double x, double y, int image_size, int grid) {
    const double cell = static_cast<double>(image_size) / grid;
    const int col = std::clamp(static_cast<int>(std::floor(x / cell)), 0, grid - 1);
    const int row = std::clamp(static_cast<int>(std::floor(y / cell)), 0, grid - 1);
    return {col, row};
}

Matrix target_heatmap(int col, int row, int grid, double sigma) {
    Matrix out = Matrix::Zero(1, static_cast<Eigen::Index>(grid) * grid);
    for (int r = 0; r < grid; ++r) {
        for (int c = 0; c < grid; ++c) {
            const double d2 = static_cast<double>((r - row) * (r - row) + (c - col) * (c - col));
            double v = 0.0;
            if (d2 == 0.0) {
                v = 1.0;
            } else if (sigma > 0.0) {
                v = std::exp(-d2 / (2.0 * sigma * sigma));
            }
            out(0, r * grid + c) = v;
        }
    }
    return out;
}

namespace {

Matrix xavier(std::mt19937_64& rng, int fan_in, int fan_out) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-a, a);
    Matrix m(fan_in, fan_out);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

Matrix normal(std::mt19937_64& rng, int rows, int cols, double std) {
    std::normal_distribution<double> n(0.0, std);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

}  // namespace

ChestSearch::ChestSearch(ModelConfig config) : config_(std::move(config)) {
    check_config(config_);
    high_positions_ = positional_grid(config_.high_grid(), config_.embed_dim);
    low_positions_ = positional_grid(config_.low_grid(), config_.embed_dim);
    init_parameters();
}

void ChestSearch::init_parameters() {
    std::mt19937_64 rng(config_.seed);
    const int D = config_.embed_dim;
    auto linear = [&](const std::string& name, int in, int out) {
        params_.add(name + ".w", xavier(rng, in, out));
        params_.add(name + ".b", Matrix::Zero(1, out));
    };
    auto layer_norm = [&](const std::string& name) {
        params_.add(name + ".g", Matrix::Ones(1, D));
        params_.add(name + ".b", Matrix::Zero(1, D));
    };
    auto attention = [&](const std::string& name) {
        linear(name + ".q", D, D);
        linear(name + ".k", D, D);
        linear(name + ".v", D, D);
        linear(name + ".o", D, D);
    };
    auto ffn = [&](const std::string& name) {
        linear(name + ".fc1", D, config_.ffn_dim());
        linear(name + ".fc2", config_.ffn_dim(), D);
    };

    linear("pyramid.stem", 16, D);
    linear("pyramid.high", D, D);
    linear("pyramid.down", 64 * D, D);
    linear("pyramid.low", D, D);

    linear("embed.reference", D, D);
    params_.add("embed.temporal", normal(rng, config_.max_length, D, 0.1));
    for (int i = 0; i < config_.embed_layers; ++i) {
        const std::string pre = "embed.layer" + std::to_string(i);
        attention(pre + ".attn");
        layer_norm(pre + ".norm1");
        ffn(pre + ".ffn");
        layer_norm(pre + ".norm2");
    }

    params_.add("decoder.queries", normal(rng, config_.num_queries, D, 1.0));
    for (int i = 0; i < config_.decoder_layers; ++i) {
        const std::string pre = "decoder.layer" + std::to_string(i);
        attention(pre + ".cross");
        layer_norm(pre + ".norm1");
        attention(pre + ".self");
        layer_norm(pre + ".norm2");
        ffn(pre + ".ffn");
        layer_norm(pre + ".norm3");
    }

    linear("head.termination", D, 1);
    linear("head.mu", D, 1);
    linear("head.logvar", D, 1);
    for (int i = 0; i < config_.mlp_layers; ++i) linear("head.mlp" + std::to_string(i), D, D);
}

Var ChestSearch::p(Tape& tape, const std::string& name) const { return tape.param(params_.at(name)); }

PyramidVars ChestSearch::extract_pyramid(Tape& tape, const Matrix& image) const {
    const int S = config_.image_size;
    if (image.rows() != S || image.cols() != S) {
        std::ostringstream os;
        os << "extract_pyramid: expected " << S << "x" << S << " image, got " << image.rows() << "x"
           << image.cols();
        throw std::invalid_argument(os.str());
    }
    const int hg = config_.high_grid();
    Matrix cols(static_cast<Eigen::Index>(hg) * hg, 16);
    for (int r = 0; r < hg; ++r)
        for (int c = 0; c < hg; ++c)
            for (int dy = 0; dy < 4; ++dy)
                for (int dx = 0; dx < 4; ++dx) cols(r * hg + c, dy * 4 + dx) = image(4 * r + dy, 4 * c + dx);

    Var stem = relu(affine(tape.constant(std::move(cols)), p(tape, "pyramid.stem.w"),
                           p(tape, "pyramid.stem.b")));
    Var high = affine(stem, p(tape, "pyramid.high.w"), p(tape, "pyramid.high.b"));
    Var down = relu(affine(patchify(stem, hg, hg, 8), p(tape, "pyramid.down.w"),
                           p(tape, "pyramid.down.b")));
    Var low = affine(down, p(tape, "pyramid.low.w"), p(tape, "pyramid.low.b"));
    return {low, high, config_.low_grid(), hg};
}

PyramidVars ChestSearch::external_pyramid(Tape& tape, const FeaturePyramid& pyramid) const {
    const int D = config_.embed_dim;
    const auto lg = config_.low_grid(), hg = config_.high_grid();
    if (pyramid.low_grid != lg || pyramid.high_grid != hg || pyramid.low.rows() != lg * lg ||
        pyramid.high.rows() != hg * hg || pyramid.low.cols() != D || pyramid.high.cols() != D) {
        throw std::invalid_argument("external pyramid does not match the model configuration");
    }
    return {tape.constant(pyramid.low), tape.constant(pyramid.high), lg, hg};
}

Var ChestSearch::fixation_tokens(Tape& tape, const PyramidVars& pyramid,
                                 std::span<const ModelFixation> previous) const {
    if (previous.empty()) throw std::invalid_argument("embedding needs at least one fixation");
    if (static_cast<int>(previous.size()) > config_.max_length) {
        throw std::invalid_argument("more previous fixations than max_length");
    }
    const int S = config_.image_size;
    const bool high = config_.indexing_map == MapChoice::High;
    const int grid = high ? pyramid.high_grid : pyramid.low_grid;
    Var map = high ? pyramid.high : pyramid.low;

    std::vector<Eigen::Index> cells;
    std::vector<Eigen::Index> steps;
    Matrix codes(static_cast<Eigen::Index>(previous.size()), config_.embed_dim);
    for (std::size_t i = 0; i < previous.size(); ++i) {
        const auto& f = previous[i];
        if (!(f.x >= 0.0 && f.x <= S && f.y >= 0.0 && f.y <= S)) {
            throw std::out_of_range("fixation coordinate outside the model image");
        }
        const auto [col, row] = index_cell(f.x, f.y, S, grid);
        cells.push_back(static_cast<Eigen::Index>(row) * grid + col);
        steps.push_back(static_cast<Eigen::Index>(i));
        codes.row(static_cast<Eigen::Index>(i)) = positional_encoding_2d(col, row, config_.embed_dim);
    }
    Var gathered = gather_rows(map, cells);
    Var temporal = gather_rows(p(tape, "embed.temporal"), steps);
    return add(add(gathered, tape.constant(std::move(codes))), temporal);
}

EmbeddedVars ChestSearch::embed(Tape& tape, const PyramidVars& pyramid,
                                std::span<const ModelFixation> previous) const {
    const bool low = config_.reference_map == MapChoice::Low;
    Var ref_map = low ? pyramid.low : pyramid.high;
    const Matrix& ref_pos = low ? low_positions_ : high_positions_;
    Var reference = add(affine(ref_map, p(tape, "embed.reference.w"), p(tape, "embed.reference.b")),
                        tape.constant(ref_pos));
    Var fixations = fixation_tokens(tape, pyramid, previous);
    const std::array<Var, 2> parts{reference, fixations};
    Var x = concat_rows(parts);
    for (int i = 0; i < config_.embed_layers; ++i) {
        const std::string pre = "embed.layer" + std::to_string(i);
        x = norm(tape, pre + ".norm1", add(x, multi_head_attention(tape, pre + ".attn", x, x)));
        x = norm(tape, pre + ".norm2", add(x, feed_forward(tape, pre + ".ffn", x)));
    }
    return {x, static_cast<int>(reference.rows()), static_cast<int>(previous.size())};
}

Var ChestSearch::query_bank(Tape& tape) const { return p(tape, "decoder.queries"); }

Var ChestSearch::decode(Tape& tape, Var queries, Var memory) const {
    if (queries.cols() != config_.embed_dim || memory.cols() != config_.embed_dim) {
        throw std::invalid_argument("decode: embedding width mismatch");
    }
    Var x = queries;
    for (int i = 0; i < config_.decoder_layers; ++i) {
        const std::string pre = "decoder.layer" + std::to_string(i);
        x = norm(tape, pre + ".norm1", add(x, multi_head_attention(tape, pre + ".cross", x, memory)));
        x = norm(tape, pre + ".norm2", add(x, multi_head_attention(tape, pre + ".self", x, x)));
        x = norm(tape, pre + ".norm3", add(x, feed_forward(tape, pre + ".ffn", x)));
    }
    return x;
}

HeadVars ChestSearch::heads(Tape& tape, Var decoded, const PyramidVars& pyramid,
                            std::span<const double> eps, const ForwardOptions& options) const {
    if (static_cast<Eigen::Index>(eps.size()) != decoded.rows()) {
        throw std::invalid_argument("heads: one noise value per row required");
    }
    HeadVars out;
    out.termination =
        sigmoid(affine(decoded, p(tape, "head.termination.w"), p(tape, "head.termination.b")));
    out.mu = affine(decoded, p(tape, "head.mu.w"), p(tape, "head.mu.b"));
    out.log_var = affine(decoded, p(tape, "head.logvar.w"), p(tape, "head.logvar.b"));
    Matrix noise(static_cast<Eigen::Index>(eps.size()), 1);
    for (std::size_t i = 0; i < eps.size(); ++i) noise(static_cast<Eigen::Index>(i), 0) = eps[i];
    Var spread = mul(exp(scale(out.log_var, 0.5)), tape.constant(std::move(noise)));
    Var duration = add(out.mu, spread);
    if (options.duration_grad_scale != 1.0) duration = scale_grad(duration, options.duration_grad_scale);
    out.duration = duration;

    Var latent = decoded;
    for (int i = 0; i < config_.mlp_layers; ++i) {
        const std::string pre = "head.mlp" + std::to_string(i);
        latent = affine(latent, p(tape, pre + ".w"), p(tape, pre + ".b"));
        if (i + 1 < config_.mlp_layers) latent = relu(latent);
    }
    Var basis = pyramid.high;
    if (config_.positional_heatmap) basis = add(basis, tape.constant(high_positions_));
    out.heatmap = sigmoid(matmul_nt(latent, basis));
    return out;
}

HeadVars ChestSearch::step(Tape& tape, const PyramidVars& pyramid,
                           std::span<const ModelFixation> previous,
                           std::span<const Eigen::Index> query_rows, std::span<const double> eps,
                           const ForwardOptions& options) const {
    const EmbeddedVars embedded = embed(tape, pyramid, previous);
    Var decoded = decode(tape, query_bank(tape), embedded.tokens);
    if (!query_rows.empty()) decoded = gather_rows(decoded, query_rows);
    return heads(tape, decoded, pyramid, eps, options);
}

Var ChestSearch::multi_head_attention(Tape& tape, const std::string& prefix, Var queries,
                                      Var keys) const {
    const int D = config_.embed_dim;
    const int H = config_.heads;
    const int dh = D / H;
    Var q = affine(queries, p(tape, prefix + ".q.w"), p(tape, prefix + ".q.b"));
    Var k = affine(keys, p(tape, prefix + ".k.w"), p(tape, prefix + ".k.b"));
    Var v = affine(keys, p(tape, prefix + ".v.w"), p(tape, prefix + ".v.b"));
    const double s = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Var> outs;
    outs.reserve(static_cast<std::size_t>(H));
    for (int h = 0; h < H; ++h) {
        Var qh = H == 1 ? q : slice_cols(q, h * dh, dh);
        Var kh = H == 1 ? k : slice_cols(k, h * dh, dh);
        Var vh = H == 1 ? v : slice_cols(v, h * dh, dh);
        outs.push_back(matmul(softmax_rows(matmul_nt(qh, kh, s)), vh));
    }
    Var joined = H == 1 ? outs.front() : concat_cols(outs);
    return affine(joined, p(tape, prefix + ".o.w"), p(tape, prefix + ".o.b"));
}

Var ChestSearch::feed_forward(Tape& tape, const std::string& prefix, Var x) const {
    Var h = relu(affine(x, p(tape, prefix + ".fc1.w"), p(tape, prefix + ".fc1.b")));
    return affine(h, p(tape, prefix + ".fc2.w"), p(tape, prefix + ".fc2.b"));
}

Var ChestSearch::norm(Tape& tape, const std::string& prefix, Var x) const {
    return layer_norm(x, p(tape, prefix + ".g"), p(tape, prefix + ".b"));
}

HeadOutputs values(const HeadVars& h) {
    return {h.termination.value(), h.mu.value(), h.log_var.value(), h.duration.value(),
            h.heatmap.value()};
}

LossTerms losses(Tape& tape, const HeadVars& heads, const StepTargets& targets,
                 const ModelConfig& config, int grid) {
    if (heads.termination.rows() != 1) throw std::invalid_argument("losses: expected one query row");
    LossTerms out;
    out.termination = binary_cross_entropy(heads.termination, targets.termination);
    if (targets.fixation) {
        const auto [col, row] =
            index_cell(targets.fixation->x, targets.fixation->y, config.image_size, grid);
        const Matrix target = target_heatmap(col, row, grid, config.heatmap_sigma);
        out.heatmap = focal_heatmap_loss(heads.heatmap, target, config.focal_alpha, config.focal_gamma);
        out.duration = l1_loss(heads.duration, targets.fixation->d);
    } else {
        out.heatmap = tape.constant(Matrix::Zero(1, 1));
        out.duration = tape.constant(Matrix::Zero(1, 1));
    }
    const std::array<Var, 3> parts{out.termination, out.heatmap, out.duration};
    out.total = sum_scalars(parts);
    return out;
}

}  // namespace gazesearch::model
