#include "gazesearch/train.hpp"

#include "gazesearch/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gazesearch::model {

std::vector<ModelFixation> to_model_space(std::span<const Fixation> fixations, double width,
                                          double height, int image_size) {
    if (!(width > 0.0) || !(height > 0.0)) throw std::invalid_argument("image extent must be positive");
    const double sx = image_size / width;
    const double sy = image_size / height;
    std::vector<ModelFixation> out;
    out.reserve(fixations.size());
    for (const auto& f : fixations) out.push_back({f.x * sx, f.y * sy, f.d});
    return out;
}

std::vector<TeacherStep> teacher_schedule(std::span<const ModelFixation> fixations, int max_length) {
    std::vector<TeacherStep> steps;
    const std::size_t n = fixations.size();
    for (std::size_t t = 1; t < n; ++t) steps.push_back({t, {0.0, fixations[t]}});
    if (n < static_cast<std::size_t>(max_length)) steps.push_back({n, {1.0, std::nullopt}});
    return steps;
}

AdamW::AdamW(double learning_rate, double weight_decay, double beta1, double beta2, double eps)
    : lr_(learning_rate), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamW::step(ad::ParameterSet& params, std::span<const Matrix> grads) {
    if (grads.size() != params.size()) throw std::invalid_argument("AdamW: gradient count mismatch");
    if (m_.empty()) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_.push_back(Matrix::Zero(params[i].value.rows(), params[i].value.cols()));
            v_.push_back(Matrix::Zero(params[i].value.rows(), params[i].value.cols()));
        }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        if (p.frozen) continue;
        const Matrix& g = grads[i];
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
        const auto mhat = m_[i].array() / c1;
        const auto vhat = v_[i].array() / c2;
        p.value.array() -= lr_ * (mhat / (vhat.sqrt() + eps_) + wd_ * p.value.array());
    }
}

BatchLoss batch_loss(const ChestSearch& model, std::span<const TrainExample> batch,
                     std::mt19937_64& rng, bool with_grad, const ForwardOptions& options,
                     std::span<const double> noise) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    const auto& cfg = model.config();
    Tape tape(with_grad);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Var> totals, terms_tau, terms_h, terms_d;
    std::size_t draw = 0;
    for (const auto& ex : batch) {
        if (ex.finding < 0 || ex.finding >= cfg.num_queries) {
            throw std::invalid_argument("finding index out of range");
        }
        const PyramidVars pyramid = model.extract_pyramid(tape, ex.image);
        const std::array<Eigen::Index, 1> row{ex.finding};
        for (const auto& st : teacher_schedule(ex.fixations, cfg.max_length)) {
            double eps = 0.0;
            if (noise.empty()) {
                eps = gauss(rng);
            } else {
                if (draw >= noise.size()) throw std::invalid_argument("not enough noise values");
                eps = noise[draw];
            }
            ++draw;
            const std::array<double, 1> e{eps};
            const auto prefix = std::span<const ModelFixation>(ex.fixations).first(st.prefix);
            const HeadVars heads = model.step(tape, pyramid, prefix, row, e, options);
            const LossTerms l = losses(tape, heads, st.targets, cfg, pyramid.high_grid);
            totals.push_back(l.total);
            terms_tau.push_back(l.termination);
            terms_h.push_back(l.heatmap);
            terms_d.push_back(l.duration);
        }
    }
    const double inv = 1.0 / static_cast<double>(totals.size());
    Var mean = scale(sum_scalars(totals), inv);

    BatchLoss out;
    auto mean_of = [&](const std::vector<Var>& v) {
        double s = 0.0;
        for (auto x : v) s += x.scalar();
        return s * inv;
    };
    out.record.termination = mean_of(terms_tau);
    out.record.heatmap = mean_of(terms_h);
    out.record.duration = mean_of(terms_d);
    out.record.total = mean.scalar();

    if (with_grad) {
        tape.backward(mean);
        const auto& params = model.params();
        out.grads.reserve(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto* g = tape.parameter_grad(params[i]);
            out.grads.push_back(g ? *g : Matrix::Zero(params[i].value.rows(), params[i].value.cols()));
        }
    }
    return out;
}

LossRecord train_step(ChestSearch& model, AdamW& optimizer, std::span<const TrainExample> batch,
                      std::mt19937_64& rng) {
    BatchLoss loss = batch_loss(model, batch, rng, true);
    if (!std::isfinite(loss.record.total)) {
        std::ostringstream os;
        os << "non-finite loss at step " << optimizer.steps() << " (termination "
           << loss.record.termination << ", heatmap " << loss.record.heatmap << ", duration "
           << loss.record.duration << ")";
        throw NumericError(os.str());
    }
    for (std::size_t i = 0; i < loss.grads.size(); ++i) {
        if (!loss.grads[i].allFinite()) {
            throw NumericError("non-finite gradient for " + model.params()[i].name);
        }
    }
    optimizer.step(model.params(), loss.grads);
    loss.record.step = optimizer.steps();
    return loss.record;
}

GradientCheckResult gradient_check(ChestSearch& model, std::span<const TrainExample> batch,
                                   const ForwardOptions& options, double h, double floor,
                                   std::uint64_t noise_seed) {
    std::size_t total_steps = 0;
    for (const auto& ex : batch) {
        total_steps += teacher_schedule(ex.fixations, model.config().max_length).size();
    }
    std::vector<double> noise(total_steps);
    {
        std::mt19937_64 rng(noise_seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (auto& e : noise) e = gauss(rng);
    }
    std::mt19937_64 unused(0);
    const BatchLoss analytic = batch_loss(model, batch, unused, true, options, noise);

    GradientCheckResult result;
    auto& params = model.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        if (p.frozen) {
            result.skipped_frozen += static_cast<std::size_t>(p.value.size());
            continue;
        }
        for (Eigen::Index k = 0; k < p.value.size(); ++k) {
            const double saved = p.value.data()[k];
            p.value.data()[k] = saved + h;
            const double plus = batch_loss(model, batch, unused, false, {}, noise).record.total;
            p.value.data()[k] = saved - h;
            const double minus = batch_loss(model, batch, unused, false, {}, noise).record.total;
            p.value.data()[k] = saved;

            const double numeric = (plus - minus) / (2.0 * h);
            const double a = analytic.grads[i].data()[k];
            const double rel =
                std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
            ++result.checked;
            if (rel > result.max_relative_error) {
                result.max_relative_error = rel;
                result.worst_parameter = p.name + "[" + std::to_string(k) + "]";
            }
        }
    }
    return result;
}

namespace {

FeaturePyramid materialize(const ChestSearch& model, const Matrix& image) {
    Tape tape(false);
    const PyramidVars v = model.extract_pyramid(tape, image);
    return {v.low.value(), v.high.value(), v.low_grid, v.high_grid};
}

}  // namespace

Scanpath predict_scanpath(const ChestSearch& model, const Matrix& image, int finding,
                          const std::string& image_id, const FindingLabel& label, double width,
                          double height, std::uint64_t seed, DecodeMode mode) {
    return predict_scanpath(model, materialize(model, image), finding, image_id, label, width,
                            height, seed, mode);
}

Scanpath predict_scanpath(const ChestSearch& model, const FeaturePyramid& pyramid, int finding,
                          const std::string& image_id, const FindingLabel& label, double width,
                          double height, std::uint64_t seed, DecodeMode mode) {
    const auto& cfg = model.config();
    if (finding < 0 || finding >= cfg.num_queries) throw std::invalid_argument("finding out of range");
    if (!(width > 0.0) || !(height > 0.0)) throw std::invalid_argument("image extent must be positive");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const double S = cfg.image_size;
    const int grid = cfg.high_grid();

    Scanpath out{image_id, label, {{width / 2.0, height / 2.0, cfg.center_duration}}, width, height};
    std::vector<ModelFixation> prefix{{S / 2.0, S / 2.0, cfg.center_duration}};
    const std::array<Eigen::Index, 1> row{finding};
    const std::array<double, 1> zero{0.0};

    while (static_cast<int>(out.fixations.size()) < cfg.max_length) {
        Tape tape(false);
        const PyramidVars pv = model.external_pyramid(tape, pyramid);
        const HeadOutputs h = values(model.step(tape, pv, prefix, row, zero));
        const double tau = h.termination(0, 0);
        if (!std::isfinite(tau) || !h.heatmap.allFinite() || !std::isfinite(h.duration(0, 0))) {
            throw NumericError("non-finite head output during inference for " + image_id);
        }
        if (tau >= cfg.termination_threshold) break;

        Eigen::Index cell = 0;
        const auto heat = h.heatmap.row(0);
        if (mode == DecodeMode::Argmax) {
            heat.maxCoeff(&cell);
        } else {
            const double total = heat.sum();
            double u = uniform(rng) * total;
            cell = heat.size() - 1;
            for (Eigen::Index c = 0; c < heat.size(); ++c) {
                u -= heat(c);
                if (u <= 0.0) {
                    cell = c;
                    break;
                }
            }
        }
        const int r = static_cast<int>(cell) / grid;
        const int c = static_cast<int>(cell) % grid;
        const double d = std::clamp(h.duration(0, 0), 0.05, 5.0);
        const double mx = (c + 0.5) * S / grid;
        const double my = (r + 0.5) * S / grid;
        prefix.push_back({mx, my, d});
        out.fixations.push_back({mx * width / S, my * height / S, d});
    }
    return out;
}

}  // namespace gazesearch::model
