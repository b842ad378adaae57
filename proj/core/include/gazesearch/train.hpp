#pragma once
// Teacher-forced training, AdamW, finite-difference gradient check and
// autoregressive inference for ChestSearch.

#include "gazesearch/model.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace gazesearch::model {

// One (image, finding, ground-truth scanpath) tuple in model coordinates.
struct TrainExample {
    Matrix image;                         // image_size x image_size
    int finding = 0;                      // query row
    std::vector<ModelFixation> fixations; // starts with the center fixation
};

// Converts a native-frame scanpath to model coordinates.
std::vector<ModelFixation> to_model_space(std::span<const Fixation> fixations, double width,
                                          double height, int image_size);

// Teacher-forcing schedule of one scanpath of length n: step t (2 <= t <= n)
// sees fixations 1..t-1 and targets fixation t with tau = 0. When n < M a
// final stop step sees all n fixations and only carries tau = 1.
struct TeacherStep {
    std::size_t prefix = 0;
    StepTargets targets;
};
std::vector<TeacherStep> teacher_schedule(std::span<const ModelFixation> fixations, int max_length);

struct LossRecord {
    long step = 0;
    double termination = 0.0;
    double heatmap = 0.0;
    double duration = 0.0;
    double total = 0.0;
};

class AdamW {
public:
    AdamW(double learning_rate, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
          double eps = 1e-8);

    // grads[i] pairs with params[i]; frozen parameters are skipped.
    void step(ad::ParameterSet& params, std::span<const Matrix> grads);

    double learning_rate() const { return lr_; }
    long steps() const { return t_; }

private:
    double lr_, wd_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Matrix> m_, v_;
};

// Mean joint loss (termination + heatmap + duration) over all (example, step) pairs, with gradients for every
// parameter (zero matrices for unused or frozen ones). `noise` supplies one
// standard-normal draw per (example, step) in schedule order; when empty,
// draws come from `rng`.
struct BatchLoss {
    LossRecord record;
    std::vector<Matrix> grads;
};
BatchLoss batch_loss(const ChestSearch& model, std::span<const TrainExample> batch,
                     std::mt19937_64& rng, bool with_grad, const ForwardOptions& options = {},
                     std::span<const double> noise = {});

// One AdamW update. Throws NumericError on a non-finite loss or gradient.
LossRecord train_step(ChestSearch& model, AdamW& optimizer, std::span<const TrainExample> batch,
                      std::mt19937_64& rng);

struct GradientCheckResult {
    double max_relative_error = 0.0;
    std::string worst_parameter;
    std::size_t checked = 0;  // scalars compared
    std::size_t skipped_frozen = 0;
};

// Compares analytic gradients against central differences (step `h`) on a
// fixed batch with fixed duration noise. Parameters are perturbed in place
// and restored. Relative error is
// |analytic - numeric| / max(|analytic|, |numeric|, floor).
GradientCheckResult gradient_check(ChestSearch& model, std::span<const TrainExample> batch,
                                   const ForwardOptions& options = {}, double h = 1e-5,
                                   double floor = 1e-6, std::uint64_t noise_seed = 1);

enum class DecodeMode { Sample, Argmax };

// Rolls out from the center fixation until the termination probability
// reaches the threshold or M fixations exist. Coordinates are emitted at
// high-resolution cell centres in the native frame; durations use zero noise
// and are clamped to [0.05, 5] s.
Scanpath predict_scanpath(const ChestSearch& model, const Matrix& image, int finding,
                          const std::string& image_id, const FindingLabel& label, double width,
                          double height, std::uint64_t seed, DecodeMode mode);

// Same, on a supplied pyramid.
Scanpath predict_scanpath(const ChestSearch& model, const FeaturePyramid& pyramid, int finding,
                          const std::string& image_id, const FindingLabel& label, double width,
                          double height, std::uint64_t seed, DecodeMode mode);

}  // namespace gazesearch::model
