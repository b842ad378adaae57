#pragma once
// Minimal reverse-mode automatic differentiation over dense row-major
// double matrices. A Tape records operations in creation order; backward()
// walks it in reverse, so creation order is already topological.

#include <Eigen/Core>

#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace gazesearch::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Parameter {
    std::string name;
    Matrix value;
    bool frozen = false;  // excluded from updates and gradient checks
};

// Owns parameters with stable addresses, in registration order.
class ParameterSet {
public:
    Parameter& add(std::string name, Matrix init);
    Parameter* find(const std::string& name);
    const Parameter* find(const std::string& name) const;
    Parameter& at(const std::string& name);
    const Parameter& at(const std::string& name) const;

    std::size_t size() const { return params_.size(); }
    Parameter& operator[](std::size_t i) { return *params_[i]; }
    const Parameter& operator[](std::size_t i) const { return *params_[i]; }

    std::size_t scalar_count() const;

private:
    std::vector<std::unique_ptr<Parameter>> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

class Tape;

// Handle to a tape node.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Matrix& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    double scalar() const { return value()(0, 0); }
};

class Tape {
public:
    // With record = false no backward closures are kept (inference,
    // finite differences).
    explicit Tape(bool record = true) : record_(record) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Matrix value);
    // One leaf per parameter per tape; repeated calls return the same node.
    Var param(const Parameter& p);

    using Backward = std::function<void(Tape&, std::size_t self)>;
    Var make(Matrix value, bool needs_grad, Backward backward);

    const Matrix& value(std::size_t id) const { return nodes_[id].value; }
    bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
    bool recording() const { return record_; }
    // Gradient buffer of a node, allocated as zeros on first use. Returns
    // nullptr for nodes that do not need gradients.
    Matrix* grad(std::size_t id);
    const Matrix* grad_if(std::size_t id) const;

    // Seeds d(root)/d(root) = 1 for a 1x1 root and propagates.
    void backward(Var root);

    // Gradient of the last backward() with respect to p; nullptr when p was
    // not used or is frozen.
    const Matrix* parameter_grad(const Parameter& p) const;

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool has_grad = false;
        bool needs_grad = false;
        Backward backward;
    };
    bool record_;
    std::deque<Node> nodes_;
    std::unordered_map<const Parameter*, std::size_t> leaves_;
};

// Arithmetic. Shapes follow the usual matrix conventions; mismatches throw
// std::invalid_argument.
Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b, double scale = 1.0);  // scale * a * b^T
Var affine(Var x, Var w, Var b);                   // x * w + b (b is 1 x cols)
Var add(Var a, Var b);
Var add_rowvec(Var a, Var row);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var relu(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
Var softmax_rows(Var a);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, Eigen::Index first, Eigen::Index count);
Var gather_rows(Var a, std::span<const Eigen::Index> rows);
// Regroups a (grid_rows*grid_cols) x C row-major grid of feature rows into
// non-overlapping patch x patch blocks: one row per block, columns ordered
// (dy, dx, channel).
Var patchify(Var a, int grid_rows, int grid_cols, int patch);
Var sum(Var a);
Var sum_scalars(std::span<const Var> parts);
// Identity forward; multiplies the incoming gradient by `factor`.
Var scale_grad(Var a, double factor);

// Loss primitives. Predictions are clamped to [1e-6, 1 - 1e-6] before logs;
// the gradient is zero where clamping is active.
inline constexpr double kProbClamp = 1e-6;
Var binary_cross_entropy(Var pred, double target);
Var focal_heatmap_loss(Var pred, const Matrix& target, double alpha, double gamma);
Var l1_loss(Var pred, double target);

}  // namespace gazesearch::ad
