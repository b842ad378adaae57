#include "gazesearch/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gazesearch::ad {

Parameter& ParameterSet::add(std::string name, Matrix init) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
    index_[name] = params_.size();
    params_.push_back(std::make_unique<Parameter>(Parameter{std::move(name), std::move(init)}));
    return *params_.back();
}

Parameter* ParameterSet::find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
}

const Parameter* ParameterSet::find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
}

Parameter& ParameterSet::at(const std::string& name) {
    if (auto* p = find(name)) return *p;
    throw std::out_of_range("unknown parameter " + name);
}

const Parameter& ParameterSet::at(const std::string& name) const {
    if (const auto* p = find(name)) return *p;
    throw std::out_of_range("unknown parameter " + name);
}

std::size_t ParameterSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
    return n;
}

const Matrix& Var::value() const { return tape->value(id); }

Var Tape::constant(Matrix value) {
    nodes_.push_back(Node{std::move(value), {}, false, false, {}});
    return {this, nodes_.size() - 1};
}

Var Tape::param(const Parameter& p) {
    if (auto it = leaves_.find(&p); it != leaves_.end()) return {this, it->second};
    nodes_.push_back(Node{p.value, {}, false, record_ && !p.frozen, {}});
    leaves_[&p] = nodes_.size() - 1;
    return {this, nodes_.size() - 1};
}

Var Tape::make(Matrix value, bool needs_grad, Backward backward) {
    const bool keep = record_ && needs_grad;
    nodes_.push_back(Node{std::move(value), {}, false, keep, keep ? std::move(backward) : Backward{}});
    return {this, nodes_.size() - 1};
}

Matrix* Tape::grad(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return nullptr;
    if (!n.has_grad) {
        n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
        n.has_grad = true;
    }
    return &n.grad;
}

const Matrix* Tape::grad_if(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.has_grad ? &n.grad : nullptr;
}

void Tape::backward(Var root) {
    if (root.tape != this) throw std::invalid_argument("root belongs to another tape");
    if (value(root.id).size() != 1) throw std::invalid_argument("backward needs a scalar root");
    for (auto& n : nodes_) {
        n.has_grad = false;
    }
    Matrix* seed = grad(root.id);
    if (!seed) return;
    (*seed)(0, 0) = 1.0;
    for (std::size_t i = root.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.has_grad && n.backward) n.backward(*this, i);
    }
}

const Matrix* Tape::parameter_grad(const Parameter& p) const {
    auto it = leaves_.find(&p);
    if (it == leaves_.end()) return nullptr;
    return grad_if(it->second);
}

namespace {

Tape& tape_of(Var a, Var b) {
    if (a.tape != b.tape || a.tape == nullptr) throw std::invalid_argument("vars on different tapes");
    return *a.tape;
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        std::ostringstream os;
        os << op << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x"
           << b.cols();
        throw std::invalid_argument(os.str());
    }
}

bool any_grad(Tape& t, std::initializer_list<Var> vars) {
    for (auto v : vars) {
        if (t.needs_grad(v.id)) return true;
    }
    return false;
}

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

bool clamped(double p) { return p < kProbClamp || p > 1.0 - kProbClamp; }

}  // namespace

Var matmul(Var a, Var b) {
    Tape& t = tape_of(a, b);
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
    Matrix out = a.value() * b.value();
    return t.make(std::move(out), any_grad(t, {a, b}), [a, b](Tape& t, std::size_t self) {
        const Matrix& g = *t.grad(self);
        if (Matrix* ga = t.grad(a.id)) ga->noalias() += g * t.value(b.id).transpose();
        if (Matrix* gb = t.grad(b.id)) gb->noalias() += t.value(a.id).transpose() * g;
    });
}

Var matmul_nt(Var a, Var b, double s) {
    Tape& t = tape_of(a, b);
    if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
    Matrix out = s * (a.value() * b.value().transpose());
    return t.make(std::move(out), any_grad(t, {a, b}), [a, b, s](Tape& t, std::size_t self) {
        const Matrix& g = *t.grad(self);
        if (Matrix* ga = t.grad(a.id)) ga->noalias() += s * (g * t.value(b.id));
        if (Matrix* gb = t.grad(b.id)) gb->noalias() += s * (g.transpose() * t.value(a.id));
    });
}

Var affine(Var x, Var w, Var b) {
    Tape& t = tape_of(x, w);
    if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
        throw std::invalid_argument("affine: shape mismatch");
    }
    Matrix out = x.value() * w.value();
    out.rowwise() += b.value().row(0);
    return t.make(std::move(out), any_grad(t, {x, w, b}), [x, w, b](Tape& t, std::size_t self) {
        const Matrix& g = *t.grad(self);
        if (Matrix* gx = t.grad(x.id)) gx->noalias() += g * t.value(w.id).transpose();
        if (Matrix* gw = t.grad(w.id)) gw->noalias() += t.value(x.id).transpose() * g;
        if (Matrix* gb = t.grad(b.id)) *gb += g.colwise().sum();
    });
}

Var add(Var a, Var b) {
    Tape& t = tape_of(a, b);
    check_same_shape(a.value(), b.value(), "add");
    Matrix out = a.value() + b.value();
    return t.make(std::move(out), any_grad(t, {a, b}), [a, b](Tape& t, std::size_t self) {
        const Matrix& g = *t.grad(self);
        if (Matrix* ga = t.grad(a.id)) *ga += g;
        if (Matrix* gb = t.grad(b.id)) *gb += g;
    });
}

Var add_rowvec(Var a, Var row) {
    Tape& t = tape_of(a, row);
    if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_rowvec: shape");
    Matrix out = a.value();
    out.rowwise() += row.value().row(0);
    return t.make(std::move(out), any_grad(t, {a, row}), [a, row](Tape& t, std::size_t self) {
        const Matrix& g = *t.grad(self);
        if (Matrix* ga = t.grad(a.id)) *ga += g;
        if (Matrix* gr = t.grad(row.id)) *gr += g.colwise().sum();
    });
}

Var sub(Var a, Var b) {
    Tape& t = tape_of(a, b);
    check_same_shape(a.value(), b.value(), "sub");
    Matrix out = a.value() - b.value();
    return t.make(std::move(out), any_grad(t, {a, b}), [a, b](Tape& t, std::size_t self) {
        const Matrix& g = *t.grad(self);
        if (Matrix* ga = t.grad(a.id)) *ga += g;
        if (Matrix* gb = t.grad(b.id)) *gb -= g;
    });
}

Var mul(Var a, Var b) {
    Tape& t = tape_of(a, b);
    check_same_shape(a.value(), b.value(), "mul");
    Matrix out = a.value().cwiseProduct(b.value());
    return t.make(std::move(out), any_grad(t, {a, b}), [a, b](Tape& t, std::size_t self) {
        const Matrix& g = *t.grad(self);
        if (Matrix* ga = t.grad(a.id)) *ga += g.cwiseProduct(t.value(b.id));
        if (Matrix* gb = t.grad(b.id)) *gb += g.cwiseProduct(t.value(a.id));
    });
}

Var scale(Var a, double s) {
    Tape& t = *a.tape;
    Matrix out = s * a.value();
    return t.make(std::move(out), t.needs_grad(a.id), [a, s](Tape& t, std::size_t self) {
        if (Matrix* ga = t.grad(a.id)) *ga += s * *t.grad(self);
    });
}

Var relu(Var a) {
    Tape& t = *a.tape;
    Matrix out = a.value().cwiseMax(0.0);
    return t.make(std::move(out), t.needs_grad(a.id), [a](Tape& t, std::size_t self) {
        if (Matrix* ga = t.grad(a.id)) {
            const Matrix& x = t.value(a.id);
            *ga += (x.array() > 0.0).select(t.grad(self)->array(), 0.0).matrix();
        }
    });
}

Var sigmoid(Var a) {
    Tape& t = *a.tape;
    Matrix out = a.value().unaryExpr([](double v) {
        // Split on sign to stay finite for large |v|.
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
    });
    return t.make(std::move(out), t.needs_grad(a.id), [a](Tape& t, std::size_t self) {
        if (Matrix* ga = t.grad(a.id)) {
            const Matrix& y = t.value(self);
            *ga += t.grad(self)->cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix()));
        }
    });
}

Var exp(Var a) {
    Tape& t = *a.tape;
    Matrix out = a.value().array().exp().matrix();
    return t.make(std::move(out), t.needs_grad(a.id), [a](Tape& t, std::size_t self) {
        if (Matrix* ga = t.grad(a.id)) *ga += t.grad(self)->cwiseProduct(t.value(self));
    });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
    Tape& t = tape_of(x, gamma);
    const Matrix& xv = x.value();
    const Eigen::Index n = xv.rows(), d = xv.cols();
    if (gamma.rows() != 1 || gamma.cols() != d || beta.rows() != 1 || beta.cols() != d) {
        throw std::invalid_argument("layer_norm: parameter shape");
    }
    Matrix xhat(n, d);
    Eigen::VectorXd inv_std(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mean = xv.row(i).mean();
        const double var = (xv.row(i).array() - mean).square().mean();
        inv_std(i) = 1.0 / std::sqrt(var + eps);
        xhat.row(i) = (xv.row(i).array() - mean) * inv_std(i);
    }
    Matrix out = xhat.array().rowwise() * gamma.value().row(0).array();
    out.rowwise() += beta.value().row(0);
    return t.make(std::move(out), any_grad(t, {x, gamma, beta}),
                  [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                      Tape& t, std::size_t self) {
                      const Matrix& g = *t.grad(self);
                      if (Matrix* gg = t.grad(gamma.id)) *gg += g.cwiseProduct(xhat).colwise().sum();
                      if (Matrix* gb = t.grad(beta.id)) *gb += g.colwise().sum();
                      if (Matrix* gx = t.grad(x.id)) {
                          const Matrix gh = g.array().rowwise() * t.value(gamma.id).row(0).array();
                          const double d = static_cast<double>(gh.cols());
                          for (Eigen::Index i = 0; i < gh.rows(); ++i) {
                              const double m1 = gh.row(i).mean();
                              const double m2 = gh.row(i).dot(xhat.row(i)) / d;
                              gx->row(i).array() +=
                                  inv_std(i) * (gh.row(i).array() - m1 - xhat.row(i).array() * m2);
                          }
                      }
                  });
}

Var softmax_rows(Var a) {
    Tape& t = *a.tape;
    Matrix out = a.value();
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double mx = out.row(i).maxCoeff();
        out.row(i) = (out.row(i).array() - mx).exp();
        out.row(i) /= out.row(i).sum();
    }
    return t.make(std::move(out), t.needs_grad(a.id), [a](Tape& t, std::size_t self) {
        if (Matrix* ga = t.grad(a.id)) {
            const Matrix& y = t.value(self);
            const Matrix& g = *t.grad(self);
            for (Eigen::Index i = 0; i < y.rows(); ++i) {
                const double dot = g.row(i).dot(y.row(i));
                ga->row(i).array() += y.row(i).array() * (g.row(i).array() - dot);
            }
        }
    });
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
    Tape& t = *parts.front().tape;
    Eigen::Index rows = 0;
    const Eigen::Index cols = parts.front().cols();
    bool needs = false;
    for (auto p : parts) {
        if (p.tape != &t || p.cols() != cols) throw std::invalid_argument("concat_rows: shape");
        rows += p.rows();
        needs = needs || t.needs_grad(p.id);
    }
    Matrix out(rows, cols);
    Eigen::Index r = 0;
    for (auto p : parts) {
        out.middleRows(r, p.rows()) = p.value();
        r += p.rows();
    }
    std::vector<Var> copy(parts.begin(), parts.end());
    return t.make(std::move(out), needs, [copy](Tape& t, std::size_t self) {
        const Matrix& g = *t.grad(self);
        Eigen::Index r = 0;
        for (auto p : copy) {
            const Eigen::Index n = t.value(p.id).rows();
            if (Matrix* gp = t.grad(p.id)) *gp += g.middleRows(r, n);
            r += n;
        }
    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    Tape& t = *parts.front().tape;
    Eigen::Index cols = 0;
    const Eigen::Index rows = parts.front().rows();
    bool needs = false;
    for (auto p : parts) {
        if (p.tape != &t || p.rows() != rows) throw std::invalid_argument("concat_cols: shape");
        cols += p.cols();
        needs = needs || t.needs_grad(p.id);
    }
    Matrix out(rows, cols);
    Eigen::Index c = 0;
    for (auto p : parts) {
        out.middleCols(c, p.cols()) = p.value();
        c += p.cols();
    }
    std::vector<Var> copy(parts.begin(), parts.end());
    return t.make(std::move(out), needs, [copy](Tape& t, std::size_t self) {
        const Matrix& g = *t.grad(self);
        Eigen::Index c = 0;
        for (auto p : copy) {
            const Eigen::Index n = t.value(p.id).cols();
            if (Matrix* gp = t.grad(p.id)) *gp += g.middleCols(c, n);
            c += n;
        }
    });
}

Var slice_cols(Var a, Eigen::Index first, Eigen::Index count) {
    Tape& t = *a.tape;
    if (first < 0 || count < 0 || first + count > a.cols()) {
        throw std::invalid_argument("slice_cols: out of range");
    }
    Matrix out = a.value().middleCols(first, count);
    return t.make(std::move(out), t.needs_grad(a.id), [a, first, count](Tape& t, std::size_t self) {
        if (Matrix* ga = t.grad(a.id)) ga->middleCols(first, count) += *t.grad(self);
    });
}

Var gather_rows(Var a, std::span<const Eigen::Index> rows) {
    Tape& t = *a.tape;
    const Matrix& av = a.value();
    Matrix out(static_cast<Eigen::Index>(rows.size()), av.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= av.rows()) throw std::invalid_argument("gather_rows: index");
        out.row(static_cast<Eigen::Index>(i)) = av.row(rows[i]);
    }
    std::vector<Eigen::Index> idx(rows.begin(), rows.end());
    return t.make(std::move(out), t.needs_grad(a.id), [a, idx](Tape& t, std::size_t self) {
        if (Matrix* ga = t.grad(a.id)) {
            const Matrix& g = *t.grad(self);
            for (std::size_t i = 0; i < idx.size(); ++i) {
                ga->row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
            }
        }
    });
}

Var patchify(Var a, int grid_rows, int grid_cols, int patch) {
    Tape& t = *a.tape;
    const Matrix& av = a.value();
    if (av.rows() != static_cast<Eigen::Index>(grid_rows) * grid_cols || grid_rows % patch != 0 ||
        grid_cols % patch != 0) {
        throw std::invalid_argument("patchify: grid does not match input");
    }
    const Eigen::Index c = av.cols();
    const int br = grid_rows / patch, bc = grid_cols / patch;
    Matrix out(static_cast<Eigen::Index>(br) * bc, static_cast<Eigen::Index>(patch) * patch * c);
    auto src = [=](int bi, int bj, int dy, int dx) {
        return static_cast<Eigen::Index>(bi * patch + dy) * grid_cols + (bj * patch + dx);
    };
    for (int bi = 0; bi < br; ++bi)
        for (int bj = 0; bj < bc; ++bj)
            for (int dy = 0; dy < patch; ++dy)
                for (int dx = 0; dx < patch; ++dx)
                    out.row(bi * bc + bj).segment((dy * patch + dx) * c, c) =
                        av.row(src(bi, bj, dy, dx));
    return t.make(std::move(out), t.needs_grad(a.id),
                  [a, br, bc, patch, c, src](Tape& t, std::size_t self) {
                      Matrix* ga = t.grad(a.id);
                      if (!ga) return;
                      const Matrix& g = *t.grad(self);
                      for (int bi = 0; bi < br; ++bi)
                          for (int bj = 0; bj < bc; ++bj)
                              for (int dy = 0; dy < patch; ++dy)
                                  for (int dx = 0; dx < patch; ++dx)
                                      ga->row(src(bi, bj, dy, dx)) +=
                                          g.row(bi * bc + bj).segment((dy * patch + dx) * c, c);
                  });
}

Var sum(Var a) {
    Tape& t = *a.tape;
    Matrix out(1, 1);
    out(0, 0) = a.value().sum();
    return t.make(std::move(out), t.needs_grad(a.id), [a](Tape& t, std::size_t self) {
        if (Matrix* ga = t.grad(a.id)) ga->array() += (*t.grad(self))(0, 0);
    });
}

Var sum_scalars(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("sum_scalars: no inputs");
    Tape& t = *parts.front().tape;
    Matrix out = Matrix::Zero(1, 1);
    bool needs = false;
    for (auto p : parts) {
        if (p.value().size() != 1) throw std::invalid_argument("sum_scalars: non-scalar input");
        out(0, 0) += p.scalar();
        needs = needs || t.needs_grad(p.id);
    }
    std::vector<Var> copy(parts.begin(), parts.end());
    return t.make(std::move(out), needs, [copy](Tape& t, std::size_t self) {
        const double g = (*t.grad(self))(0, 0);
        for (auto p : copy) {
            if (Matrix* gp = t.grad(p.id)) (*gp)(0, 0) += g;
        }
    });
}

Var scale_grad(Var a, double factor) {
    Tape& t = *a.tape;
    Matrix out = a.value();
    return t.make(std::move(out), t.needs_grad(a.id), [a, factor](Tape& t, std::size_t self) {
        if (Matrix* ga = t.grad(a.id)) *ga += factor * *t.grad(self);
    });
}

Var binary_cross_entropy(Var pred, double target) {
    Tape& t = *pred.tape;
    if (pred.value().size() != 1) throw std::invalid_argument("bce: scalar prediction expected");
    const double p = clamp_prob(pred.scalar());
    Matrix out(1, 1);
    out(0, 0) = -target * std::log(p) - (1.0 - target) * std::log(1.0 - p);
    return t.make(std::move(out), t.needs_grad(pred.id), [pred, target](Tape& t, std::size_t self) {
        Matrix* gp = t.grad(pred.id);
        const double raw = t.value(pred.id)(0, 0);
        if (!gp || clamped(raw)) return;
        (*gp)(0, 0) += (*t.grad(self))(0, 0) * (-target / raw + (1.0 - target) / (1.0 - raw));
    });
}

Var focal_heatmap_loss(Var pred, const Matrix& target, double alpha, double gamma) {
    Tape& t = *pred.tape;
    check_same_shape(pred.value(), target, "focal_heatmap_loss");
    const Matrix& pv = pred.value();
    const double n = static_cast<double>(pv.size());
    double total = 0.0;
    for (Eigen::Index i = 0; i < pv.rows(); ++i) {
        for (Eigen::Index j = 0; j < pv.cols(); ++j) {
            const double p = clamp_prob(pv(i, j));
            const double h = target(i, j);
            if (h == 1.0) {
                total += std::pow(1.0 - p, gamma) * std::log(p);
            } else {
                total += std::pow(1.0 - h, alpha) * std::pow(p, gamma) * std::log(1.0 - p);
            }
        }
    }
    Matrix out(1, 1);
    out(0, 0) = -total / n;
    return t.make(std::move(out), t.needs_grad(pred.id),
                  [pred, target, alpha, gamma, n](Tape& t, std::size_t self) {
                      Matrix* gp = t.grad(pred.id);
                      if (!gp) return;
                      const double g = (*t.grad(self))(0, 0) / n;
                      const Matrix& pv = t.value(pred.id);
                      for (Eigen::Index i = 0; i < pv.rows(); ++i) {
                          for (Eigen::Index j = 0; j < pv.cols(); ++j) {
                              const double p = pv(i, j);
                              if (clamped(p)) continue;
                              const double h = target(i, j);
                              double d;
                              if (h == 1.0) {
                                  d = gamma * std::pow(1.0 - p, gamma - 1.0) * std::log(p) -
                                      std::pow(1.0 - p, gamma) / p;
                              } else {
                                  d = -std::pow(1.0 - h, alpha) *
                                      (gamma * std::pow(p, gamma - 1.0) * std::log(1.0 - p) -
                                       std::pow(p, gamma) / (1.0 - p));
                              }
                              (*gp)(i, j) += g * d;
                          }
                      }
                  });
}

Var l1_loss(Var pred, double target) {
    Tape& t = *pred.tape;
    if (pred.value().size() != 1) throw std::invalid_argument("l1: scalar prediction expected");
    Matrix out(1, 1);
    out(0, 0) = std::abs(pred.scalar() - target);
    return t.make(std::move(out), t.needs_grad(pred.id), [pred, target](Tape& t, std::size_t self) {
        if (Matrix* gp = t.grad(pred.id)) {
            const double diff = t.value(pred.id)(0, 0) - target;
            const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
            (*gp)(0, 0) += (*t.grad(self))(0, 0) * sign;
        }
    });
}

}  // namespace gazesearch::ad
