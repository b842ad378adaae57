#include "gazesearch/metrics.hpp"

#include "gazesearch/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>

namespace gazesearch::metrics {

namespace {

double diagonal(double width, double height) { return std::hypot(width, height); }

int lower_cell(double v, double cell, int count) {
    // ceil(v / cell) - 1 puts exact boundaries into the lower-index cell.
    const int idx = static_cast<int>(std::ceil(v / cell)) - 1;
    return std::clamp(idx, 0, count - 1);
}

struct Point {
    double x, y;
};

Point cell_center(int cell, const GridSpec& grid) {
    const int row = cell / grid.cols;
    const int col = cell % grid.cols;
    return {(col + 0.5) * grid.cell_width(), (row + 0.5) * grid.cell_height()};
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

void check_grid(const GridSpec& grid) {
    if (grid.cols <= 0 || grid.rows <= 0) throw std::invalid_argument("grid must be positive");
    if (grid.cols * grid.rows > 676) throw std::invalid_argument("grid exceeds 676 cells");
    if (!(grid.width > 0.0) || !(grid.height > 0.0)) {
        throw std::invalid_argument("grid image extent must be positive");
    }
}

double ScanMatchConfig::threshold(double width, double height) const {
    return substitution_threshold.value_or(diagonal(width, height) / 4.0);
}

int cell_of(double x, double y, const GridSpec& grid) {
    const int col = lower_cell(x, grid.cell_width(), grid.cols);
    const int row = lower_cell(y, grid.cell_height(), grid.rows);
    return row * grid.cols + col;
}

std::vector<int> quantize(std::span<const Fixation> fixations, const GridSpec& grid,
                          bool with_duration, double duration_bin) {
    check_grid(grid);
    if (with_duration && !(duration_bin > 0.0)) {
        throw std::invalid_argument("duration bin must be > 0");
    }
    std::vector<int> out;
    for (const auto& f : fixations) {
        const int cell = cell_of(f.x, f.y, grid);
        int repeat = 1;
        if (with_duration) {
            // Tolerance absorbs representation error such as 0.15 / 0.05.
            repeat = std::max(1, static_cast<int>(std::ceil(f.d / duration_bin - 1e-9)));
        }
        out.insert(out.end(), static_cast<std::size_t>(repeat), cell);
    }
    return out;
}

double substitution_score(int p, int q, const GridSpec& grid, double threshold) {
    const auto a = cell_center(p, grid);
    const auto b = cell_center(q, grid);
    const double dist = std::hypot(a.x - b.x, a.y - b.y);
    return std::max(0.0, threshold - dist) / threshold;
}

double scanmatch_symbols(std::span<const int> a, std::span<const int> b, const GridSpec& grid,
                         double threshold, double gap_penalty) {
    if (a.empty() || b.empty()) throw std::invalid_argument("scanmatch needs non-empty sequences");
    if (!(threshold > 0.0)) throw std::invalid_argument("substitution threshold must be > 0");
    const std::size_t n = a.size(), m = b.size();
    std::vector<double> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<double>(j) * gap_penalty;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = static_cast<double>(i) * gap_penalty;
        for (std::size_t j = 1; j <= m; ++j) {
            const double match = prev[j - 1] + substitution_score(a[i - 1], b[j - 1], grid, threshold);
            cur[j] = std::max({match, prev[j] + gap_penalty, cur[j - 1] + gap_penalty});
        }
        std::swap(prev, cur);
    }
    return clamp01(prev[m] / static_cast<double>(std::max(n, m)));
}

double scanmatch(const Scanpath& a, const Scanpath& b, const ScanMatchConfig& config,
                 bool with_duration, double width, double height) {
    const auto grid = config.grid(width, height);
    const auto sa = quantize(a.fixations, grid, with_duration, config.duration_bin);
    const auto sb = quantize(b.fixations, grid, with_duration, config.duration_bin);
    return scanmatch_symbols(sa, sb, grid, config.threshold(width, height), config.gap_penalty);
}

namespace {

struct Saccade {
    double dx, dy;
    double norm() const { return std::hypot(dx, dy); }
};

std::vector<Saccade> saccades(std::span<const Fixation> f) {
    std::vector<Saccade> out;
    for (std::size_t i = 0; i + 1 < f.size(); ++i) {
        out.push_back({f[i + 1].x - f[i].x, f[i + 1].y - f[i].y});
    }
    return out;
}

double angle_between(const Saccade& u, const Saccade& v) {
    const double cross = u.dx * v.dy - u.dy * v.dx;
    const double dot = u.dx * v.dx + u.dy * v.dy;
    return std::atan2(std::abs(cross), dot);
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> align_saccades(std::span<const Fixation> a,
                                                                 std::span<const Fixation> b) {
    const auto u = saccades(a);
    const auto v = saccades(b);
    if (u.empty() || v.empty()) return {};
    const std::size_t n = u.size(), m = v.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> cum(n, std::vector<double>(m, inf));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double cost = std::hypot(u[i].dx - v[j].dx, u[i].dy - v[j].dy);
            double best = (i == 0 && j == 0) ? 0.0 : inf;
            if (i > 0 && j > 0) best = std::min(best, cum[i - 1][j - 1]);
            if (i > 0) best = std::min(best, cum[i - 1][j]);
            if (j > 0) best = std::min(best, cum[i][j - 1]);
            cum[i][j] = cost + best;
        }
    }
    std::vector<std::pair<std::size_t, std::size_t>> path{{n - 1, m - 1}};
    std::size_t i = n - 1, j = m - 1;
    while (i > 0 || j > 0) {
        // Prefer the diagonal on ties.
        double best = inf;
        std::size_t bi = i, bj = j;
        if (i > 0 && j > 0) { best = cum[i - 1][j - 1]; bi = i - 1; bj = j - 1; }
        if (i > 0 && cum[i - 1][j] < best) { best = cum[i - 1][j]; bi = i - 1; bj = j; }
        if (j > 0 && cum[i][j - 1] < best) { best = cum[i][j - 1]; bi = i; bj = j - 1; }
        i = bi;
        j = bj;
        path.emplace_back(i, j);
    }
    std::reverse(path.begin(), path.end());
    return path;
}

std::vector<Fixation> simplify_scanpath(std::span<const Fixation> fixations, double diagonal,
                                        double amplitude_fraction, double direction_threshold) {
    std::vector<Fixation> f(fixations.begin(), fixations.end());
    const double amp = amplitude_fraction * diagonal;
    bool changed = true;
    while (changed && f.size() > 2) {
        changed = false;
        for (std::size_t i = 0; i + 2 < f.size(); ++i) {
            const Saccade u{f[i + 1].x - f[i].x, f[i + 1].y - f[i].y};
            const Saccade v{f[i + 2].x - f[i + 1].x, f[i + 2].y - f[i + 1].y};
            const bool short_pair = u.norm() < amp && v.norm() < amp;
            const bool same_way = angle_between(u, v) < direction_threshold;
            if (short_pair || same_way) {
                f[i].d += f[i + 1].d;
                f.erase(f.begin() + static_cast<std::ptrdiff_t>(i + 1));
                changed = true;
                break;
            }
        }
    }
    return f;
}

MultiMatchScores multimatch(std::span<const Fixation> a, std::span<const Fixation> b,
                            double width, double height) {
    MultiMatchScores out;
    if (a.size() < 2 || b.size() < 2) return out;
    const double diag = diagonal(width, height);
    const auto u = saccades(a);
    const auto v = saccades(b);
    const auto path = align_saccades(a, b);

    double vec = 0.0, dir = 0.0, len = 0.0, pos = 0.0, dur = 0.0;
    for (auto [i, j] : path) {
        vec += 1.0 - std::hypot(u[i].dx - v[j].dx, u[i].dy - v[j].dy) / (2.0 * diag);
        dir += 1.0 - angle_between(u[i], v[j]) / std::numbers::pi;
        len += 1.0 - std::abs(u[i].norm() - v[j].norm()) / diag;
        pos += 1.0 - std::hypot(a[i].x - b[j].x, a[i].y - b[j].y) / diag;
        const double dmax = std::max(a[i].d, b[j].d);
        dur += dmax > 0.0 ? 1.0 - std::abs(a[i].d - b[j].d) / dmax : 1.0;
    }
    const double n = static_cast<double>(path.size());
    out.vector = clamp01(vec / n);
    out.direction = clamp01(dir / n);
    out.length = clamp01(len / n);
    out.position = clamp01(pos / n);
    out.duration = clamp01(dur / n);
    return out;
}

int edit_distance(std::span<const int> a, std::span<const int> b) {
    const std::size_t n = a.size(), m = b.size();
    std::vector<int> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = static_cast<int>(i);
        for (std::size_t j = 1; j <= m; ++j) {
            const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

int sed(std::span<const Fixation> a, std::span<const Fixation> b, const GridSpec& grid) {
    return edit_distance(quantize(a, grid, false, 1.0), quantize(b, grid, false, 1.0));
}

double stde(std::span<const Fixation> pred, std::span<const Fixation> gt, int k, double width,
            double height) {
    if (pred.empty() || gt.empty()) throw std::invalid_argument("stde needs non-empty scanpaths");
    const auto kk = static_cast<std::size_t>(
        std::max(1, std::min({k, static_cast<int>(pred.size()), static_cast<int>(gt.size())})));
    double total = 0.0;
    const std::size_t np = pred.size() - kk + 1;
    const std::size_t ng = gt.size() - kk + 1;
    for (std::size_t i = 0; i < np; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < ng; ++j) {
            double dist = 0.0;
            for (std::size_t t = 0; t < kk; ++t) {
                dist += std::hypot(pred[i + t].x - gt[j + t].x, pred[i + t].y - gt[j + t].y);
            }
            best = std::min(best, dist / static_cast<double>(kk));
        }
        total += best;
    }
    const double mean = total / static_cast<double>(np);
    return clamp01(1.0 - mean / diagonal(width, height));
}

MetricReport evaluate(std::span<const Scanpath> predictions, std::span<const Scanpath> references,
                      const MetricParams& params, double default_width, double default_height) {
    std::map<std::pair<std::string, std::string>, const Scanpath*> refs;
    for (const auto& r : references) refs[{r.image_id, r.finding.name}] = &r;

    MetricReport report;
    report.params = params;
    std::map<std::pair<std::string, std::string>, bool> used;
    for (const auto& p : predictions) {
        auto it = refs.find({p.image_id, p.finding.name});
        if (it == refs.end()) {
            throw MissingReference("no reference for prediction (" + p.image_id + ", " +
                                   p.finding.name + ")");
        }
        used[it->first] = true;
        const Scanpath& r = *it->second;
        double W = r.width > 0.0 ? r.width : (p.width > 0.0 ? p.width : default_width);
        double H = r.height > 0.0 ? r.height : (p.height > 0.0 ? p.height : default_height);
        if (!(W > 0.0) || !(H > 0.0)) {
            throw DataError("image extent unknown for " + p.image_id);
        }
        if (p.fixations.empty() || r.fixations.empty()) {
            throw DataError("empty scanpath for (" + p.image_id + ", " + p.finding.name + ")");
        }

        PairScores s;
        s.image_id = p.image_id;
        s.finding = p.finding.name;
        s.scanmatch_wo_dur = scanmatch(p, r, params.scanmatch, false, W, H);
        s.scanmatch_w_dur = scanmatch(p, r, params.scanmatch, true, W, H);
        if (params.multimatch_simplify) {
            const double diag = std::hypot(W, H);
            const auto ps = simplify_scanpath(p.fixations, diag, params.simplify_amplitude,
                                              params.simplify_direction);
            const auto rs = simplify_scanpath(r.fixations, diag, params.simplify_amplitude,
                                              params.simplify_direction);
            s.multimatch = multimatch(ps, rs, W, H);
        } else {
            s.multimatch = multimatch(p.fixations, r.fixations, W, H);
        }
        s.sed = sed(p.fixations, r.fixations, {params.sed_cols, params.sed_rows, W, H});
        s.stde = stde(p.fixations, r.fixations, params.stde_k, W, H);
        report.pairs.push_back(std::move(s));
    }

    const auto n = static_cast<double>(report.pairs.size());
    report.n_pairs = static_cast<int>(report.pairs.size());
    report.unmatched_references = static_cast<int>(refs.size() - used.size());
    for (const auto& s : report.pairs) {
        report.scanmatch_wo_dur += s.scanmatch_wo_dur;
        report.scanmatch_w_dur += s.scanmatch_w_dur;
        report.sed += s.sed;
        report.stde += s.stde;
        if (!s.multimatch.degenerate()) {
            ++report.n_multimatch;
            report.mm_vector += *s.multimatch.vector;
            report.mm_direction += *s.multimatch.direction;
            report.mm_length += *s.multimatch.length;
            report.mm_position += *s.multimatch.position;
            report.mm_duration += *s.multimatch.duration;
        }
    }
    if (n > 0) {
        report.scanmatch_wo_dur /= n;
        report.scanmatch_w_dur /= n;
        report.sed /= n;
        report.stde /= n;
    }
    if (report.n_multimatch > 0) {
        const double m = report.n_multimatch;
        report.mm_vector /= m;
        report.mm_direction /= m;
        report.mm_length /= m;
        report.mm_position /= m;
        report.mm_duration /= m;
    }
    return report;
}

}  // namespace gazesearch::metrics
