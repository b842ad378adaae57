#pragma once
// Slow reference implementations used to cross-check the metrics. Written
// from the definitions, without sharing code with the library.

#include "gazesearch/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

namespace oracle {

using gazesearch::Fixation;

inline int recursive_edit_distance(const std::vector<int>& a, const std::vector<int>& b,
                                   std::size_t i = 0, std::size_t j = 0) {
    if (i == a.size()) return static_cast<int>(b.size() - j);
    if (j == b.size()) return static_cast<int>(a.size() - i);
    const int sub = recursive_edit_distance(a, b, i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
    const int del = recursive_edit_distance(a, b, i + 1, j) + 1;
    const int ins = recursive_edit_distance(a, b, i, j + 1) + 1;
    return std::min({sub, del, ins});
}

// Smallest index c with v <= (c + 1) * cell, so boundaries fall low.
inline int band(double v, double cell, int count) {
    for (int c = 0; c < count; ++c) {
        if (v <= (c + 1) * cell) return c;
    }
    return count - 1;
}

struct Grid {
    int cols, rows;
    double w, h;
    int cell(double x, double y) const { return band(y, h / rows, rows) * cols + band(x, w / cols, cols); }
    double cx(int c) const { return (c % cols + 0.5) * w / cols; }
    double cy(int c) const { return (c / cols + 0.5) * h / rows; }
};

inline std::vector<int> symbols(const std::vector<Fixation>& f, const Grid& g, double bin = 0.0) {
    std::vector<int> out;
    for (const auto& p : f) {
        int repeat = 1;
        if (bin > 0.0) {
            repeat = 1;
            while (repeat * bin < p.d - 1e-9) ++repeat;
        }
        for (int r = 0; r < repeat; ++r) out.push_back(g.cell(p.x, p.y));
    }
    return out;
}

// Best score over every global alignment, by plain recursion.
inline double best_alignment(const std::vector<int>& a, const std::vector<int>& b, const Grid& g,
                             double threshold, double gap, std::size_t i = 0, std::size_t j = 0) {
    if (i == a.size()) return gap * static_cast<double>(b.size() - j);
    if (j == b.size()) return gap * static_cast<double>(a.size() - i);
    const double dist = std::hypot(g.cx(a[i]) - g.cx(b[j]), g.cy(a[i]) - g.cy(b[j]));
    const double sub = std::max(0.0, threshold - dist) / threshold;
    return std::max({sub + best_alignment(a, b, g, threshold, gap, i + 1, j + 1),
                     gap + best_alignment(a, b, g, threshold, gap, i + 1, j),
                     gap + best_alignment(a, b, g, threshold, gap, i, j + 1)});
}

inline double scanmatch(const std::vector<Fixation>& a, const std::vector<Fixation>& b, const Grid& g,
                        double threshold, double gap, double bin = 0.0) {
    const auto sa = symbols(a, g, bin);
    const auto sb = symbols(b, g, bin);
    const double best = best_alignment(sa, sb, g, threshold, gap);
    return std::clamp(best / static_cast<double>(std::max(sa.size(), sb.size())), 0.0, 1.0);
}

inline double stde(const std::vector<Fixation>& pred, const std::vector<Fixation>& gt, int k, double w,
                   double h) {
    const std::size_t kk = std::max<std::size_t>(1, std::min({static_cast<std::size_t>(k), pred.size(), gt.size()}));
    auto windows = [&](const std::vector<Fixation>& f) {
        std::vector<std::vector<Fixation>> out;
        for (std::size_t s = 0; s + kk <= f.size(); ++s) out.emplace_back(f.begin() + s, f.begin() + s + kk);
        return out;
    };
    const auto wp = windows(pred);
    const auto wg = windows(gt);
    double total = 0.0;
    for (const auto& p : wp) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : wg) {
            double d = 0.0;
            for (std::size_t t = 0; t < kk; ++t) d += std::hypot(p[t].x - q[t].x, p[t].y - q[t].y);
            best = std::min(best, d / kk);
        }
        total += best;
    }
    return std::clamp(1.0 - (total / wp.size()) / std::hypot(w, h), 0.0, 1.0);
}

struct Five {
    double vector, direction, length, position, duration;
};

// Enumerates every monotone saccade path, keeps the one with the smallest
// summed vector difference, and scores it.
inline Five multimatch(const std::vector<Fixation>& a, const std::vector<Fixation>& b, double w, double h) {
    const std::size_t n = a.size() - 1, m = b.size() - 1;
    auto ux = [&](std::size_t i) { return a[i + 1].x - a[i].x; };
    auto uy = [&](std::size_t i) { return a[i + 1].y - a[i].y; };
    auto vx = [&](std::size_t j) { return b[j + 1].x - b[j].x; };
    auto vy = [&](std::size_t j) { return b[j + 1].y - b[j].y; };

    std::vector<std::pair<std::size_t, std::size_t>> path, best_path;
    double best = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double cost) {
        path.emplace_back(i, j);
        cost += std::hypot(ux(i) - vx(j), uy(i) - vy(j));
        if (i == n - 1 && j == m - 1) {
            if (cost < best) {
                best = cost;
                best_path = path;
            }
        } else {
            if (i + 1 < n && j + 1 < m) walk(i + 1, j + 1, cost);
            if (i + 1 < n) walk(i + 1, j, cost);
            if (j + 1 < m) walk(i, j + 1, cost);
        }
        path.pop_back();
    };
    walk(0, 0, 0.0);

    const double diag = std::hypot(w, h);
    Five f{0, 0, 0, 0, 0};
    for (auto [i, j] : best_path) {
        const double la = std::hypot(ux(i), uy(i)), lb = std::hypot(vx(j), vy(j));
        f.vector += 1.0 - std::hypot(ux(i) - vx(j), uy(i) - vy(j)) / (2.0 * diag);
        double turn = std::abs(std::atan2(uy(i), ux(i)) - std::atan2(vy(j), vx(j)));
        if (turn > std::numbers::pi) turn = 2.0 * std::numbers::pi - turn;
        f.direction += 1.0 - turn / std::numbers::pi;
        f.length += 1.0 - std::abs(la - lb) / diag;
        f.position += 1.0 - std::hypot(a[i].x - b[j].x, a[i].y - b[j].y) / diag;
        f.duration += 1.0 - std::abs(a[i].d - b[j].d) / std::max(a[i].d, b[j].d);
    }
    const double k = static_cast<double>(best_path.size());
    return {f.vector / k, f.direction / k, f.length / k, f.position / k, f.duration / k};
}

}  // namespace oracle
