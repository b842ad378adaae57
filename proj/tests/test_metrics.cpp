#include "gazesearch/error.hpp"
#include "gazesearch/metrics.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace gazesearch;
using namespace gazesearch::metrics;

namespace {

Scanpath path(std::vector<Fixation> f, const std::string& id = "img") {
    return {id, {"edema"}, std::move(f), 100, 100};
}

std::vector<Fixation> random_path(std::mt19937_64& rng, int lo, int hi) {
    std::uniform_int_distribution<int> len(lo, hi);
    return testing_support::random_fixations(rng, len(rng), 100, 100);
}

}  // namespace

TEST_CASE("quantize") {
    const GridSpec g{2, 2, 100, 100};
    CHECK(cell_of(0, 0, g) == 0);
    CHECK(cell_of(99, 99, g) == 3);
    CHECK(cell_of(50, 50, g) == 0);   // boundary goes to the lower cell
    CHECK(cell_of(50.01, 50, g) == 1);
    const std::vector<Fixation> f = {{10, 10, 0.12}};
    CHECK(quantize(f, g, true, 0.05) == std::vector<int>{0, 0, 0});
    const std::vector<Fixation> exact = {{10, 10, 0.15}};
    CHECK(quantize(exact, g, true, 0.05).size() == 3);
    CHECK(quantize(f, g, false, 0.05).size() == 1);
    CHECK_THROWS_AS(quantize(f, GridSpec{30, 30, 100, 100}, false, 0.05), std::invalid_argument);
}

TEST_CASE("scanmatch examples") {
    const ScanMatchConfig cfg;
    const auto a = path({{50, 50, 0.3}, {10, 10, 0.2}, {80, 30, 0.5}});
    CHECK(scanmatch(a, a, cfg, false, 100, 100) == 1.0);
    CHECK(scanmatch(a, a, cfg, true, 100, 100) == 1.0);

    const auto near = path({{2, 2, 0.3}, {5, 3, 0.3}});
    const auto far = path({{98, 98, 0.3}, {95, 97, 0.3}});
    CHECK(scanmatch(near, far, cfg, false, 100, 100) == 0.0);

    const auto two = std::vector<Fixation>{{20, 20, 0.3}, {70, 40, 0.3}};
    const auto three = std::vector<Fixation>{{25, 15, 0.3}, {60, 45, 0.2}, {90, 90, 0.2}};
    const oracle::Grid og{12, 8, 100, 100};
    const double thr = std::hypot(100.0, 100.0) / 4.0;
    CHECK(std::abs(scanmatch(path(two), path(three), cfg, false, 100, 100) -
                   oracle::scanmatch(two, three, og, thr, 0.0)) <= 1e-9);
}

TEST_CASE("scanmatch gap penalty lowers the score") {
    ScanMatchConfig cfg;
    const auto a = path({{20, 20, 0.3}, {70, 40, 0.3}});
    const auto b = path({{20, 20, 0.3}, {70, 40, 0.3}, {90, 90, 0.3}});
    const double free_gaps = scanmatch(a, b, cfg, false, 100, 100);
    cfg.gap_penalty = -0.5;
    CHECK(scanmatch(a, b, cfg, false, 100, 100) < free_gaps);
}

TEST_CASE("multimatch examples") {
    const std::vector<Fixation> a = {{50, 50, 0.3}, {10, 10, 0.2}, {80, 30, 0.5}};
    const auto self = multimatch(a, a, 100, 100);
    CHECK(*self.vector == 1.0);
    CHECK(*self.direction == 1.0);
    CHECK(*self.length == 1.0);
    CHECK(*self.position == 1.0);
    CHECK(*self.duration == 1.0);

    const std::vector<Fixation> right = {{20, 50, 0.3}, {60, 50, 0.3}};
    const std::vector<Fixation> left = {{60, 50, 0.3}, {20, 50, 0.3}};
    CHECK(*multimatch(right, left, 100, 100).direction == 0.0);

    const std::vector<Fixation> single = {{50, 50, 0.3}};
    CHECK(multimatch(single, a, 100, 100).degenerate());
}

TEST_CASE("multimatch hand-built pair equals the path oracle") {
    const std::vector<Fixation> a = {{50, 50, 0.3}, {20, 30, 0.4}, {70, 80, 0.2}};
    const std::vector<Fixation> b = {{50, 50, 0.3}, {25, 20, 0.5}, {60, 90, 0.6}};
    const auto got = multimatch(a, b, 100, 100);
    const auto want = oracle::multimatch(a, b, 100, 100);
    CHECK(std::abs(*got.vector - want.vector) <= 1e-9);
    CHECK(std::abs(*got.direction - want.direction) <= 1e-9);
    CHECK(std::abs(*got.length - want.length) <= 1e-9);
    CHECK(std::abs(*got.position - want.position) <= 1e-9);
    CHECK(std::abs(*got.duration - want.duration) <= 1e-9);
}

TEST_CASE("edit distance examples") {
    CHECK(edit_distance(std::vector<int>{0, 1}, std::vector<int>{0, 1}) == 0);
    CHECK(edit_distance(std::vector<int>{0, 1}, std::vector<int>{0, 2}) == 1);
    CHECK(edit_distance(std::vector<int>{0, 1, 2}, std::vector<int>{2, 1, 0}) == 2);
    CHECK(edit_distance(std::vector<int>{}, std::vector<int>{4, 4}) == 2);
}

TEST_CASE("sed on a 5x5 grid") {
    const GridSpec g{5, 5, 100, 100};
    const std::vector<Fixation> a = {{10, 10, 0.1}, {50, 50, 0.1}};
    const std::vector<Fixation> b = {{10, 10, 0.1}, {90, 90, 0.1}};
    CHECK(sed(a, a, g) == 0);
    CHECK(sed(a, b, g) == 1);
}

TEST_CASE("stde examples") {
    const std::vector<Fixation> a = {{50, 50, 0.3}, {10, 10, 0.2}, {80, 30, 0.5}, {40, 40, 0.1}};
    CHECK(stde(a, a, 3, 100, 100) == 1.0);
    const std::vector<Fixation> corner(3, Fixation{0, 0, 0.2});
    const std::vector<Fixation> opposite(3, Fixation{100, 100, 0.2});
    CHECK(stde(corner, opposite, 3, 100, 100) == 0.0);
    const std::vector<Fixation> b = {{45, 55, 0.3}, {70, 20, 0.2}, {15, 15, 0.5}, {60, 60, 0.1}};
    CHECK(std::abs(stde(a, b, 2, 100, 100) - oracle::stde(a, b, 2, 100, 100)) <= 1e-9);
}

TEST_CASE("oracle equivalence on random pairs") {
    std::mt19937_64 rng(2024);
    const oracle::Grid sm{12, 8, 100, 100};
    const oracle::Grid sg{5, 5, 100, 100};
    const double thr = std::hypot(100.0, 100.0) / 4.0;
    const ScanMatchConfig cfg;
    for (int trial = 0; trial < 100; ++trial) {
        const auto a = random_path(rng, 1, 4);
        const auto b = random_path(rng, 1, 4);
        CAPTURE(trial);
        CHECK(std::abs(scanmatch(path(a), path(b), cfg, false, 100, 100) - oracle::scanmatch(a, b, sm, thr, 0.0)) <= 1e-9);
        CHECK(sed(a, b, {5, 5, 100, 100}) ==
              oracle::recursive_edit_distance(oracle::symbols(a, sg), oracle::symbols(b, sg)));
        CHECK(std::abs(stde(a, b, 3, 100, 100) - oracle::stde(a, b, 3, 100, 100)) <= 1e-9);
        if (a.size() >= 2 && b.size() >= 2) {
            const auto got = multimatch(a, b, 100, 100);
            const auto want = oracle::multimatch(a, b, 100, 100);
            CHECK(std::abs(*got.vector - want.vector) <= 1e-9);
            CHECK(std::abs(*got.direction - want.direction) <= 1e-9);
            CHECK(std::abs(*got.length - want.length) <= 1e-9);
            CHECK(std::abs(*got.position - want.position) <= 1e-9);
            CHECK(std::abs(*got.duration - want.duration) <= 1e-9);
        }
    }
}

TEST_CASE("scanmatch with duration equals the oracle on short pairs") {
    std::mt19937_64 rng(5);
    const oracle::Grid sm{12, 8, 100, 100};
    const double thr = std::hypot(100.0, 100.0) / 4.0;
    std::uniform_real_distribution<double> d(0.01, 0.14);
    for (int trial = 0; trial < 30; ++trial) {
        auto a = random_path(rng, 1, 3);
        auto b = random_path(rng, 1, 3);
        for (auto& f : a) f.d = d(rng);
        for (auto& f : b) f.d = d(rng);
        CHECK(std::abs(scanmatch(path(a), path(b), {}, true, 100, 100) -
                       oracle::scanmatch(a, b, sm, thr, 0.0, 0.05)) <= 1e-9);
    }
}

TEST_CASE("symmetry, triangle inequality and ranges") {
    std::mt19937_64 rng(77);
    const GridSpec g{5, 5, 100, 100};
    const ScanMatchConfig cfg;
    for (int trial = 0; trial < 300; ++trial) {
        const auto a = random_path(rng, 1, 7);
        const auto b = random_path(rng, 1, 7);
        const auto c = random_path(rng, 1, 7);
        CHECK(sed(a, c, g) <= sed(a, b, g) + sed(b, c, g));
        CHECK(sed(a, b, g) == sed(b, a, g));

        const double ab = scanmatch(path(a), path(b), cfg, false, 100, 100);
        CHECK(std::abs(ab - scanmatch(path(b), path(a), cfg, false, 100, 100)) <= 1e-12);
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
        const double abd = scanmatch(path(a), path(b), cfg, true, 100, 100);
        CHECK(abd >= 0.0);
        CHECK(abd <= 1.0);

        const double s = stde(a, b, 3, 100, 100);
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);

        const auto m1 = multimatch(a, b, 100, 100);
        const auto m2 = multimatch(b, a, 100, 100);
        if (!m1.degenerate()) {
            for (auto [x, y] : {std::pair{m1.vector, m2.vector}, {m1.direction, m2.direction},
                                {m1.length, m2.length}, {m1.position, m2.position},
                                {m1.duration, m2.duration}}) {
                CHECK(std::abs(*x - *y) <= 1e-12);
                CHECK(*x >= 0.0);
                CHECK(*x <= 1.0);
            }
        }
    }
}

TEST_CASE("perfect scores only for identical inputs") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        auto a = random_path(rng, 2, 7);
        auto b = a;
        b[rng() % b.size()].x += 7.0;
        CHECK(stde(a, b, 3, 100, 100) < 1.0);
        // Position compares saccade origins, so moving the final fixation
        // only shows up in the vector dimension.
        const auto mm = multimatch(a, b, 100, 100);
        CHECK(std::min(*mm.vector, *mm.position) < 1.0);
    }
}

TEST_CASE("simplification merges collinear saccades") {
    const std::vector<Fixation> f = {{10, 50, 0.1}, {30, 50, 0.2}, {60, 50, 0.3}, {60, 90, 0.1}};
    const auto s = simplify_scanpath(f, std::hypot(100.0, 100.0), 0.1, 0.785398);
    REQUIRE(s.size() == 3);
    CHECK(s[0].d == doctest::Approx(0.3));
    CHECK(s[1] == f[2]);
}

TEST_CASE("evaluate") {
    const std::vector<Scanpath> refs = {
        path({{50, 50, 0.3}, {10, 10, 0.2}, {80, 30, 0.5}}, "a"),
        path({{50, 50, 0.3}, {70, 70, 0.6}}, "b"),
    };

    SUBCASE("identity gives perfect scores") {
        const auto r = evaluate(refs, refs, {});
        CHECK(r.n_pairs == 2);
        CHECK(r.scanmatch_wo_dur == 1.0);
        CHECK(r.scanmatch_w_dur == 1.0);
        CHECK(r.sed == 0.0);
        CHECK(r.stde == 1.0);
        CHECK(r.mm_vector == 1.0);
        CHECK(r.mm_direction == 1.0);
        CHECK(r.mm_length == 1.0);
        CHECK(r.mm_position == 1.0);
        CHECK(r.mm_duration == 1.0);
        CHECK(r.unmatched_references == 0);
    }

    SUBCASE("single pair matches the per-metric values") {
        const std::vector<Scanpath> pred = {path({{50, 50, 0.3}, {20, 30, 0.4}, {70, 80, 0.2}}, "a")};
        const auto r = evaluate(pred, refs, {});
        CHECK(r.unmatched_references == 1);
        CHECK(r.scanmatch_wo_dur == scanmatch(pred[0], refs[0], {}, false, 100, 100));
        CHECK(r.sed == sed(pred[0].fixations, refs[0].fixations, {5, 5, 100, 100}));
        CHECK(r.stde == stde(pred[0].fixations, refs[0].fixations, 3, 100, 100));
        CHECK(r.mm_vector == *multimatch(pred[0].fixations, refs[0].fixations, 100, 100).vector);
    }

    SUBCASE("unknown image") {
        const std::vector<Scanpath> pred = {path({{1, 1, 0.1}}, "zzz")};
        CHECK_THROWS_AS(evaluate(pred, refs, {}), MissingReference);
    }

    SUBCASE("extents fall back to the default") {
        std::vector<Scanpath> bare = refs;
        for (auto& s : bare) s.width = s.height = 0;
        CHECK_THROWS_AS(evaluate(bare, bare, {}), DataError);
        CHECK(evaluate(bare, bare, {}, 100, 100).n_pairs == 2);
    }
}
