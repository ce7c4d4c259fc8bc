#include "wattsentinel/errors.hpp"
#include "wattsentinel/fdi/segment.hpp"

#include <doctest.h>
#include <random>

using namespace ws;
using namespace ws::fdi;

namespace {

constexpr double kSigma = 0.02;

struct Gen {
    std::mt19937_64 rng;
    std::normal_distribution<double> noise{0.0, kSigma};

    explicit Gen(std::uint64_t seed) : rng(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

    /// 10 quiet samples at `base`, then `shape(k)` added from sample 10 on.
    template <typename F>
    std::vector<PowerSample> series(double base, std::size_t n, F shape) {
        std::vector<PowerSample> out;
        for (std::size_t i = 0; i < n; ++i) {
            const double extra = i >= 10 ? shape(i - 10) : 0.0;
            out.push_back(PowerSample{static_cast<TimestampMs>(i) * 1000,
                                      Milliwatts::from_watts(base + extra + noise(rng))});
        }
        return out;
    }
};

const SegmentConfig kCfg{};

} // namespace

TEST_SUITE("segment") {

TEST_CASE("steps of either sign are found with their onset and amplitude") {
    Gen g(101);
    for (int trial = 0; trial < 400; ++trial) {
        const double base = g.uniform(2.0, 120.0);
        double amp = g.uniform(0.2, 60.0) * (g.integer(0, 1) ? 1.0 : -1.0);
        if (base + amp < 0.5) {
            amp = -amp;
        }
        const auto s = g.series(base, 25, [&](std::size_t) { return amp; });
        const auto f = segment(s, kCfg);
        REQUIRE(f);
        CHECK(f->kind == ShapeKind::step);
        CHECK(f->onset_ms == 10'000);
        // Two 10-sample means: sd of the difference is sigma * sqrt(0.2).
        CHECK(std::abs(f->amplitude_w - amp) < 4 * kSigma);
    }
}

TEST_CASE("spikes that return to the base level are spikes with their duration") {
    Gen g(202);
    for (int trial = 0; trial < 400; ++trial) {
        const double base = g.uniform(40.0, 60.0);
        const int dur = g.integer(1, 5);
        // Window means only move by height * dur / w, so the spike must carry
        // more than theta * w of area to register.
        const double height = g.uniform(1.2 / dur, 2.0 + 1.2 / dur);
        const auto s = g.series(base, 25, [&](std::size_t k) { return static_cast<int>(k) < dur ? height : 0.0; });
        const auto f = segment(s, kCfg);
        REQUIRE(f);
        CHECK(f->kind == ShapeKind::spike);
        CHECK(f->onset_ms == 10'000);
        CHECK(f->duration_s == doctest::Approx(dur));
        CHECK(std::abs(f->amplitude_w - height) < 4 * kSigma);
    }
}

TEST_CASE("a spike too small to move a window mean is not a change") {
    Gen g(204);
    const auto s = g.series(50.0, 25, [](std::size_t k) { return k == 0 ? 0.5 : 0.0; });
    CHECK_FALSE(segment(s, kCfg));
}

TEST_CASE("a burst settling on a new level is burst_then_step") {
    Gen g(303);
    for (int trial = 0; trial < 300; ++trial) {
        const double base = g.uniform(2.0, 5.0);
        const double step = g.uniform(5.0, 60.0);
        const double burst = g.uniform(0.6, 1.0) * step;
        const int dur = g.integer(2, 5);
        const auto s = g.series(base, 25, [&](std::size_t k) { return step + (static_cast<int>(k) < dur ? burst : 0.0); });
        const auto f = segment(s, kCfg);
        REQUIRE(f);
        CHECK(f->kind == ShapeKind::burst_then_step);
        CHECK(f->duration_s == doctest::Approx(dur));
        CHECK(std::abs(f->amplitude_w - step) < 4 * kSigma);

        const auto [plateau, spike] = split_burst(s, *f);
        CHECK(plateau.kind == ShapeKind::step);
        CHECK(plateau.amplitude_w == f->amplitude_w);
        CHECK(spike.kind == ShapeKind::spike);
        CHECK(std::abs(spike.amplitude_w - burst) < 4 * kSigma);
    }
}

TEST_CASE("noise alone produces nothing") {
    Gen g(404);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto s = g.series(g.uniform(1.0, 100.0), 25, [](std::size_t) { return 0.0; });
        CHECK_FALSE(segment(s, kCfg));
    }
}

TEST_CASE("short series are not segmented") {
    Gen g(1);
    const auto s = g.series(10.0, 19, [](std::size_t) { return 5.0; });
    CHECK_FALSE(segment(s, kCfg));
}

TEST_CASE("a spike riding on a step is recovered against the new level") {
    Gen g(505);
    for (int trial = 0; trial < 200; ++trial) {
        const double drop = g.uniform(0.3, 0.5);
        const double spike = g.uniform(0.9, 1.1);
        const int dur = g.integer(2, 4);
        const auto s = g.series(50.0, 25, [&](std::size_t k) {
            return -drop + (static_cast<int>(k) < dur ? spike : 0.0);
        });
        const auto f = segment(s, kCfg);
        REQUIRE(f);
        REQUIRE(f->kind == ShapeKind::step);
        const auto extra = superimposed_spike(s, *f, kCfg);
        REQUIRE(extra);
        CHECK(extra->duration_s == doctest::Approx(dur));
        CHECK(std::abs(extra->amplitude_w - spike) < 5 * kSigma);
    }
}

TEST_CASE("config validation") {
    SegmentConfig c;
    c.window_samples = 1;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = {};
    c.burst_factor = 1.0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = {};
    c.period_ms = 200;
    CHECK(c.spike_max_samples() == 25);
}

}
