#include "wattsentinel/fdi/segment.hpp"

#include "wattsentinel/errors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace ws::fdi {

namespace {

struct Series {
    std::vector<double> x;
    std::vector<double> prefix;

    explicit Series(std::span<const PowerSample> s) : x(s.size()), prefix(s.size() + 1, 0.0) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            x[i] = s[i].power.watts();
            prefix[i + 1] = prefix[i] + x[i];
        }
    }

    /// Mean of x[from, to).
    [[nodiscard]] double mean(std::size_t from, std::size_t to) const {
        return to > from ? (prefix[to] - prefix[from]) / static_cast<double>(to - from) : 0.0;
    }
};

double seconds(std::size_t samples, std::int64_t period_ms) {
    return static_cast<double>(samples) * static_cast<double>(period_ms) / 1000.0;
}

double round_mw(double w) { return std::round(w * 1000.0) / 1000.0; }

} // namespace

void SegmentConfig::validate() const {
    if (theta_w <= 0.0) {
        throw ValidationError("theta_w", "must be positive");
    }
    if (window_samples < 2) {
        throw ValidationError("window_samples", "must be at least 2");
    }
    if (spike_max_duration_s <= 0.0) {
        throw ValidationError("spike_max_duration_s", "must be positive");
    }
    if (return_band_w <= 0.0) {
        throw ValidationError("return_band_w", "must be positive");
    }
    if (burst_factor <= 1.0) {
        throw ValidationError("burst_factor", "must exceed 1");
    }
    if (period_ms <= 0) {
        throw ValidationError("period_ms", "must be positive");
    }
}

int SegmentConfig::spike_max_samples() const {
    return static_cast<int>(std::ceil(spike_max_duration_s * 1000.0 / static_cast<double>(period_ms)));
}

std::optional<ChangeFeature> segment(std::span<const PowerSample> series, const SegmentConfig& config) {
    const auto w = static_cast<std::size_t>(config.window_samples);
    const std::size_t n = series.size();
    if (n < 2 * w) {
        return std::nullopt;
    }
    const Series s(series);

    bool changed = false;
    std::size_t best = w;
    double best_diff = 0.0;
    for (std::size_t i = w; i + w <= n; ++i) {
        const double diff = std::abs(s.mean(i, i + w) - s.mean(i - w, i));
        if (diff > config.theta_w) {
            changed = true;
        }
        if (diff > best_diff) {
            best_diff = diff;
            best = i;
        }
    }
    if (!changed) {
        return std::nullopt;
    }

    std::size_t onset = best;
    for (std::size_t j = w; j < n; ++j) {
        if (std::abs(s.x[j] - s.mean(j - w, j)) > config.theta_w) {
            onset = j;
            break;
        }
    }

    const double pre = s.mean(onset >= w ? onset - w : 0, onset);
    const double post = s.mean(n - w, n);
    const double step = post - pre;

    ChangeFeature f;
    f.onset_ms = series[onset].timestamp_ms;
    f.pre_mean_w = round_mw(pre);
    f.post_mean_w = round_mw(post);

    if (std::abs(step) <= config.return_band_w) {
        std::size_t end = onset;
        double peak = 0.0;
        while (end < n && std::abs(s.x[end] - pre) > config.theta_w) {
            if (std::abs(s.x[end] - pre) > std::abs(peak)) {
                peak = s.x[end] - pre;
            }
            ++end;
        }
        if (end == onset) {
            return std::nullopt;
        }
        f.kind = ShapeKind::spike;
        f.amplitude_w = round_mw(peak);
        f.duration_s = seconds(end - onset, config.period_ms);
        return f;
    }
    if (std::abs(step) <= config.theta_w) {
        return std::nullopt;
    }

    f.amplitude_w = round_mw(f.post_mean_w - f.pre_mean_w);
    const double sign = step > 0 ? 1.0 : -1.0;
    double overshoot = 0.0;
    for (std::size_t j = onset; j < n - w; ++j) {
        overshoot = std::max(overshoot, sign * (s.x[j] - pre));
    }
    if (overshoot >= config.burst_factor * std::abs(step) && overshoot - std::abs(step) > config.theta_w) {
        std::size_t end = onset;
        while (end < n - w && sign * (s.x[end] - post) > config.theta_w) {
            ++end;
        }
        f.kind = ShapeKind::burst_then_step;
        f.duration_s = seconds(std::max<std::size_t>(end - onset, 1), config.period_ms);
        return f;
    }
    f.kind = ShapeKind::step;
    return f;
}

std::optional<ChangeFeature> superimposed_spike(std::span<const PowerSample> series, const ChangeFeature& step,
                                                const SegmentConfig& config) {
    if (step.kind != ShapeKind::step) {
        return std::nullopt;
    }
    const auto w = static_cast<std::size_t>(config.window_samples);
    const std::size_t n = series.size();
    if (n < 2 * w) {
        return std::nullopt;
    }
    const Series s(series);
    std::size_t onset = 0;
    while (onset < n && series[onset].timestamp_ms < step.onset_ms) {
        ++onset;
    }
    const double post = step.post_mean_w;
    const auto limit = static_cast<std::size_t>(config.spike_max_samples());
    std::size_t start = onset;
    while (start < n - w && start <= onset + limit && std::abs(s.x[start] - post) <= config.theta_w) {
        ++start;
    }
    if (start >= n - w || start > onset + limit) {
        return std::nullopt;
    }
    std::size_t end = start;
    double peak = 0.0;
    while (end < n - w && std::abs(s.x[end] - post) > config.theta_w) {
        if (std::abs(s.x[end] - post) > std::abs(peak)) {
            peak = s.x[end] - post;
        }
        ++end;
    }
    if (end >= n - w || end - start > limit) {
        return std::nullopt;
    }
    ChangeFeature f;
    f.kind = ShapeKind::spike;
    f.onset_ms = series[start].timestamp_ms;
    f.amplitude_w = round_mw(peak);
    f.duration_s = seconds(end - start, config.period_ms);
    f.pre_mean_w = post;
    f.post_mean_w = post;
    return f;
}

std::pair<ChangeFeature, ChangeFeature> split_burst(std::span<const PowerSample> series, const ChangeFeature& burst) {
    ChangeFeature step = burst;
    step.kind = ShapeKind::step;
    step.duration_s = 0.0;
    const Series s(series);
    double peak = 0.0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (series[i].timestamp_ms < burst.onset_ms) {
            continue;
        }
        if (static_cast<double>(series[i].timestamp_ms - burst.onset_ms) / 1000.0 >= burst.duration_s) {
            break;
        }
        if (std::abs(s.x[i] - burst.post_mean_w) > std::abs(peak)) {
            peak = s.x[i] - burst.post_mean_w;
        }
    }
    ChangeFeature spike;
    spike.kind = ShapeKind::spike;
    spike.onset_ms = burst.onset_ms;
    spike.amplitude_w = round_mw(peak);
    spike.duration_s = burst.duration_s;
    spike.pre_mean_w = burst.post_mean_w;
    spike.post_mean_w = burst.post_mean_w;
    return {step, spike};
}

} // namespace ws::fdi
