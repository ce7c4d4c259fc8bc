#pragma once

#include "wattsentinel/fdi/types.hpp"

#include <optional>
#include <span>
#include <utility>

namespace ws::fdi {

struct SegmentConfig {
    double theta_w{0.1};
    int window_samples{10};
    double spike_max_duration_s{5.0};
    double return_band_w{0.05};
    double burst_factor{1.5};
    std::int64_t period_ms{1000};

    void validate() const;
    [[nodiscard]] int spike_max_samples() const;
};

/// Finds the first change point in a contiguous power series and classifies
/// it as step, spike or burst_then_step. Needs at least 2 * window_samples
/// samples; returns nullopt for shorter series or when nothing moved.
std::optional<ChangeFeature> segment(std::span<const PowerSample> series, const SegmentConfig& config);

/// A short excursion riding on top of a step found by segment(), e.g. an STP
/// spike coinciding with a link loss. Measured against the post-step level.
std::optional<ChangeFeature> superimposed_spike(std::span<const PowerSample> series, const ChangeFeature& step,
                                                const SegmentConfig& config);

/// Splits a burst_then_step into its plateau step and the leading excursion.
std::pair<ChangeFeature, ChangeFeature> split_burst(std::span<const PowerSample> series, const ChangeFeature& burst);

} // namespace ws::fdi
