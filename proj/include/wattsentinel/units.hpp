#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <string>

namespace ws {

using TimestampMs = std::int64_t;

/// Fixed-point power. All thresholds and model parameters are carried in
/// whole milliwatts so that comparisons against 0.1 W-scale signatures are
/// bit-stable across runs.
struct Milliwatts {
    std::int64_t value{0};

    constexpr Milliwatts() = default;
    constexpr explicit Milliwatts(std::int64_t mw) : value(mw) {}

    static Milliwatts from_watts(double w) { return Milliwatts{std::llround(w * 1000.0)}; }
    [[nodiscard]] constexpr double watts() const { return static_cast<double>(value) / 1000.0; }

    constexpr auto operator<=>(const Milliwatts&) const = default;

    constexpr Milliwatts operator-() const { return Milliwatts{-value}; }
    constexpr Milliwatts& operator+=(Milliwatts o) { value += o.value; return *this; }
    constexpr Milliwatts& operator-=(Milliwatts o) { value -= o.value; return *this; }
    friend constexpr Milliwatts operator+(Milliwatts a, Milliwatts b) { return Milliwatts{a.value + b.value}; }
    friend constexpr Milliwatts operator-(Milliwatts a, Milliwatts b) { return Milliwatts{a.value - b.value}; }
    friend constexpr Milliwatts operator*(Milliwatts a, std::int64_t k) { return Milliwatts{a.value * k}; }
    friend constexpr Milliwatts operator*(std::int64_t k, Milliwatts a) { return Milliwatts{a.value * k}; }
};

constexpr Milliwatts abs(Milliwatts m) { return Milliwatts{m.value < 0 ? -m.value : m.value}; }

/// Non-negative decimal with exactly three fractional digits (volts, power
/// factor). Stored as thousandths.
struct Milli {
    std::int64_t thousandths{0};

    constexpr Milli() = default;
    constexpr explicit Milli(std::int64_t t) : thousandths(t) {}

    static Milli from_double(double d) { return Milli{std::llround(d * 1000.0)}; }
    [[nodiscard]] constexpr double as_double() const { return static_cast<double>(thousandths) / 1000.0; }

    constexpr auto operator<=>(const Milli&) const = default;
};

/// Renders thousandths as the shortest decimal with at least one fractional
/// digit ("230.0", "0.95", "1.125").
std::string format_milli(std::int64_t thousandths);

/// Watts with three decimals, used in reports.
std::string format_watts(Milliwatts m);

} // namespace ws
