#include "wattsentinel/units.hpp"

#include <fmt/format.h>

namespace ws {

std::string format_milli(std::int64_t thousandths) {
    const bool negative = thousandths < 0;
    const std::uint64_t mag = negative ? static_cast<std::uint64_t>(-thousandths) : static_cast<std::uint64_t>(thousandths);
    std::string frac = fmt::format("{:03d}", mag % 1000);
    while (frac.size() > 1 && frac.back() == '0') {
        frac.pop_back();
    }
    return fmt::format("{}{}.{}", negative ? "-" : "", mag / 1000, frac);
}

std::string format_watts(Milliwatts m) {
    const bool negative = m.value < 0;
    const std::uint64_t mag = negative ? static_cast<std::uint64_t>(-m.value) : static_cast<std::uint64_t>(m.value);
    return fmt::format("{}{}.{:03d}", negative ? "-" : "", mag / 1000, mag % 1000);
}

} // namespace ws
