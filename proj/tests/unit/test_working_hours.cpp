#include "wattsentinel/errors.hpp"
#include "wattsentinel/fdi/working_hours.hpp"

#include <doctest.h>
#include <random>

using namespace ws;
using namespace ws::fdi;

namespace {

constexpr TimestampMs kHour = 3'600'000;
constexpr TimestampMs kDay0 = 1'704'067'200'000;  // midnight UTC

struct Office {
    int start_h{8};
    int end_h{18};
    int desks{3};
    double desk_on_w{100.0};
    double desk_sleep_w{5.0};
    double server_w{50.0};
};

// One sample per minute over one day; desks follow office hours, the
// server never sleeps.
std::map<std::string, std::vector<PowerSample>> office_history(const Office& o, std::mt19937_64& rng) {
    std::normal_distribution<double> noise(0.0, 0.02);
    std::map<std::string, std::vector<PowerSample>> h;
    for (TimestampMs t = kDay0; t < kDay0 + 24 * kHour; t += 60'000) {
        const int hour = static_cast<int>((t - kDay0) / kHour);
        const bool on = hour >= o.start_h && hour < o.end_h;
        for (int d = 0; d < o.desks; ++d) {
            const double w = (on ? o.desk_on_w : o.desk_sleep_w) + noise(rng);
            h["desk" + std::to_string(d)].push_back(PowerSample{t, Milliwatts::from_watts(w)});
        }
        h["server"].push_back(PowerSample{t, Milliwatts::from_watts(o.server_w + noise(rng))});
    }
    return h;
}

std::map<std::string, Milliwatts> baselines(const Office& o) {
    std::map<std::string, Milliwatts> b{{"server", Milliwatts::from_watts(o.server_w)}};
    for (int d = 0; d < o.desks; ++d) {
        b["desk" + std::to_string(d)] = Milliwatts::from_watts(o.desk_on_w);
    }
    return b;
}

} // namespace

TEST_SUITE("working_hours") {

TEST_CASE("office hours are found and only the always-on device is flagged") {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 40; ++i) {
        Office o;
        o.start_h = 6 + static_cast<int>(rng() % 5);
        o.end_h = 16 + static_cast<int>(rng() % 5);
        o.desks = 2 + static_cast<int>(rng() % 4);
        o.server_w = 20.0 + static_cast<double>(rng() % 60);
        const auto report = working_hours_report(office_history(o, rng), baselines(o));
        REQUIRE(report.working_periods.size() == 1);
        CHECK(report.working_periods[0].first == kDay0 + o.start_h * kHour);
        CHECK(report.working_periods[0].second == kDay0 + o.end_h * kHour);
        CHECK(report.hours.size() == 24);
        CHECK(report.night_floor_w == doctest::Approx(o.desks * o.desk_sleep_w + o.server_w).epsilon(0.01));
        REQUIRE(report.flagged.size() == 1);
        CHECK(report.flagged[0].device_id == "server");
        CHECK(report.flagged[0].off_hours_mean_w == doctest::Approx(o.server_w).epsilon(0.01));
        CHECK(report.flagged[0].operational_baseline_w == doctest::Approx(o.server_w));
    }
}

TEST_CASE("devices without a baseline are not judged") {
    std::mt19937_64 rng(2);
    Office o;
    auto b = baselines(o);
    b.erase("server");
    CHECK(working_hours_report(office_history(o, rng), b).flagged.empty());
}

TEST_CASE("too little history is a contract error") {
    std::mt19937_64 rng(4);
    Office o;
    auto h = office_history(o, rng);
    CHECK_THROWS_AS(working_hours_report({}, {}), ContractError);

    auto short_h = h;
    short_h["server"].resize(60 * 20);
    CHECK_THROWS_AS(working_hours_report(short_h, baselines(o)), ContractError);

    auto gappy = h;
    gappy["desk0"].erase(gappy["desk0"].begin() + 100, gappy["desk0"].begin() + 103);
    CHECK_THROWS_AS(working_hours_report(gappy, baselines(o)), ContractError);

    auto backwards = h;
    std::swap(backwards["desk1"][5], backwards["desk1"][6]);
    CHECK_THROWS_AS(working_hours_report(backwards, baselines(o)), ContractError);
}

TEST_CASE("a flat network has no working hours") {
    std::mt19937_64 rng(6);
    Office o;
    o.desk_on_w = o.desk_sleep_w;
    const auto report = working_hours_report(office_history(o, rng), baselines(o));
    CHECK(report.working_periods.empty());
}

}
