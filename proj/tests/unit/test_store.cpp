#include "../support.hpp"

#include "wattsentinel/errors.hpp"
#include "wattsentinel/fdi/report.hpp"
#include "wattsentinel/store/history_store.hpp"
#include "wattsentinel/store/serialization.hpp"

#include <doctest.h>
#include <fstream>
#include <nlohmann/json.hpp>
#include <atomic>
#include <random>
#include <thread>

using namespace ws;
using namespace ws::store;

namespace {

fdi::DetectionEvent random_event(std::mt19937_64& rng, std::uint64_t id) {
    using powermodel::ChangeClass;
    fdi::DetectionEvent ev;
    ev.event_id = id;
    ev.device_id = rng() % 5 == 0 ? "" : "dev" + std::to_string(rng() % 4);
    ev.socket = powermodel::SocketRef{"pdu" + std::to_string(rng() % 2), 1 + static_cast<int>(rng() % 8)};
    ev.feature.kind = static_cast<fdi::ShapeKind>(rng() % 3);
    ev.feature.onset_ms = 1'000'000 + static_cast<TimestampMs>(rng() % 100'000);
    ev.feature.amplitude_w = static_cast<double>(static_cast<std::int64_t>(rng() % 20'000) - 10'000) / 1000.0;
    ev.feature.duration_s = static_cast<double>(rng() % 100) / 10.0;
    ev.feature.pre_mean_w = 45.125;
    ev.feature.post_mean_w = 44.5;
    const int n = 1 + static_cast<int>(rng() % 3);
    for (int i = 0; i < n; ++i) {
        const auto cls = static_cast<ChangeClass>(rng() % 13);
        powermodel::StateChange ch{cls, std::nullopt, std::nullopt, Milliwatts{-350}};
        if (rng() % 2) {
            ch.port = 1 + static_cast<int>(rng() % 8);
        }
        if (rng() % 3 == 0) {
            ch.to_speed = 100;
        }
        std::optional<std::uint64_t> rev;
        if (rng() % 4 == 0) {
            rev = rng() % 50;
        }
        ev.candidates.push_back(fdi::Candidate{cls, static_cast<double>(rng() % 1000) / 1000.0, ch, rev});
    }
    ev.chosen = ev.candidates.front().change_class;
    ev.ambiguous = rng() % 2;
    ev.detected_at_ms = ev.feature.onset_ms + 14'000;
    ev.note = rng() % 2 ? "" : "note, with \"quotes\"";
    return ev;
}

HistoryRecord power(const std::string& pdu, TimestampMs ts, std::int64_t mw) {
    return total_record(pdu, ts, Milliwatts{mw});
}

} // namespace

TEST_SUITE("store") {

TEST_CASE("records survive a JSON round trip") {
    std::mt19937_64 rng(13);
    for (std::uint64_t i = 1; i <= 500; ++i) {
        const auto ev = random_event(rng, i);
        const auto rec = detection_record(ev);
        CHECK(record_from_json(nlohmann::json::parse(to_json(rec).dump())) == rec);

        fdi::IsolationResult r{i, ev.device_id.empty() ? "x" : ev.device_id, ev.socket, ev.chosen,
                               static_cast<fdi::Verdict>(rng() % 3), rng() % 2 == 0, 0.012, "n", 5};
        CHECK(record_from_json(to_json(isolation_record(r))) == isolation_record(r));
    }
    const auto run = test::run_script("300 lpi_enter sw1 6\n330 lpi_exit sw1 6\n", 400);
    REQUIRE_FALSE(run.corrections.empty());
    const auto c = correction_record(run.corrections[0]);
    CHECK(record_from_json(to_json(c)) == c);
}

TEST_CASE("malformed records are rejected") {
    CHECK_THROWS_AS(record_from_json(nlohmann::json{{"kind", "bogus"}}), ValidationError);
    HistoryRecord bad{RecordKind::detection, "sw1", 5, PowerReading{Milliwatts{1}}};
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    HistoryStore st;
    CHECK_THROWS_AS(st.append(bad), ValidationError);
    CHECK(st.size() == 0);
}

TEST_CASE("append is idempotent for exact duplicates and rejects conflicts") {
    HistoryStore st;
    st.append(power("pdu1", 10, 100));
    st.append(power("pdu1", 10, 100));
    CHECK(st.size() == 1);
    CHECK_THROWS_AS(st.append(power("pdu1", 10, 101)), ValidationError);
    CHECK(st.size() == 1);
    // Same timestamp under another key is independent.
    st.append(power("pdu2", 10, 7));
    CHECK(st.size() == 2);
}

TEST_CASE("two events at one timestamp are told apart by id") {
    std::mt19937_64 rng(1);
    auto a = random_event(rng, 1);
    auto b = a;
    b.event_id = 2;
    b.chosen = powermodel::ChangeClass::STPReevaluation;
    HistoryStore st;
    st.append(detection_record(a));
    st.append(detection_record(b));
    CHECK(st.size() == 2);
    const auto all = st.query_kind(RecordKind::detection, 0, std::numeric_limits<TimestampMs>::max());
    REQUIRE(all.size() == 2);
    CHECK(all[0].discriminator() == 1);
    CHECK(all[1].discriminator() == 2);
}

TEST_CASE("window queries are inclusive and ordered") {
    std::mt19937_64 rng(17);
    HistoryStore st;
    std::vector<TimestampMs> stamps;
    for (int i = 0; i < 300; ++i) {
        stamps.push_back(static_cast<TimestampMs>(rng() % 10'000));
    }
    std::vector<TimestampMs> inserted;
    for (auto ts : stamps) {
        st.append(power("pdu1", ts, ts * 3));
        inserted.push_back(ts);
    }
    std::sort(inserted.begin(), inserted.end());
    inserted.erase(std::unique(inserted.begin(), inserted.end()), inserted.end());
    for (int q = 0; q < 100; ++q) {
        TimestampMs from = static_cast<TimestampMs>(rng() % 10'000);
        TimestampMs to = from + static_cast<TimestampMs>(rng() % 3'000);
        std::vector<TimestampMs> expect;
        for (auto ts : inserted) {
            if (ts >= from && ts <= to) {
                expect.push_back(ts);
            }
        }
        std::vector<TimestampMs> got;
        for (const auto& r : st.query_window(RecordKind::power_total, "pdu1", from, to)) {
            got.push_back(r.timestamp_ms);
        }
        CHECK(got == expect);
    }
    CHECK(st.query_window(RecordKind::power_total, "pdu1", 10, 5).empty());
    CHECK(st.query_window(RecordKind::power_total, "nope", 0, 100).empty());
    CHECK(st.keys(RecordKind::power_total) == std::vector<std::string>{"pdu1"});
    CHECK(*st.last_timestamp() == inserted.back());
}

TEST_CASE("the per-key cap drops the oldest records") {
    HistoryStore st(StoreOptions{std::nullopt, 3});
    for (int i = 0; i < 10; ++i) {
        st.append(power("pdu1", i, i));
    }
    const auto rows = st.query_window(RecordKind::power_total, "pdu1", 0, 100);
    REQUIRE(rows.size() == 3);
    CHECK(rows.front().timestamp_ms == 7);
    CHECK(st.size() == 3);
}

TEST_CASE("the journal reloads and tolerates a torn last line") {
    const auto dir = test::scratch_dir("store_journal");
    const auto path = dir / "history.jsonl";
    std::mt19937_64 rng(5);
    std::vector<HistoryRecord> written;
    {
        HistoryStore st(StoreOptions{path, 0});
        for (std::uint64_t i = 1; i <= 20; ++i) {
            written.push_back(detection_record(random_event(rng, i)));
            st.append(written.back());
            st.append(power("pdu1", static_cast<TimestampMs>(i), static_cast<std::int64_t>(i)));
        }
    }
    {
        HistoryStore st(StoreOptions{path, 0});
        CHECK(st.size() == 40);
        const auto back = st.query_kind(RecordKind::detection, 0, std::numeric_limits<TimestampMs>::max());
        CHECK(back.size() == 20);
        for (const auto& w : written) {
            CHECK(std::find(back.begin(), back.end(), w) != back.end());
        }
    }
    {
        std::ofstream torn(path, std::ios::app);
        torn << R"({"kind":"power_total","key":"pdu1","timestamp_ms":99,"pay)";
    }
    {
        HistoryStore st(StoreOptions{path, 0});
        CHECK(st.size() == 40);
    }
}

TEST_CASE("damage before the last line is a store error") {
    const auto dir = test::scratch_dir("store_damaged");
    const auto path = dir / "history.jsonl";
    {
        HistoryStore st(StoreOptions{path, 0});
        st.append(power("pdu1", 1, 1));
    }
    {
        std::ofstream out(path, std::ios::app);
        out << "garbage\n";
        out << nlohmann::json(to_json(power("pdu1", 2, 2))).dump() << "\n";
    }
    CHECK_THROWS_AS(HistoryStore(StoreOptions{path, 0}), StoreError);
}

TEST_CASE("an unopenable journal is a store error") {
    const auto dir = test::scratch_dir("store_bad");
    CHECK_THROWS_AS(HistoryStore(StoreOptions{dir / "missing" / "history.jsonl", 0}), StoreError);
}

TEST_CASE("a failed write leaves the record out of the index") {
    if (!std::filesystem::exists("/dev/full")) {
        return;
    }
    HistoryStore st(StoreOptions{std::filesystem::path("/dev/full"), 0});
    CHECK_THROWS_AS(st.append(power("pdu1", 1, 1)), StoreError);
    CHECK(st.size() == 0);
}

TEST_CASE("the exported report matches the report of the same records") {
    const auto run = test::run_script("300 lpi_enter sw1 6\n330 lpi_exit sw1 6\n", 400);
    HistoryStore st;
    for (const auto& d : run.detections) {
        st.append(detection_record(d));
    }
    for (const auto& i : run.isolations) {
        st.append(isolation_record(i));
    }
    for (const auto& c : run.corrections) {
        st.append(correction_record(c));
    }
    const auto expect = fdi::report_csv(run.detections, run.isolations, run.corrections);
    CHECK(st.export_report(0, std::numeric_limits<TimestampMs>::max()) == expect);
    // Outside the window only the header remains.
    const auto empty = st.export_report(0, 10);
    CHECK(std::count(empty.begin(), empty.end(), '\n') == 1);
}

TEST_CASE("concurrent readers see a consistent store") {
    HistoryStore st;
    std::atomic<bool> done{false};
    std::thread writer([&] {
        for (int i = 0; i < 2000; ++i) {
            st.append(power("pdu1", i, i));
        }
        done = true;
    });
    std::size_t last = 0;
    while (!done) {
        const auto rows = st.query_window(RecordKind::power_total, "pdu1", 0, 5000);
        CHECK(rows.size() >= last);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            REQUIRE(rows[i].timestamp_ms == static_cast<TimestampMs>(i));
        }
        last = rows.size();
    }
    writer.join();
    CHECK(st.size() == 2000);
}

}
