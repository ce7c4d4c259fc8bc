#include "wattsentinel/service/api_server.hpp"

#include "wattsentinel/errors.hpp"
#include "wattsentinel/store/serialization.hpp"

#include <charconv>
#include <httplib.h>
#include <limits>
#include <thread>

namespace ws::service {

using nlohmann::json;

namespace {

constexpr auto kLivePoll = std::chrono::milliseconds(250);

void send_json(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    send_json(res, json{{"error", {{"code", code}, {"message", message}}}}, status);
}

std::pair<TimestampMs, TimestampMs> range_of(const httplib::Request& req) {
    TimestampMs from = std::numeric_limits<TimestampMs>::min();
    TimestampMs to = std::numeric_limits<TimestampMs>::max();
    if (req.has_param("from")) {
        from = parse_time_bound(req.get_param_value("from"), "from");
    }
    if (req.has_param("to")) {
        to = parse_time_bound(req.get_param_value("to"), "to");
    }
    if (from > to) {
        throw ValidationError("from", "must not be after to");
    }
    return {from, to};
}

json payloads(const std::vector<store::HistoryRecord>& records) {
    json out = json::array();
    for (const auto& r : records) {
        out.push_back(std::visit(
            [](const auto& p) -> json {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, store::PowerReading>) {
                    return p.power.watts();
                } else {
                    return store::to_json(p);
                }
            },
            r.payload));
    }
    return out;
}

} // namespace

TimestampMs parse_time_bound(const std::string& text, const std::string& field) {
    TimestampMs v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ValidationError(field, "expected milliseconds since the epoch, got '" + text + "'");
    }
    return v;
}

struct ApiServer::Impl {
    Runtime& runtime;
    httplib::Server server;
    std::thread thread;

    explicit Impl(Runtime& rt) : runtime(rt) { routes(); }

    template <typename F>
    auto guarded(F f) {
        return [f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const ValidationError& e) {
                send_error(res, 400, "invalid_argument", e.what());
            } catch (const LoadError& e) {
                send_error(res, 400, "invalid_action", e.what());
            } catch (const ContractError& e) {
                send_error(res, 422, "not_applicable", e.what());
            } catch (const NotSimulated& e) {
                send_error(res, 409, "not_simulated", e.what());
            } catch (const std::exception& e) {
                send_error(res, 500, "internal", e.what());
            }
        };
    }

    void routes() {
        server.new_task_queue = [] { return new httplib::ThreadPool(32); };

        server.Get("/api/health", guarded([this](const httplib::Request&, httplib::Response& res) {
            send_json(res, json{{"status", runtime.degraded() ? "degraded" : "ok"},
                                {"source", to_string(runtime.config().source)},
                                {"simulated", runtime.simulated()},
                                {"running", runtime.running()},
                                {"live_clients", runtime.hub().subscribers()},
                                {"config", runtime.config().to_json()}});
        }));

        server.Get("/api/pdus", guarded([this](const httplib::Request&, httplib::Response& res) {
            json list = json::array();
            for (const auto& p : runtime.topology().pdus) {
                json item{{"id", p.id}, {"sockets", p.sockets}, {"ts_ms", nullptr}, {"total_w", nullptr}};
                if (auto probe = runtime.latest(p.id)) {
                    item["ts_ms"] = probe->timestamp_ms;
                    item["total_w"] = telemetry::active_power(probe->total).watts();
                }
                list.push_back(item);
            }
            send_json(res, list);
        }));

        server.Get(R"(/api/pdus/([^/]+)/sockets)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            const auto* pdu = runtime.topology().pdu(id);
            if (pdu == nullptr) {
                send_error(res, 404, "not_found", "no PDU " + id);
                return;
            }
            const auto probe = runtime.latest(id);
            json sockets = json::array();
            for (int s = 1; s <= pdu->sockets; ++s) {
                const powermodel::SocketRef ref{id, s};
                json item{{"id", s}, {"device", nullptr}, {"power_w", nullptr}, {"expected_w", nullptr}};
                if (probe) {
                    if (const auto* sample = probe->socket(s)) {
                        item["power_w"] = telemetry::active_power(*sample).watts();
                        item["current_ma"] = sample->current_milliamps;
                        item["voltage_v"] = sample->voltage.as_double();
                        item["pf"] = sample->power_factor.as_double();
                    }
                }
                if (auto dev = runtime.device_at(ref)) {
                    item["device"] = *dev;
                    if (auto entry = runtime.device(*dev)) {
                        const auto expected = powermodel::expected_power(entry->model, entry->snapshot) +
                                              entry->unexplained_offset;
                        item["expected_w"] = expected.watts();
                        item["state"] = store::to_json(entry->snapshot);
                        item["state_source"] = "inferred";
                    }
                }
                sockets.push_back(item);
            }
            send_json(res, json{{"pdu", id},
                                {"ts_ms", probe ? json(probe->timestamp_ms) : json(nullptr)},
                                {"sockets", sockets}});
        }));

        server.Get(R"(/api/devices/([^/]+)/history)", guarded([this](const httplib::Request& req,
                                                                     httplib::Response& res) {
            const std::string id = req.matches[1];
            const auto socket = runtime.socket_of(id);
            if (!socket) {
                send_error(res, 404, "not_found", "no device " + id);
                return;
            }
            const auto [from, to] = range_of(req);
            auto& st = runtime.store();
            json power = json::array();
            for (const auto& r : st.query_window(store::RecordKind::power_socket, store::socket_key(*socket), from, to)) {
                power.push_back({{"ts_ms", r.timestamp_ms}, {"power_w", std::get<store::PowerReading>(r.payload).power.watts()}});
            }
            send_json(res, json{
                               {"device", id},
                               {"pdu", socket->pdu_id},
                               {"socket", socket->socket_id},
                               {"power", power},
                               {"state_source", "inferred"},
                               {"snapshots", payloads(st.query_window(store::RecordKind::state_snapshot, id, from, to))},
                               {"detections", payloads(st.query_window(store::RecordKind::detection, id, from, to))},
                               {"isolations", payloads(st.query_window(store::RecordKind::isolation, id, from, to))},
                               {"corrections", payloads(st.query_window(store::RecordKind::correction, id, from, to))},
                           });
        }));

        server.Get("/api/events", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto [from, to] = range_of(req);
            auto& st = runtime.store();
            send_json(res, json{{"detections", payloads(st.query_kind(store::RecordKind::detection, from, to))},
                                {"isolations", payloads(st.query_kind(store::RecordKind::isolation, from, to))},
                                {"corrections", payloads(st.query_kind(store::RecordKind::correction, from, to))}});
        }));

        server.Get("/api/report.csv", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto [from, to] = range_of(req);
            res.set_content(runtime.store().export_report(from, to), "text/csv");
        }));

        server.Get("/api/live", [this](const httplib::Request&, httplib::Response& res) {
            auto sub = runtime.hub().subscribe(runtime.config().live_queue_limit);
            res.set_header("Cache-Control", "no-cache");
            res.set_chunked_content_provider(
                "text/event-stream",
                [sub](std::size_t, httplib::DataSink& sink) {
                    auto m = sub->pop(kLivePoll);
                    if (!m) {
                        if (sub->closed()) {
                            sink.done();
                            return true;
                        }
                        static const std::string keepalive = ": keepalive\n\n";
                        return sink.write(keepalive.data(), keepalive.size());
                    }
                    const std::string frame = "event: " + m->event + "\ndata: " + m->data + "\n\n";
                    return sink.write(frame.data(), frame.size());
                },
                [sub](bool) { sub->close(); });
        });

        server.Post("/api/sim/fault", guarded([this](const httplib::Request& req, httplib::Response& res) {
            std::string action = req.body;
            if (!action.empty() && action.front() == '{') {
                const json body = json::parse(action, nullptr, false);
                if (body.is_discarded() || !body.contains("action") || !body["action"].is_string()) {
                    send_error(res, 400, "invalid_argument", "expected {\"action\": \"<scenario action>\"}");
                    return;
                }
                action = body["action"].get<std::string>();
            }
            runtime.inject(action);
            send_json(res, json{{"queued", action}}, 202);
        }));

        server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
            if (res.body.empty() && res.status == 404) {
                send_error(res, 404, "not_found", "no route for " + req.method + " " + req.path);
            }
        });
    }
};

ApiServer::ApiServer(Runtime& runtime) : impl_(std::make_unique<Impl>(runtime)) {}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
    // httplib's default adds SO_REUSEPORT, which lets a second instance share the port.
    impl_->server.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) {
        throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    }
    return bound;
}

void ApiServer::start() {
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void ApiServer::stop() {
    if (!impl_) {
        return;
    }
    impl_->server.stop();
    if (impl_->thread.joinable()) {
        impl_->thread.join();
    }
}

} // namespace ws::service
