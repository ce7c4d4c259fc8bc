#pragma once

#include "wattsentinel/service/runtime.hpp"

#include <memory>
#include <string>

namespace ws::service {

/// HTTP + server-sent-events front of a Runtime.
///
///   GET  /api/health
///   GET  /api/pdus
///   GET  /api/pdus/{id}/sockets
///   GET  /api/devices/{id}/history?from&to
///   GET  /api/events?from&to
///   GET  /api/report.csv?from&to
///   GET  /api/live
///   POST /api/sim/fault        body: one scenario action, e.g. "port_down sw1 3"
///
/// Errors are {"error": {"code": ..., "message": ...}}.
class ApiServer {
public:
    explicit ApiServer(Runtime& runtime);
    ~ApiServer();

    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Binds the socket; port 0 picks a free one. Returns the bound port.
    /// Throws std::runtime_error when the address cannot be bound.
    int bind(const std::string& host, int port);
    /// Serves on a background thread until stop().
    void start();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Parses a ?from / ?to bound: decimal milliseconds since the epoch.
/// Throws ValidationError naming `field`.
TimestampMs parse_time_bound(const std::string& text, const std::string& field);

} // namespace ws::service
