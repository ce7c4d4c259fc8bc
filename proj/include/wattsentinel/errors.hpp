#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace ws {

/// Malformed wire input. `offset` is the byte position within the record.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    [[nodiscard]] std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Well-formed input that breaks a domain invariant. `field` names the
/// offending value, e.g. "sockets[2].pf".
class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string field, const std::string& what)
        : std::runtime_error(field + ": " + what), field_(std::move(field)) {}

    [[nodiscard]] const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// A caller broke an operation's precondition.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Scenario / topology loading failure with a 1-based line number when the
/// input is line oriented (0 otherwise).
class LoadError : public std::runtime_error {
public:
    LoadError(const std::string& what, std::size_t line)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class StoreError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace ws
