#pragma once

#include <stdexcept>
#include <string>

namespace wentzell {

enum class ErrorKind {
    argument,
    dimension,
    configuration,
    numeric,
    unsupported,
    measure_condition,
    assertion,
    io,
    internal,
};

const char* to_string(ErrorKind kind) noexcept;

/// Base of every error thrown by the library. The kind drives C error codes
/// and CLI exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

template <ErrorKind K>
class KindedError : public Error {
public:
    explicit KindedError(const std::string& what) : Error(K, what) {}
};

using ArgumentError = KindedError<ErrorKind::argument>;
using DimensionError = KindedError<ErrorKind::dimension>;
using ConfigError = KindedError<ErrorKind::configuration>;
using NumericError = KindedError<ErrorKind::numeric>;
using UnsupportedError = KindedError<ErrorKind::unsupported>;
using MeasureConditionError = KindedError<ErrorKind::measure_condition>;
using AssertionFailure = KindedError<ErrorKind::assertion>;
using IoError = KindedError<ErrorKind::io>;

inline const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::argument: return "argument";
        case ErrorKind::dimension: return "dimension";
        case ErrorKind::configuration: return "configuration";
        case ErrorKind::numeric: return "numeric";
        case ErrorKind::unsupported: return "unsupported";
        case ErrorKind::measure_condition: return "measure-condition";
        case ErrorKind::assertion: return "assertion";
        case ErrorKind::io: return "io";
        case ErrorKind::internal: return "internal";
    }
    return "unknown";
}

/// Throws the KindedError matching `kind`, so handlers can catch the concrete type.
[[noreturn]] inline void throw_error(ErrorKind kind, const std::string& what) {
    switch (kind) {
        case ErrorKind::argument: throw ArgumentError(what);
        case ErrorKind::dimension: throw DimensionError(what);
        case ErrorKind::configuration: throw ConfigError(what);
        case ErrorKind::numeric: throw NumericError(what);
        case ErrorKind::unsupported: throw UnsupportedError(what);
        case ErrorKind::measure_condition: throw MeasureConditionError(what);
        case ErrorKind::assertion: throw AssertionFailure(what);
        case ErrorKind::io: throw IoError(what);
        case ErrorKind::internal: break;
    }
    throw Error(kind, what);
}

}  // namespace wentzell
