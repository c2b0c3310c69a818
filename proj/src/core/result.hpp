#pragma once

#include <exception>
#include <string>
#include <utility>
#include <variant>

#include "core/errors.hpp"

namespace wentzell {

/// Error value carried by Result: the kind of a library Error and its message.
struct Failure {
    ErrorKind kind = ErrorKind::argument;
    std::string message;
};

/// Minimal expected-style holder: either a value or a Failure. The toolchain's
/// standard library predates std::expected.
template <class T>
class Result {
public:
    Result(T value) : data_(std::move(value)) {}
    Result(Failure failure) : data_(std::move(failure)) {}

    bool has_value() const noexcept { return data_.index() == 0; }
    explicit operator bool() const noexcept { return has_value(); }

    T& value() & {
        rethrow_if_failed();
        return std::get<0>(data_);
    }
    const T& value() const& {
        rethrow_if_failed();
        return std::get<0>(data_);
    }
    T&& value() && {
        rethrow_if_failed();
        return std::get<0>(std::move(data_));
    }
    T* operator->() { return &value(); }
    const T* operator->() const { return &value(); }
    T& operator*() & { return value(); }
    const T& operator*() const& { return value(); }

    /// Precondition: !has_value().
    const Failure& error() const { return std::get<1>(data_); }

private:
    void rethrow_if_failed() const {
        if (!has_value()) throw_error(error().kind, error().message);
    }
    std::variant<T, Failure> data_;
};

/// Failure for the exception currently being handled; other exceptions map to `fallback`.
inline Failure current_failure(ErrorKind fallback = ErrorKind::internal) {
    try {
        throw;
    } catch (const Error& e) {
        return {e.kind(), e.what()};
    } catch (const std::exception& e) {
        return {fallback, e.what()};
    } catch (...) {
        return {fallback, "unknown exception"};
    }
}

/// Runs f and converts thrown library errors into a Failure.
template <class F>
auto capture(F&& f) -> Result<decltype(f())> {
    try {
        return f();
    } catch (...) {
        return current_failure();
    }
}

}  // namespace wentzell
