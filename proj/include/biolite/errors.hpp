#pragma once

#include <stdexcept>
#include <string>

namespace biolite {

// Error categories map 1:1 onto CLI exit codes (see tools/main.cpp).
enum class ErrorKind { shape, data, format, internal };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    const char* category() const noexcept {
        switch (kind_) {
            case ErrorKind::shape: return "shape";
            case ErrorKind::data: return "data";
            case ErrorKind::format: return "format";
            case ErrorKind::internal: return "internal";
        }
        return "internal";
    }

private:
    ErrorKind kind_;
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(ErrorKind::shape, msg) {}
};

// Bad input data: missing files, invalid mask values, malformed annotations.
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(ErrorKind::data, msg) {}
};

// Malformed serialized artifacts (weight files, manifests).
class FormatError : public Error {
public:
    explicit FormatError(const std::string& msg) : Error(ErrorKind::format, msg) {}
};

// Broken internal invariants (missing caches, mismatched optimizer state).
class InternalError : public Error {
public:
    explicit InternalError(const std::string& msg) : Error(ErrorKind::internal, msg) {}
};

} // namespace biolite
