#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace crowdperc {

/// Base of every error thrown by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File is not syntactically valid (JSON syntax, bad magic, ...).
class MalformedFile : public Error {
public:
    MalformedFile(const std::string& path, std::size_t line, const std::string& what)
        : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
    /// Binary formats: no line information.
    explicit MalformedFile(const std::string& what) : Error(what), line_(0) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Parsed document violates the schema. `field` is a JSON pointer.
class SchemaViolation : public Error {
public:
    SchemaViolation(const std::string& path, const std::string& field, const std::string& what)
        : Error(path + ": " + field + ": " + what), field_(field) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

class TruncatedFile : public Error {
public:
    using Error::Error;
};

class NonFiniteValue : public Error {
public:
    NonFiniteValue(const std::string& path, std::size_t record)
        : Error(path + ": non-finite value in record " + std::to_string(record)), record_(record) {}
    std::size_t record() const { return record_; }

private:
    std::size_t record_;
};

class OutOfRange : public Error {
public:
    using Error::Error;
};

class BudgetExceeded : public Error {
public:
    using Error::Error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class MisalignedFrames : public Error {
public:
    using Error::Error;
};

class LengthMismatch : public Error {
public:
    using Error::Error;
};

class ConfigInvalid : public Error {
public:
    using Error::Error;
};

}  // namespace crowdperc
