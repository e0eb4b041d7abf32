#pragma once

#include <stdexcept>
#include <string>

namespace qdev {

// Validation errors map to CLI exit code 1, numerical failures to 2.
enum class ErrorKind { validation, numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string code, const std::string& message, std::string context = {})
        : std::runtime_error(message), kind_(kind), code_(std::move(code)), context_(std::move(context)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& code() const noexcept { return code_; }
    const std::string& context() const noexcept { return context_; }

private:
    ErrorKind kind_;
    std::string code_;
    std::string context_;
};

class ValidationError : public Error {
public:
    ValidationError(const std::string& message, std::string context = {})
        : Error(ErrorKind::validation, "validation_error", message, std::move(context)) {}

protected:
    ValidationError(std::string code, const std::string& message, std::string context)
        : Error(ErrorKind::validation, std::move(code), message, std::move(context)) {}
};

class DimensionMismatch : public ValidationError {
public:
    explicit DimensionMismatch(const std::string& message, std::string context = {})
        : ValidationError("dimension_mismatch", message, std::move(context)) {}
};

class NotFaithfulError : public ValidationError {
public:
    explicit NotFaithfulError(const std::string& message, std::string context = {})
        : ValidationError("not_faithful", message, std::move(context)) {}
};

class NotSymmetricError : public ValidationError {
public:
    explicit NotSymmetricError(const std::string& message, std::string context = {})
        : ValidationError("not_kms_symmetric", message, std::move(context)) {}
};

class SchemaError : public ValidationError {
public:
    explicit SchemaError(const std::string& message, std::string context = {})
        : ValidationError("schema_violation", message, std::move(context)) {}
};

class MalformedJson : public ValidationError {
public:
    explicit MalformedJson(const std::string& message, std::string context = {})
        : ValidationError("malformed_json", message, std::move(context)) {}
};

class IoError : public ValidationError {
public:
    explicit IoError(const std::string& message, std::string context = {})
        : ValidationError("io_error", message, std::move(context)) {}
};

class UsageError : public ValidationError {
public:
    explicit UsageError(const std::string& message, std::string context = {})
        : ValidationError("usage_error", message, std::move(context)) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& message, std::string context = {})
        : Error(ErrorKind::numerical, "numerical_failure", message, std::move(context)) {}
};

}  // namespace qdev
