#ifndef TRAJPRISM_ERROR_HPP
#define TRAJPRISM_ERROR_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace trajprism {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// An operation was invoked on an object that cannot serve it (empty index, ...).
class InvalidState : public Error {
public:
    using Error::Error;
};

/// Retrieval assignment leaves a taxonomy dimension uncovered.
class InvalidAssignment : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class DegenerateBearing : public Error {
public:
    using Error::Error;
};

/// Point lies outside the local projection's validity radius.
class ProjectionDomainError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class DanglingRidError : public Error {
public:
    explicit DanglingRidError(std::vector<std::int64_t> rids);

    const std::vector<std::int64_t>& rids() const { return rids_; }

private:
    std::vector<std::int64_t> rids_;
};

class UnresolvedSegmentError : public Error {
public:
    explicit UnresolvedSegmentError(std::vector<std::int64_t> rids);

    const std::vector<std::int64_t>& rids() const { return rids_; }

private:
    std::vector<std::int64_t> rids_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Provider output that does not match the expected record schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

class ProviderError : public Error {
public:
    using Error::Error;
};

class ExtractionFailure : public Error {
public:
    using Error::Error;
};

class NumericFailure : public Error {
public:
    NumericFailure(const std::string& what, std::size_t batch_index)
        : Error(what + " (batch index " + std::to_string(batch_index) + ")"),
          batch_index_(batch_index) {}

    std::size_t batch_index() const { return batch_index_; }

private:
    std::size_t batch_index_;
};

} // namespace trajprism

#endif // TRAJPRISM_ERROR_HPP
