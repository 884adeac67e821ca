#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dclnas {

// Base of every error the library throws. Callers that only care about
// "something in the engine failed" catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed inputs: dimension mismatches, non-square adjacency, etc.
class StructuralError : public Error {
public:
    using Error::Error;
};

// Bad argument values (k out of range, empty inputs, too few samples...).
class ParameterError : public Error {
public:
    using Error::Error;
};

// A search-space or run configuration violates one or more invariants.
class ConfigError : public Error {
public:
    using Error::Error;
};

class SamplingExhausted : public Error {
public:
    using Error::Error;
};

class PathOverflow : public Error {
public:
    using Error::Error;
};

// More paths than the encoding has room for (L_seq). The architecture is
// rejected, never truncated.
class CapacityError : public Error {
public:
    using Error::Error;
};

class EncodingError : public Error {
public:
    using Error::Error;
};

class LookupError : public Error {
public:
    using Error::Error;
};

class StateError : public Error {
public:
    using Error::Error;
};

class BudgetExhausted : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Could not produce the requested number of items; `produced` says how far we got.
class ShortfallError : public Error {
public:
    ShortfallError(const std::string& what, std::size_t requested, std::size_t produced)
        : Error(what), requested_(requested), produced_(produced) {}

    std::size_t requested() const noexcept { return requested_; }
    std::size_t produced() const noexcept { return produced_; }
    std::size_t shortfall() const noexcept { return requested_ - produced_; }

private:
    std::size_t requested_;
    std::size_t produced_;
};

}  // namespace dclnas
