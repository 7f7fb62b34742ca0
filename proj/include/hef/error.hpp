#pragma once

#include <stdexcept>
#include <string>

namespace hef {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on the arguments of an operation was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Matrix inversion or logarithm at a (near-)singular input.
class ConditioningError : public Error {
public:
    ConditioningError(const std::string& what, double min_eigenvalue)
        : Error(what), min_eigenvalue_(min_eigenvalue) {}
    double min_eigenvalue() const { return min_eigenvalue_; }

private:
    double min_eigenvalue_;
};

/// Explicit time step above the stability bound of the scheme.
class CflError : public Error {
public:
    CflError(const std::string& what, double stable_dt) : Error(what), stable_dt_(stable_dt) {}
    double stable_dt() const { return stable_dt_; }

private:
    double stable_dt_;
};

/// NaN or Inf appeared in a field during time stepping.
class NonFiniteError : public Error {
public:
    NonFiniteError(const std::string& what, int ix, int iy) : Error(what), ix_(ix), iy_(iy) {}
    int ix() const { return ix_; }
    int iy() const { return iy_; }

private:
    int ix_;
    int iy_;
};

/// An operation was applied to data for which it is not defined.
class MisuseError : public Error {
public:
    using Error::Error;
};

/// Malformed configuration file; carries the offending line and key.
class ConfigError : public Error {
public:
    ConfigError(const std::string& what, int line, std::string key)
        : Error(what), line_(line), key_(std::move(key)) {}
    int line() const { return line_; }
    const std::string& key() const { return key_; }

private:
    int line_;
    std::string key_;
};

}  // namespace hef
