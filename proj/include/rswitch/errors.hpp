#pragma once

#include <stdexcept>
#include <string>

namespace rswitch {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Grid/solver/run configuration cannot be honoured (CFL ceiling, enumeration guard, ...).
class ConfigurationError : public Error {
public:
    using Error::Error;
};

class OutOfDomain : public Error {
public:
    using Error::Error;
};

class NumericalBlowup : public Error {
public:
    NumericalBlowup(const std::string& what, long step) : Error(what), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

/// Obstacle projection did not settle within the sweep budget on a spec that claims H3.
class H3Violation : public Error {
public:
    using Error::Error;
};

class EstimationFailure : public Error {
public:
    using Error::Error;
};

class NotFound : public Error {
public:
    using Error::Error;
};

class Unsupported : public Error {
public:
    using Error::Error;
};

/// Switch count on a path exceeded the Zeno cap. `time()` is where the cap was crossed,
/// i.e. an estimate of the accumulation point of the switching times.
class ZenoAbort : public Error {
public:
    ZenoAbort(const std::string& what, double time) : Error(what), time_(time) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

}  // namespace rswitch
