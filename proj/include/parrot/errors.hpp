#pragma once

#include <stdexcept>
#include <string>

namespace parrot {

// Root of every error the library raises. Each subsystem throws a narrower
// subtype so callers (the CLI in particular) can map failures to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration. Maps to CLI exit code 1.
class ConfigError : public Error {
public:
    using Error::Error;
};

class InfeasiblePartition : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class NonFiniteLoss : public Error {
public:
    NonFiniteLoss(int client_id, int round, int epoch)
        : Error("non-finite loss: client " + std::to_string(client_id) + ", round " +
                std::to_string(round) + ", epoch " + std::to_string(epoch))
        , client_id_(client_id)
        , round_(round) {}

    int client_id() const noexcept { return client_id_; }
    int round() const noexcept { return round_; }

private:
    int client_id_;
    int round_;
};

// State store
class CorruptRecord : public Error {
public:
    using Error::Error;
};

class StaleWrite : public Error {
public:
    using Error::Error;
};

// Aggregation
class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class OpMismatch : public Error {
public:
    using Error::Error;
};

class SchemaMismatch : public Error {
public:
    using Error::Error;
};

class EmptyInput : public Error {
public:
    using Error::Error;
};

class MissingEntry : public Error {
public:
    using Error::Error;
};

// Engine
class DeviceFailure : public Error {
public:
    DeviceFailure(int device_id, const std::string& what)
        : Error("device " + std::to_string(device_id) + " failed: " + what)
        , device_id_(device_id) {}

    int device_id() const noexcept { return device_id_; }

private:
    int device_id_;
};

class WireFormatError : public Error {
public:
    using Error::Error;
};

}  // namespace parrot
