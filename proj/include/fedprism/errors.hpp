#pragma once

#include <stdexcept>
#include <string>

namespace fedprism {

// Invalid argument value (non-positive temperature, empty batch, ...).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Shapes of matrices or parameter vectors disagree.
class DimensionError : public std::invalid_argument {
public:
    DimensionError(const std::string& what, std::size_t expected, std::size_t actual)
        : std::invalid_argument(what + ": expected " + std::to_string(expected) + ", got " +
                                std::to_string(actual)),
          expected_(expected),
          actual_(actual) {}

    std::size_t expected() const { return expected_; }
    std::size_t actual() const { return actual_; }

private:
    std::size_t expected_;
    std::size_t actual_;
};

// Mixing coefficients violate alpha + beta <= 1 or similar.
class ConstraintError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Round-level protocol violations (empty round, etc).
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    IoError(const std::string& file, std::size_t offset, const std::string& what)
        : std::runtime_error(file + " @ offset " + std::to_string(offset) + ": " + what),
          file_(file),
          offset_(offset) {}

    const std::string& file() const { return file_; }
    std::size_t offset() const { return offset_; }

private:
    std::string file_;
    std::size_t offset_;
};

// Configuration validation failure; key names the offending field.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& key, const std::string& what)
        : std::runtime_error(key.empty() ? what : key + ": " + what), key_(key) {}

    const std::string& key() const { return key_; }

private:
    std::string key_;
};

}  // namespace fedprism
