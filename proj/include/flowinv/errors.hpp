#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace flowinv {

// Base for every error raised by the library. `code()` is a short stable
// identifier used by the CLI's machine-parsable error line.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

class RangeError : public Error {
public:
    explicit RangeError(const std::string& what) : Error("range", what) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error("shape", what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config", what) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error("numeric", what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("io", what) {}
};

class MetricError : public Error {
public:
    explicit MetricError(const std::string& what) : Error("metric", what) {}
};

// A trajectory left the finite / bounded region. `step` is the Euler step
// index at which the offending latent was produced.
class LatentExplosion : public Error {
public:
    LatentExplosion(std::size_t step, const std::string& what)
        : Error("latent_explosion", what), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class TrainingError : public Error {
public:
    TrainingError(std::size_t iteration, const std::string& what)
        : Error("training", what), iteration_(iteration) {}

    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

class NtiError : public Error {
public:
    NtiError(std::size_t step, std::size_t inner, const std::string& what)
        : Error("nti", what), step_(step), inner_(inner) {}

    std::size_t step() const noexcept { return step_; }
    std::size_t inner_iteration() const noexcept { return inner_; }

private:
    std::size_t step_;
    std::size_t inner_;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

class CorruptFileError : public CheckpointError {
public:
    explicit CorruptFileError(const std::string& what) : CheckpointError("corrupt_file", what) {}
};

class VersionError : public CheckpointError {
public:
    VersionError(std::uint32_t found, std::uint32_t expected)
        : CheckpointError("version", "unsupported file version " + std::to_string(found) +
                                         " (expected " + std::to_string(expected) + ")"),
          found_(found), expected_(expected) {}

    std::uint32_t found() const noexcept { return found_; }
    std::uint32_t expected() const noexcept { return expected_; }

private:
    std::uint32_t found_;
    std::uint32_t expected_;
};

}  // namespace flowinv
