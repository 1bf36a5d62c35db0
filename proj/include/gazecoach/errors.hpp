#pragma once

#include <stdexcept>
#include <string>

namespace gazecoach {

/// Input that violates a documented format or invariant. `path()` is the JSON
/// field path of the offending value ("" for the document root).
class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string path, const std::string& message)
        : std::runtime_error(path.empty() ? message : path + ": " + message),
          path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// Invalid run configuration (missing backend fields, bad enum values).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

} // namespace gazecoach
