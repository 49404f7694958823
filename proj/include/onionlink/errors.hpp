#pragma once

#include <stdexcept>
#include <string>

namespace onionlink {

// Bad or inconsistent input data (files, flags, configs). CLI exit code 1.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// A broken internal invariant. CLI exit code 2.
class InternalError : public std::logic_error {
public:
    explicit InternalError(const std::string& msg) : std::logic_error(msg) {}
};

} // namespace onionlink
