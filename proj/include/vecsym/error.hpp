#pragma once

#include <stdexcept>
#include <string>

namespace vecsym {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed tape text (bad opcode, index out of range, version mismatch).
class TapeFormatError : public Error {
public:
    using Error::Error;
};

} // namespace vecsym
