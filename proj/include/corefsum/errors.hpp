#pragma once

#include <stdexcept>
#include <string>

namespace corefsum {

// Error classes map 1:1 onto CLI exit codes: usage=1, io=2, validation=3, numeric=4.
class Error : public std::runtime_error {
public:
    enum class Kind { usage = 1, io = 2, validation = 3, numeric = 4 };

    Error(Kind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    Kind kind() const { return kind_; }
    int exit_code() const { return static_cast<int>(kind_); }

private:
    Kind kind_;
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& m) : Error(Kind::usage, m) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& m) : Error(Kind::io, m) {}
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& m) : Error(Kind::validation, m) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& m) : Error(Kind::numeric, m) {}
};

}  // namespace corefsum
