#pragma once

#include <stdexcept>
#include <string>

namespace ris {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class ModeError : public Error {
public:
    using Error::Error;
};

class DegenerateBatchError : public Error {
public:
    using Error::Error;
};

class CorruptCacheError : public Error {
public:
    using Error::Error;
};

class LabelError : public Error {
public:
    using Error::Error;
};

class ParameterError : public Error {
public:
    using Error::Error;
};

class CapacityError : public Error {
public:
    using Error::Error;
};

class IngestionError : public Error {
public:
    using Error::Error;
};

class EmptySplitError : public Error {
public:
    using Error::Error;
};

/// Raised while decoding checkpoints, CIR files and manifests.
class FormatError : public Error {
public:
    enum class Kind { BadMagic, UnsupportedVersion, TruncatedPayload, BadHeader, Io };

    FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

}  // namespace ris
