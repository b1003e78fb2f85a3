#pragma once

#include <stdexcept>
#include <string>

namespace ncollage {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };
class FormatError : public Error { public: using Error::Error; };
class PartitionError : public Error { public: using Error::Error; };
class IndexError : public Error { public: using Error::Error; };
class ShapeError : public Error { public: using Error::Error; };
class SizeError : public Error { public: using Error::Error; };
class ArgumentError : public Error { public: using Error::Error; };

// Numerical failures: the CLI maps both of these to the same exit code.
class NumericalError : public Error { public: using Error::Error; };
class ContractivityError : public NumericalError { public: using NumericalError::NumericalError; };

}  // namespace ncollage
