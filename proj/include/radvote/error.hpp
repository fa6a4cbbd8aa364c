#pragma once

#include <stdexcept>
#include <string>

namespace radvote {

// Base of every error thrown by the library. The CLI maps the three families
// below onto its exit codes (1 usage/config, 2 IO, 3 numerical).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- argument / configuration family -------------------------------------

class ParameterError : public Error {
 public:
  using Error::Error;
};

class SizeError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

class ConfigError : public ParameterError {
 public:
  ConfigError(std::string field, const std::string& what)
      : ParameterError("config: " + field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class IncompatibleGridError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

// --- numerical family -----------------------------------------------------

class NumericalError : public Error {
 public:
  using Error::Error;
};

class InvalidDepthError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegeneracyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class RankError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class EmptyRenderError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoPeakError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// --- IO / format family ---------------------------------------------------

class IoError : public Error {
 public:
  using Error::Error;
};

class PlyHeaderError : public IoError {
 public:
  using IoError::IoError;
};

class PlyLayoutError : public IoError {
 public:
  using IoError::IoError;
};

class PlyTruncatedError : public IoError {
 public:
  using IoError::IoError;
};

class ImageFormatError : public IoError {
 public:
  using IoError::IoError;
};

class BlobFormatError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace radvote
