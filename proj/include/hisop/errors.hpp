#pragma once

#include <stdexcept>
#include <string>

namespace hisop {

/// Extents or channel counts of two operands do not agree.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// A scalar argument is outside its documented domain.
class ArgumentError : public std::invalid_argument {
 public:
  explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

/// A point lies on or behind the image plane of the camera it is projected into.
class BehindCameraError : public std::domain_error {
 public:
  explicit BehindCameraError(const std::string& what) : std::domain_error(what) {}
};

/// Malformed bytes or text in one of the on-disk formats.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A loss was requested over an empty supervision set.
class UndefinedLossError : public std::domain_error {
 public:
  explicit UndefinedLossError(const std::string& what) : std::domain_error(what) {}
};

}  // namespace hisop
