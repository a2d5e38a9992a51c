#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fedar {

using ClientId = std::size_t;
/// Communication rounds are numbered from 1.
using Round = std::size_t;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration (including dimension mismatches).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Empty or otherwise unusable data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (IDX, CSV).
class FormatError : public Error {
 public:
  using Error::Error;
};

class PartitionError : public Error {
 public:
  using Error::Error;
};

/// A strategy received input that violates its round protocol.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Request exceeds what an exact algorithm supports.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedar
