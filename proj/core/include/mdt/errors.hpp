#pragma once

#include <stdexcept>
#include <string>

namespace mdt {

// Error taxonomy shared by the library and the CLI. Each class maps to a
// distinct process exit code (see commands.hpp).
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration: bad sizes, domain counts, incompatible settings.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Problems with input data: missing folders, undecodable images, shape
// mismatches between tensors and the configured model.
class DataError : public Error {
public:
  using Error::Error;
};

// Filesystem and serialization failures, including checkpoint corruption.
class IoError : public Error {
public:
  using Error::Error;
};

// Raised when training encounters a non-finite loss. A final checkpoint is
// written before this is thrown; `checkpoint_path` names it (may be empty if
// even that write failed).
class TrainingHalted : public Error {
public:
  TrainingHalted(const std::string& what, std::string checkpoint_path)
      : Error(what), checkpoint_path(std::move(checkpoint_path)) {}
  std::string checkpoint_path;
};

}  // namespace mdt
