#pragma once

#include <stdexcept>
#include <string>

namespace gazelabel {

// Base for every failure this library reports deliberately.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateVector : Error {
  using Error::Error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};
struct AmbiguousGeodesic : Error {
  using Error::Error;
};
struct GimbalBoundary : Error {
  using Error::Error;
};
struct DegenerateLandmarks : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct ManifestConflict : Error {
  using Error::Error;
};
struct BadLabel : Error {
  using Error::Error;
};
struct CannotSplit : Error {
  using Error::Error;
};
struct MissingData : Error {
  using Error::Error;
};
struct MissingLabel : Error {
  using Error::Error;
};
struct EmptyDataset : Error {
  using Error::Error;
};
struct EmptyInput : Error {
  using Error::Error;
};
struct NonFiniteLoss : Error {
  using Error::Error;
};
struct UndefinedCorrelation : Error {
  using Error::Error;
};
struct InvalidConfig : Error {
  using Error::Error;
};

}  // namespace gazelabel
