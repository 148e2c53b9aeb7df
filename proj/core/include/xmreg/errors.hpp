#pragma once

#include <stdexcept>
#include <string>

namespace xmreg {

struct EmptyProjection : std::runtime_error {
  explicit EmptyProjection(const std::string& msg) : std::runtime_error(msg) {}
};
struct NonPositiveDepth : std::runtime_error {
  explicit NonPositiveDepth(const std::string& msg) : std::runtime_error(msg) {}
};
struct InvalidConfig : std::runtime_error {
  explicit InvalidConfig(const std::string& msg) : std::runtime_error(msg) {}
};
struct WeightShapeMismatch : std::runtime_error {
  explicit WeightShapeMismatch(const std::string& msg) : std::runtime_error(msg) {}
};
struct DimensionMismatch : std::runtime_error {
  explicit DimensionMismatch(const std::string& msg) : std::runtime_error(msg) {}
};
struct EmptyGroundTruth : std::runtime_error {
  explicit EmptyGroundTruth(const std::string& msg) : std::runtime_error(msg) {}
};
struct EmptyMatchSet : std::runtime_error {
  explicit EmptyMatchSet(const std::string& msg) : std::runtime_error(msg) {}
};
struct WindowOutOfRange : std::runtime_error {
  explicit WindowOutOfRange(const std::string& msg) : std::runtime_error(msg) {}
};
struct DegenerateConfiguration : std::runtime_error {
  explicit DegenerateConfiguration(const std::string& msg) : std::runtime_error(msg) {}
};
struct InsufficientCorrespondences : std::runtime_error {
  explicit InsufficientCorrespondences(const std::string& msg) : std::runtime_error(msg) {}
};
struct NoConsensus : std::runtime_error {
  explicit NoConsensus(const std::string& msg) : std::runtime_error(msg) {}
};
struct EmptyResults : std::runtime_error {
  explicit EmptyResults(const std::string& msg) : std::runtime_error(msg) {}
};
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace xmreg
