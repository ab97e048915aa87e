#pragma once

#include <stdexcept>
#include <string>

namespace diffcast {

/// Base class of every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI when reporting on stderr.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string &what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string &kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

#define DIFFCAST_DEFINE_ERROR(Name, tag)                                      \
  class Name : public Error {                                                 \
  public:                                                                     \
    explicit Name(const std::string &what) : Error(tag, what) {}              \
  };

DIFFCAST_DEFINE_ERROR(SchemaError, "schema")
DIFFCAST_DEFINE_ERROR(ParseError, "parse")
DIFFCAST_DEFINE_ERROR(IntegrityError, "integrity")
DIFFCAST_DEFINE_ERROR(InsufficientDataError, "insufficient-data")
DIFFCAST_DEFINE_ERROR(DegenerateScaleError, "degenerate-scale")
DIFFCAST_DEFINE_ERROR(ParameterError, "parameter")
DIFFCAST_DEFINE_ERROR(DimensionError, "dimension")
DIFFCAST_DEFINE_ERROR(DivergenceError, "divergence")
DIFFCAST_DEFINE_ERROR(ScheduleError, "schedule-too-short")
DIFFCAST_DEFINE_ERROR(AlignmentError, "alignment")
DIFFCAST_DEFINE_ERROR(CoverageError, "coverage")
DIFFCAST_DEFINE_ERROR(ModelValidationError, "model-validation")
DIFFCAST_DEFINE_ERROR(IterationLimitError, "iteration-limit")
DIFFCAST_DEFINE_ERROR(CheckpointError, "checkpoint")
DIFFCAST_DEFINE_ERROR(ConfigError, "config")

#undef DIFFCAST_DEFINE_ERROR

} // namespace diffcast
