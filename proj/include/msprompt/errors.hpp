#pragma once

#include <stdexcept>
#include <string>

namespace msprompt {

// Root of every error thrown by the library. Catch this to handle any
// failure uniformly; catch a leaf type to react to one condition.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define MSPROMPT_DEFINE_ERROR(Name)          \
  class Name : public Error {                \
   public:                                   \
    using Error::Error;                      \
  }

// raster
MSPROMPT_DEFINE_ERROR(MissingFile);
MSPROMPT_DEFINE_ERROR(DecodeError);
MSPROMPT_DEFINE_ERROR(DuplicateBand);
MSPROMPT_DEFINE_ERROR(UnknownBandCode);
MSPROMPT_DEFINE_ERROR(IncompatibleGeometry);
MSPROMPT_DEFINE_ERROR(DegenerateRange);

// spectral
MSPROMPT_DEFINE_ERROR(DimensionMismatch);
MSPROMPT_DEFINE_ERROR(MissingBand);
MSPROMPT_DEFINE_ERROR(UnalignedScene);

// promptkit
MSPROMPT_DEFINE_ERROR(EmptyVocabulary);
MSPROMPT_DEFINE_ERROR(NoImages);
MSPROMPT_DEFINE_ERROR(UnboundPlaceholder);
MSPROMPT_DEFINE_ERROR(InvalidVocabulary);

class MissingDefinition : public Error {
 public:
  explicit MissingDefinition(std::string class_name)
      : Error("class has no expanded definition: " + class_name),
        class_name_(std::move(class_name)) {}
  const std::string& class_name() const noexcept { return class_name_; }

 private:
  std::string class_name_;
};

// backend
MSPROMPT_DEFINE_ERROR(TransportError);
MSPROMPT_DEFINE_ERROR(AuthError);
MSPROMPT_DEFINE_ERROR(ReplayMiss);
MSPROMPT_DEFINE_ERROR(StorageError);

// metrics
MSPROMPT_DEFINE_ERROR(EmptyTruth);
MSPROMPT_DEFINE_ERROR(EmptyRun);

// bench
MSPROMPT_DEFINE_ERROR(DatasetError);
MSPROMPT_DEFINE_ERROR(ConfigError);

#undef MSPROMPT_DEFINE_ERROR

}  // namespace msprompt
