#pragma once

#include <stdexcept>
#include <string>

namespace gazesearch {

// Malformed or inconsistent input data. The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite values during training or inference. CLI exit code 3.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A prediction without a matching (image_id, finding) reference.
class MissingReference : public DataError {
public:
    using DataError::DataError;
};

// Reasons a (sample, finding) pair is dropped by the conversion pipeline.
enum class SkipReason {
    NotMentioned,
    NoFixationsBeforeCutoff,
    NoAnatomyBoxes,
    NoTargetFixation,
    Unconstrainable,
};

const char* to_string(SkipReason reason);

class PipelineSkip : public std::runtime_error {
public:
    PipelineSkip(SkipReason reason, const std::string& what)
        : std::runtime_error(what), reason_(reason) {}
    SkipReason reason() const { return reason_; }

private:
    SkipReason reason_;
};

}  // namespace gazesearch
