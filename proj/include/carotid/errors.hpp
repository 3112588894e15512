#pragma once
// Exception hierarchy. ValidationError maps to CLI exit code 1,
// IoError to exit code 2.

#include <stdexcept>
#include <string>

namespace carotid {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

#define CAROTID_VALIDATION_ERROR(NAME)                \
    struct NAME final : ValidationError {             \
        using ValidationError::ValidationError;       \
    }

CAROTID_VALIDATION_ERROR(MalformedLine);
CAROTID_VALIDATION_ERROR(TooFewPoints);
CAROTID_VALIDATION_ERROR(DegenerateContour);
CAROTID_VALIDATION_ERROR(ShapeMismatch);
CAROTID_VALIDATION_ERROR(OneClassOnly);
CAROTID_VALIDATION_ERROR(EmptyInput);
CAROTID_VALIDATION_ERROR(NonFinite);
CAROTID_VALIDATION_ERROR(GridMismatch);
CAROTID_VALIDATION_ERROR(TimeGridMismatch);
CAROTID_VALIDATION_ERROR(TooSmall);
CAROTID_VALIDATION_ERROR(BadDropout);
CAROTID_VALIDATION_ERROR(OutOfRange);
CAROTID_VALIDATION_ERROR(NegativeShearRate);
CAROTID_VALIDATION_ERROR(TooFewSamples);
CAROTID_VALIDATION_ERROR(NonMonotonicGrid);
CAROTID_VALIDATION_ERROR(AlphaTooLarge);
CAROTID_VALIDATION_ERROR(NonPeriodicWaveform);
CAROTID_VALIDATION_ERROR(ZeroShearHistory);
CAROTID_VALIDATION_ERROR(EmptyEnsemble);
CAROTID_VALIDATION_ERROR(MissingCalibration);
CAROTID_VALIDATION_ERROR(MissingContour);
CAROTID_VALIDATION_ERROR(EmptyDataset);
CAROTID_VALIDATION_ERROR(TooFewPatients);
CAROTID_VALIDATION_ERROR(MissingPrediction);

#undef CAROTID_VALIDATION_ERROR

} // namespace carotid
