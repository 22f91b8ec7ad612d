#pragma once

#include <stdexcept>
#include <string>

namespace pctag {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// -- scan construction --
struct DuplicateReturn : Error { using Error::Error; };
struct BeamOutOfRange : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };

// -- codebook --
struct LengthMismatch : Error { using Error::Error; };
struct BadLength : Error { using Error::Error; };
struct Infeasible : Error { using Error::Error; };
struct CollisionDetected : Error { using Error::Error; };
struct TooManyBadBits : Error { using Error::Error; };

// -- synthetic renderer --
struct TargetBehindSensor : Error { using Error::Error; };
struct TargetOutOfRange : Error { using Error::Error; };

// -- pose estimation --
struct DegenerateGeometry : Error { using Error::Error; };
struct CornerFitFailed : Error { using Error::Error; };
struct IllConditioned : Error { using Error::Error; };

// -- voting --
struct OutOfPlane : Error { using Error::Error; };

}  // namespace pctag
