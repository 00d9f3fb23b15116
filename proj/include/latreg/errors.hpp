#pragma once

#include <stdexcept>
#include <string>

namespace latreg {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define LATREG_ERROR(Name)                  \
    struct Name : Error {                   \
        using Error::Error;                 \
    }

LATREG_ERROR(DimensionError);
LATREG_ERROR(ConfigError);
LATREG_ERROR(ConstructionError);
LATREG_ERROR(InputError);
LATREG_ERROR(DomainError);
LATREG_ERROR(UnsupportedProx);
LATREG_ERROR(CalibrationError);
LATREG_ERROR(ProblemError);
LATREG_ERROR(FixtureError);
LATREG_ERROR(FitError);
LATREG_ERROR(ScheduleError);
LATREG_ERROR(WellPosednessError);
LATREG_ERROR(MonotonicityError);
LATREG_ERROR(OracleError);
LATREG_ERROR(IoError);

#undef LATREG_ERROR

}  // namespace latreg
