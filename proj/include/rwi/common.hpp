#pragma once

#include <stdexcept>
#include <string>

namespace rwi {

inline constexpr const char* kVersion = "0.1.0";

// Error taxonomy. Every failure mode the library reports deliberately gets
// its own type so callers (and the CLI's stage labels) can tell them apart.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define RWI_DEFINE_ERROR(Name)                        \
    class Name : public Error {                       \
    public:                                           \
        using Error::Error;                           \
    }

RWI_DEFINE_ERROR(GeometryInfeasible);
RWI_DEFINE_ERROR(EmptyDelta);
RWI_DEFINE_ERROR(Timeout);
RWI_DEFINE_ERROR(StepCapExceeded);
RWI_DEFINE_ERROR(TooLarge);
RWI_DEFINE_ERROR(SolverDiverged);
RWI_DEFINE_ERROR(EmptySet);
RWI_DEFINE_ERROR(DegenerateRow);
RWI_DEFINE_ERROR(EpsilonOutOfRange);
RWI_DEFINE_ERROR(InvariantMismatch);
RWI_DEFINE_ERROR(NotEnoughSteps);
RWI_DEFINE_ERROR(GammaOutOfRange);
RWI_DEFINE_ERROR(KNonpositive);
RWI_DEFINE_ERROR(DeltaOutOfRange);
RWI_DEFINE_ERROR(FOutOfRange);
RWI_DEFINE_ERROR(NotConverged);
RWI_DEFINE_ERROR(ConfigError);

#undef RWI_DEFINE_ERROR

}  // namespace rwi
