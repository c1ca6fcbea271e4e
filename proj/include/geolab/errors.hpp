// Error types shared across the library.
#pragma once

#include <stdexcept>
#include <string>

namespace geolab {

struct GeolabError : std::runtime_error {
    explicit GeolabError(const std::string& msg) : std::runtime_error(msg) {}
};

// A chart point lies outside a non-periodic coordinate range.
struct OutOfDomainError : GeolabError {
    explicit OutOfDomainError(const std::string& msg) : GeolabError(msg) {}
};

// The adaptive step controller underflowed (chart singularity, blow-up).
struct StepFailureError : GeolabError {
    explicit StepFailureError(const std::string& msg) : GeolabError(msg) {}
};

// A candidate loop does not close in phase space within tolerance.
struct NotClosedError : GeolabError {
    explicit NotClosedError(const std::string& msg) : GeolabError(msg) {}
};

// Curve shortening lost embeddedness (resolution insufficient).
struct LostSimplicityError : GeolabError {
    explicit LostSimplicityError(const std::string& msg) : GeolabError(msg) {}
};

// Curve shortening shrank the loop below the diameter floor.
struct CollapsedError : GeolabError {
    explicit CollapsedError(const std::string& msg) : GeolabError(msg) {}
};

// A waist candidate failed certification (conjugate points found).
struct NotCertifiedError : GeolabError {
    explicit NotCertifiedError(const std::string& msg) : GeolabError(msg) {}
};

// Minimax sweepout did not stabilize within the iteration budget.
struct SweepoutStuckError : GeolabError {
    explicit SweepoutStuckError(const std::string& msg) : GeolabError(msg) {}
};

struct NotSimpleError : GeolabError {
    explicit NotSimpleError(const std::string& msg) : GeolabError(msg) {}
};

struct DegenerateWaistError : GeolabError {
    explicit DegenerateWaistError(const std::string& msg) : GeolabError(msg) {}
};

struct ArrangementFailedError : GeolabError {
    explicit ArrangementFailedError(const std::string& msg) : GeolabError(msg) {}
};

struct NonTransversalIntersectionError : GeolabError {
    explicit NonTransversalIntersectionError(const std::string& msg) : GeolabError(msg) {}
};

struct NonHyperbolicError : GeolabError {
    explicit NonHyperbolicError(const std::string& msg) : GeolabError(msg) {}
};

struct TransversalityFailedError : GeolabError {
    explicit TransversalityFailedError(const std::string& msg) : GeolabError(msg) {}
};

struct EmptyDatasetError : GeolabError {
    explicit EmptyDatasetError(const std::string& msg) : GeolabError(msg) {}
};

struct ConfigError : GeolabError {
    explicit ConfigError(const std::string& msg) : GeolabError(msg) {}
};

struct BudgetExhaustedError : GeolabError {
    explicit BudgetExhaustedError(const std::string& msg) : GeolabError(msg) {}
};

}  // namespace geolab
