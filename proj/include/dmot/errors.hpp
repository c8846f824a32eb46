#pragma once

#include <stdexcept>
#include <string>

namespace dmot {

struct DegenerateInput : std::runtime_error {
    explicit DegenerateInput(const std::string& what) : std::runtime_error(what) {}
};

struct NoCorrespondences : std::runtime_error {
    explicit NoCorrespondences(const std::string& what) : std::runtime_error(what) {}
};

struct SingularInnovation : std::runtime_error {
    explicit SingularInnovation(const std::string& what) : std::runtime_error(what) {}
};

struct SingularCovariance : std::runtime_error {
    explicit SingularCovariance(const std::string& what) : std::runtime_error(what) {}
};

struct SingularGain : std::runtime_error {
    explicit SingularGain(const std::string& what) : std::runtime_error(what) {}
};

struct NotNeighbor : std::runtime_error {
    explicit NotNeighbor(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct EmptyGroundTruth : std::runtime_error {
    explicit EmptyGroundTruth(const std::string& what) : std::runtime_error(what) {}
};

struct LogError : std::runtime_error {
    explicit LogError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dmot
