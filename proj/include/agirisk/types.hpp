#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace agirisk {

// Dense math types. Everything numeric in this project is double
// precision; gradient checks rely on it.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IVector = Eigen::VectorXi;
using Index = Eigen::Index;

// Seconds since the Unix epoch, UTC, second resolution.
using Timestamp = std::int64_t;

inline constexpr Timestamp kSecondsPerMinute = 60;
inline constexpr Timestamp kSecondsPerHour = 3600;
inline constexpr Timestamp kSecondsPerDay = 86400;

// Canonical feature layout: 11 hourly channel counts, 9 physiological
// aggregates, 4 out-of-range counts.
inline constexpr int kNumChannels = 11;
inline constexpr int kNumPhysioFeatures = 9;
inline constexpr int kNumAlertFeatures = 4;
inline constexpr int kNumFeatures = 24;
inline constexpr int kNumTimesteps = 6;
inline constexpr int kNumClasses = 2;

// Class index convention: 0 = no agitation, 1 = agitation.
inline constexpr int kNoAgitation = 0;
inline constexpr int kAgitation = 1;

}  // namespace agirisk
