#pragma once

#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace coopnlos {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kDeg = kPi / 180.0;
inline constexpr double kMph = 0.44704;  // m/s per mph

/// Invalid configuration or precondition violation on user-supplied input.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A computation that cannot produce a meaningful number (singular matrices,
/// non-finite likelihoods, violated model assumptions).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

/// Deterministic RNG stream keyed by a seed and an arbitrary list of ids.
/// Two calls with the same keys produce identical streams regardless of the
/// order in which streams are created or which thread creates them.
template <typename... Keys>
Rng make_stream(std::uint64_t seed, Keys... keys) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(keys)...};
  return Rng(seq);
}

// Stream tags; keep values stable, they are part of the reproducibility contract.
enum StreamTag : std::uint32_t {
  kTagSpeed = 1,
  kTagLayout = 2,
  kTagIns = 3,
  kTagMask = 4,
  kTagEdge = 5,
  kTagSatEdge = 6,
  kTagPrior = 7,
  kTagFilter = 8,
  kTagTrial = 9,
};

}  // namespace coopnlos
