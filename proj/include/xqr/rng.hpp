/**
 * @file rng.hpp
 * @brief Reproducible random streams for the simulation study.
 *
 * Engine: std::mt19937_64, whose output sequence is fixed by the C++
 * standard. Every variate is derived from raw 64-bit draws here (the
 * standard distributions are implementation-defined and are not used):
 *
 *  - uniform:  ((bits >> 11) + 0.5) * 2^-53, in the open interval (0, 1)
 *  - normal:   Marsaglia polar method; the second value of each accepted
 *              pair is cached and returned by the next call
 *  - chi^2_k:  sum of k squared normals (k is a small integer here)
 *  - t_k:      normal / sqrt(chi^2_k / k), drawn in that order
 *
 * Replication r of a study uses seed root ^ mix64(r), with mix64 the
 * splitmix64 finalizer applied to r + 0x9E3779B97F4A7C15.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <random>

namespace xqr {

std::uint64_t mix64(std::uint64_t value) noexcept;

inline std::uint64_t replication_seed(std::uint64_t root, std::uint64_t replication) noexcept {
  return root ^ mix64(replication);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();
  double normal();
  double chi_square(int dof);
  double student_t(int dof);

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

}  // namespace xqr
