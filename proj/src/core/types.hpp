#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace epi {

using Vec  = Eigen::VectorXd;
using Mat  = Eigen::MatrixXd;
using VecI = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

/// Condition phases. E..I2 are day-indexed blocks of the state vector, in
/// this block order; H is the single trailing slot (new hospitalizations on
/// the day, no day index).
enum class Phase : int { E = 0, P = 1, I1 = 2, A = 3, I2 = 4, H = 5 };

constexpr int kDurationPhases = 5;

constexpr Phase kDurationPhaseList[kDurationPhases] = {Phase::E, Phase::P, Phase::I1,
                                                       Phase::A, Phase::I2};

inline const char* phase_name(Phase p) {
  switch (p) {
    case Phase::E: return "E";
    case Phase::P: return "P";
    case Phase::I1: return "I1";
    case Phase::A: return "A";
    case Phase::I2: return "I2";
    case Phase::H: return "H";
  }
  return "?";
}

inline Phase phase_from_name(const std::string& name) {
  for (int i = 0; i <= 5; ++i) {
    auto p = static_cast<Phase>(i);
    if (name == phase_name(p)) return p;
  }
  throw std::invalid_argument("unknown phase name: " + name);
}

/// Dimension of the state vector for horizon h: five day-indexed blocks plus H.
constexpr int state_dim(int h) { return 5 * h + 1; }

/// Index of (phase, day) in the canonical state layout. day is 1-based and
/// ignored for H, which owns the last slot.
inline int state_index(Phase phase, int day, int h) {
  if (phase == Phase::H) return 5 * h;
  if (day < 1 || day > h)
    throw std::out_of_range("state_index: day " + std::to_string(day) +
                            " outside 1.." + std::to_string(h));
  return static_cast<int>(phase) * h + (day - 1);
}

inline Phase phase_of_index(int idx, int h) {
  if (idx < 0 || idx > 5 * h) throw std::out_of_range("phase_of_index: bad index");
  if (idx == 5 * h) return Phase::H;
  return static_cast<Phase>(idx / h);
}

/// 1-based day of a state index (1 for H's slot by convention).
inline int day_of_index(int idx, int h) {
  if (idx < 0 || idx > 5 * h) throw std::out_of_range("day_of_index: bad index");
  if (idx == 5 * h) return 1;
  return idx % h + 1;
}

}  // namespace epi
