#pragma once

#include <cstdint>

#include "obcbf/core_math.hpp"

namespace obcbf {

struct NoiseSpec {
  enum class Waveform { zero, filtered, multisine };
  Waveform waveform = Waveform::filtered;
  std::uint64_t seed = 1;
  double vbar = 0.0;
  int dim = 1;
  /// filtered: knot spacing in seconds and moving-average length over knots.
  double knot_spacing = 0.02;
  int taps = 4;
  /// multisine: number of tones per component.
  int tones = 5;
};

/// Deterministic bounded measurement noise, ||v(t)|| <= vbar for every t.
/// Random access in t: the value depends only on (spec, t).
class NoiseSource {
 public:
  explicit NoiseSource(NoiseSpec spec);
  Vector sample(double t) const;
  const NoiseSpec& spec() const { return spec_; }

 private:
  Vector knot(long long k) const;
  double uniform(long long k, int component) const;

  NoiseSpec spec_;
  double gain_;
  Matrix freq_;
  Matrix phase_;
};

/// splitmix64 finaliser, used as a counter-based generator.
std::uint64_t mix64(std::uint64_t x);

}  // namespace obcbf
