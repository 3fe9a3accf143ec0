#include "obcbf/noise.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace obcbf {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

NoiseSource::NoiseSource(NoiseSpec spec) : spec_(spec) {
  if (spec_.vbar < 0.0) throw std::invalid_argument("noise: vbar must be non-negative");
  if (spec_.dim < 1) throw std::invalid_argument("noise: dimension must be positive");
  if (spec_.waveform == NoiseSpec::Waveform::filtered) {
    if (!(spec_.knot_spacing > 0.0) || spec_.taps < 1)
      throw std::invalid_argument("noise: need knot_spacing > 0 and taps >= 1");
  }
  if (spec_.waveform == NoiseSpec::Waveform::multisine && spec_.tones < 1)
    throw std::invalid_argument("noise: need at least one tone");
  // A moving average of `taps` uniforms on [-1, 1] has standard deviation
  // 1 / sqrt(3 taps); rescale to roughly unit spread before clipping.
  gain_ = std::sqrt(3.0 * spec_.taps) / std::sqrt(static_cast<double>(spec_.dim));
  freq_.resize(spec_.dim, spec_.tones);
  phase_.resize(spec_.dim, spec_.tones);
  for (int j = 0; j < spec_.dim; ++j) {
    for (int k = 0; k < spec_.tones; ++k) {
      freq_(j, k) = 0.5 + 49.5 * (0.5 * (uniform(-1 - k, j) + 1.0));
      phase_(j, k) = std::numbers::pi * uniform(-1000 - k, j);
    }
  }
}

double NoiseSource::uniform(long long k, int component) const {
  std::uint64_t h = mix64(spec_.seed);
  h = mix64(h ^ static_cast<std::uint64_t>(k));
  h = mix64(h ^ static_cast<std::uint64_t>(component));
  return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

Vector NoiseSource::knot(long long k) const {
  Vector w = Vector::Zero(spec_.dim);
  for (int i = 0; i < spec_.taps; ++i)
    for (int j = 0; j < spec_.dim; ++j) w(j) += uniform(k - i, j);
  w *= gain_ / spec_.taps;
  // Clip slightly inside the unit ball so rounding in the final scaling
  // cannot push the norm past vbar.
  constexpr double radius = 1.0 - 1e-12;
  const double nrm = w.norm();
  if (nrm > radius) w *= radius / nrm;
  return spec_.vbar * w;
}

Vector NoiseSource::sample(double t) const {
  switch (spec_.waveform) {
    case NoiseSpec::Waveform::zero:
      return Vector::Zero(spec_.dim);
    case NoiseSpec::Waveform::filtered: {
      const double s = t / spec_.knot_spacing;
      const double base = std::floor(s);
      const long long k = static_cast<long long>(base);
      const double frac = s - base;
      // Convex combination of two points in the ball stays in the ball.
      return (1.0 - frac) * knot(k) + frac * knot(k + 1);
    }
    case NoiseSpec::Waveform::multisine: {
      Vector v(spec_.dim);
      for (int j = 0; j < spec_.dim; ++j) {
        double acc = 0.0;
        for (int k = 0; k < spec_.tones; ++k) acc += std::sin(freq_(j, k) * t + phase_(j, k));
        v(j) = acc / spec_.tones;
      }
      return spec_.vbar / std::sqrt(static_cast<double>(spec_.dim)) * v;
    }
  }
  return Vector::Zero(spec_.dim);
}

}  // namespace obcbf
