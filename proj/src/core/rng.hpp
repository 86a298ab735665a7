#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace epi {

using Rng = std::mt19937_64;

/// SplitMix64 step (Steele/Lea/Flood). Used only to derive well-separated
/// substream seeds from (master seed, stream ids); all actual sampling goes
/// through the per-stream engine.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic engine for substream (stream, substream) of a master seed.
/// Replications and grid workers each own one of these, so parallel Monte
/// Carlo results do not depend on scheduling.
inline Rng make_stream(std::uint64_t master_seed, std::uint64_t stream,
                       std::uint64_t substream = 0) {
  std::uint64_t s = master_seed;
  splitmix64(s);
  s ^= 0x6a09e667f3bcc909ULL + splitmix64(s) * (stream + 1);
  splitmix64(s);
  s ^= 0xbb67ae8584caa73bULL + splitmix64(s) * (substream + 1);
  std::uint32_t words[8];
  for (auto& w : words) w = static_cast<std::uint32_t>(splitmix64(s) >> 16);
  std::seed_seq seq(words, words + 8);
  return Rng(seq);
}

inline std::int64_t sample_poisson(double mean, Rng& rng) {
  if (!(mean > 0.0)) return 0;
  std::poisson_distribution<std::int64_t> dist(mean);
  return dist(rng);
}

inline std::int64_t sample_binomial(std::int64_t n, double p, Rng& rng) {
  if (n <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  std::binomial_distribution<std::int64_t> dist(n, p);
  return dist(rng);
}

/// Exact multinomial split of n across probs via sequential conditional
/// binomials.
inline std::vector<std::int64_t> sample_multinomial(std::int64_t n,
                                                    const std::vector<double>& probs,
                                                    Rng& rng) {
  std::vector<std::int64_t> out(probs.size(), 0);
  if (probs.empty() || n <= 0) return out;
  // suffix sums keep the conditional probability exactly 1 at the last
  // positive entry
  std::vector<double> tails(probs.size(), 0.0);
  double acc = 0.0;
  for (std::size_t i = probs.size(); i-- > 0;) {
    acc += probs[i];
    tails[i] = acc;
  }
  std::int64_t left = n;
  for (std::size_t i = 0; i < probs.size() && left > 0; ++i) {
    if (tails[i] <= 0.0) break;
    double q = probs[i] / tails[i];
    std::int64_t k = sample_binomial(left, q > 1.0 ? 1.0 : q, rng);
    out[i] = k;
    left -= k;
  }
  return out;
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace epi
