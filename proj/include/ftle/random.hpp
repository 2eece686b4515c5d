#pragma once

#include <array>
#include <cstdint>

namespace ftle {

// Philox4x32-10 block function. Exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Counter-based random stream.
///
/// A stream is fully determined by (seed, stream id, sub-stream index) and the
/// number of values drawn so far, so trajectories keyed by their own ids give the
/// same numbers regardless of which worker runs them or in what order. Streams are
/// cheap values; a single stream must not be shared between threads.
class RandomStream {
 public:
  RandomStream() : RandomStream(0, 0) {}
  RandomStream(std::uint64_t seed, std::uint64_t stream_id, std::uint32_t sub = 0);

  /// Fresh stream with the same seed and id, positioned at sub-stream `sub`
  /// (e.g. the integration step index).
  RandomStream fork(std::uint32_t sub) const { return RandomStream(seed_, stream_id_, sub); }

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform on the open interval (0, 1), 53 bits.
  double uniform();
  double normal();
  /// Gamma(shape, 1), shape > 0.
  double gamma(double shape);
  /// Chi distribution with (possibly non-integer) `dof` > 0.
  double chi(double dof);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::array<std::uint32_t, 4> counter_{};
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Independent substream for (seed, stream_id).
inline RandomStream rng_stream(std::uint64_t seed, std::uint64_t stream_id) {
  return RandomStream(seed, stream_id);
}

/// Stream ids are partitioned by purpose so that, e.g., a gdbm path and the
/// matrix-route warm start feeding it never share numbers.
enum class StreamTag : std::uint64_t {
  MatrixRoute = 1,
  ParticleRoute = 2,
  Dyson = 3,
  FieldFeatures = 4,
  FieldDriver = 5,
  Oracle = 6,
  Test = 7,
};

inline std::uint64_t stream_id(StreamTag tag, std::uint64_t index) {
  return (static_cast<std::uint64_t>(tag) << 56) ^ (index & ((std::uint64_t{1} << 56) - 1));
}

}  // namespace ftle
