#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "ftle/random.hpp"
#include "oracles.hpp"

using ftle::RandomStream;

TEST_SUITE("random") {

// Published Philox4x32-10 known-answer vectors.
TEST_CASE("philox known answers") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(ftle::philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(ftle::philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
        A4{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(ftle::philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        A4{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("stream layout: counter (block, sub, id lo, id hi), key = seed") {
  const std::uint64_t seed = 0x0123456789abcdefull;
  const std::uint64_t id = 0xfedcba9876543210ull;
  RandomStream s(seed, id, 17);
  for (std::uint32_t block = 0; block < 3; ++block) {
    const auto expect = ftle::philox4x32({block, 17u, 0x76543210u, 0xfedcba98u}, {0x89abcdefu, 0x01234567u});
    for (int w = 0; w < 4; ++w) CHECK(s.next_u32() == expect[w]);
  }
}

TEST_CASE("frozen fixtures for seed 42") {
  // First words and normals of RandomStream(42, 0, k), frozen from the reference build.
  const std::uint32_t words[4] = {0x9ceaf053u, 0x42e0b8b3u, 0x9be4a6d3u, 0xb3c79736u};
  const double normals[4] = {0.88649750590144094, 0.63061324653530781, -0.9179245150658083,
                             -0.75037947788300163};
  for (std::uint32_t k = 0; k < 4; ++k) {
    RandomStream a(42, 0, k);
    CHECK(a.next_u32() == ftle::philox4x32({0u, k, 0u, 0u}, {42u, 0u})[0]);
    RandomStream b(42, 0, k);
    CHECK(b.next_u32() == words[k]);
    RandomStream c(42, 0, k);
    CHECK(c.normal() == doctest::Approx(normals[k]).epsilon(1e-15));
  }
}

TEST_CASE("streams are reproducible and distinct") {
  RandomStream a(7, 3, 5), b(7, 3, 5);
  const RandomStream base(7, 3, 0);
  RandomStream forked = base.fork(5);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u32();
    CHECK(x == b.next_u32());
    CHECK(x == forked.next_u32());
  }
  std::set<std::uint64_t> firsts;
  for (std::uint64_t seed = 0; seed < 4; ++seed)
    for (std::uint64_t id = 0; id < 4; ++id)
      for (std::uint32_t sub = 0; sub < 4; ++sub) firsts.insert(RandomStream(seed, id, sub).next_u64());
  CHECK(firsts.size() == 64);
  CHECK(ftle::stream_id(ftle::StreamTag::MatrixRoute, 5) != ftle::stream_id(ftle::StreamTag::ParticleRoute, 5));
}

TEST_CASE("uniform lies in the open unit interval") {
  RandomStream s(1, 2);
  std::vector<double> u;
  for (int i = 0; i < 100000; ++i) {
    const double x = s.uniform();
    REQUIRE(x > 0.0);
    REQUIRE(x < 1.0);
    u.push_back(x);
  }
  CHECK(std::abs(oracle::mean(u) - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / u.size()));
}

TEST_CASE("normal, gamma and chi moments") {
  RandomStream s(11, 0);
  const int n = 200000;
  std::vector<double> z;
  for (int i = 0; i < n; ++i) z.push_back(s.normal());
  CHECK(std::abs(oracle::mean(z)) < 5.0 / std::sqrt(n));
  CHECK(std::abs(oracle::variance(z) - 1.0) < 5.0 * oracle::variance_se(z));

  for (double shape : {0.3, 1.0, 2.5, 40.0}) {
    std::vector<double> g;
    for (int i = 0; i < 50000; ++i) g.push_back(s.gamma(shape));
    CAPTURE(shape);
    CHECK(std::abs(oracle::mean(g) - shape) < 5.0 * std::sqrt(shape / g.size()));
    CHECK(std::abs(oracle::variance(g) - shape) < 5.0 * oracle::variance_se(g));
  }
  // chi(k)^2 has mean k.
  for (double dof : {0.5, 3.0, 99.0}) {
    std::vector<double> c;
    for (int i = 0; i < 50000; ++i) c.push_back(std::pow(s.chi(dof), 2));
    CAPTURE(dof);
    CHECK(std::abs(oracle::mean(c) - dof) < 5.0 * std::sqrt(2.0 * dof / c.size()));
  }
}

}  // TEST_SUITE
