#include <catch2/catch_amalgamated.hpp>

#include "pinlab/rng.hpp"

#include <set>

using namespace pinlab;

TEST_CASE("splitmix64 matches published sequence", "[rng]") {
    // Reference outputs for seeds 0 and 42, cross-checked against an
    // independent implementation.
    std::uint64_t s = 0;
    CHECK(splitmix64_next(s) == 0xe220a8397b1dcdafULL);
    CHECK(splitmix64_next(s) == 0x6e789e6aa1b965f4ULL);
    CHECK(splitmix64_next(s) == 0x06c45d188009454fULL);
    s = 42;
    CHECK(splitmix64_next(s) == 0xbdd732262feb6e95ULL);
    CHECK(splitmix64_next(s) == 0x28efe333b266f103ULL);
}

TEST_CASE("xoshiro256** matches reference outputs", "[rng]") {
    RngStream r0(0);
    CHECK(r0.next_u64() == 0x99ec5f36cb75f2b4ULL);
    CHECK(r0.next_u64() == 0xbf6e1f784956452aULL);
    CHECK(r0.next_u64() == 0x1a5f849d4933e6e0ULL);
    RngStream r1(2024);
    CHECK(r1.next_u64() == 0x0e48715a13d7772eULL);
    CHECK(r1.next_u64() == 0xc837f3ee8a7a1065ULL);
}

TEST_CASE("streams are deterministic and seed-separated", "[rng]") {
    RngStream a(1234), b(1234), c(1235);
    for (int i = 0; i < 100; ++i) {
        auto va = a.next_u64();
        CHECK(va == b.next_u64());
        CHECK(va != c.next_u64()); // collisions astronomically unlikely
    }
}

TEST_CASE("replica streams are distinct and schedule-free", "[rng]") {
    std::set<std::uint64_t> firsts;
    for (std::uint64_t rep = 0; rep < 1000; ++rep) {
        auto s = RngStream::for_replica(99, rep);
        firsts.insert(s.next_u64());
    }
    CHECK(firsts.size() == 1000);
    // Re-derivation gives the identical stream.
    auto s1 = RngStream::for_replica(99, 7);
    auto s2 = RngStream::for_replica(99, 7);
    for (int i = 0; i < 16; ++i) CHECK(s1.next_u64() == s2.next_u64());
}

TEST_CASE("uniform doubles live in the right intervals", "[rng]") {
    RngStream r(5);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 100000; ++i) {
        double u = r.next_double();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        double v = r.next_open();
        REQUIRE(v > 0.0);
        REQUIRE(v < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);
}
