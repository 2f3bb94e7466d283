#include <doctest.h>

#include <array>
#include <cmath>
#include <limits>

#include "hgapso/error.hpp"
#include "hgapso/genome.hpp"
#include "oracles.hpp"

using namespace hgapso;

namespace {

SearchRanges table_ranges() { return SearchRanges::for_input(1, 28, 28); }

}  // namespace

TEST_CASE("arch_dimension") {
  CHECK(arch_dimension(3) == 7);
  CHECK(arch_dimension(1) == 3);
  CHECK(arch_dimension(4) == 9);
  CHECK_THROWS_AS(arch_dimension(0), InvalidArgument);
}

TEST_CASE("conn_segment_length matches pair enumeration") {
  CHECK(conn_segment_length(5) == 10);
  CHECK(conn_segment_length(4) == 6);
  CHECK(conn_segment_length(1) == 0);
  for (int L = 1; L <= 16; ++L) CHECK(conn_segment_length(L) == oracle::skip_pairs(L).size());
}

TEST_CASE("pair_offset follows source-then-target order") {
  for (int L = 2; L <= 12; ++L) {
    std::size_t expected = 0;
    for (auto [i, j] : oracle::skip_pairs(L)) CHECK(ConnGenome::pair_offset(L, i, j) == expected++);
  }
  CHECK_THROWS_AS(ConnGenome::pair_offset(5, 1, 2), InvalidArgument);
  CHECK_THROWS_AS(ConnGenome::pair_offset(5, 0, 6), InvalidArgument);
}

TEST_CASE("five-layer block: layer 1 owns three bits toward layers 3, 4, 5") {
  ArchGenome arch{{{5, 8}}};
  ConnGenome g = ConnGenome::zeros(arch);
  // [101] for source 1.
  g.set(ConnGenome::pair_offset(5, 1, 3), true);
  g.set(ConnGenome::pair_offset(5, 1, 5), true);
  CHECK(g.to_string() == "0000101000");
  CHECK(g.has_edge(0, 1, 3));
  CHECK_FALSE(g.has_edge(0, 1, 4));
  CHECK(g.has_edge(0, 1, 5));
  CHECK(g.has_edge(0, 2, 3));  // adjacent, always wired
}

TEST_CASE("SearchRanges defaults and validation") {
  const auto r = table_ranges();
  CHECK(r.spatial_block_limit() == 4);
  CHECK(r.max_blocks == 3);
  CHECK(SearchRanges::for_input(3, 32, 32).max_blocks == 4);
  CHECK_NOTHROW(r.validate());

  auto bad = r;
  bad.max_blocks = 5;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = r;
  bad.min_blocks = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = r;
  bad.min_blocks = 3;
  bad.max_blocks = 2;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = r;
  bad.growth = {9, 8};
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("random_arch") {
  SUBCASE("degenerate ranges force the outcome") {
    SearchRanges r = table_ranges();
    r.min_blocks = r.max_blocks = 2;
    r.layers = {4, 4};
    r.growth = {8, 8};
    Rng rng(3);
    const auto g = random_arch(r, rng);
    CHECK(g == ArchGenome{{{4, 8}, {4, 8}}});
  }
  SUBCASE("fixed seed is reproducible") {
    Rng a(42), b(42);
    CHECK(random_arch(table_ranges(), a) == random_arch(table_ranges(), b));
  }
  SUBCASE("samples stay in range and cover the endpoints") {
    const auto r = table_ranges();
    Rng rng(7);
    std::array<int, 3> block_hits{};
    bool saw_l4 = false, saw_l8 = false, saw_k8 = false, saw_k32 = false;
    for (int n = 0; n < 10000; ++n) {
      const auto g = random_arch(r, rng);
      REQUIRE(g.num_blocks() >= 1);
      REQUIRE(g.num_blocks() <= 3);
      ++block_hits[static_cast<std::size_t>(g.num_blocks() - 1)];
      for (const auto& b : g.blocks) {
        REQUIRE(r.layers.contains(b.num_layers));
        REQUIRE(r.growth.contains(b.growth_rate));
        saw_l4 |= b.num_layers == 4;
        saw_l8 |= b.num_layers == 8;
        saw_k8 |= b.growth_rate == 8;
        saw_k32 |= b.growth_rate == 32;
      }
      CHECK_NOTHROW(g.validate(r));
    }
    CHECK((saw_l4 && saw_l8 && saw_k8 && saw_k32));
    for (int hits : block_hits) CHECK(hits > 3000);  // uniform over 3 counts
  }
}

TEST_CASE("decode_position") {
  const auto r = table_ranges();
  const std::vector<double> x{3.2, 4.6, 15.9, 5.1, 30.7, 7.7, 9.4};
  CHECK(decode_position(x, r) == ArchGenome{{{5, 16}, {5, 31}, {8, 9}}});
  CHECK(decode_position(std::vector<double>{2.0, 4.0, 8.0, 4.0, 8.0}, r) == ArchGenome{{{4, 8}, {4, 8}}});
  CHECK(decode_position(std::vector<double>{2.0, 99.0, 1.0, 4.0, 8.0}, r) == ArchGenome{{{8, 8}, {4, 8}}});

  SUBCASE("half rounds away from zero") {
    CHECK(decode_position(std::vector<double>{1.5, 4.5, 8.5, 4.0, 8.0}, r) == ArchGenome{{{5, 9}, {4, 8}}});
    CHECK(decode_block_count(-0.5, r) == 1);
  }
  SUBCASE("block count truncates to available dims and to dim 0") {
    CHECK(decode_position(std::vector<double>{9.0, 4.0, 8.0}, r).num_blocks() == 1);
    CHECK(decode_position(std::vector<double>{1.0, 4.0, 8.0, 5.0, 9.0}, r).num_blocks() == 1);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(decode_position(std::vector<double>{1.0, 4.0}, r), InvalidArgument);
    CHECK_THROWS_AS(decode_position(std::vector<double>{}, r), InvalidArgument);
    CHECK_THROWS_AS(decode_position(std::vector<double>{1.0, NAN, 8.0}, r), InvalidArgument);
    CHECK_THROWS_AS(decode_position(std::vector<double>{INFINITY, 4.0, 8.0}, r), InvalidArgument);
  }
}

TEST_CASE("decode_position properties") {
  const auto r = table_ranges();
  Rng rng(11);
  for (int n = 0; n < 2000; ++n) {
    // Round trip through the encoded reals.
    const auto g = random_arch(r, rng);
    CHECK(decode_position(g.to_position(), r) == g);

    // Arbitrary finite vectors always decode to a valid genome.
    const auto blocks = static_cast<std::size_t>(rng.uniform_int(1, 6));
    std::vector<double> x(1 + 2 * blocks);
    for (auto& v : x) v = (rng.uniform() - 0.5) * 200.0;
    const auto d = decode_position(x, r);
    CHECK_NOTHROW(d.validate(r));
  }
}

TEST_CASE("random_conn") {
  Rng rng(5);
  CHECK(random_conn(ArchGenome{{{1, 8}}}, rng).empty());
  CHECK(random_conn(ArchGenome{{{5, 8}}}, rng).size() == 10);

  const ArchGenome arch{{{6, 12}, {4, 8}, {8, 30}}};
  Rng a(9), b(9);
  const auto ga = random_conn(arch, a);
  CHECK(ga == random_conn(arch, b));
  CHECK(ga.size() == 15 + 6 + 28);
  REQUIRE(ga.segments().size() == 3);
  CHECK(ga.segments()[1].start == 15);
  CHECK(ga.segments()[2].start == 21);
  CHECK(ga.segments()[2].length == 28);

  // Roughly half the bits set over many draws.
  std::size_t ones = 0, total = 0;
  for (int n = 0; n < 500; ++n) {
    const auto g = random_conn(arch, rng);
    for (auto bit : g.bits()) ones += bit;
    total += g.size();
  }
  CHECK(std::abs(static_cast<double>(ones) / static_cast<double>(total) - 0.5) < 0.02);
}

TEST_CASE("genome json is canonical and round-trips") {
  const ArchGenome arch{{{4, 8}, {5, 12}}};
  Rng rng(1);
  const auto conn = random_conn(arch, rng);
  const std::string text = genome_to_json(arch, conn);
  CHECK(text.rfind(R"({"blocks":[[4,8],[5,12]],"conn_bits":")", 0) == 0);
  const auto [a2, c2] = genome_from_json(text);
  CHECK(a2 == arch);
  CHECK(c2 == conn);

  CHECK_THROWS_AS(genome_from_json(R"({"blocks":[[4,8]],"conn_bits":"01"})"), InvalidArgument);
  CHECK_THROWS_AS(genome_from_json(R"({"blocks":[[4,8]],"conn_bits":"0120x0"})"), InvalidArgument);
  CHECK_THROWS_AS(genome_from_json("not json"), InvalidArgument);
}

TEST_CASE("Rng state save and restore") {
  Rng a(77);
  for (int i = 0; i < 10; ++i) a.next();
  Rng b;
  b.load_state(a.save_state());
  CHECK(a == b);
  CHECK(a.next() == b.next());
  CHECK_THROWS_AS(b.load_state("garbage"), InvalidArgument);

  Rng c(1);
  for (int i = 0; i < 1000; ++i) {
    const auto v = c.uniform_int(-3, 3);
    REQUIRE(v >= -3);
    REQUIRE(v <= 3);
    const double u = c.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}
