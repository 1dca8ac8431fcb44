#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>
#include <vector>

#include "impart/evaluation.hpp"
#include "impart/label_mapping.hpp"
#include "impart/rng.hpp"

using namespace impart;

TEST_CASE("apply") {
  CHECK(LabelMap::all_to_all(10).apply(9) == 0);
  CHECK(LabelMap::all_to_one(10, 3).apply(7) == 3);
  CHECK(LabelMap::all_to_all(43).apply(0) == 1);
  CHECK_THROWS_AS(LabelMap::all_to_all(10).apply(10), std::out_of_range);
  CHECK_THROWS_AS(LabelMap::all_to_all(10).apply(-1), std::out_of_range);
  CHECK_THROWS(LabelMap::all_to_one(10, 10));
  CHECK_THROWS(LabelMap::all_to_all(0));
}

TEST_CASE("is_attack_success") {
  const LabelMap m = LabelMap::all_to_all(10);
  CHECK(m.is_attack_success(4, 5));
  CHECK_FALSE(m.is_attack_success(4, 4));
  CHECK(LabelMap::all_to_one(10, 0).is_attack_success(9, 0));
  CHECK_FALSE(LabelMap::all_to_one(10, 0).is_attack_success(9, 9));
}

TEST_CASE("mode names") {
  CHECK(parse_label_mode("all2all") == LabelMode::all_to_all);
  CHECK(parse_label_mode("all_to_one") == LabelMode::all_to_one);
  CHECK(parse_label_mode(to_string(LabelMode::all_to_one)) == LabelMode::all_to_one);
  CHECK_THROWS(parse_label_mode("one2one"));
}

TEST_CASE("one-shift laws for |C| in 2..100") {
  for (int k = 2; k <= 100; ++k) {
    const LabelMap m = LabelMap::all_to_all(k);
    std::set<int> image;
    for (int y = 0; y < k; ++y) {
      CHECK(m.apply(y) != y);
      CHECK_FALSE(m.is_trivial(y));
      image.insert(m.apply(y));
      int z = y;
      for (int i = 0; i < k; ++i) z = m.apply(z);
      CHECK(z == y);
    }
    CHECK(static_cast<int>(image.size()) == k);
  }
}

TEST_CASE("all-to-one flags the target class as trivial") {
  const LabelMap m = LabelMap::all_to_one(5, 2);
  for (int y = 0; y < 5; ++y) CHECK(m.is_trivial(y) == (y == 2));
}

TEST_CASE("ASR counts equal brute-force enumeration") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + static_cast<int>(rng.index(9));
    const LabelMap m = trial % 2 ? LabelMap::all_to_all(k)
                                 : LabelMap::all_to_one(k, static_cast<int>(rng.index(k)));
    const std::size_t n = 1 + rng.index(100);
    std::vector<int> yt(n), yp(n);
    for (std::size_t i = 0; i < n; ++i) {
      yt[i] = static_cast<int>(rng.index(k));
      yp[i] = static_cast<int>(rng.index(k));
    }
    std::size_t hits = 0, nt = 0, nth = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool ok = m.apply(yt[i]) == yp[i];
      hits += ok;
      if (m.apply(yt[i]) != yt[i]) {
        ++nt;
        nth += ok;
      }
    }
    const AttackCounts c = count_attack_success(m, yt, yp);
    CHECK(c.total == n);
    CHECK(c.hits == hits);
    CHECK(c.nontrivial_total == nt);
    CHECK(c.nontrivial_hits == nth);
  }
}
