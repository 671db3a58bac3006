#include <algorithm>
#include <numeric>
#include <set>
#include <string>

#include "doctest.h"
#include "zzd/random.hpp"

using namespace zzd;

namespace {

std::uint64_t reference_fnv(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string le_bytes(std::uint64_t v) {
  std::string s(8, '\0');
  for (int i = 0; i < 8; ++i) s[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  return s;
}

}  // namespace

TEST_CASE("splitmix64 matches the published reference stream") {
  SplitMix64 rng(0);
  CHECK(rng.next() == 0xE220A8397B1DCDAFULL);
  CHECK(rng.next() == 0x6E789E6AA1B965F4ULL);
  CHECK(rng.next() == 0x06C45D188009454FULL);
}

TEST_CASE("fnv1a64 hashes seed bytes then text") {
  CHECK(reference_fnv("a") == 0xAF63DC4C8601EC8CULL);
  CHECK(fnv1a64("hello", 0) == reference_fnv(le_bytes(0) + "hello"));
  CHECK(fnv1a64("hello", 0x0102030405060708ULL) == reference_fnv(le_bytes(0x0102030405060708ULL) + "hello"));
  CHECK(fnv1a64("hello", 1) != fnv1a64("hello", 2));
}

TEST_CASE("derive_seed separates streams") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 1000; ++s) seen.insert(derive_seed(42, s));
  CHECK(seen.size() == 1000);
  CHECK(derive_seed(1, 5) == derive_seed(1, 5));
  CHECK(derive_seed(1, 5) != derive_seed(2, 5));
}

TEST_CASE("uniform and below stay in range") {
  SplitMix64 rng(9);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(rng.below(7) < 7);
  }
  CHECK_THROWS(rng.below(0));
}

TEST_CASE("normal has unit moments") {
  SplitMix64 rng(3);
  const int n = 200000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("shuffle is a seeded permutation") {
  std::vector<int> a(50), b(50);
  std::iota(a.begin(), a.end(), 0);
  std::iota(b.begin(), b.end(), 0);
  SplitMix64 r1(11), r2(11);
  shuffle(a, r1);
  shuffle(b, r2);
  CHECK(a == b);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> expect(50);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(sorted == expect);
  CHECK(a != expect);
}

TEST_CASE("sample_indices draws without replacement") {
  SplitMix64 rng(5);
  const auto idx = sample_indices(100, 40, rng);
  CHECK(idx.size() == 40);
  CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == 40);
  CHECK(*std::max_element(idx.begin(), idx.end()) < 100);
  CHECK_THROWS(sample_indices(3, 4, rng));
}
