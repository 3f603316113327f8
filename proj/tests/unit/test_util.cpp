#include <gtest/gtest.h>

#include <set>

#include "slic/util.hpp"

using namespace slic::util;

TEST(Strings, CanonicalSurfaceCollapsesAndLowercases) {
  EXPECT_EQ(canonical_surface("  A.  Smith\t Jr "), "a. smith jr");
  EXPECT_EQ(canonical_surface(""), "");
  EXPECT_EQ(split_ws(" a  b\nc "), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(join({"x", "y", "z"}, ", "), "x, y, z");
  EXPECT_TRUE(contains_icase("Underground FORUMS", "forums"));
  EXPECT_FALSE(contains_icase("forum", "forums"));
}

TEST(Utf8, InvalidBytesBecomeReplacementCharacters) {
  auto s = utf8_decode("a\xFF" "b");
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[1], U'�');
  EXPECT_EQ(utf8_encode(utf8_decode("résumé—ok")), "résumé—ok");
}

TEST(Utf8, FloorNeverSplitsACodePoint) {
  std::string s = "aé";  // 'a', 0xC3 0xA9
  EXPECT_EQ(utf8_floor(s, 2), 1u);
  EXPECT_EQ(utf8_floor(s, 3), 3u);
  EXPECT_EQ(utf8_floor(s, 10), 3u);
}

TEST(Encodings, Base64RoundTrip) {
  for (std::size_t n = 0; n < 20; ++n) {
    std::vector<std::uint8_t> bytes;
    for (std::size_t i = 0; i < n; ++i) bytes.push_back(static_cast<std::uint8_t>(i * 37 + 11));
    EXPECT_EQ(base64_decode(base64_encode(bytes)), bytes);
  }
  std::string man = "Man";
  EXPECT_EQ(base64_encode({reinterpret_cast<const std::uint8_t*>(man.data()), man.size()}), "TWFu");
}

TEST(Encodings, PercentEncodeKeepsUnreservedOnly) {
  EXPECT_EQ(percent_encode("10.5555/core.001"), "10.5555%2Fcore.001");
  EXPECT_EQ(percent_encode("tensor decomposition"), "tensor%20decomposition");
}

TEST(Hashing, KnownDigests) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    double x = a.uniform01();
    EXPECT_EQ(x, b.uniform01());
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
    differs |= x != c.uniform01();
  }
  EXPECT_TRUE(differs);
  std::set<std::size_t> seen;
  for (int i = 0; i < 200; ++i) seen.insert(a.below(5));
  EXPECT_EQ(seen, (std::set<std::size_t>{0, 1, 2, 3, 4}));
}
