#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace slic::util {

// ---- strings -------------------------------------------------------------

std::string to_lower_ascii(std::string_view s);
std::string trim(std::string_view s);
// Lowercase, trim and collapse internal whitespace runs to one space.
std::string canonical_surface(std::string_view s);
std::vector<std::string> split_ws(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool contains_icase(std::string_view haystack, std::string_view needle);

// ---- UTF-8 ---------------------------------------------------------------

// Decodes UTF-8; invalid bytes decode to U+FFFD one byte at a time.
std::u32string utf8_decode(std::string_view s);
std::string utf8_encode(std::u32string_view s);
// Largest prefix length <= limit that does not split a code point.
std::size_t utf8_floor(std::string_view s, std::size_t limit);

// ---- encodings -----------------------------------------------------------

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);
// Percent-encodes everything outside [A-Za-z0-9._-]; used for fixture file keys.
std::string percent_encode(std::string_view s);

// ---- hashing -------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view s);
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// ---- files ---------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);
std::vector<std::string> read_lines(const std::filesystem::path& path);

// ---- randomness ----------------------------------------------------------

// Seeded generator whose output sequence is fixed across platforms
// (mt19937_64 plus explicit bit-to-double conversion).
class Rng {
public:
  explicit Rng(std::uint64_t seed);
  double uniform01();
  std::size_t below(std::size_t n);

private:
  std::mt19937_64 engine_;
};

}  // namespace slic::util
