#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace amnre {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian and written with native stores");

/// Raised for malformed, truncated or mismatched files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace io {

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  static_assert(std::is_trivially_copyable_v<T>);
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw FormatError("unexpected end of file");
  return value;
}

inline void write_doubles(std::ostream& out, std::span<const double> values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size_bytes()));
}

inline void read_doubles(std::istream& in, std::span<double> values) {
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  if (!in) throw FormatError("unexpected end of file");
}

inline void write_string(std::ostream& out, const std::string& text) {
  write_pod<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

inline std::string read_string(std::istream& in, std::uint64_t max_len = std::uint64_t{1} << 24) {
  const auto n = read_pod<std::uint64_t>(in);
  if (n > max_len) throw FormatError("string field too long");
  std::string text(n, '\0');
  in.read(text.data(), static_cast<std::streamsize>(n));
  if (!in) throw FormatError("unexpected end of file");
  return text;
}

/// Fixed-width, zero-padded text field.
inline void write_fixed(std::ostream& out, const std::string& text, std::size_t width) {
  if (text.size() > width) throw std::invalid_argument("field '" + text + "' exceeds fixed width");
  std::string padded = text;
  padded.resize(width, '\0');
  out.write(padded.data(), static_cast<std::streamsize>(width));
}

inline std::string read_fixed(std::istream& in, std::size_t width) {
  std::string raw(width, '\0');
  in.read(raw.data(), static_cast<std::streamsize>(width));
  if (!in) throw FormatError("unexpected end of file");
  return raw.substr(0, raw.find('\0'));
}

inline void expect_magic(std::istream& in, const char (&magic)[9]) {
  char got[8];
  in.read(got, 8);
  if (!in || std::memcmp(got, magic, 8) != 0)
    throw FormatError(std::string("bad magic, expected ") + magic);
}

/// FNV-1a over a byte range; used for the checksums printed by the CLI.
inline std::uint64_t fnv1a(std::span<const char> bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace io
}  // namespace amnre
