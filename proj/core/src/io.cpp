#include "fedtwin/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "fedtwin/errors.hpp"

namespace fedtwin::io {

namespace {

template <typename T>
void write_le(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(std::begin(buf), std::end(buf));
  }
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is, const std::string& what) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!is) throw config_error("truncated input while reading " + what);
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(std::begin(buf), std::end(buf));
  }
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

void write_u32(std::ostream& os, std::uint32_t v) { write_le(os, v); }
void write_u64(std::ostream& os, std::uint64_t v) { write_le(os, v); }

void write_f64(std::ostream& os, double v) {
  write_le(os, std::bit_cast<std::uint64_t>(v));
}

void write_f64_array(std::ostream& os, std::span<const double> values) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size() * sizeof(double)));
  } else {
    for (double v : values) write_f64(os, v);
  }
}

std::uint32_t read_u32(std::istream& is, const std::string& what) {
  return read_le<std::uint32_t>(is, what);
}

std::uint64_t read_u64(std::istream& is, const std::string& what) {
  return read_le<std::uint64_t>(is, what);
}

double read_f64(std::istream& is, const std::string& what) {
  return std::bit_cast<double>(read_le<std::uint64_t>(is, what));
}

void read_f64_array(std::istream& is, std::span<double> values,
                    const std::string& what) {
  if constexpr (std::endian::native == std::endian::little) {
    is.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!is) throw config_error("truncated input while reading " + what);
  } else {
    for (double& v : values) v = read_f64(is, what);
  }
}

void write_magic(std::ostream& os, const char (&magic)[6]) {
  os.write(magic, 5);
}

void expect_magic(std::istream& is, const char (&magic)[6],
                  const std::string& what) {
  char buf[5];
  is.read(buf, 5);
  if (!is || std::memcmp(buf, magic, 5) != 0) {
    throw config_error("bad magic in " + what + " (expected " +
                       std::string(magic, 5) + ")");
  }
}

std::uint64_t fnv1a64(std::span<const std::byte> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::byte b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a64(const std::string& text) {
  return fnv1a64(std::as_bytes(std::span(text.data(), text.size())));
}

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw config_error("cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof(buf));
    std::streamsize got = is.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw config_error("cannot write " + path.string());
  return os;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw config_error("cannot open " + path.string());
  return is;
}

}  // namespace fedtwin::io
