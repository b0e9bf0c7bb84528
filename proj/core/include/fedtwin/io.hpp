#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace fedtwin::io {

// Little-endian primitives shared by all binary file formats. Readers throw
// fedtwin::config_error on truncated or malformed input.
void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_f64(std::ostream& os, double v);
void write_f64_array(std::ostream& os, std::span<const double> values);

std::uint32_t read_u32(std::istream& is, const std::string& what);
std::uint64_t read_u64(std::istream& is, const std::string& what);
double read_f64(std::istream& is, const std::string& what);
void read_f64_array(std::istream& is, std::span<double> values,
                    const std::string& what);

void write_magic(std::ostream& os, const char (&magic)[6]);
void expect_magic(std::istream& is, const char (&magic)[6],
                  const std::string& what);

// FNV-1a, used for cache keys and run-manifest content hashes.
std::uint64_t fnv1a64(std::span<const std::byte> bytes);
std::uint64_t fnv1a64(const std::string& text);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);
std::string hex64(std::uint64_t v);

std::ofstream open_output(const std::filesystem::path& path);
std::ifstream open_input(const std::filesystem::path& path);

}  // namespace fedtwin::io
