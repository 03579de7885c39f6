#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

namespace evontree {

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);  // throws Error(Io)

// Platform-stable 64-bit hash (FNV-1a followed by a splitmix64 finalizer).
std::uint64_t stable_hash(std::string_view data, std::uint64_t seed = 0);
std::uint64_t stable_hash(std::initializer_list<std::string_view> parts, std::uint64_t seed);

// Uniform in [0, 1) drawn from the hash of `parts`.
double hash_uniform(std::initializer_list<std::string_view> parts, std::uint64_t seed);

}  // namespace evontree
