#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace parley {

// FNV-1a; stable across builds so content hashes can key resumable state files.
std::uint64_t fnv1a64(std::string_view data);

// Mixes two seeds into one (splitmix64 finalizer over the xor-rotated pair).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

std::string trim(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::string join(std::span<const std::string> parts, std::string_view sep);
std::string lowercase_ascii(std::string_view s);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);
std::vector<std::string> read_lines(const std::filesystem::path& path);

// Deterministic tree reduction; result does not depend on thread count.
double pairwise_sum(std::span<const double> values);

// Runs fn(i) for i in [0, count) on up to `workers` threads. Task order is
// deterministic only in what each index computes, so callers must write
// results into per-index slots. The first exception is rethrown after join.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

// Expands ${NAME} references from the environment; throws std::runtime_error
// when a referenced variable is not set.
std::string interpolate_env(std::string_view s);

}  // namespace parley
