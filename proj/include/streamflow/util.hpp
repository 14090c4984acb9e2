#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace streamflow::util {

uint64_t fnv1a64(std::string_view data, uint64_t seed = 0xcbf29ce484222325ull);

// Content hash of a regular file.
uint64_t hash_file(const std::filesystem::path& file);

// Canonical hash of a file or directory tree: order-independent of
// traversal, sensitive to relative paths and file contents.
uint64_t hash_tree(const std::filesystem::path& root);

// Total payload bytes of a file or directory tree.
uint64_t tree_bytes(const std::filesystem::path& root);

// "1024", "16K", "32M", "128G" (powers of 1024). nullopt on parse failure.
std::optional<uint64_t> parse_size(std::string_view text);

// Replaces characters that are awkward in filesystem names.
std::string sanitize_component(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string read_file(const std::filesystem::path& file);
void write_file(const std::filesystem::path& file, std::string_view content);

}  // namespace streamflow::util
