#pragma once

#include <string>
#include <string_view>
#include <vector>

// Posix-like step paths: a task is a file, a sub-workflow is a folder, the
// outermost workflow is the root "/". Paths are absolute and normalized.
namespace streamflow::paths {

// A single path component: nonempty, no '/', not "." or "..".
bool is_valid_name(std::string_view name);

// An absolute step path: "/", or '/'-joined valid components.
bool is_valid_step_path(std::string_view path);

std::vector<std::string> components(std::string_view path);

// Number of components; "/" has depth 0.
int depth(std::string_view path);

// Component-wise prefix test: "/" prefixes everything, "/a" prefixes
// "/a" and "/a/b" but not "/ab".
bool is_prefix_of(std::string_view prefix, std::string_view path);

std::string join(std::string_view parent, std::string_view name);

}  // namespace streamflow::paths
