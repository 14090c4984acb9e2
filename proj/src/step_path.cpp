#include "streamflow/step_path.hpp"

namespace streamflow::paths {

bool is_valid_name(std::string_view name) {
  if (name.empty() || name == "." || name == "..") return false;
  for (char c : name) {
    if (c == '/' || c == '\0' || c == '\n') return false;
  }
  return true;
}

bool is_valid_step_path(std::string_view path) {
  if (path.empty() || path[0] != '/') return false;
  if (path == "/") return true;
  if (path.back() == '/') return false;
  size_t start = 1;
  while (start <= path.size()) {
    size_t end = path.find('/', start);
    if (end == std::string_view::npos) end = path.size();
    if (!is_valid_name(path.substr(start, end - start))) return false;
    start = end + 1;
  }
  return true;
}

std::vector<std::string> components(std::string_view path) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start < path.size()) {
    size_t end = path.find('/', start);
    if (end == std::string_view::npos) end = path.size();
    if (end > start) out.emplace_back(path.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

int depth(std::string_view path) {
  return static_cast<int>(components(path).size());
}

bool is_prefix_of(std::string_view prefix, std::string_view path) {
  if (prefix == "/") return true;
  if (path.size() < prefix.size()) return false;
  if (path.substr(0, prefix.size()) != prefix) return false;
  return path.size() == prefix.size() || path[prefix.size()] == '/';
}

std::string join(std::string_view parent, std::string_view name) {
  if (parent == "/" || parent.empty()) return "/" + std::string(name);
  return std::string(parent) + "/" + std::string(name);
}

}  // namespace streamflow::paths
