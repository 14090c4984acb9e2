#include "streamflow/tokens.hpp"

#include "streamflow/errors.hpp"

namespace streamflow {

const char* to_string(DataKind kind) {
  switch (kind) {
    case DataKind::file: return "file";
    case DataKind::directory: return "directory";
    case DataKind::value: return "value";
  }
  return "?";
}

std::optional<DataKind> data_kind_from_string(const std::string& text) {
  if (text == "file") return DataKind::file;
  if (text == "directory") return DataKind::directory;
  if (text == "value") return DataKind::value;
  return std::nullopt;
}

const DataToken& TokenStore::put(DataToken token) {
  std::lock_guard lock(mutex_);
  auto [it, inserted] = tokens_.emplace(token.id, std::move(token));
  if (!inserted) throw DataError("duplicate token id: " + it->first);
  return it->second;
}

const DataToken& TokenStore::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = tokens_.find(id);
  if (it == tokens_.end()) throw DataError("unknown token: " + id);
  return it->second;
}

bool TokenStore::contains(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return tokens_.count(id) > 0;
}

std::vector<std::string> TokenStore::ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  out.reserve(tokens_.size());
  for (const auto& [id, _] : tokens_) out.push_back(id);
  return out;
}

}  // namespace streamflow
