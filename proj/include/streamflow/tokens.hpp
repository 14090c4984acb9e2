#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace streamflow {

enum class DataKind { file, directory, value };

const char* to_string(DataKind kind);
std::optional<DataKind> data_kind_from_string(const std::string& text);

// One unit of data flowing along an edge. Value tokens carry their content
// inline; file/directory tokens carry only locations (see DataManager).
// A token with children is a list; elements are tokens in their own right.
struct DataToken {
  std::string id;
  DataKind kind = DataKind::file;
  std::string name;  // logical name, e.g. "/count[2]#matrix"
  std::optional<std::string> value;
  std::optional<std::vector<std::string>> children;

  bool is_list() const { return children.has_value(); }
};

// Tokens are immutable once minted; ids are unique within one execution.
class TokenStore {
 public:
  const DataToken& put(DataToken token);
  const DataToken& get(const std::string& id) const;
  bool contains(const std::string& id) const;
  std::vector<std::string> ids() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, DataToken> tokens_;
};

}  // namespace streamflow
