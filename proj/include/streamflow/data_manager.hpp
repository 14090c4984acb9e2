#pragma once

#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "streamflow/connector.hpp"
#include "streamflow/deployment.hpp"
#include "streamflow/events.hpp"
#include "streamflow/tokens.hpp"

namespace streamflow {

// One physical replica of a token. resource == nullopt means the
// management node (the host running the engine).
struct DataLocation {
  std::string token;
  std::optional<Resource> resource;
  std::string path;  // view path on the resource, absolute path on the node
  bool valid = true;

  bool is_management() const { return !resource.has_value(); }
};

struct CopyAction {
  CopyKind kind = CopyKind::local_to_remote;
  bool local = false;  // management-node to management-node
  std::optional<Resource> src_resource;
  std::string src_path;
  std::optional<Resource> dst_resource;
  std::string dst_path;
};

// How a token reaches a destination. `actions` is empty exactly when the
// destination already holds the token.
struct TransferPlan {
  enum class Route {
    none,
    intra_model,
    from_management,
    to_management,
    two_step_via_management,
  };

  std::string token;
  Route route = Route::none;
  std::optional<Resource> destination;
  std::string destination_path;
  std::vector<CopyAction> actions;
};

const char* to_string(TransferPlan::Route route);

// Tracks every token's physical replicas (the remote-paths registry) and
// performs or skips transfers: intra-model via connector copy (with the
// shared-mount shortcut inside the connector), inter-model via the two-step
// baseline through the management node. Copy events emitted here are the
// ground truth the acceptance tests audit.
class DataManager {
 public:
  DataManager(TokenStore& tokens, DeploymentManager& deployments,
              std::filesystem::path staging_dir, EventLog& events,
              bool verify_hash = false);

  // Atomic under concurrent completions. Throws DataError for unknown
  // tokens or non-absolute paths.
  void add_remote_path_mapping(const std::string& token,
                               const std::optional<Resource>& resource,
                               const std::string& path);

  std::vector<DataLocation> locations(const std::string& token) const;
  std::map<std::string, std::vector<DataLocation>> snapshot() const;

  // Path under which `token` is readable from `resource` without any copy:
  // a location on the resource itself or under a shared mount of its model.
  std::optional<std::string> readable_path(const std::string& token,
                                           const Resource& resource) const;

  TransferPlan plan_transfer(const std::string& token,
                             const std::optional<Resource>& destination,
                             const std::string& destination_path);

  // Runs the plan's copy actions in order, registering each new replica
  // (management staging copies included — they are reusable sources).
  // Plans for the same (token, destination) are coalesced.
  void execute_transfer(const TransferPlan& plan);

  // Materializes the token under `dest_dir` on the management node. An
  // existing management-node replica is returned as is (zero copies).
  std::filesystem::path collect_output(const std::string& token,
                                       const std::filesystem::path& dest_dir);

  // Secures a management-node copy of every token whose only valid
  // replicas live on the given resources; returns the secured token ids.
  // Called before redeploy_service so recycle never loses outputs.
  std::vector<std::string> make_durable(const std::vector<std::string>& resource_ids);

  void invalidate_resource(const std::string& resource_id);

  const std::filesystem::path& staging_dir() const { return staging_dir_; }

 private:
  struct InFlight {
    bool done = false;
    bool failed = false;
    std::string error;
  };

  std::vector<DataLocation> valid_locations_unlocked(const std::string& token) const;
  uint64_t source_bytes(const CopyAction& action);
  void run_action(const std::string& token, const CopyAction& action);

  TokenStore& tokens_;
  DeploymentManager& deployments_;
  std::filesystem::path staging_dir_;
  EventLog& events_;
  bool verify_hash_;

  mutable std::mutex mutex_;
  std::map<std::string, std::vector<DataLocation>> remote_paths_;

  std::mutex inflight_mutex_;
  std::condition_variable inflight_cv_;
  std::map<std::string, std::shared_ptr<InFlight>> inflight_;
};

}  // namespace streamflow
