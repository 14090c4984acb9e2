#include "streamflow/data_manager.hpp"

#include <chrono>

#include "streamflow/errors.hpp"
#include "streamflow/util.hpp"

namespace streamflow {

namespace fs = std::filesystem;

const char* to_string(TransferPlan::Route route) {
  switch (route) {
    case TransferPlan::Route::none: return "none";
    case TransferPlan::Route::intra_model: return "intra_model";
    case TransferPlan::Route::from_management: return "from_management";
    case TransferPlan::Route::to_management: return "to_management";
    case TransferPlan::Route::two_step_via_management: return "two_step_via_management";
  }
  return "?";
}

namespace {

std::string endpoint_name(const std::optional<Resource>& resource) {
  return resource ? resource->id : "management";
}

std::string basename_of(const std::string& path) {
  auto pos = path.find_last_of('/');
  std::string base = pos == std::string::npos ? path : path.substr(pos + 1);
  return base.empty() ? "data" : base;
}

}  // namespace

DataManager::DataManager(TokenStore& tokens, DeploymentManager& deployments,
                         fs::path staging_dir, EventLog& events, bool verify_hash)
    : tokens_(tokens),
      deployments_(deployments),
      staging_dir_(std::move(staging_dir)),
      events_(events),
      verify_hash_(verify_hash) {
  fs::create_directories(staging_dir_);
}

void DataManager::add_remote_path_mapping(const std::string& token,
                                          const std::optional<Resource>& resource,
                                          const std::string& path) {
  tokens_.get(token);  // throws for unknown tokens
  if (path.empty() || path[0] != '/') {
    throw DataError("location path must be absolute: '" + path + "'");
  }
  std::lock_guard lock(mutex_);
  auto& locs = remote_paths_[token];
  for (auto& loc : locs) {
    bool same_endpoint = loc.resource.has_value() == resource.has_value() &&
                         (!resource || loc.resource->id == resource->id);
    if (same_endpoint && loc.path == path) {
      loc.valid = true;
      return;
    }
  }
  locs.push_back(DataLocation{token, resource, path, true});
}

std::vector<DataLocation> DataManager::valid_locations_unlocked(
    const std::string& token) const {
  std::vector<DataLocation> out;
  auto it = remote_paths_.find(token);
  if (it == remote_paths_.end()) return out;
  for (const auto& loc : it->second) {
    if (loc.valid) out.push_back(loc);
  }
  return out;
}

std::vector<DataLocation> DataManager::locations(const std::string& token) const {
  std::lock_guard lock(mutex_);
  return valid_locations_unlocked(token);
}

std::map<std::string, std::vector<DataLocation>> DataManager::snapshot() const {
  std::lock_guard lock(mutex_);
  std::map<std::string, std::vector<DataLocation>> out;
  for (const auto& [token, locs] : remote_paths_) {
    for (const auto& loc : locs) {
      if (loc.valid) out[token].push_back(loc);
    }
  }
  return out;
}

std::optional<std::string> DataManager::readable_path(const std::string& token,
                                                      const Resource& resource) const {
  auto locs = locations(token);
  for (const auto& loc : locs) {  // same resource wins over shared mounts
    if (loc.resource && loc.resource->id == resource.id) return loc.path;
  }
  for (const auto& loc : locs) {
    if (loc.resource && loc.resource->model == resource.model &&
        deployments_.connector(resource.model).is_shared_path(loc.path)) {
      return loc.path;
    }
  }
  return std::nullopt;
}

TransferPlan DataManager::plan_transfer(const std::string& token,
                                        const std::optional<Resource>& destination,
                                        const std::string& destination_path) {
  TransferPlan plan;
  plan.token = token;
  plan.destination = destination;
  plan.destination_path = destination_path;

  auto locs = locations(token);
  if (locs.empty()) {
    throw DataError("no valid location for token '" + token + "'");
  }

  auto skip = [&](const std::string& reason) {
    events_.emit(ev::transfer_skipped, {{"token", token},
                                        {"destination", endpoint_name(destination)},
                                        {"path", destination_path},
                                        {"reason", reason}});
    plan.route = TransferPlan::Route::none;
  };

  // Already registered at the destination path?
  for (const auto& loc : locs) {
    if (destination && loc.resource && loc.resource->id == destination->id &&
        loc.path == destination_path) {
      skip("already at destination");
      return plan;
    }
    if (!destination && loc.is_management() && loc.path == destination_path) {
      skip("already at destination");
      return plan;
    }
    if (destination && loc.resource && loc.resource->model == destination->model &&
        loc.path == destination_path &&
        deployments_.connector(destination->model).is_shared_path(loc.path)) {
      skip("shared data space");
      return plan;
    }
  }

  // Existence probe: a task may have performed the transfer itself.
  PathInfo src_info;
  const DataLocation& probe_src = locs.front();
  if (probe_src.is_management()) {
    src_info.exists = fs::exists(probe_src.path);
    if (src_info.exists) {
      src_info.is_directory = fs::is_directory(probe_src.path);
      src_info.size = util::tree_bytes(probe_src.path);
    }
  } else {
    src_info =
        deployments_.connector(probe_src.resource->model).probe(*probe_src.resource, probe_src.path);
  }
  PathInfo dst_info;
  if (destination) {
    dst_info = deployments_.connector(destination->model).probe(*destination, destination_path);
  } else {
    dst_info.exists = fs::exists(destination_path);
    if (dst_info.exists) {
      dst_info.is_directory = fs::is_directory(destination_path);
      dst_info.size = util::tree_bytes(destination_path);
    }
  }
  if (dst_info.exists && src_info.exists &&
      dst_info.is_directory == src_info.is_directory &&
      (dst_info.is_directory || dst_info.size == src_info.size)) {
    bool matches = true;
    if (verify_hash_) {
      uint64_t src_hash = probe_src.is_management()
                              ? util::hash_tree(probe_src.path)
                              : deployments_.connector(probe_src.resource->model)
                                    .checksum(*probe_src.resource, probe_src.path);
      uint64_t dst_hash = destination
                              ? deployments_.connector(destination->model)
                                    .checksum(*destination, destination_path)
                              : util::hash_tree(destination_path);
      matches = src_hash == dst_hash;
    }
    if (matches) {
      add_remote_path_mapping(token, destination, destination_path);
      skip("destination already holds the data");
      return plan;
    }
  }

  // Rank sources: destination resource itself, same model, management node,
  // then anything else (two-step baseline).
  const DataLocation* same_resource = nullptr;
  const DataLocation* same_model = nullptr;
  const DataLocation* management = nullptr;
  const DataLocation* remote = nullptr;
  for (const auto& loc : locs) {
    if (loc.is_management()) {
      if (!management) management = &loc;
    } else if (destination && loc.resource->id == destination->id) {
      if (!same_resource) same_resource = &loc;
    } else if (destination && loc.resource->model == destination->model) {
      if (!same_model) same_model = &loc;
    } else {
      if (!remote) remote = &loc;
    }
  }

  if (!destination) {
    if (management) {
      plan.route = TransferPlan::Route::to_management;
      plan.actions.push_back(CopyAction{CopyKind::remote_to_local, true, std::nullopt,
                                        management->path, std::nullopt,
                                        destination_path});
    } else {
      const DataLocation* src = remote ? remote : (same_model ? same_model : same_resource);
      if (!src) throw DataError("no usable source for token '" + token + "'");
      plan.route = TransferPlan::Route::to_management;
      plan.actions.push_back(CopyAction{CopyKind::remote_to_local, false, src->resource,
                                        src->path, std::nullopt, destination_path});
    }
    return plan;
  }

  if (same_resource || same_model) {
    const DataLocation* src = same_resource ? same_resource : same_model;
    plan.route = TransferPlan::Route::intra_model;
    plan.actions.push_back(CopyAction{CopyKind::remote_to_remote, false, src->resource,
                                      src->path, destination, destination_path});
    return plan;
  }
  if (management) {
    plan.route = TransferPlan::Route::from_management;
    plan.actions.push_back(CopyAction{CopyKind::local_to_remote, false, std::nullopt,
                                      management->path, destination, destination_path});
    return plan;
  }

  // Two-step baseline: source -> management node -> destination.
  fs::path staged = staging_dir_ / util::sanitize_component(token) /
                    basename_of(remote->path);
  plan.route = TransferPlan::Route::two_step_via_management;
  plan.actions.push_back(CopyAction{CopyKind::remote_to_local, false, remote->resource,
                                    remote->path, std::nullopt, staged.string()});
  plan.actions.push_back(CopyAction{CopyKind::local_to_remote, false, std::nullopt,
                                    staged.string(), destination, destination_path});
  return plan;
}

uint64_t DataManager::source_bytes(const CopyAction& action) {
  if (!action.src_resource) {
    return fs::exists(action.src_path) ? util::tree_bytes(action.src_path) : 0;
  }
  return deployments_.connector(action.src_resource->model)
      .probe(*action.src_resource, action.src_path)
      .size;
}

void DataManager::run_action(const std::string& token, const CopyAction& action) {
  uint64_t bytes = source_bytes(action);
  auto start = std::chrono::steady_clock::now();
  if (action.local) {
    if (!fs::exists(action.src_path)) {
      throw DataError("copy source missing: " + action.src_path);
    }
    fs::path dst(action.dst_path);
    if (dst.has_parent_path()) fs::create_directories(dst.parent_path());
    if (fs::is_directory(action.src_path)) {
      fs::create_directories(dst);
      fs::copy(action.src_path, dst,
               fs::copy_options::recursive | fs::copy_options::overwrite_existing);
    } else {
      fs::copy_file(action.src_path, dst, fs::copy_options::overwrite_existing);
    }
  } else {
    switch (action.kind) {
      case CopyKind::local_to_remote:
        deployments_.connector(action.dst_resource->model)
            .copy(action.src_path, action.dst_path, *action.dst_resource,
                  CopyKind::local_to_remote);
        break;
      case CopyKind::remote_to_local:
        deployments_.connector(action.src_resource->model)
            .copy(action.src_path, action.dst_path, *action.src_resource,
                  CopyKind::remote_to_local);
        break;
      case CopyKind::remote_to_remote:
        deployments_.connector(action.dst_resource->model)
            .copy(action.src_path, action.dst_path, *action.dst_resource,
                  CopyKind::remote_to_remote, action.src_resource);
        break;
    }
  }
  double duration =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  events_.emit(ev::copy, {{"token", token},
                          {"kind", action.local ? "local" : to_string(action.kind)},
                          {"src", endpoint_name(action.src_resource)},
                          {"src_path", action.src_path},
                          {"dst", endpoint_name(action.dst_resource)},
                          {"dst_path", action.dst_path},
                          {"bytes", bytes},
                          {"duration", duration}});
  add_remote_path_mapping(token, action.dst_resource, action.dst_path);
}

void DataManager::execute_transfer(const TransferPlan& plan) {
  if (plan.route == TransferPlan::Route::none) return;

  std::string key = plan.token + "|" + endpoint_name(plan.destination) + "|" +
                    plan.destination_path;
  std::shared_ptr<InFlight> flight;
  {
    std::unique_lock lock(inflight_mutex_);
    auto it = inflight_.find(key);
    if (it != inflight_.end()) {
      // Coalesce with the transfer already under way.
      auto existing = it->second;
      inflight_cv_.wait(lock, [&] { return existing->done; });
      if (existing->failed) throw DataError(existing->error);
      return;
    }
    flight = std::make_shared<InFlight>();
    inflight_.emplace(key, flight);
  }

  try {
    for (const auto& action : plan.actions) run_action(plan.token, action);
  } catch (const std::exception& ex) {
    std::unique_lock lock(inflight_mutex_);
    flight->done = true;
    flight->failed = true;
    flight->error = ex.what();
    inflight_.erase(key);
    inflight_cv_.notify_all();
    throw DataError("transfer of token '" + plan.token + "' failed: " + ex.what());
  }
  {
    std::unique_lock lock(inflight_mutex_);
    flight->done = true;
    inflight_.erase(key);
    inflight_cv_.notify_all();
  }
}

fs::path DataManager::collect_output(const std::string& token,
                                     const fs::path& dest_dir) {
  const DataToken& tok = tokens_.get(token);
  if (tok.kind == DataKind::value && !tok.is_list()) {
    fs::path out = dest_dir / (util::sanitize_component(token) + ".txt");
    util::write_file(out, tok.value.value_or(""));
    return out;
  }
  if (tok.is_list()) {
    fs::path dir = dest_dir / util::sanitize_component(token);
    fs::create_directories(dir);
    for (const auto& child : *tok.children) collect_output(child, dir);
    return dir;
  }

  auto locs = locations(token);
  if (locs.empty()) {
    throw DataError("no valid location for token '" + token + "'");
  }
  for (const auto& loc : locs) {
    if (loc.is_management()) return loc.path;  // R4: nothing to copy
  }
  fs::path dest = dest_dir / util::sanitize_component(token) /
                  basename_of(locs.front().path);
  TransferPlan plan = plan_transfer(token, std::nullopt, dest.string());
  execute_transfer(plan);
  return dest;
}

std::vector<std::string> DataManager::make_durable(
    const std::vector<std::string>& resource_ids) {
  std::set<std::string> doomed(resource_ids.begin(), resource_ids.end());
  std::vector<std::string> at_risk;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [token, locs] : remote_paths_) {
      bool any_valid = false;
      bool all_doomed = true;
      for (const auto& loc : locs) {
        if (!loc.valid) continue;
        any_valid = true;
        if (loc.is_management() || !doomed.count(loc.resource->id)) {
          all_doomed = false;
          break;
        }
      }
      if (any_valid && all_doomed) at_risk.push_back(token);
    }
  }
  for (const auto& token : at_risk) {
    auto locs = locations(token);
    fs::path dest = staging_dir_ / util::sanitize_component(token) /
                    basename_of(locs.front().path);
    TransferPlan plan = plan_transfer(token, std::nullopt, dest.string());
    execute_transfer(plan);
  }
  return at_risk;
}

void DataManager::invalidate_resource(const std::string& resource_id) {
  std::lock_guard lock(mutex_);
  for (auto& [token, locs] : remote_paths_) {
    for (auto& loc : locs) {
      if (loc.resource && loc.resource->id == resource_id) loc.valid = false;
    }
  }
}

}  // namespace streamflow
