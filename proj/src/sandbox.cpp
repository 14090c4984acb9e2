#include "streamflow/sandbox.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <cstdlib>
#include <thread>

#include <fmt/format.h>

#include "streamflow/errors.hpp"
#include "streamflow/util.hpp"

namespace streamflow {

namespace fs = std::filesystem;

const char* to_string(CopyKind kind) {
  switch (kind) {
    case CopyKind::local_to_remote: return "local_to_remote";
    case CopyKind::remote_to_local: return "remote_to_local";
    case CopyKind::remote_to_remote: return "remote_to_remote";
  }
  return "?";
}

namespace {

void copy_tree(const fs::path& src, const fs::path& dst) {
  if (dst.has_parent_path()) fs::create_directories(dst.parent_path());
  if (fs::is_directory(src)) {
    fs::create_directories(dst);
    fs::copy(src, dst,
             fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  } else {
    fs::copy_file(src, dst, fs::copy_options::overwrite_existing);
  }
}

void glob_walk(const fs::path& base, const std::vector<std::string>& pattern,
               size_t index, const std::string& view_base,
               std::vector<std::string>& out) {
  if (index == pattern.size()) return;
  if (!fs::is_directory(base)) return;
  for (const auto& entry : fs::directory_iterator(base)) {
    std::string name = entry.path().filename().string();
    if (fnmatch(pattern[index].c_str(), name.c_str(), FNM_PERIOD) != 0) continue;
    std::string view = view_base + "/" + name;
    if (index + 1 == pattern.size()) {
      out.push_back(view);
    } else {
      glob_walk(entry.path(), pattern, index + 1, view, out);
    }
  }
}

}  // namespace

SandboxConnector::SandboxConnector(ModelEntry entry, fs::path root_dir)
    : entry_(std::move(entry)), root_(fs::absolute(root_dir)) {}

fs::path SandboxConnector::real_path(const Resource& resource,
                                     const std::string& view_path) const {
  if (view_path.empty() || view_path[0] != '/') {
    throw ConnectorError("view path must be absolute: '" + view_path + "'");
  }
  if (is_shared_path(view_path)) {
    return root_ / "shared" / view_path.substr(1);
  }
  return root_ / util::sanitize_component(resource.id) / view_path.substr(1);
}

bool SandboxConnector::is_shared_path(const std::string& path) const {
  for (const auto& prefix : entry_.config.shared_mounts) {
    if (path == prefix ||
        (path.size() > prefix.size() && path.compare(0, prefix.size(), prefix) == 0 &&
         path[prefix.size()] == '/')) {
      return true;
    }
  }
  return false;
}

std::vector<Resource> SandboxConnector::provision_service(const ServiceConfig& svc,
                                                          int generation) {
  std::vector<Resource> out;
  for (int i = 0; i < svc.replicas; ++i) {
    Resource r;
    r.id = fmt::format("{}.{}.{}.{:02d}", entry_.name, svc.name, generation, i);
    r.model = entry_.name;
    r.service = svc.name;
    r.hostname = r.id;
    r.root = svc.root;
    r.cores = svc.cores;
    r.memory_bytes = svc.memory_bytes;
    fs::create_directories(real_path(r, r.root));
    out.push_back(std::move(r));
  }
  return out;
}

void SandboxConnector::check_usable() const {
  if (undeployed_) {
    throw ConnectorError("model '" + entry_.name + "' is undeployed");
  }
  if (!deployed_) {
    throw ConnectorError("model '" + entry_.name + "' is not deployed");
  }
}

void SandboxConnector::require_live(const Resource& resource) const {
  check_usable();
  auto it = live_.find(resource.service);
  if (it == live_.end()) {
    throw ConnectorError("unknown service '" + resource.service + "' in model '" +
                         entry_.name + "'");
  }
  for (const auto& r : it->second) {
    if (r.id == resource.id) return;
  }
  throw ConnectorError("resource '" + resource.id + "' not found in model '" +
                       entry_.name + "'");
}

std::vector<Resource> SandboxConnector::deploy() {
  std::lock_guard lock(mutex_);
  if (entry_.external) {
    throw ConnectorError("model '" + entry_.name +
                         "' is externally managed and cannot be deployed here");
  }
  if (deployed_ || undeployed_) {
    throw ConnectorError("model '" + entry_.name + "' already deployed");
  }
  if (entry_.config.latency.deploy_ms > 0) {
    std::this_thread::sleep_for(std::chrono::duration<double>(
        entry_.config.latency.deploy_delay_sec()));
  }
  fs::create_directories(root_ / "shared");
  std::vector<Resource> all;
  for (const auto& svc : entry_.config.services) {
    auto resources = provision_service(svc, 0);
    all.insert(all.end(), resources.begin(), resources.end());
    live_[svc.name] = std::move(resources);
    generation_[svc.name] = 0;
  }
  deployed_ = true;
  return all;
}

void SandboxConnector::undeploy() {
  std::lock_guard lock(mutex_);
  if (!deployed_ || undeployed_) {
    throw ConnectorError("model '" + entry_.name + "' is not deployed");
  }
  if (entry_.config.archive_on_undeploy) {
    fs::path archive = root_;
    archive += ".archived";
    fs::remove_all(archive);
    fs::rename(root_, archive);
  } else {
    fs::remove_all(root_);
  }
  live_.clear();
  undeployed_ = true;
}

std::vector<Resource> SandboxConnector::redeploy_service(const std::string& service) {
  std::lock_guard lock(mutex_);
  check_usable();
  const ServiceConfig* svc = entry_.config.find_service(service);
  auto it = live_.find(service);
  if (!svc || it == live_.end()) {
    throw ConnectorError("unknown service '" + service + "' in model '" + entry_.name +
                         "'");
  }
  for (const auto& r : it->second) {
    fs::remove_all(root_ / util::sanitize_component(r.id));
  }
  if (entry_.config.latency.deploy_ms > 0) {
    std::this_thread::sleep_for(std::chrono::duration<double>(
        entry_.config.latency.deploy_delay_sec()));
  }
  int generation = ++generation_[service];
  it->second = provision_service(*svc, generation);
  return it->second;
}

std::vector<Resource> SandboxConnector::get_available_resources(
    const std::string& service) {
  std::lock_guard lock(mutex_);
  if (!deployed_ && !undeployed_ && entry_.external) {
    // Externally managed sandboxes stand for environments that already run;
    // their directories materialize on first use, without deploy latency.
    fs::create_directories(root_ / "shared");
    for (const auto& svc : entry_.config.services) {
      live_[svc.name] = provision_service(svc, 0);
      generation_[svc.name] = 0;
    }
    deployed_ = true;
  }
  check_usable();
  auto it = live_.find(service);
  if (it == live_.end()) {
    throw ConnectorError("unknown service '" + service + "' in model '" + entry_.name +
                         "'");
  }
  return it->second;
}

void SandboxConnector::copy(const std::string& src, const std::string& dst,
                            const Resource& resource, CopyKind kind,
                            const std::optional<Resource>& src_resource) {
  {
    std::lock_guard lock(mutex_);
    require_live(resource);
  }
  fs::path real_src;
  fs::path real_dst;
  switch (kind) {
    case CopyKind::local_to_remote:
      real_src = src;
      real_dst = real_path(resource, dst);
      break;
    case CopyKind::remote_to_local:
      real_src = real_path(resource, src);
      real_dst = dst;
      break;
    case CopyKind::remote_to_remote:
      if (is_shared_path(src)) {
        // Shared data space: only a local copy on the target resource is
        // required.
        real_src = real_path(resource, src);
      } else {
        if (!src_resource) {
          throw ConnectorError("remote_to_remote copy of a non-shared path needs the "
                               "source resource");
        }
        if (src_resource->model != entry_.name) {
          throw ConnectorError(
              "remote_to_remote copies must stay within one model; cross-model "
              "movement goes through the management node");
        }
        real_src = real_path(*src_resource, src);
      }
      real_dst = real_path(resource, dst);
      break;
  }
  if (!fs::exists(real_src)) {
    throw ConnectorError("copy source missing: '" + src + "' (" + to_string(kind) + ")");
  }
  uint64_t bytes = util::tree_bytes(real_src);
  double delay = entry_.config.latency.copy_delay_sec(bytes);
  if (delay > 0) {
    std::this_thread::sleep_for(std::chrono::duration<double>(delay));
  }
  copy_tree(real_src, real_dst);
}

CommandResult SandboxConnector::run(const Resource& resource, const std::string& command,
                                    const std::map<std::string, std::string>& environment,
                                    const std::string& workdir,
                                    std::optional<double> timeout_sec) {
  {
    std::lock_guard lock(mutex_);
    require_live(resource);
  }
  fs::path cwd = real_path(resource, workdir);
  if (!fs::is_directory(cwd)) {
    throw ConnectorError("working directory missing on '" + resource.id + "': " +
                         workdir);
  }
  std::map<std::string, std::string> env;
  const char* path = std::getenv("PATH");
  env["PATH"] = path ? path : "/usr/bin:/bin";
  env["HOME"] = real_path(resource, resource.root).string();
  env["TMPDIR"] = cwd.string();
  env["HOSTNAME"] = resource.hostname;
  const ServiceConfig* svc = entry_.config.find_service(resource.service);
  if (svc) {
    for (const auto& [k, v] : svc->environment) env[k] = v;
  }
  for (const auto& [k, v] : environment) env[k] = v;
  return run_command(command, cwd, env, timeout_sec);
}

std::string SandboxConnector::command_path(const Resource& resource,
                                           const std::string& view_path) const {
  return real_path(resource, view_path).string();
}

PathInfo SandboxConnector::probe(const Resource& resource, const std::string& path) {
  {
    std::lock_guard lock(mutex_);
    require_live(resource);
  }
  fs::path real = real_path(resource, path);
  PathInfo info;
  info.exists = fs::exists(real);
  if (!info.exists) return info;
  info.is_directory = fs::is_directory(real);
  info.size = util::tree_bytes(real);
  return info;
}

std::vector<std::string> SandboxConnector::glob(const Resource& resource,
                                                const std::string& base,
                                                const std::string& pattern) {
  {
    std::lock_guard lock(mutex_);
    require_live(resource);
  }
  std::vector<std::string> parts;
  for (size_t start = 0; start < pattern.size();) {
    size_t end = pattern.find('/', start);
    if (end == std::string::npos) end = pattern.size();
    if (end > start) parts.push_back(pattern.substr(start, end - start));
    start = end + 1;
  }
  std::vector<std::string> out;
  if (!parts.empty()) {
    glob_walk(real_path(resource, base), parts, 0, base, out);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void SandboxConnector::make_dirs(const Resource& resource, const std::string& path) {
  {
    std::lock_guard lock(mutex_);
    require_live(resource);
  }
  fs::create_directories(real_path(resource, path));
}

uint64_t SandboxConnector::checksum(const Resource& resource, const std::string& path) {
  {
    std::lock_guard lock(mutex_);
    require_live(resource);
  }
  return util::hash_tree(real_path(resource, path));
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

ConnectorRegistry::ConnectorRegistry() {
  auto make_sandbox = [](const ModelEntry& entry, const fs::path& sandbox_root) {
    return std::make_unique<SandboxConnector>(entry, sandbox_root / entry.name);
  };
  factories_["sandbox"] = make_sandbox;
  factories_["sandbox-shared"] = make_sandbox;
}

ConnectorRegistry& ConnectorRegistry::instance() {
  static ConnectorRegistry registry;
  return registry;
}

void ConnectorRegistry::register_type(const std::string& type, ConnectorFactory factory) {
  factories_[type] = std::move(factory);
}

bool ConnectorRegistry::has_type(const std::string& type) const {
  return factories_.count(type) > 0;
}

std::vector<std::string> ConnectorRegistry::types() const {
  std::vector<std::string> out;
  for (const auto& [type, _] : factories_) out.push_back(type);
  return out;
}

std::unique_ptr<Connector> ConnectorRegistry::create(
    const ModelEntry& model, const fs::path& sandbox_root) const {
  auto it = factories_.find(model.type);
  if (it == factories_.end()) {
    throw ConnectorError("unknown connector type '" + model.type + "'");
  }
  return it->second(model, sandbox_root);
}

}  // namespace streamflow
