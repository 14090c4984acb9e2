#include "streamflow/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "streamflow/connector.hpp"
#include "streamflow/errors.hpp"
#include "streamflow/step_path.hpp"
#include "streamflow/util.hpp"

namespace streamflow {

namespace {

void require_known_keys(const YAML::Node& node, const std::string& where,
                        const std::set<std::string>& allowed) {
  for (const auto& kv : node) {
    std::string key = kv.first.as<std::string>();
    if (!allowed.count(key)) {
      throw ValidationError(where, "unknown field '" + key + "'");
    }
  }
}

void check_duplicate_keys(const YAML::Node& node, const std::string& where) {
  std::set<std::string> seen;
  for (const auto& kv : node) {
    std::string key = kv.first.as<std::string>();
    if (!seen.insert(key).second) {
      throw ValidationError(where, "duplicate key '" + key + "'");
    }
  }
}

Binding parse_binding(const YAML::Node& node, const std::string& where) {
  if (!node.IsMap()) throw ValidationError(where, "binding must be a mapping");
  require_known_keys(node, where, {"step", "target", "recycle", "replicas"});
  Binding b;
  if (!node["step"]) throw ValidationError(where, "binding needs 'step'");
  b.step = node["step"].as<std::string>();
  if (!paths::is_valid_step_path(b.step)) {
    throw ValidationError(where + ".step", "invalid step path '" + b.step + "'");
  }
  if (!node["target"] || !node["target"].IsMap()) {
    throw ValidationError(where + ".target", "binding needs a 'target' mapping");
  }
  require_known_keys(node["target"], where + ".target", {"model", "service"});
  if (!node["target"]["model"] || !node["target"]["service"]) {
    throw ValidationError(where + ".target", "target needs 'model' and 'service'");
  }
  b.target.model = node["target"]["model"].as<std::string>();
  b.target.service = node["target"]["service"].as<std::string>();
  if (node["recycle"]) b.recycle = node["recycle"].as<bool>();
  if (node["replicas"]) {
    b.replicas = node["replicas"].as<int>();
    if (*b.replicas < 1) {
      throw ValidationError(where + ".replicas", "must be >= 1");
    }
  }
  return b;
}

ServiceConfig parse_service(const std::string& name, const YAML::Node& node,
                            const std::string& where) {
  ServiceConfig svc;
  svc.name = name;
  if (!node.IsMap() && !node.IsNull()) {
    throw ValidationError(where, "service must be a mapping");
  }
  if (node.IsNull()) return svc;
  require_known_keys(node, where, {"replicas", "cores", "memory", "environment", "root"});
  if (node["replicas"]) {
    svc.replicas = node["replicas"].as<int>();
    if (svc.replicas < 1) throw ValidationError(where + ".replicas", "must be >= 1");
  }
  if (node["cores"]) {
    svc.cores = node["cores"].as<int>();
    if (*svc.cores < 1) throw ValidationError(where + ".cores", "must be >= 1");
  }
  if (node["memory"]) {
    auto parsed = util::parse_size(node["memory"].as<std::string>());
    if (!parsed) {
      throw ValidationError(where + ".memory", "expected bytes or a K/M/G suffixed size");
    }
    svc.memory_bytes = *parsed;
  }
  if (node["environment"]) {
    if (!node["environment"].IsMap()) {
      throw ValidationError(where + ".environment", "expected a mapping");
    }
    for (const auto& kv : node["environment"]) {
      svc.environment[kv.first.as<std::string>()] = kv.second.as<std::string>();
    }
  }
  if (node["root"]) {
    svc.root = node["root"].as<std::string>();
    if (svc.root.empty() || svc.root[0] != '/') {
      throw ValidationError(where + ".root", "must be an absolute path");
    }
  }
  return svc;
}

SandboxConfig parse_sandbox_config(const YAML::Node& node, const std::string& where) {
  SandboxConfig cfg;
  if (!node || node.IsNull()) return cfg;
  if (!node.IsMap()) throw ValidationError(where, "config must be a mapping");
  require_known_keys(node, where,
                     {"services", "shared_mounts", "latency", "archive_on_undeploy"});
  if (node["services"]) {
    if (!node["services"].IsMap()) {
      throw ValidationError(where + ".services", "expected a mapping");
    }
    for (const auto& kv : node["services"]) {
      std::string name = kv.first.as<std::string>();
      cfg.services.push_back(
          parse_service(name, kv.second, where + ".services." + name));
    }
  }
  if (node["shared_mounts"]) {
    if (!node["shared_mounts"].IsSequence()) {
      throw ValidationError(where + ".shared_mounts", "expected a sequence");
    }
    for (const auto& item : node["shared_mounts"]) {
      std::string mount = item.as<std::string>();
      if (mount.empty() || mount[0] != '/') {
        throw ValidationError(where + ".shared_mounts",
                              "mount '" + mount + "' must be an absolute path prefix");
      }
      cfg.shared_mounts.push_back(mount);
    }
  }
  if (node["latency"]) {
    const auto& lat = node["latency"];
    require_known_keys(lat, where + ".latency",
                       {"deploy_ms", "copy_fixed_ms", "copy_per_mb_ms"});
    if (lat["deploy_ms"]) cfg.latency.deploy_ms = lat["deploy_ms"].as<double>();
    if (lat["copy_fixed_ms"]) cfg.latency.copy_fixed_ms = lat["copy_fixed_ms"].as<double>();
    if (lat["copy_per_mb_ms"]) cfg.latency.copy_per_mb_ms = lat["copy_per_mb_ms"].as<double>();
    if (cfg.latency.deploy_ms < 0 || cfg.latency.copy_fixed_ms < 0 ||
        cfg.latency.copy_per_mb_ms < 0) {
      throw ValidationError(where + ".latency", "delays must be >= 0");
    }
  }
  if (node["archive_on_undeploy"]) {
    cfg.archive_on_undeploy = node["archive_on_undeploy"].as<bool>();
  }
  return cfg;
}

}  // namespace

const ServiceConfig* SandboxConfig::find_service(const std::string& name) const {
  for (const auto& svc : services) {
    if (svc.name == name) return &svc;
  }
  return nullptr;
}

std::vector<std::string> validate_service_names(const ModelEntry& model) {
  std::vector<std::string> names;
  std::set<std::string> seen;
  for (const auto& svc : model.config.services) {
    if (!seen.insert(svc.name).second) {
      throw ValidationError("models." + model.name + ".config.services",
                            "duplicate service identifier '" + svc.name + "'");
    }
    names.push_back(svc.name);
  }
  return names;
}

StreamflowFile parse_streamflow(const std::string& yaml_text,
                                const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ValidationError("", std::string("malformed document: ") + e.what());
  }
  if (!root.IsMap()) throw ValidationError("", "document must be a mapping");
  require_known_keys(root, "", {"version", "workflows", "models"});
  check_duplicate_keys(root, "");

  StreamflowFile file;
  file.base_dir = base_dir;
  if (!root["version"]) throw ValidationError("version", "missing");
  file.version = root["version"].as<std::string>();
  if (file.version != "v1.0") {
    throw ValidationError("version", "unknown version '" + file.version +
                                         "' (only 'v1.0' is accepted)");
  }

  if (root["models"]) {
    if (!root["models"].IsMap()) throw ValidationError("models", "expected a mapping");
    check_duplicate_keys(root["models"], "models");
    for (const auto& kv : root["models"]) {
      std::string name = kv.first.as<std::string>();
      std::string where = "models." + name;
      const YAML::Node& body = kv.second;
      if (!body.IsMap()) throw ValidationError(where, "model must be a mapping");
      require_known_keys(body, where, {"type", "config", "external"});
      ModelEntry model;
      model.name = name;
      if (!body["type"]) throw ValidationError(where + ".type", "missing");
      model.type = body["type"].as<std::string>();
      if (!ConnectorRegistry::instance().has_type(model.type)) {
        throw ValidationError(where + ".type",
                              "unknown connector type '" + model.type + "' (known: " +
                                  util::join(ConnectorRegistry::instance().types(), ", ") +
                                  ")");
      }
      if (body["external"]) model.external = body["external"].as<bool>();
      model.config = parse_sandbox_config(body["config"], where + ".config");
      validate_service_names(model);
      if (model.type == "sandbox" && !model.config.shared_mounts.empty()) {
        throw ValidationError(where + ".config.shared_mounts",
                              "'sandbox' models have fully disjoint data spaces; "
                              "use 'sandbox-shared'");
      }
      if (model.type == "sandbox-shared" && model.config.shared_mounts.empty()) {
        throw ValidationError(where + ".config.shared_mounts",
                              "'sandbox-shared' models need at least one shared mount");
      }
      file.models.emplace(name, std::move(model));
    }
  }

  if (root["workflows"]) {
    if (!root["workflows"].IsMap()) {
      throw ValidationError("workflows", "expected a mapping");
    }
    check_duplicate_keys(root["workflows"], "workflows");
    for (const auto& kv : root["workflows"]) {
      std::string name = kv.first.as<std::string>();
      std::string where = "workflows." + name;
      const YAML::Node& body = kv.second;
      if (!body.IsMap()) throw ValidationError(where, "workflow must be a mapping");
      require_known_keys(body, where, {"type", "config", "bindings"});
      WorkflowEntry wf;
      wf.name = name;
      if (!body["type"]) throw ValidationError(where + ".type", "missing");
      wf.type = body["type"].as<std::string>();
      if (wf.type != "native") {
        throw ValidationError(where + ".type",
                              "unsupported workflow type '" + wf.type +
                                  "' (only 'native' is shipped)");
      }
      if (!body["config"] || !body["config"].IsMap() || !body["config"]["file"]) {
        throw ValidationError(where + ".config", "needs a 'file' entry");
      }
      require_known_keys(body["config"], where + ".config", {"file"});
      wf.file = body["config"]["file"].as<std::string>();

      std::set<std::string> binding_steps;
      if (body["bindings"]) {
        if (!body["bindings"].IsSequence()) {
          throw ValidationError(where + ".bindings", "expected a sequence");
        }
        int idx = 0;
        for (const auto& item : body["bindings"]) {
          std::string bwhere = where + ".bindings[" + std::to_string(idx++) + "]";
          Binding b = parse_binding(item, bwhere);
          // Two bindings with the identical step path would make resolution
          // ambiguous; fail loudly.
          if (!binding_steps.insert(b.step).second) {
            throw ValidationError(bwhere + ".step",
                                  "duplicate binding for step '" + b.step + "'");
          }
          auto mit = file.models.find(b.target.model);
          if (mit == file.models.end()) {
            throw ValidationError(bwhere + ".target.model",
                                  "unknown model '" + b.target.model + "'");
          }
          if (!mit->second.config.find_service(b.target.service)) {
            throw ValidationError(bwhere + ".target.service",
                                  "model '" + b.target.model + "' has no service '" +
                                      b.target.service + "'");
          }
          if (b.recycle && mit->second.external) {
            throw ValidationError(bwhere + ".recycle",
                                  "externally managed models cannot be recycled");
          }
          wf.bindings.push_back(std::move(b));
        }
      }
      file.workflows.emplace(name, std::move(wf));
    }
  }
  return file;
}

StreamflowFile load_streamflow_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ValidationError(path.string(), "file not found");
  }
  return parse_streamflow(util::read_file(path),
                          path.has_parent_path() ? path.parent_path() : ".");
}

std::string StreamflowFile::to_yaml() const {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "version" << YAML::Value << version;
  out << YAML::Key << "workflows" << YAML::Value << YAML::BeginMap;
  for (const auto& [name, wf] : workflows) {
    out << YAML::Key << name << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "type" << YAML::Value << wf.type;
    out << YAML::Key << "config" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "file" << YAML::Value << wf.file;
    out << YAML::EndMap;
    out << YAML::Key << "bindings" << YAML::Value << YAML::BeginSeq;
    for (const auto& b : wf.bindings) {
      out << YAML::BeginMap;
      out << YAML::Key << "step" << YAML::Value << b.step;
      out << YAML::Key << "target" << YAML::Value << YAML::BeginMap;
      out << YAML::Key << "model" << YAML::Value << b.target.model;
      out << YAML::Key << "service" << YAML::Value << b.target.service;
      out << YAML::EndMap;
      out << YAML::Key << "recycle" << YAML::Value << b.recycle;
      // The replicas directive is tri-state: present implies rank variables
      // even for a single replica, so an absent directive stays absent.
      if (b.replicas) out << YAML::Key << "replicas" << YAML::Value << *b.replicas;
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  out << YAML::Key << "models" << YAML::Value << YAML::BeginMap;
  for (const auto& [name, model] : models) {
    out << YAML::Key << name << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "type" << YAML::Value << model.type;
    out << YAML::Key << "external" << YAML::Value << model.external;
    out << YAML::Key << "config" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "services" << YAML::Value << YAML::BeginMap;
    for (const auto& svc : model.config.services) {
      out << YAML::Key << svc.name << YAML::Value << YAML::BeginMap;
      out << YAML::Key << "replicas" << YAML::Value << svc.replicas;
      if (svc.cores) out << YAML::Key << "cores" << YAML::Value << *svc.cores;
      if (svc.memory_bytes) {
        out << YAML::Key << "memory" << YAML::Value << std::to_string(*svc.memory_bytes);
      }
      if (!svc.environment.empty()) {
        out << YAML::Key << "environment" << YAML::Value << YAML::BeginMap;
        for (const auto& [k, v] : svc.environment) out << YAML::Key << k << YAML::Value << v;
        out << YAML::EndMap;
      }
      out << YAML::Key << "root" << YAML::Value << svc.root;
      out << YAML::EndMap;
    }
    out << YAML::EndMap;
    if (!model.config.shared_mounts.empty()) {
      out << YAML::Key << "shared_mounts" << YAML::Value << YAML::BeginSeq;
      for (const auto& m : model.config.shared_mounts) out << m;
      out << YAML::EndSeq;
    }
    out << YAML::Key << "latency" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "deploy_ms" << YAML::Value << model.config.latency.deploy_ms;
    out << YAML::Key << "copy_fixed_ms" << YAML::Value << model.config.latency.copy_fixed_ms;
    out << YAML::Key << "copy_per_mb_ms" << YAML::Value << model.config.latency.copy_per_mb_ms;
    out << YAML::EndMap;
    out << YAML::Key << "archive_on_undeploy" << YAML::Value
        << model.config.archive_on_undeploy;
    out << YAML::EndMap;
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

const Binding& BindingTable::lookup(const std::string& task_id) const {
  auto it = entries_.find(task_id);
  if (it == entries_.end()) {
    throw ValidationError(task_id, "no binding resolved for step");
  }
  return it->second;
}

BindingTable resolve_bindings(const std::vector<Binding>& bindings,
                              const WorkflowGraph& graph) {
  std::map<std::string, Binding> entries;
  for (const auto& [id, spec] : graph.steps()) {
    const Binding* best = nullptr;
    bool tie = false;
    for (const auto& b : bindings) {
      if (!paths::is_prefix_of(b.step, spec.binding_path)) continue;
      if (!best || paths::depth(b.step) > paths::depth(best->step)) {
        best = &b;
        tie = false;
      } else if (paths::depth(b.step) == paths::depth(best->step) &&
                 b.step == best->step) {
        tie = true;
      }
    }
    if (!best) {
      throw ValidationError(id, "no binding matches step (deepest prefix lookup failed)");
    }
    if (tie) {
      throw ValidationError(id, "two bindings with step '" + best->step +
                                    "' match; bindings must be unambiguous");
    }
    entries.emplace(id, *best);
  }
  return BindingTable(std::move(entries));
}

BindingTable resolve_bindings(const StreamflowFile& file,
                              const std::string& workflow_name,
                              const WorkflowGraph& graph) {
  auto it = file.workflows.find(workflow_name);
  if (it == file.workflows.end()) {
    throw ValidationError("workflows." + workflow_name, "unknown workflow");
  }
  return resolve_bindings(it->second.bindings, graph);
}

}  // namespace streamflow
