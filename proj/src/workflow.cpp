#include "streamflow/workflow.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <deque>

#include "streamflow/errors.hpp"
#include "streamflow/step_path.hpp"
#include "streamflow/util.hpp"

namespace streamflow {

InputRef InputRef::parse(const std::string& text, const std::string& where) {
  if (text.empty()) throw ValidationError(where, "empty input reference");
  if (text[0] != '/') {
    if (!paths::is_valid_name(text)) {
      throw ValidationError(where, "invalid workflow input name '" + text + "'");
    }
    InputRef ref;
    ref.kind = Kind::workflow_input;
    ref.input_name = text;
    return ref;
  }
  auto colon = text.rfind(':');
  if (colon == std::string::npos || colon + 1 == text.size()) {
    throw ValidationError(where, "step output reference must look like '/step:output', got '" + text + "'");
  }
  InputRef ref;
  ref.kind = Kind::step_output;
  ref.step = text.substr(0, colon);
  ref.output = text.substr(colon + 1);
  if (!paths::is_valid_step_path(ref.step) || ref.step == "/") {
    throw ValidationError(where, "invalid step path '" + ref.step + "' in reference");
  }
  return ref;
}

std::string InputRef::str() const {
  return kind == Kind::workflow_input ? input_name : step + ":" + output;
}

const InputSpec* StepSpec::find_input(const std::string& name) const {
  for (const auto& in : inputs) {
    if (in.name == name) return &in;
  }
  return nullptr;
}

const OutputSpec* StepSpec::find_output(const std::string& name) const {
  for (const auto& out : outputs) {
    if (out.name == name) return &out;
  }
  return nullptr;
}

namespace {

void check_acyclic(const std::map<std::string, StepSpec>& steps,
                   const std::vector<Edge>& edges) {
  std::map<std::string, int> indegree;
  std::map<std::string, std::vector<std::string>> next;
  for (const auto& [id, _] : steps) indegree[id] = 0;
  for (const auto& e : edges) {
    indegree[e.consumer]++;
    next[e.producer].push_back(e.consumer);
  }
  std::deque<std::string> ready;
  for (const auto& [id, d] : indegree) {
    if (d == 0) ready.push_back(id);
  }
  size_t seen = 0;
  while (!ready.empty()) {
    std::string id = ready.front();
    ready.pop_front();
    ++seen;
    for (const auto& n : next[id]) {
      if (--indegree[n] == 0) ready.push_back(n);
    }
  }
  if (seen != steps.size()) {
    throw ValidationError("steps", "cycle detected in the dependency graph");
  }
}

// True when the reference yields a list-valued token.
bool ref_is_list(const InputRef& ref,
                 const std::map<std::string, StepSpec>& steps,
                 const std::map<std::string, WorkflowInput>& inputs) {
  if (ref.kind == InputRef::Kind::workflow_input) {
    auto it = inputs.find(ref.input_name);
    return it != inputs.end() && it->second.list;
  }
  auto it = steps.find(ref.step);
  if (it == steps.end()) return false;
  const OutputSpec* out = it->second.find_output(ref.output);
  return out != nullptr && out->list;
}

}  // namespace

WorkflowGraph WorkflowGraph::build(std::map<std::string, StepSpec> steps,
                                   std::map<std::string, WorkflowInput> inputs) {
  std::vector<Edge> edges;
  for (const auto& [id, spec] : steps) {
    std::set<std::string> seen_inputs;
    for (const auto& in : spec.inputs) {
      if (!seen_inputs.insert(in.name).second) {
        throw ValidationError(id, "duplicate input '" + in.name + "'");
      }
      if (in.source.kind == InputRef::Kind::workflow_input) {
        if (!inputs.count(in.source.input_name)) {
          throw ValidationError(id + ".in." + in.name,
                                "unknown workflow input '" + in.source.input_name + "'");
        }
      } else {
        auto pit = steps.find(in.source.step);
        if (pit == steps.end()) {
          throw ValidationError(id + ".in." + in.name,
                                "unknown step '" + in.source.step + "'");
        }
        if (!pit->second.find_output(in.source.output)) {
          throw ValidationError(id + ".in." + in.name,
                                "step '" + in.source.step + "' declares no output '" +
                                    in.source.output + "'");
        }
        edges.push_back({in.source.step, in.source.output, id, in.name});
      }
    }
    if (spec.scatter) {
      const InputSpec* target = spec.find_input(*spec.scatter);
      if (!target) {
        throw ValidationError(id, "scatter names undeclared input '" + *spec.scatter + "'");
      }
      if (!ref_is_list(target->source, steps, inputs)) {
        throw ValidationError(id, "scatter over non-list input '" + *spec.scatter + "'");
      }
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  check_acyclic(steps, edges);

  WorkflowGraph g;
  g.steps_ = std::move(steps);
  g.inputs_ = std::move(inputs);
  g.edges_ = std::move(edges);
  return g;
}

const StepSpec& WorkflowGraph::step(const std::string& id) const {
  auto it = steps_.find(id);
  if (it == steps_.end()) throw ValidationError(id, "unknown step");
  return it->second;
}

std::vector<std::string> WorkflowGraph::predecessors(const std::string& id) const {
  std::set<std::string> preds;
  for (const auto& e : edges_) {
    if (e.consumer == id) preds.insert(e.producer);
  }
  return {preds.begin(), preds.end()};
}

std::vector<Edge> WorkflowGraph::in_edges(const std::string& id) const {
  std::vector<Edge> out;
  for (const auto& e : edges_) {
    if (e.consumer == id) out.push_back(e);
  }
  return out;
}

std::vector<Edge> WorkflowGraph::out_edges(const std::string& id) const {
  std::vector<Edge> out;
  for (const auto& e : edges_) {
    if (e.producer == id) out.push_back(e);
  }
  return out;
}

std::vector<Edge> WorkflowGraph::consumers_of(const std::string& id,
                                              const std::string& output) const {
  std::vector<Edge> out;
  for (const auto& e : edges_) {
    if (e.producer == id && e.output == output) out.push_back(e);
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> WorkflowGraph::terminal_outputs()
    const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [id, spec] : steps_) {
    for (const auto& o : spec.outputs) {
      if (consumers_of(id, o.name).empty()) out.emplace_back(id, o.name);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

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

WorkflowInput parse_workflow_input(const std::string& name, const YAML::Node& node,
                                   const std::string& where) {
  if (!node.IsMap()) throw ValidationError(where, "input must be a mapping");
  require_known_keys(node, where, {"kind", "list", "path", "paths", "value", "values"});
  WorkflowInput in;
  in.name = name;
  std::string kind = node["kind"] ? node["kind"].as<std::string>() : "file";
  auto parsed = data_kind_from_string(kind);
  if (!parsed) throw ValidationError(where + ".kind", "unknown kind '" + kind + "'");
  in.kind = *parsed;
  in.list = node["list"] ? node["list"].as<bool>() : false;

  auto collect = [&](const char* scalar_key, const char* list_key) {
    if (node[scalar_key] && node[list_key]) {
      throw ValidationError(where, std::string("use either '") + scalar_key + "' or '" +
                                       list_key + "', not both");
    }
    if (node[list_key]) {
      if (!node[list_key].IsSequence()) {
        throw ValidationError(where + "." + list_key, "expected a sequence");
      }
      in.list = true;
      for (const auto& item : node[list_key]) in.entries.push_back(item.as<std::string>());
    } else if (node[scalar_key]) {
      if (in.list) {
        // scalar key with list: true means a one-element list
        in.entries.push_back(node[scalar_key].as<std::string>());
      } else {
        in.entries.push_back(node[scalar_key].as<std::string>());
      }
    }
  };
  if (in.kind == DataKind::value) {
    collect("value", "values");
  } else {
    collect("path", "paths");
  }
  if (in.entries.empty() && !in.list) {
    throw ValidationError(where, in.kind == DataKind::value
                                     ? "value input needs 'value' or 'values'"
                                     : "file input needs 'path' or 'paths'");
  }
  return in;
}

OutputSpec parse_output(const YAML::Node& node, const std::string& where) {
  if (!node.IsMap()) throw ValidationError(where, "output must be a mapping");
  require_known_keys(node, where, {"name", "glob", "from", "list"});
  OutputSpec out;
  if (!node["name"]) throw ValidationError(where, "output needs a 'name'");
  out.name = node["name"].as<std::string>();
  if (!paths::is_valid_name(out.name)) {
    throw ValidationError(where, "invalid output name '" + out.name + "'");
  }
  out.list = node["list"] ? node["list"].as<bool>() : false;
  if (node["from"]) {
    std::string from = node["from"].as<std::string>();
    if (from != "stdout") {
      throw ValidationError(where + ".from", "only 'stdout' is supported");
    }
    if (node["glob"]) throw ValidationError(where, "'from: stdout' excludes 'glob'");
    if (out.list) throw ValidationError(where, "'from: stdout' outputs cannot be lists");
    out.from_stdout = true;
    return out;
  }
  if (!node["glob"]) throw ValidationError(where, "output needs 'glob' or 'from'");
  out.glob = node["glob"].as<std::string>();
  if (out.glob.empty() || out.glob[0] == '/') {
    throw ValidationError(where + ".glob", "glob must be a relative pattern");
  }
  for (const auto& comp : paths::components(out.glob)) {
    if (comp == "..") {
      throw ValidationError(where + ".glob", "glob must not contain '..'");
    }
  }
  return out;
}

Requirements parse_requirements(const YAML::Node& node, const std::string& where) {
  Requirements req;
  if (!node) return req;
  if (!node.IsMap()) throw ValidationError(where, "requirements must be a mapping");
  require_known_keys(node, where, {"cores", "memory"});
  if (node["cores"]) {
    req.cores = node["cores"].as<int>();
    if (*req.cores < 1) throw ValidationError(where + ".cores", "must be >= 1");
  }
  if (node["memory"]) {
    auto parsed = util::parse_size(node["memory"].as<std::string>());
    if (!parsed) {
      throw ValidationError(where + ".memory", "expected bytes or a K/M/G suffixed size");
    }
    req.memory_bytes = *parsed;
  }
  return req;
}

void parse_steps_node(const YAML::Node& node, const std::string& parent,
                      const std::string& where,
                      std::map<std::string, StepSpec>& steps) {
  if (!node.IsMap()) throw ValidationError(where, "'steps' must be a mapping");
  check_duplicate_keys(node, where);
  for (const auto& kv : node) {
    std::string name = kv.first.as<std::string>();
    std::string path = paths::join(parent, name);
    std::string child_where = where + "." + name;
    if (!paths::is_valid_name(name)) {
      throw ValidationError(child_where, "invalid step name '" + name + "'");
    }
    const YAML::Node& body = kv.second;
    if (!body.IsMap()) throw ValidationError(child_where, "step must be a mapping");

    if (body["steps"]) {
      // folder: a nested sub-workflow
      require_known_keys(body, child_where, {"steps"});
      parse_steps_node(body["steps"], path, child_where + ".steps", steps);
      continue;
    }

    require_known_keys(body, child_where,
                       {"command", "in", "out", "scatter", "scatter_cardinality",
                        "requirements", "timeout"});
    StepSpec spec;
    spec.id = path;
    spec.binding_path = path;
    if (!body["command"]) {
      throw ValidationError(child_where, "step needs 'command' (or nested 'steps')");
    }
    spec.command = body["command"].as<std::string>();
    if (body["in"]) {
      if (!body["in"].IsMap()) throw ValidationError(child_where + ".in", "expected a mapping");
      check_duplicate_keys(body["in"], child_where + ".in");
      for (const auto& in_kv : body["in"]) {
        std::string in_name = in_kv.first.as<std::string>();
        std::string ref_where = child_where + ".in." + in_name;
        if (!paths::is_valid_name(in_name)) {
          throw ValidationError(ref_where, "invalid input name");
        }
        InputSpec in;
        in.name = in_name;
        in.source = InputRef::parse(in_kv.second.as<std::string>(), ref_where);
        spec.inputs.push_back(std::move(in));
      }
    }
    if (body["out"]) {
      if (!body["out"].IsSequence()) {
        throw ValidationError(child_where + ".out", "expected a sequence");
      }
      std::set<std::string> names;
      int idx = 0;
      for (const auto& out_node : body["out"]) {
        auto out = parse_output(out_node, child_where + ".out[" + std::to_string(idx++) + "]");
        if (!names.insert(out.name).second) {
          throw ValidationError(child_where + ".out", "duplicate output '" + out.name + "'");
        }
        spec.outputs.push_back(std::move(out));
      }
    }
    if (body["scatter"]) spec.scatter = body["scatter"].as<std::string>();
    if (body["scatter_cardinality"]) {
      spec.scatter_cardinality = body["scatter_cardinality"].as<int>();
      if (*spec.scatter_cardinality < 1) {
        throw ValidationError(child_where + ".scatter_cardinality", "must be >= 1");
      }
      if (!spec.scatter) {
        throw ValidationError(child_where, "scatter_cardinality without scatter");
      }
    }
    spec.requirements = parse_requirements(body["requirements"], child_where + ".requirements");
    if (body["timeout"]) {
      spec.timeout_sec = body["timeout"].as<double>();
      if (*spec.timeout_sec <= 0) throw ValidationError(child_where + ".timeout", "must be > 0");
    }
    if (!steps.emplace(path, std::move(spec)).second) {
      throw ValidationError(child_where, "duplicate step path '" + path + "'");
    }
  }
}

}  // namespace

WorkflowGraph parse_workflow(const std::string& yaml_text, const std::string& doc_name) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ValidationError(doc_name, std::string("malformed document: ") + e.what());
  }
  if (!root.IsMap()) throw ValidationError(doc_name, "document must be a mapping");
  require_known_keys(root, doc_name, {"inputs", "steps"});
  check_duplicate_keys(root, doc_name);

  std::map<std::string, WorkflowInput> inputs;
  if (root["inputs"]) {
    if (!root["inputs"].IsMap()) {
      throw ValidationError(doc_name + ".inputs", "expected a mapping");
    }
    check_duplicate_keys(root["inputs"], doc_name + ".inputs");
    for (const auto& kv : root["inputs"]) {
      std::string name = kv.first.as<std::string>();
      if (!paths::is_valid_name(name)) {
        throw ValidationError(doc_name + ".inputs", "invalid input name '" + name + "'");
      }
      inputs.emplace(name, parse_workflow_input(name, kv.second, doc_name + ".inputs." + name));
    }
  }

  std::map<std::string, StepSpec> steps;
  if (root["steps"]) {
    parse_steps_node(root["steps"], "/", doc_name + ".steps", steps);
  }
  return WorkflowGraph::build(std::move(steps), std::move(inputs));
}

WorkflowGraph parse_workflow_file(const std::filesystem::path& file) {
  return parse_workflow(util::read_file(file), file.filename().string());
}

// ---------------------------------------------------------------------------
// Scatter expansion
// ---------------------------------------------------------------------------

WorkflowGraph expand_scatter(const WorkflowGraph& graph, const std::string& step_id,
                             int cardinality) {
  const StepSpec& target = graph.step(step_id);
  if (!target.scatter) {
    throw ValidationError(step_id, "step declares no scatter");
  }
  if (cardinality < 1) {
    throw ValidationError(step_id, "empty scatter: cardinality " +
                                       std::to_string(cardinality));
  }

  // The scattered step plus every transitive consumer forms one branch
  // template, replicated per list element.
  std::set<std::string> closure{step_id};
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& e : graph.edges()) {
      if (closure.count(e.producer) && !closure.count(e.consumer)) {
        closure.insert(e.consumer);
        grew = true;
      }
    }
  }

  std::map<std::string, StepSpec> steps;
  for (const auto& [id, spec] : graph.steps()) {
    if (!closure.count(id)) steps.emplace(id, spec);
  }
  for (int i = 0; i < cardinality; ++i) {
    std::string suffix = "[" + std::to_string(i) + "]";
    for (const auto& id : closure) {
      StepSpec clone = graph.step(id);
      clone.id = id + suffix;
      for (auto& in : clone.inputs) {
        if (in.source.kind == InputRef::Kind::step_output &&
            closure.count(in.source.step)) {
          in.source.step += suffix;
        }
      }
      if (id == step_id) {
        clone.scattered_input = clone.scatter;
        clone.scatter_index = i;
        clone.scatter.reset();
        clone.scatter_cardinality.reset();
      }
      steps.emplace(clone.id, std::move(clone));
    }
  }
  return WorkflowGraph::build(std::move(steps), graph.inputs());
}

}  // namespace streamflow
