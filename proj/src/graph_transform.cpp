#include "streamflow/graph_transform.hpp"

#include <deque>

#include "streamflow/errors.hpp"

namespace streamflow {

TransformedGraph::TransformedGraph(WorkflowGraph workflow,
                                   std::map<std::string, GraphNode> nodes,
                                   std::set<std::pair<std::string, std::string>> edges)
    : workflow_(std::move(workflow)), nodes_(std::move(nodes)), edges_(std::move(edges)) {}

std::vector<std::string> TransformedGraph::dependencies(const std::string& id) const {
  std::vector<std::string> out;
  for (const auto& [u, v] : edges_) {
    if (v == id) out.push_back(u);
  }
  return out;
}

std::vector<std::string> TransformedGraph::dependents(const std::string& id) const {
  std::vector<std::string> out;
  for (const auto& [u, v] : edges_) {
    if (u == id) out.push_back(v);
  }
  return out;
}

std::set<std::string> TransformedGraph::task_ids() const {
  std::set<std::string> out;
  for (const auto& [id, node] : nodes_) {
    if (node.kind == NodeKind::task) out.insert(id);
  }
  return out;
}

bool TransformedGraph::is_dag() const {
  std::map<std::string, int> indegree;
  for (const auto& [id, _] : nodes_) indegree[id] = 0;
  for (const auto& [u, v] : edges_) indegree[v]++;
  std::deque<std::string> ready;
  for (const auto& [id, d] : indegree) {
    if (d == 0) ready.push_back(id);
  }
  size_t seen = 0;
  while (!ready.empty()) {
    std::string id = ready.front();
    ready.pop_front();
    ++seen;
    for (const auto& v : dependents(id)) {
      if (--indegree[v] == 0) ready.push_back(v);
    }
  }
  return seen == nodes_.size();
}

TransformedGraph transform_graph(const WorkflowGraph& graph,
                                 const BindingTable& bindings) {
  std::map<std::string, GraphNode> nodes;
  std::set<std::pair<std::string, std::string>> edges;

  for (const auto& [id, _] : graph.steps()) {
    nodes.emplace(id, GraphNode{id, NodeKind::task, "", false});
  }
  for (const auto& e : graph.edges()) edges.emplace(e.producer, e.consumer);

  for (const auto& [id, _] : graph.steps()) {
    const Binding& b = bindings.lookup(id);  // throws on unbound steps
    std::string dep = TransformedGraph::deploy_node(b.target.model);
    std::string undep = TransformedGraph::undeploy_node(b.target.model);
    nodes.emplace(dep, GraphNode{dep, NodeKind::deploy, b.target.model, true});
    nodes.emplace(undep, GraphNode{undep, NodeKind::undeploy, b.target.model, false});
    edges.emplace(dep, id);
    edges.emplace(id, undep);
  }
  return TransformedGraph(graph, std::move(nodes), std::move(edges));
}

std::set<std::string> fireable_set(const TransformedGraph& graph,
                                   const std::set<std::string>& completed) {
  std::set<std::string> out;
  for (const auto& [id, node] : graph.nodes()) {
    if (node.kind != NodeKind::task || completed.count(id)) continue;
    bool ready = true;
    for (const auto& dep : graph.dependencies(id)) {
      const GraphNode& dn = graph.nodes().at(dep);
      if (dn.kind == NodeKind::deploy && dn.lazy) continue;
      if (!completed.count(dep)) {
        ready = false;
        break;
      }
    }
    if (ready) out.insert(id);
  }
  return out;
}

}  // namespace streamflow
