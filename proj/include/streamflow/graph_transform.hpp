#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "streamflow/config.hpp"
#include "streamflow/workflow.hpp"

namespace streamflow {

enum class NodeKind { task, deploy, undeploy };

struct GraphNode {
  std::string id;
  NodeKind kind = NodeKind::task;
  std::string model;  // deploy/undeploy nodes
  // Lazy deploy nodes fire when the first dependent task becomes fireable,
  // not at workflow start.
  bool lazy = false;
};

// The workflow graph with synthetic deployment/undeployment nodes wired in:
// every task depends on its model's deploy node, every undeploy node
// depends on all tasks bound to its model.
class TransformedGraph {
 public:
  TransformedGraph() = default;
  TransformedGraph(WorkflowGraph workflow, std::map<std::string, GraphNode> nodes,
                   std::set<std::pair<std::string, std::string>> edges);

  const WorkflowGraph& workflow() const { return workflow_; }
  const std::map<std::string, GraphNode>& nodes() const { return nodes_; }
  // (u, v) means v depends on u.
  const std::set<std::pair<std::string, std::string>>& edges() const { return edges_; }

  std::vector<std::string> dependencies(const std::string& id) const;
  std::vector<std::string> dependents(const std::string& id) const;
  std::set<std::string> task_ids() const;
  bool is_dag() const;

  static std::string deploy_node(const std::string& model) { return "deploy:" + model; }
  static std::string undeploy_node(const std::string& model) { return "undeploy:" + model; }

 private:
  WorkflowGraph workflow_;
  std::map<std::string, GraphNode> nodes_;
  std::set<std::pair<std::string, std::string>> edges_;
};

// Requires every task to resolve in `bindings`; throws ValidationError
// otherwise. An empty workflow yields no synthetic nodes.
TransformedGraph transform_graph(const WorkflowGraph& graph,
                                 const BindingTable& bindings);

// Task nodes not yet completed whose predecessors are all completed. Lazy
// deploy predecessors do not gate fireability (the task itself triggers the
// deployment); undeploy nodes are never returned.
std::set<std::string> fireable_set(const TransformedGraph& graph,
                                   const std::set<std::string>& completed);

}  // namespace streamflow
