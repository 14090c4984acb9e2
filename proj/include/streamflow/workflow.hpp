#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "streamflow/tokens.hpp"

namespace streamflow {

struct Requirements {
  std::optional<int> cores;
  std::optional<uint64_t> memory_bytes;

  bool operator==(const Requirements&) const = default;
};

// Where a step input comes from: a workflow input ("genome") or another
// step's output ("/fastq:seqs").
struct InputRef {
  enum class Kind { workflow_input, step_output };

  Kind kind = Kind::workflow_input;
  std::string input_name;  // workflow_input
  std::string step;        // step_output: producer node id
  std::string output;      // step_output: producer output name

  static InputRef parse(const std::string& text, const std::string& where);
  std::string str() const;
  bool operator==(const InputRef&) const = default;
};

struct InputSpec {
  std::string name;
  InputRef source;
};

struct OutputSpec {
  std::string name;
  std::string glob;  // relative path-pattern within the job working directory
  bool from_stdout = false;
  bool list = false;
};

struct StepSpec {
  // Node id. Document paths are plain step paths; scatter expansion appends
  // "[i]" instance suffixes.
  std::string id;
  // Document path used for binding resolution (strips instance suffixes).
  std::string binding_path;

  std::string command;
  std::vector<InputSpec> inputs;
  std::vector<OutputSpec> outputs;

  std::optional<std::string> scatter;            // input name to fan out over
  std::optional<int> scatter_cardinality;        // static override
  std::optional<std::string> scattered_input;    // set on expanded instances
  std::optional<int> scatter_index;              // element index on instances

  Requirements requirements;
  std::optional<double> timeout_sec;

  const InputSpec* find_input(const std::string& name) const;
  const OutputSpec* find_output(const std::string& name) const;
};

struct WorkflowInput {
  std::string name;
  DataKind kind = DataKind::file;
  bool list = false;
  // Value contents (value kind) or management-node paths (file/directory).
  // One entry for scalars, any number for lists.
  std::vector<std::string> entries;
};

// Data dependency: consumer's `input` is fed by producer's `output`.
struct Edge {
  std::string producer;
  std::string output;
  std::string consumer;
  std::string input;

  auto operator<=>(const Edge&) const = default;
};

// Immutable DAG of steps. Values are safe to share across threads.
class WorkflowGraph {
 public:
  WorkflowGraph() = default;

  // Validates structural invariants (acyclicity, reference integrity,
  // unique ids, scatter declarations); throws ValidationError.
  static WorkflowGraph build(std::map<std::string, StepSpec> steps,
                             std::map<std::string, WorkflowInput> inputs);

  const std::map<std::string, StepSpec>& steps() const { return steps_; }
  const std::map<std::string, WorkflowInput>& inputs() const { return inputs_; }
  const std::vector<Edge>& edges() const { return edges_; }

  const StepSpec& step(const std::string& id) const;
  bool has_step(const std::string& id) const { return steps_.count(id) > 0; }
  bool empty() const { return steps_.empty(); }

  std::vector<std::string> predecessors(const std::string& id) const;
  std::vector<Edge> in_edges(const std::string& id) const;
  std::vector<Edge> out_edges(const std::string& id) const;
  // Consumers of a specific output of a step.
  std::vector<Edge> consumers_of(const std::string& id,
                                 const std::string& output) const;
  // Step outputs no other step consumes; these feed the implicit terminal
  // gather.
  std::vector<std::pair<std::string, std::string>> terminal_outputs() const;

 private:
  std::map<std::string, StepSpec> steps_;
  std::map<std::string, WorkflowInput> inputs_;
  std::vector<Edge> edges_;  // sorted
};

// Parses the native workflow format (top-level keys `inputs`, `steps`).
// See docs/workflow-format.md for the field reference.
WorkflowGraph parse_workflow(const std::string& yaml_text,
                             const std::string& doc_name = "workflow");
WorkflowGraph parse_workflow_file(const std::filesystem::path& file);

// Replaces a scattered step by `cardinality` sibling instances, one per list
// element, and replicates its transitive consumers per branch so each branch
// is an independent chain.
WorkflowGraph expand_scatter(const WorkflowGraph& graph, const std::string& step_id,
                             int cardinality);

}  // namespace streamflow
