#include <doctest.h>

#include <random>

#include "streamflow/config.hpp"
#include "streamflow/errors.hpp"
#include "streamflow/graph_transform.hpp"
#include "streamflow/workflow.hpp"

using namespace streamflow;

namespace {

const char* kFig5Doc = R"(
steps:
  fastq:
    command: "gen"
    out:
      - name: seqs
        glob: "seq_*"
        list: true
  count:
    command: "count {s}"
    in: { s: "/fastq:seqs" }
    scatter: s
    out: [ { name: matrix, glob: "m" } ]
  seurat:
    command: "seurat {m}"
    in: { m: "/count:matrix" }
    out: [ { name: clusters, glob: "c" } ]
  singler:
    command: "singler {c}"
    in: { c: "/seurat:clusters" }
    out: [ { name: labels, glob: "l" } ]
)";

// Strips "[i]" instance suffixes so expanded graphs can be compared
// against their unexpanded shape.
std::string strip_instances(const std::string& id) {
  std::string out;
  bool in_suffix = false;
  for (char c : id) {
    if (c == '[') in_suffix = true;
    if (!in_suffix) out.push_back(c);
    if (c == ']') in_suffix = false;
  }
  return out;
}

BindingTable bind_all(const WorkflowGraph& g, const std::string& model,
                      const std::string& service) {
  Binding b;
  b.step = "/";
  b.target = {model, service};
  return resolve_bindings(std::vector<Binding>{b}, g);
}

}  // namespace

TEST_CASE("parse: single step, no inputs") {
  auto g = parse_workflow("steps:\n  a:\n    command: \"true\"\n");
  CHECK(g.steps().size() == 1);
  CHECK(g.steps().count("/a") == 1);
  CHECK(g.edges().empty());
}

TEST_CASE("parse + expansion: four-stage chain with fan-out 6") {
  auto g = parse_workflow(kFig5Doc);
  CHECK(g.steps().size() == 4);
  CHECK(g.edges().size() == 3);

  auto expanded = expand_scatter(g, "/count", 6);
  // 1 source + 3 downstream kinds x 6 branches
  CHECK(expanded.steps().size() == 19);
  CHECK(expanded.edges().size() == 18);
  for (int i = 0; i < 6; ++i) {
    std::string suffix = "[" + std::to_string(i) + "]";
    CHECK(expanded.has_step("/count" + suffix));
    CHECK(expanded.has_step("/seurat" + suffix));
    CHECK(expanded.has_step("/singler" + suffix));
  }
}

TEST_CASE("parse: dangling reference to an undeclared output") {
  const char* doc = R"(
steps:
  a:
    command: "true"
  b:
    command: "use {x}"
    in: { x: "/a:x" }
)";
  CHECK_THROWS_WITH_AS(parse_workflow(doc),
                       doctest::Contains("declares no output 'x'"), ValidationError);
}

TEST_CASE("parse: duplicate step path") {
  const char* doc = "steps:\n  a:\n    command: \"x\"\n  a:\n    command: \"y\"\n";
  CHECK_THROWS_WITH_AS(parse_workflow(doc), doctest::Contains("duplicate"),
                       ValidationError);
}

TEST_CASE("parse: cycle detection") {
  const char* doc = R"(
steps:
  a:
    command: "a {i}"
    in: { i: "/b:y" }
    out: [ { name: x, glob: "x" } ]
  b:
    command: "b {i}"
    in: { i: "/a:x" }
    out: [ { name: y, glob: "y" } ]
)";
  CHECK_THROWS_WITH_AS(parse_workflow(doc), doctest::Contains("cycle"), ValidationError);
}

TEST_CASE("parse: scatter over non-list input") {
  const char* doc = R"(
steps:
  a:
    command: "a"
    out: [ { name: x, glob: "x" } ]
  b:
    command: "b {i}"
    in: { i: "/a:x" }
    scatter: i
)";
  CHECK_THROWS_WITH_AS(parse_workflow(doc), doctest::Contains("non-list"),
                       ValidationError);
}

TEST_CASE("parse: nested sub-workflow paths") {
  const char* doc = R"(
steps:
  a:
    command: "a"
  post:
    steps:
      b:
        command: "b"
      deep:
        steps:
          c:
            command: "c"
)";
  auto g = parse_workflow(doc);
  CHECK(g.has_step("/a"));
  CHECK(g.has_step("/post/b"));
  CHECK(g.has_step("/post/deep/c"));
  CHECK_FALSE(g.has_step("/post"));
}

TEST_CASE("expand_scatter: cardinality 1 is isomorphic to the input") {
  auto g = parse_workflow(kFig5Doc);
  auto e = expand_scatter(g, "/count", 1);
  CHECK(e.steps().size() == g.steps().size());
  CHECK(e.edges().size() == g.edges().size());
  std::set<std::string> stripped;
  for (const auto& [id, _] : e.steps()) stripped.insert(strip_instances(id));
  std::set<std::string> original;
  for (const auto& [id, _] : g.steps()) original.insert(id);
  CHECK(stripped == original);
}

TEST_CASE("expand_scatter: hand-enumerated 3-way expansion of a->b->c") {
  const char* doc = R"(
steps:
  a:
    command: "a"
    out: [ { name: xs, glob: "x*", list: true } ]
  b:
    command: "b {x}"
    in: { x: "/a:xs" }
    scatter: x
    out: [ { name: y, glob: "y" } ]
  c:
    command: "c {y}"
    in: { y: "/b:y" }
)";
  auto g = parse_workflow(doc);
  auto e = expand_scatter(g, "/b", 3);

  // Brute-force expected node and edge sets for this instance.
  std::set<std::string> expected_nodes{"/a",    "/b[0]", "/b[1]", "/b[2]",
                                       "/c[0]", "/c[1]", "/c[2]"};
  std::set<std::string> actual_nodes;
  for (const auto& [id, _] : e.steps()) actual_nodes.insert(id);
  CHECK(actual_nodes == expected_nodes);
  CHECK(e.steps().size() == 1 + 3 + 3);

  std::set<Edge> expected_edges;
  for (int i = 0; i < 3; ++i) {
    std::string s = "[" + std::to_string(i) + "]";
    expected_edges.insert(Edge{"/a", "xs", "/b" + s, "x"});
    expected_edges.insert(Edge{"/b" + s, "y", "/c" + s, "y"});
  }
  std::set<Edge> actual_edges(e.edges().begin(), e.edges().end());
  CHECK(actual_edges == expected_edges);

  // Instances consume one element each.
  for (int i = 0; i < 3; ++i) {
    const auto& spec = e.step("/b[" + std::to_string(i) + "]");
    CHECK_FALSE(spec.scatter.has_value());
    CHECK(spec.scattered_input == std::string("x"));
    CHECK(spec.scatter_index == i);
  }
}

TEST_CASE("expand_scatter: cardinality 0 is an error, not a no-op") {
  auto g = parse_workflow(kFig5Doc);
  CHECK_THROWS_WITH_AS(expand_scatter(g, "/count", 0), doctest::Contains("empty scatter"),
                       ValidationError);
  CHECK_THROWS_AS(expand_scatter(g, "/fastq", 2), ValidationError);  // no scatter there
}

TEST_CASE("transform_graph: two tasks, one model") {
  auto g = parse_workflow("steps:\n  a:\n    command: \"a\"\n  b:\n    command: \"b\"\n");
  auto t = transform_graph(g, bind_all(g, "M", "s"));

  std::set<std::string> expected_nodes{"/a", "/b", "deploy:M", "undeploy:M"};
  std::set<std::string> actual_nodes;
  for (const auto& [id, _] : t.nodes()) actual_nodes.insert(id);
  CHECK(actual_nodes == expected_nodes);

  std::set<std::pair<std::string, std::string>> expected_edges{
      {"deploy:M", "/a"}, {"deploy:M", "/b"}, {"/a", "undeploy:M"}, {"/b", "undeploy:M"}};
  CHECK(t.edges() == expected_edges);
  CHECK(t.dependents("deploy:M").size() == 2);
  CHECK(t.dependencies("undeploy:M").size() == 2);
  CHECK(t.nodes().at("deploy:M").lazy);
  CHECK(t.is_dag());
}

TEST_CASE("transform_graph: two tasks, two models wire only their own tasks") {
  auto g = parse_workflow("steps:\n  a:\n    command: \"a\"\n  b:\n    command: \"b\"\n");
  Binding ba{"/a", {"M1", "s"}, false, std::nullopt};
  Binding bb{"/b", {"M2", "s"}, false, std::nullopt};
  auto t = transform_graph(g, resolve_bindings({ba, bb}, g));

  std::set<std::string> expected_nodes{"/a",        "/b",         "deploy:M1",
                                       "deploy:M2", "undeploy:M1", "undeploy:M2"};
  std::set<std::string> actual_nodes;
  for (const auto& [id, _] : t.nodes()) actual_nodes.insert(id);
  CHECK(actual_nodes == expected_nodes);

  std::set<std::pair<std::string, std::string>> expected_edges{
      {"deploy:M1", "/a"}, {"/a", "undeploy:M1"}, {"deploy:M2", "/b"},
      {"/b", "undeploy:M2"}};
  CHECK(t.edges() == expected_edges);
}

TEST_CASE("transform_graph: empty workflow has no synthetic nodes") {
  auto g = parse_workflow("steps: {}\n");
  auto t = transform_graph(g, BindingTable{});
  CHECK(t.nodes().empty());
  CHECK(t.edges().empty());
}

TEST_CASE("transform_graph: unbound step fails") {
  auto g = parse_workflow("steps:\n  y:\n    command: \"y\"\n");
  Binding bx{"/x", {"M", "s"}, false, std::nullopt};
  CHECK_THROWS_AS(resolve_bindings({bx}, g), ValidationError);
}

TEST_CASE("fireable_set: chain, fan-out and diamond") {
  auto chain = parse_workflow(R"(
steps:
  a:
    command: "a"
    out: [ { name: o, glob: "o" } ]
  b:
    command: "b {o}"
    in: { o: "/a:o" }
)");
  auto t = transform_graph(chain, bind_all(chain, "M", "s"));
  CHECK(fireable_set(t, {}) == std::set<std::string>{"/a"});
  CHECK(fireable_set(t, {"/a"}) == std::set<std::string>{"/b"});
  CHECK(fireable_set(t, {"/a", "/b"}).empty());

  auto fig5 = expand_scatter(parse_workflow(kFig5Doc), "/count", 6);
  auto tf = transform_graph(fig5, bind_all(fig5, "M", "s"));
  auto fire = fireable_set(tf, {"/fastq"});
  CHECK(fire.size() == 6);
  for (const auto& id : fire) CHECK(id.rfind("/count[", 0) == 0);

  auto diamond = parse_workflow(R"(
steps:
  a:
    command: "a"
    out: [ { name: o, glob: "o" } ]
  b:
    command: "b {o}"
    in: { o: "/a:o" }
    out: [ { name: p, glob: "p" } ]
  c:
    command: "c {o}"
    in: { o: "/a:o" }
    out: [ { name: q, glob: "q" } ]
  d:
    command: "d {p} {q}"
    in: { p: "/b:p", q: "/c:q" }
)");
  auto td = transform_graph(diamond, bind_all(diamond, "M", "s"));
  CHECK(fireable_set(td, {"/a", "/b"}) == std::set<std::string>{"/c"});
}

// ---------------------------------------------------------------------------
// Properties over generated graphs
// ---------------------------------------------------------------------------

namespace {

// Random layered DAG: node i may consume outputs of nodes j < i.
WorkflowGraph random_graph(std::mt19937& rng, int n) {
  std::map<std::string, StepSpec> steps;
  std::uniform_int_distribution<int> coin(0, 2);
  for (int i = 0; i < n; ++i) {
    StepSpec spec;
    spec.id = "/n" + std::to_string(i);
    spec.binding_path = spec.id;
    spec.command = "cmd";
    spec.outputs.push_back(OutputSpec{"o", "o", false, false});
    for (int j = 0; j < i; ++j) {
      if (coin(rng) == 0) {
        InputSpec in;
        in.name = "i" + std::to_string(j);
        in.source.kind = InputRef::Kind::step_output;
        in.source.step = "/n" + std::to_string(j);
        in.source.output = "o";
        spec.inputs.push_back(std::move(in));
      }
    }
    steps.emplace(spec.id, std::move(spec));
  }
  return WorkflowGraph::build(std::move(steps), {});
}

std::vector<Binding> random_bindings(std::mt19937& rng, int models) {
  std::vector<Binding> out;
  out.push_back(Binding{"/", {"m0", "s"}, false, std::nullopt});
  // deeper overrides onto other models
  for (int m = 1; m < models; ++m) {
    out.push_back(Binding{"/n" + std::to_string(m * 2), {"m" + std::to_string(m), "s"},
                          false, std::nullopt});
  }
  (void)rng;
  return out;
}

}  // namespace

TEST_CASE("property: transform yields a DAG with 2x distinct-model synthetic nodes") {
  std::mt19937 rng(42);
  for (int trial = 0; trial < 25; ++trial) {
    auto g = random_graph(rng, 3 + trial % 8);
    auto bindings = random_bindings(rng, 1 + trial % 3);
    auto table = resolve_bindings(bindings, g);
    std::set<std::string> models;
    for (const auto& [_, b] : table.entries()) models.insert(b.target.model);
    auto t = transform_graph(g, table);
    CHECK(t.is_dag());
    CHECK(t.nodes().size() == g.steps().size() + 2 * models.size());
  }
}

TEST_CASE("property: scatter expansion keeps branches isomorphic and acyclic") {
  auto g = parse_workflow(kFig5Doc);
  for (int card : {1, 2, 5, 9}) {
    auto e = expand_scatter(g, "/count", card);
    auto t = transform_graph(e, bind_all(e, "M", "s"));
    CHECK(t.is_dag());
    // per-branch shape: each branch has the 3 downstream nodes and chain edges
    for (int i = 0; i < card; ++i) {
      std::string s = "[" + std::to_string(i) + "]";
      CHECK(e.has_step("/count" + s));
      CHECK(e.has_step("/seurat" + s));
      CHECK(e.has_step("/singler" + s));
      auto in_seurat = e.in_edges("/seurat" + s);
      REQUIRE(in_seurat.size() == 1);
      CHECK(in_seurat[0].producer == "/count" + s);
      auto in_singler = e.in_edges("/singler" + s);
      REQUIRE(in_singler.size() == 1);
      CHECK(in_singler[0].producer == "/seurat" + s);
    }
  }
}

TEST_CASE("property: fireable_set is monotone") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = random_graph(rng, 6);
    auto t = transform_graph(g, resolve_bindings({Binding{"/", {"M", "s"}, false,
                                                          std::nullopt}},
                                                 g));
    // grow a downward-closed completed set one fireable task at a time
    std::set<std::string> completed;
    std::set<std::string> ever_reachable;
    while (true) {
      auto fire = fireable_set(t, completed);
      for (const auto& f : fire) ever_reachable.insert(f);
      // previously fireable-or-completed tasks never drop out
      for (const auto& r : ever_reachable) {
        CHECK((completed.count(r) || fire.count(r)));
      }
      if (fire.empty()) break;
      completed.insert(*fire.begin());
    }
    CHECK(completed.size() == g.steps().size());
  }
}
