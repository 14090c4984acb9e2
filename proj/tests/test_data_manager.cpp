#include <doctest.h>

#include <thread>

#include "streamflow/data_manager.hpp"
#include "streamflow/deployment.hpp"
#include "streamflow/errors.hpp"
#include "streamflow/sandbox.hpp"
#include "test_support.hpp"

using namespace streamflow;
using sft::TempDir;
namespace fs = std::filesystem;

namespace {

// Two sandbox models: m1 with disjoint data spaces, m2 with a /scratch
// shared mount. All deployed up front.
struct Harness {
  TempDir tmp;
  EventLog events;
  TokenStore tokens;
  std::unique_ptr<DeploymentManager> deployments;
  std::unique_ptr<DataManager> data;
  std::vector<Resource> m1, m2;

  Harness() {
    StreamflowFile file;
    file.version = "v1.0";
    file.models.emplace("m1", sft::sandbox_model("m1", "s", 2));
    auto shared = sft::sandbox_model("m2", "s", 2);
    shared.type = "sandbox-shared";
    shared.config.shared_mounts = {"/scratch"};
    file.models.emplace("m2", shared);
    deployments = std::make_unique<DeploymentManager>(file, tmp.path(), events);
    data = std::make_unique<DataManager>(tokens, *deployments, tmp / "staging", events);
    m1 = deployments->ensure_deployed("m1");
    m2 = deployments->ensure_deployed("m2");
  }

  SandboxConnector& sandbox(const std::string& model) {
    return dynamic_cast<SandboxConnector&>(deployments->connector(model));
  }

  // Mints a file token and materializes content at a view path on the
  // resource.
  std::string plant(const std::string& token, const Resource& r,
                    const std::string& view_path, const std::string& content) {
    if (!tokens.contains(token)) {
      tokens.put(DataToken{token, DataKind::file, token, std::nullopt, std::nullopt});
    }
    fs::path staging = tmp / ("seed-" + util_sanitize(token));
    sft::write(staging, content);
    deployments->connector(r.model).copy(staging.string(), view_path, r,
                                         CopyKind::local_to_remote);
    data->add_remote_path_mapping(token, r, view_path);
    return view_path;
  }

  static std::string util_sanitize(const std::string& s) {
    std::string out;
    for (char c : s) out.push_back((isalnum(static_cast<unsigned char>(c))) ? c : '_');
    return out;
  }

  size_t copy_events() const {
    return sft::events_of_kind(events.snapshot(), ev::copy).size();
  }
};

}  // namespace

TEST_CASE("remote path registry: add, lookup, multiple replicas, unknown token") {
  Harness h;
  h.tokens.put(DataToken{"t1", DataKind::file, "t1", std::nullopt, std::nullopt});
  h.data->add_remote_path_mapping("t1", h.m1[0], "/work/a");
  auto locs = h.data->locations("t1");
  REQUIRE(locs.size() == 1);
  CHECK(locs[0].path == "/work/a");

  h.data->add_remote_path_mapping("t1", h.m1[1], "/work/b");
  CHECK(h.data->locations("t1").size() == 2);

  // duplicate registration is idempotent
  h.data->add_remote_path_mapping("t1", h.m1[0], "/work/a");
  CHECK(h.data->locations("t1").size() == 2);

  CHECK_THROWS_AS(h.data->add_remote_path_mapping("ghost", h.m1[0], "/work/x"),
                  DataError);
  CHECK_THROWS_AS(h.data->add_remote_path_mapping("t1", h.m1[0], "relative/path"),
                  DataError);
}

TEST_CASE("plan: same resource and path needs no transfer") {
  Harness h;
  h.plant("t", h.m1[0], "/work/data.bin", "payload");
  auto plan = h.data->plan_transfer("t", h.m1[0], "/work/data.bin");
  CHECK(plan.route == TransferPlan::Route::none);
  CHECK(plan.actions.empty());
  size_t before = h.copy_events();
  h.data->execute_transfer(plan);
  CHECK(h.copy_events() == before);  // zero connector copy calls
}

TEST_CASE("plan: cross-model movement is the two-step baseline") {
  Harness h;
  h.plant("t", h.m1[0], "/work/data.bin", "cross-model payload");
  auto plan = h.data->plan_transfer("t", h.m2[0], "/work/in/data.bin");
  CHECK(plan.route == TransferPlan::Route::two_step_via_management);
  REQUIRE(plan.actions.size() == 2);
  CHECK(plan.actions[0].kind == CopyKind::remote_to_local);
  CHECK(plan.actions[1].kind == CopyKind::local_to_remote);

  h.data->execute_transfer(plan);
  CHECK(h.copy_events() == 2);

  // content preserved end to end (oracle hash)
  auto src_real = h.sandbox("m1").real_path(h.m1[0], "/work/data.bin");
  auto dst_real = h.sandbox("m2").real_path(h.m2[0], "/work/in/data.bin");
  CHECK(sft::oracle_tree_hash(src_real) == sft::oracle_tree_hash(dst_real));

  // a second consumer in the destination model costs at most one more
  // copy: same-model replicas are preferred sources
  auto again = h.data->plan_transfer("t", h.m2[1], "/work/in/data.bin");
  CHECK(again.route == TransferPlan::Route::intra_model);
  REQUIRE(again.actions.size() == 1);
  h.data->execute_transfer(again);
  CHECK(h.copy_events() == 3);

  // with the in-model replicas gone (recycled), the staged management copy
  // is reused instead of a second two-step round
  h.data->invalidate_resource(h.m2[0].id);
  h.data->invalidate_resource(h.m2[1].id);
  auto from_mgmt = h.data->plan_transfer("t", h.m2[1], "/work/again/data.bin");
  CHECK(from_mgmt.route == TransferPlan::Route::from_management);
  REQUIRE(from_mgmt.actions.size() == 1);
  h.data->execute_transfer(from_mgmt);
  CHECK(h.copy_events() == 4);
}

TEST_CASE("plan: shared data space at the same path needs no transfer") {
  Harness h;
  h.plant("t", h.m2[0], "/scratch/wf/out.dat", "shared payload");
  auto plan = h.data->plan_transfer("t", h.m2[1], "/scratch/wf/out.dat");
  CHECK(plan.route == TransferPlan::Route::none);
}

TEST_CASE("plan: intra-model transfer to a different path") {
  Harness h;
  h.plant("t", h.m2[0], "/scratch/wf/out.dat", "shared payload");
  auto plan = h.data->plan_transfer("t", h.m2[1], "/work/in/out.dat");
  CHECK(plan.route == TransferPlan::Route::intra_model);
  REQUIRE(plan.actions.size() == 1);
  CHECK(plan.actions[0].kind == CopyKind::remote_to_remote);
  h.data->execute_transfer(plan);
  CHECK(sft::slurp(h.sandbox("m2").real_path(h.m2[1], "/work/in/out.dat")) ==
        "shared payload");
}

TEST_CASE("plan: existence probe detects task-performed transfers") {
  Harness h;
  h.plant("t", h.m1[0], "/work/data.bin", "self-moved");
  // the "task" already moved the bytes to the destination resource
  sft::write(h.sandbox("m1").real_path(h.m1[1], "/work/in/data.bin"), "self-moved");
  auto plan = h.data->plan_transfer("t", h.m1[1], "/work/in/data.bin");
  CHECK(plan.route == TransferPlan::Route::none);
  // and the destination is now a registered replica
  bool found = false;
  for (const auto& loc : h.data->locations("t")) {
    if (loc.resource && loc.resource->id == h.m1[1].id) found = true;
  }
  CHECK(found);
}

TEST_CASE("plan: no valid location is an error") {
  Harness h;
  h.tokens.put(DataToken{"t", DataKind::file, "t", std::nullopt, std::nullopt});
  CHECK_THROWS_WITH_AS(h.data->plan_transfer("t", h.m1[0], "/work/x"),
                       doctest::Contains("no valid location"), DataError);
}

TEST_CASE("execute: failed first leg registers nothing at the destination") {
  Harness h;
  h.plant("t", h.m1[0], "/work/data.bin", "doomed");
  // destroy the source behind the registry's back
  fs::remove(h.sandbox("m1").real_path(h.m1[0], "/work/data.bin"));
  auto plan = h.data->plan_transfer("t", h.m2[0], "/work/in/data.bin");
  REQUIRE(plan.actions.size() == 2);
  CHECK_THROWS_AS(h.data->execute_transfer(plan), DataError);
  for (const auto& loc : h.data->locations("t")) {
    CHECK(loc.resource.has_value());
    CHECK(loc.resource->id != h.m2[0].id);
  }
}

TEST_CASE("collect_output: remote, already-local and directory tokens") {
  Harness h;
  h.plant("t", h.m1[0], "/work/out.dat", "final result");
  fs::path collected = h.data->collect_output("t", h.tmp / "outputs");
  CHECK(sft::slurp(collected) == "final result");
  CHECK(h.copy_events() == 1);

  // already on the management node: zero additional copies
  fs::path again = h.data->collect_output("t", h.tmp / "outputs");
  CHECK(again == collected);
  CHECK(h.copy_events() == 1);

  // directory token: full tree collected (oracle hash)
  h.tokens.put(DataToken{"d", DataKind::directory, "d", std::nullopt, std::nullopt});
  auto& sb = h.sandbox("m1");
  sb.make_dirs(h.m1[0], "/work/tree/sub");
  sft::write(sb.real_path(h.m1[0], "/work/tree/a.txt"), "A");
  sft::write(sb.real_path(h.m1[0], "/work/tree/sub/b.txt"), "B");
  h.data->add_remote_path_mapping("d", h.m1[0], "/work/tree");
  fs::path tree = h.data->collect_output("d", h.tmp / "outputs");
  CHECK(sft::oracle_tree_hash(tree) ==
        sft::oracle_tree_hash(sb.real_path(h.m1[0], "/work/tree")));
}

TEST_CASE("collect_output: value tokens materialize as files") {
  Harness h;
  h.tokens.put(DataToken{"v", DataKind::value, "v", "forty-two", std::nullopt});
  fs::path out = h.data->collect_output("v", h.tmp / "outputs");
  CHECK(sft::slurp(out) == "forty-two");
}

TEST_CASE("coalescing: concurrent identical transfers copy once") {
  Harness h;
  h.plant("t", h.m1[0], "/work/data.bin", std::string(1 << 16, 'q'));
  auto plan = h.data->plan_transfer("t", h.m2[0], "/work/in/data.bin");
  std::vector<std::thread> threads;
  for (int i = 0; i < 4; ++i) {
    threads.emplace_back([&] { h.data->execute_transfer(plan); });
  }
  for (auto& t : threads) t.join();
  // two legs for the winner, nothing for the coalesced followers
  CHECK(h.copy_events() == 2);
}

TEST_CASE("make_durable: at-risk tokens get a management copy before recycle") {
  Harness h;
  h.plant("risky", h.m1[0], "/work/out.dat", "must survive");
  h.plant("safe", h.m1[1], "/work/other.dat", "elsewhere");
  h.data->collect_output("safe", h.tmp / "outputs");  // already durable

  size_t before = h.copy_events();
  auto secured = h.data->make_durable({h.m1[0].id});
  CHECK(secured == std::vector<std::string>{"risky"});
  CHECK(h.copy_events() == before + 1);

  h.data->invalidate_resource(h.m1[0].id);
  bool management_replica = false;
  for (const auto& loc : h.data->locations("risky")) {
    CHECK(loc.valid);
    if (loc.is_management()) management_replica = true;
    if (loc.resource) CHECK(loc.resource->id != h.m1[0].id);
  }
  CHECK(management_replica);
}

TEST_CASE("readable_path: same resource first, then shared mounts") {
  Harness h;
  h.plant("t", h.m2[0], "/scratch/wf/x", "x");
  CHECK(h.data->readable_path("t", h.m2[0]) == std::string("/scratch/wf/x"));
  CHECK(h.data->readable_path("t", h.m2[1]) == std::string("/scratch/wf/x"));
  CHECK_FALSE(h.data->readable_path("t", h.m1[0]).has_value());

  h.plant("u", h.m1[0], "/work/y", "y");
  CHECK(h.data->readable_path("u", h.m1[0]) == std::string("/work/y"));
  CHECK_FALSE(h.data->readable_path("u", h.m1[1]).has_value());
}
