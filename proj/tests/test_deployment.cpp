#include <doctest.h>

#include <thread>

#include "streamflow/deployment.hpp"
#include "streamflow/errors.hpp"
#include "test_support.hpp"

using namespace streamflow;
using sft::MockPool;
using sft::TempDir;

namespace {

StreamflowFile mock_file(std::vector<ModelEntry> models) {
  StreamflowFile file;
  file.version = "v1.0";
  for (auto& m : models) {
    m.type = "mock";
    file.models.emplace(m.name, std::move(m));
  }
  return file;
}

}  // namespace

TEST_CASE("ensure_deployed: concurrent callers cause exactly one deploy") {
  MockPool::install();
  TempDir tmp;
  EventLog events;
  DeploymentManager dm(mock_file({sft::sandbox_model("m", "s", 2)}), tmp.path(), events);

  std::vector<std::thread> threads;
  std::vector<size_t> sizes(8, 0);
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] { sizes[i] = dm.ensure_deployed("m").size(); });
  }
  for (auto& t : threads) t.join();
  for (auto s : sizes) CHECK(s == 2);
  CHECK(MockPool::instance().get("m")->deploy_calls == 1);
  CHECK(dm.deploy_count("m") == 1);
  CHECK(sft::events_of_kind(events.snapshot(), ev::model_deployed).size() == 1);
}

TEST_CASE("ensure_deployed: external models are attached, never deployed") {
  MockPool::install();
  TempDir tmp;
  EventLog events;
  auto ext = sft::sandbox_model("ext", "s", 3);
  ext.external = true;
  DeploymentManager dm(mock_file({ext}), tmp.path(), events);

  auto resources = dm.ensure_deployed("ext");
  CHECK(resources.size() == 3);
  CHECK(MockPool::instance().get("ext")->deploy_calls == 0);
  CHECK(MockPool::instance().get("ext")->get_calls >= 1);
  CHECK(dm.deploy_count("ext") == 0);
  CHECK(sft::events_of_kind(events.snapshot(), ev::model_attached).size() == 1);
  CHECK(sft::events_of_kind(events.snapshot(), ev::model_deployed).empty());
}

TEST_CASE("ensure_deployed: undeclared model") {
  MockPool::install();
  TempDir tmp;
  EventLog events;
  DeploymentManager dm(mock_file({sft::sandbox_model("m", "s", 1)}), tmp.path(), events);
  CHECK_THROWS_WITH_AS(dm.ensure_deployed("ghost"), doctest::Contains("not declared"),
                       EngineError);
}

TEST_CASE("ensure_deployed: failure marks the model failed for later callers") {
  MockPool::install();
  TempDir tmp;
  EventLog events;
  DeploymentManager dm(mock_file({sft::sandbox_model("bad", "s", 1)}), tmp.path(),
                       events);
  MockPool::instance().get("bad")->fail_deploy = true;
  CHECK_THROWS_AS(dm.ensure_deployed("bad"), EngineError);
  CHECK(dm.state("bad") == ModelState::failed);
  CHECK_THROWS_AS(dm.ensure_deployed("bad"), EngineError);
  CHECK(MockPool::instance().get("bad")->deploy_calls == 1);  // no retry storm
  CHECK(sft::events_of_kind(events.snapshot(), ev::model_deploy_failed).size() == 1);
}

TEST_CASE("undeploy_all: every deployed non-external model, exactly once") {
  MockPool::install();
  TempDir tmp;
  EventLog events;
  auto ext = sft::sandbox_model("ext", "s", 1);
  ext.external = true;
  DeploymentManager dm(mock_file({sft::sandbox_model("m1", "s", 1),
                                  sft::sandbox_model("m2", "s", 1),
                                  sft::sandbox_model("unused", "s", 1), ext}),
                       tmp.path(), events);
  dm.ensure_deployed("m1");
  dm.ensure_deployed("m2");
  dm.ensure_deployed("ext");

  dm.undeploy_all();
  CHECK(MockPool::instance().get("m1")->undeploy_calls == 1);
  CHECK(MockPool::instance().get("m2")->undeploy_calls == 1);
  CHECK(MockPool::instance().get("ext")->undeploy_calls == 0);
  CHECK(MockPool::instance().get("unused")->undeploy_calls == 0);

  // second call is a no-op
  dm.undeploy_all();
  CHECK(MockPool::instance().get("m1")->undeploy_calls == 1);
  CHECK(sft::events_of_kind(events.snapshot(), ev::model_undeployed).size() == 2);
}

TEST_CASE("undeploy_all: teardown failures are collected, not short-circuited") {
  MockPool::install();
  TempDir tmp;
  EventLog events;
  DeploymentManager dm(mock_file({sft::sandbox_model("a", "s", 1),
                                  sft::sandbox_model("b", "s", 1)}),
                       tmp.path(), events);
  dm.ensure_deployed("a");
  dm.ensure_deployed("b");
  MockPool::instance().get("a")->fail_undeploy = true;

  CHECK_THROWS_AS(dm.undeploy_all(), TeardownError);
  // the failing model did not stop the other teardown
  CHECK(MockPool::instance().get("b")->undeploy_calls == 1);
  try {
    DeploymentManager dm2(mock_file({sft::sandbox_model("c", "s", 1)}), tmp.path(),
                          events);
    dm2.ensure_deployed("c");
    MockPool::instance().get("c")->fail_undeploy = true;
    dm2.undeploy_all();
  } catch (const TeardownError& ex) {
    CHECK(ex.failures().size() == 1);
  }
}

TEST_CASE("redeploy_service: fresh resources, counted separately from deploys") {
  MockPool::install();
  TempDir tmp;
  EventLog events;
  DeploymentManager dm(mock_file({sft::sandbox_model("m", "s", 2)}), tmp.path(), events);
  auto before = dm.ensure_deployed("m");
  auto fresh = dm.redeploy_service("m", "s");
  REQUIRE(fresh.size() == 2);
  std::set<std::string> old_ids;
  for (const auto& r : before) old_ids.insert(r.id);
  for (const auto& r : fresh) CHECK_FALSE(old_ids.count(r.id));
  CHECK(dm.deploy_count("m") == 1);
  CHECK(dm.redeploy_count("m") == 1);
  CHECK(sft::events_of_kind(events.snapshot(), ev::service_redeployed).size() == 1);
  // bookkeeping now serves the fresh resources
  auto current = dm.resources("m");
  std::set<std::string> current_ids;
  for (const auto& r : current) current_ids.insert(r.id);
  for (const auto& r : fresh) CHECK(current_ids.count(r.id));
}

TEST_CASE("redeploy_service: never-deployed model is an error") {
  MockPool::install();
  TempDir tmp;
  EventLog events;
  DeploymentManager dm(mock_file({sft::sandbox_model("m", "s", 1)}), tmp.path(), events);
  CHECK_THROWS_AS(dm.redeploy_service("m", "s"), EngineError);
}
