#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "dflmesh/experiments.hpp"

using namespace dflmesh;
namespace fs = std::filesystem;

namespace {

const char* kSmallRegression = R"({
  "name": "small",
  "topology": {"kind": "ring", "n": 6},
  "mixing": {"kind": "laplacian", "theta": "auto"},
  "model": {"kind": "least_squares"},
  "train": {"eta": 0.01, "beta": 0.5, "K": 2, "T": 12, "batch_size": 4, "seed": 3, "eval_stride": 4},
  "data": {"kind": "synthetic_regression", "samples": 120, "test_samples": 40, "dims": 4, "noise": 0.5, "seed": 9}
})";

std::string error_message(const std::string& text) {
  try {
    (void)parse_experiment_config(text);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    return e.what();
  }
  return "";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dflmesh_test_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_SUITE("experiments") {
  TEST_CASE("config parses with defaults filled in") {
    const auto cfg = parse_experiment_config(kSmallRegression);
    CHECK(cfg.name == "small");
    CHECK(cfg.topology.n == 6);
    CHECK_FALSE(cfg.mixing.theta.has_value());
    CHECK(cfg.train.K == 2);
    CHECK(cfg.train.schedule == StepSchedule::Constant);
    CHECK(cfg.data.dims == 4);
    CHECK(cfg.failures.fraction == 0.0);
  }

  TEST_CASE("config errors name the key path") {
    CHECK(error_message(R"({"train": {"K": 1, "bogus": 2}})").find("train.bogus") != std::string::npos);
    CHECK(error_message(R"({"train": {"K": "three"}})").find("train.K") != std::string::npos);
    CHECK(error_message(R"({"topology": {"kind": "torus"}})").find("topology.kind") != std::string::npos);
    CHECK(error_message(R"({"extra": 1})").find("extra") != std::string::npos);
    CHECK(error_message(R"({"mixing": {"theta": 1.5}})").find("mixing") != std::string::npos);
    CHECK(error_message(R"({"train": {"eta": 0.1, "c": 1}})").find("train") != std::string::npos);
    CHECK(error_message(R"({"failures": {"fraction": 1.0}})").find("failures.fraction") != std::string::npos);
    const std::string bad_json = error_message("{\n  \"name\": \"x\",\n  oops\n}");
    CHECK(bad_json.find("line 3") != std::string::npos);
    CHECK(bad_json.find("column") != std::string::npos);
  }

  TEST_CASE("config cross-checks") {
    CHECK_FALSE(error_message(R"({"model": {"kind": "least_squares"}, "data": {"kind": "synthetic_classification"}})").empty());
    CHECK_FALSE(error_message(R"({"model": {"kind": "logistic"}, "data": {"classes": 5}})").empty());
    CHECK_FALSE(error_message(R"({"topology": {"n": 6}, "model": {"kind": "mlp"}, "data": {"shards": 5}})").empty());
    CHECK_FALSE(error_message(
                    R"({"topology": {"n": 6}, "model": {"kind": "mlp"}, "compare": {"topologies": [{"kind": "ring", "n": 7}]}})")
                    .empty());
  }

  TEST_CASE("T = 0 writes only the header") {
    auto cfg = parse_experiment_config(kSmallRegression);
    cfg.train.T = 0;
    const fs::path dir = scratch_dir("t0");
    const auto out = run_from_config(cfg, dir);
    CHECK(out.run.records.empty());
    CHECK(slurp(dir / "metrics.csv") == "round,train_loss,test_loss,test_acc,consensus_dist,cum_comm_cost\n");
    fs::remove_all(dir);
  }

  TEST_CASE("reruns are byte-identical and the CSV parses back") {
    const auto cfg = parse_experiment_config(kSmallRegression);
    const fs::path a = scratch_dir("rerun_a");
    const fs::path b = scratch_dir("rerun_b");
    const auto out = run_from_config(cfg, a);
    (void)run_from_config(cfg, b);
    for (const char* f : {"metrics.csv", "topology.json", "spectral.json"}) {
      CHECK(slurp(a / f) == slurp(b / f));
    }
    const auto records = parse_metrics_csv(slurp(a / "metrics.csv"));
    REQUIRE(records.size() == out.run.records.size());
    CHECK(records.size() == 3);  // rounds 4, 8 and 12
    for (std::size_t i = 0; i < records.size(); ++i) {
      CHECK(records[i].round == out.run.records[i].round);
      CHECK(records[i].train_loss == out.run.records[i].train_loss);
      CHECK(records[i].cum_comm_cost == out.run.records[i].cum_comm_cost);
      CHECK(std::isnan(records[i].test_acc));
    }
    CHECK_FALSE(fs::exists(a / "metrics.csv.tmp"));
    const auto topo = graph_from_json(slurp(a / "topology.json"));
    CHECK(topo.edge_count() == 6);
    fs::remove_all(a);
    fs::remove_all(b);
  }

  TEST_CASE("metrics CSV rejects malformed input") {
    CHECK_THROWS_AS(parse_metrics_csv("round,loss\n"), Error);
    CHECK_THROWS_AS(parse_metrics_csv("round,train_loss,test_loss,test_acc,consensus_dist,cum_comm_cost\n1,2\n"), Error);
    CHECK_THROWS_AS(parse_metrics_csv("round,train_loss,test_loss,test_acc,consensus_dist,cum_comm_cost\r\n"), Error);
  }

  TEST_CASE("bounds document") {
    auto cfg = parse_experiment_config(kSmallRegression);
    cfg.bounds.enabled = true;
    cfg.bounds.t_max = 200;
    const fs::path dir = scratch_dir("bounds");
    (void)run_from_config(cfg, dir);
    const auto doc = nlohmann::json::parse(slurp(dir / "bounds.json"));
    CHECK(doc.contains("parameters"));
    CHECK(doc.contains("convergence"));
    CHECK(doc["observed_min_grad_norm_sq"].get<double>() >= 0.0);
    fs::remove_all(dir);
  }

  TEST_CASE("single-topology comparison gives one row") {
    const auto cfg = parse_experiment_config(kSmallRegression);
    const fs::path dir = scratch_dir("compare");
    const auto rows = compare_topologies(cfg, {cfg.topology}, dir);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].topology == "ring");
    CHECK(rows[0].total_cost > 0.0);
    CHECK(fs::exists(dir / "comparison.csv"));
    CHECK(fs::exists(dir / "metrics_ring.csv"));
    fs::remove_all(dir);
  }

  TEST_CASE("failure sweep at fraction zero matches the baseline") {
    const auto cfg = parse_experiment_config(kSmallRegression);
    const auto rows = failure_sweep(cfg, {cfg.topology}, {0.0, 0.34});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].loss_increase == 0.0);
    CHECK(rows[0].partitioned_rounds == 0);
    CHECK(rows[1].fraction == 0.34);
    CHECK(rows[1].rounds == 12);
  }

  TEST_CASE("label-sharded comparison: better connected graphs reach higher accuracy") {
    const auto cfg = parse_experiment_config(R"({
      "topology": {"kind": "ring", "n": 10},
      "model": {"kind": "mlp", "hidden": 16},
      "train": {"eta": 0.05, "K": 5, "T": 25, "batch_size": 16, "seed": 1, "eval_stride": 25},
      "data": {"kind": "synthetic_classification", "classes": 10, "samples": 1000, "test_samples": 300,
               "dims": 10, "separation": 3, "partition": "label", "seed": 5}
    })");
    TopologySpec complete;
    complete.kind = "complete";
    complete.n = 10;
    const auto rows = compare_topologies(cfg, {cfg.topology, complete});
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].final_accuracy >= rows[0].final_accuracy);
    CHECK(rows[1].lambda < rows[0].lambda);
  }

  TEST_CASE("exit codes") {
    CHECK(exit_code_for(ErrorKind::Config) == 2);
    CHECK(exit_code_for(ErrorKind::BadMagic) == 2);
    CHECK(exit_code_for(ErrorKind::UnknownId) == 2);
    CHECK(exit_code_for(ErrorKind::NonFinite) == 3);
    CHECK(exit_code_for(ErrorKind::Disconnected) == 3);
    CHECK(exit_code_for(ErrorKind::StepsizeGuard) == 3);
  }
}
