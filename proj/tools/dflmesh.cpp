#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dflmesh/bounds.hpp"
#include "dflmesh/experiments.hpp"
#include "dflmesh/overlay.hpp"
#include "dflmesh/spectral.hpp"

namespace fs = std::filesystem;
using namespace dflmesh;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Graph load_graph(const fs::path& path) {
  if (path.extension() == ".json") return graph_from_json(slurp(path));
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return read_edge_list(in);
}

std::vector<TopologySpec> compared(const ExperimentConfig& cfg) {
  return cfg.compare.topologies.empty() ? std::vector<TopologySpec>{cfg.topology} : cfg.compare.topologies;
}

fs::path output_dir(const std::string& flag, const ExperimentConfig& cfg) {
  if (!flag.empty()) return flag;
  if (!cfg.output.empty()) return cfg.output;
  return "out";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized federated learning over graph topologies"};
  app.require_subcommand(1);

  auto* topology = app.add_subcommand("topology", "Generate or analyze a communication graph");
  topology->require_subcommand(1);
  TopologySpec gen;
  std::string gen_format = "edgelist";
  std::string gen_out;
  auto* generate = topology->add_subcommand("generate", "Write a graph as an edge list or JSON");
  generate->add_option("--kind", gen.kind, "ring|complete|erdos_renyi|expander|cubic")
      ->check(CLI::IsMember({"ring", "complete", "erdos_renyi", "expander", "cubic"}));
  generate->add_option("--n", gen.n, "node count");
  generate->add_option("--d", gen.d, "expander degree");
  generate->add_option("--p", gen.p, "edge probability (default ln n / n)");
  generate->add_option("--seed", gen.seed);
  generate->add_option("--format", gen_format)->check(CLI::IsMember({"edgelist", "json"}));
  generate->add_option("--out", gen_out, "output file (default stdout)");

  std::string analyze_graph;
  std::string analyze_mixing = "laplacian:auto";
  auto* analyze = topology->add_subcommand("analyze", "Print the spectral summary of a graph as JSON");
  analyze->add_option("--graph", analyze_graph, "edge list or .json graph")->required();
  analyze->add_option("--mixing", analyze_mixing, "laplacian[:theta|:auto] | mh | maxdeg");

  std::string config_path;
  std::string out_flag;
  auto* simulate = app.add_subcommand("simulate", "Run one experiment from a JSON config");
  simulate->add_option("--config", config_path)->required();
  simulate->add_option("--out", out_flag, "output directory");

  auto* compare = app.add_subcommand("compare", "Run the experiment on every listed topology");
  compare->add_option("--config", config_path)->required();
  compare->add_option("--out", out_flag, "output directory");

  std::vector<double> fractions;
  auto* failures = app.add_subcommand("failures", "Failure-fraction sweep per topology");
  failures->add_option("--config", config_path)->required();
  failures->add_option("--out", out_flag, "output directory");
  failures->add_option("--fractions", fractions, "failure fractions (default from config, else 0 0.1 0.2)")
      ->delimiter(',');

  std::size_t overlay_nodes = 0;
  std::size_t overlay_rings = 2;
  std::uint64_t overlay_seed = 0;
  std::string churn_path;
  auto* overlay = app.add_subcommand("overlay", "Simulate the virtual-ring overlay protocol");
  overlay->add_option("--nodes", overlay_nodes, "initial joins with ids 0..N-1");
  overlay->add_option("--rings", overlay_rings, "number of virtual rings L (degree 2L)");
  overlay->add_option("--churn-script", churn_path, "lines of: join <id> | fail <id>... | check");
  overlay->add_option("--seed", overlay_seed);
  overlay->add_option("--out", out_flag, "output directory (default stdout summary only)");

  std::string bounds_path;
  std::size_t t_max = 10000;
  auto* bounds = app.add_subcommand("bounds", "Evaluate the convergence and stability bounds");
  bounds->add_option("--config", bounds_path, "bound parameter JSON")->required();
  bounds->add_option("--t-max", t_max, "horizon of the step-size-sum check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (generate->parsed()) {
      const Graph g = build_topology(gen);
      std::ostringstream os;
      if (gen_format == "json") {
        os << to_json(g) << "\n";
      } else {
        write_edge_list(os, g);
      }
      if (gen_out.empty()) {
        std::cout << os.str();
      } else {
        write_file_atomic(gen_out, os.str());
      }
    } else if (analyze->parsed()) {
      const Graph g = load_graph(analyze_graph);
      const auto spec = parse_mixing_spec(analyze_mixing);
      const auto m = build_mixing(g, spec);
      const auto ext = eigen_extremes(g);
      std::cout << to_json(SpectralSummary{ext.lambda2, ext.lambdaN, ext.lambdaN / ext.lambda2, m.lambda()}) << "\n";
    } else if (simulate->parsed()) {
      const auto cfg = load_experiment_config(config_path);
      const auto dir = output_dir(out_flag, cfg);
      const auto outcome = run_from_config(cfg, dir);
      std::cout << "wrote " << outcome.run.records.size() << " metric rows to " << dir.string() << "\n";
    } else if (compare->parsed()) {
      const auto cfg = load_experiment_config(config_path);
      const auto dir = output_dir(out_flag, cfg);
      const auto rows = compare_topologies(cfg, compared(cfg), dir);
      std::cout << slurp(dir / "comparison.csv");
      (void)rows;
    } else if (failures->parsed()) {
      const auto cfg = load_experiment_config(config_path);
      const auto dir = output_dir(out_flag, cfg);
      if (fractions.empty()) fractions = cfg.compare.fractions;
      if (fractions.empty()) fractions = {0.0, 0.1, 0.2};
      failure_sweep(cfg, compared(cfg), fractions, dir);
      std::cout << slurp(dir / "failures.csv");
    } else if (overlay->parsed()) {
      OverlayNetwork net(overlay_rings, overlay_seed);
      for (std::size_t i = 0; i < overlay_nodes; ++i) net.join(i);
      ChurnOutcome churn;
      if (!churn_path.empty()) {
        std::ifstream in(churn_path);
        if (!in) throw Error(ErrorKind::Io, "cannot open " + churn_path);
        churn = apply_churn(net, parse_churn_script(in));
      }
      const auto final_check = net.check();
      const Graph g = net.equivalent_graph();
      std::ostringstream edges;
      write_edge_list(edges, g);
      nlohmann::json summary{{"nodes", net.size()},
                             {"rings", net.rings()},
                             {"events", net.event_log().size()},
                             {"checks", churn.checks},
                             {"failed_checks", churn.failed_checks},
                             {"final_check", final_check.ok()},
                             {"max_degree", g.node_count() ? g.max_degree() : 0},
                             {"connected", g.node_count() ? is_connected(g) : false}};
      if (net.size() >= 2) {
        const auto hops = lookup_cost(net, 1000, overlay_seed);
        summary["lookup_mean_hops"] = hops.mean;
        summary["lookup_max_hops"] = hops.max;
      }
      if (!out_flag.empty()) {
        const fs::path dir = out_flag;
        write_file_atomic(dir / "events.json", event_log_json(net) + "\n");
        write_file_atomic(dir / "topology.txt", edges.str());
        nlohmann::json ids = net.live_ids();
        write_file_atomic(dir / "node_ids.json", ids.dump() + "\n");
      }
      std::cout << summary.dump(2) << "\n";
      if (churn.failed_checks > 0 || !final_check.ok()) {
        for (const auto& p : final_check.problems) std::cerr << p << "\n";
        return 3;
      }
    } else if (bounds->parsed()) {
      const auto params = bound_params_from_json(slurp(bounds_path));
      std::cout << bounds_report_json(params, t_max) << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error (io): " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
