#include "dflmesh/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dflmesh/bounds.hpp"
#include "dflmesh/rng.hpp"

namespace dflmesh {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::Config, "config: " + path + ": " + what);
}

// One JSON object of the config; remembers which keys were read so that
// finish() can reject the rest.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) config_error(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number()) config_error(at(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) config_error(at(key), "expected a finite number");
    return x;
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_unsigned()) config_error(at(key), "expected a non-negative integer");
    return v.get<std::size_t>();
  }

  std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_unsigned()) config_error(at(key), "expected a non-negative integer seed");
    return v.get<std::uint64_t>();
  }

  std::string text(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_string()) config_error(at(key), "expected a string");
    return v.get<std::string>();
  }

  std::string choice(const std::string& key, const std::string& fallback, std::initializer_list<const char*> allowed) {
    const std::string v = text(key, fallback);
    for (const char* a : allowed) {
      if (v == a) return v;
    }
    std::string list;
    for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
    config_error(at(key), "'" + v + "' is not one of " + list);
  }

  bool flag(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) config_error(at(key), "expected true or false");
    return v.get<bool>();
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.contains(item.key())) config_error(at(item.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

TopologySpec parse_topology(const json& j, const std::string& path) {
  Section s(j, path);
  TopologySpec t;
  t.kind = s.choice("kind", t.kind, {"ring", "complete", "erdos_renyi", "expander", "cubic", "file"});
  t.n = s.count("n", t.n);
  t.d = s.count("d", t.d);
  t.p = s.number("p", t.p);
  t.seed = s.seed("seed", t.seed);
  t.path = s.text("path", t.path);
  t.label = s.text("label", t.label);
  s.finish();
  if (t.kind == "file" && t.path.empty()) config_error(s.at("path"), "required for kind 'file'");
  if (t.kind == "erdos_renyi" && (t.p < 0.0 || t.p >= 1.0)) config_error(s.at("p"), "must lie in (0,1)");
  return t;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& cell) {
  if (cell == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (cell == "inf") return std::numeric_limits<double>::infinity();
  if (cell == "-inf") return -std::numeric_limits<double>::infinity();
  double x = 0.0;
  auto res = std::from_chars(cell.data(), cell.data() + cell.size(), x);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
    throw Error(ErrorKind::Config, "metrics csv: bad number '" + cell + "'");
  }
  return x;
}

std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ? c : '_';
  return out;
}

double max_shard_smoothness(const Objective& obj, const ExperimentData& data) {
  double L = 0.0;
  for (const auto& shard : data.partition.shards) {
    const auto s = obj.smoothness(data.train, shard);
    if (!s) return 0.0;
    L = std::max(L, *s);
  }
  return L;
}

}  // namespace

std::string TopologySpec::display_name() const {
  if (!label.empty()) return label;
  if (kind == "expander") return "expander_d" + std::to_string(d);
  if (kind == "cubic") return "expander_d3";
  return kind;
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Config, std::string("config: malformed JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  Section top(root, "");
  cfg.name = top.text("name", cfg.name);
  cfg.output = top.text("output", cfg.output);
  if (top.has("topology")) cfg.topology = parse_topology(top.raw("topology"), "topology");

  if (top.has("mixing")) {
    Section s(top.raw("mixing"), "mixing");
    const std::string kind = s.choice("kind", "laplacian", {"laplacian", "mh", "maxdeg"});
    cfg.mixing.kind = kind == "laplacian" ? MixingKind::Laplacian
                      : kind == "mh"      ? MixingKind::MetropolisHastings
                                          : MixingKind::MaxDegree;
    if (s.has("theta")) {
      const auto& v = s.raw("theta");
      if (v.is_string() && v.get<std::string>() == "auto") {
        cfg.mixing.theta.reset();
      } else if (v.is_number()) {
        cfg.mixing.theta = v.get<double>();
        if (!(*cfg.mixing.theta >= 0.0 && *cfg.mixing.theta < 1.0)) config_error("mixing.theta", "must lie in [0,1)");
      } else {
        config_error("mixing.theta", "expected a number or \"auto\"");
      }
      if (kind != "laplacian") config_error("mixing.theta", "only applies to laplacian mixing");
    }
    s.finish();
  }

  if (top.has("model")) {
    Section s(top.raw("model"), "model");
    cfg.model.kind = s.choice("kind", cfg.model.kind, {"least_squares", "logistic", "mlp"});
    cfg.model.hidden = s.count("hidden", cfg.model.hidden);
    cfg.model.l2 = s.number("l2", cfg.model.l2);
    s.finish();
    if (cfg.model.hidden == 0) config_error("model.hidden", "must be positive");
    if (cfg.model.l2 < 0.0) config_error("model.l2", "must be nonnegative");
  }

  if (top.has("train")) {
    Section s(top.raw("train"), "train");
    auto& t = cfg.train;
    const bool has_eta = s.has("eta");
    const bool has_c = s.has("c");
    if (has_eta && has_c) config_error("train", "give either eta or c, not both");
    if (has_c) {
      t.schedule = StepSchedule::InverseTime;
      t.c = s.number("c", 0.0);
      if (!(t.c > 0.0)) config_error("train.c", "must be positive");
    } else {
      t.eta = s.number("eta", t.eta);
      if (!(t.eta > 0.0)) config_error("train.eta", "must be positive");
    }
    t.beta = s.number("beta", t.beta);
    if (!(t.beta >= 0.0 && t.beta < 1.0)) config_error("train.beta", "must lie in [0,1)");
    t.K = s.count("K", t.K);
    if (t.K < 1) config_error("train.K", "must be >= 1");
    t.T = s.count("T", t.T);
    t.batch_size = s.count("batch_size", t.batch_size);
    t.seed = s.seed("seed", t.seed);
    t.eval_stride = s.count("eval_stride", t.eval_stride);
    if (t.eval_stride < 1) config_error("train.eval_stride", "must be >= 1");
    t.threads = s.count("threads", t.threads);
    if (t.threads < 1) config_error("train.threads", "must be >= 1");
    s.finish();
  }

  if (top.has("data")) {
    Section s(top.raw("data"), "data");
    auto& d = cfg.data;
    d.kind = s.choice("kind", d.kind, {"synthetic_classification", "synthetic_regression", "idx"});
    d.samples = s.count("samples", d.samples);
    d.test_samples = s.count("test_samples", d.test_samples);
    d.dims = s.count("dims", d.dims);
    d.classes = static_cast<int>(s.count("classes", static_cast<std::size_t>(d.classes)));
    d.separation = s.number("separation", d.separation);
    d.groups = static_cast<int>(s.count("groups", static_cast<std::size_t>(d.groups)));
    d.group_shift = s.number("group_shift", d.group_shift);
    d.weight_spread = s.number("weight_spread", d.weight_spread);
    d.noise = s.number("noise", d.noise);
    d.seed = s.seed("seed", d.seed);
    d.partition = s.choice("partition", d.partition, {"iid", "label"});
    if (s.has("shards")) d.shards = s.count("shards", 0);
    d.train_images = s.text("train_images", "");
    d.train_labels = s.text("train_labels", "");
    d.test_images = s.text("test_images", "");
    d.test_labels = s.text("test_labels", "");
    s.finish();
    if (d.kind == "idx" && (d.train_images.empty() || d.train_labels.empty() || d.test_images.empty() ||
                            d.test_labels.empty())) {
      config_error("data", "idx data needs train_images, train_labels, test_images and test_labels");
    }
    if (d.kind != "idx" && d.dims == 0) config_error("data.dims", "must be positive");
    if (d.test_samples == 0 && d.kind != "idx") config_error("data.test_samples", "must be positive");
  }

  if (top.has("failures")) {
    Section s(top.raw("failures"), "failures");
    cfg.failures.fraction = s.number("fraction", 0.0);
    if (!(cfg.failures.fraction >= 0.0 && cfg.failures.fraction < 1.0)) config_error("failures.fraction", "must lie in [0,1)");
    cfg.failures.mode = s.choice("mode", "transient", {"transient", "permanent"}) == "transient" ? FailureMode::Transient
                                                                                              : FailureMode::Permanent;
    cfg.failures.seed = s.seed("seed", 0);
    s.finish();
  }

  if (top.has("bounds")) {
    Section s(top.raw("bounds"), "bounds");
    cfg.bounds.enabled = s.flag("enabled", true);
    cfg.bounds.t_max = s.count("t_max", cfg.bounds.t_max);
    if (cfg.bounds.t_max < 2) config_error("bounds.t_max", "must be >= 2");
    s.finish();
  }

  if (top.has("compare")) {
    Section s(top.raw("compare"), "compare");
    if (s.has("topologies")) {
      const auto& list = s.raw("topologies");
      if (!list.is_array()) config_error("compare.topologies", "expected an array");
      for (std::size_t i = 0; i < list.size(); ++i) {
        cfg.compare.topologies.push_back(parse_topology(list[i], "compare.topologies[" + std::to_string(i) + "]"));
      }
    }
    if (s.has("target_loss")) cfg.compare.target_loss = s.number("target_loss", 0.0);
    if (s.has("fractions")) {
      const auto& list = s.raw("fractions");
      if (!list.is_array()) config_error("compare.fractions", "expected an array");
      for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string where = "compare.fractions[" + std::to_string(i) + "]";
        if (!list[i].is_number()) config_error(where, "expected a number");
        const double f = list[i].get<double>();
        if (!(f >= 0.0 && f < 1.0)) config_error(where, "must lie in [0,1)");
        cfg.compare.fractions.push_back(f);
      }
    }
    s.finish();
  }
  top.finish();

  const bool regression = cfg.data.kind == "synthetic_regression";
  if ((cfg.model.kind == "least_squares") != regression) {
    config_error("model.kind", "least_squares pairs with synthetic_regression data, classifiers with labelled data");
  }
  if (cfg.model.kind == "logistic" && cfg.data.kind == "synthetic_classification" && cfg.data.classes != 2) {
    config_error("data.classes", "logistic regression needs exactly 2 classes");
  }
  if (cfg.data.shards && *cfg.data.shards != cfg.topology.n) {
    config_error("data.shards", "must equal topology.n (one shard per node)");
  }
  for (std::size_t i = 0; i < cfg.compare.topologies.size(); ++i) {
    if (cfg.compare.topologies[i].n != cfg.topology.n) {
      config_error("compare.topologies[" + std::to_string(i) + "].n", "must equal topology.n");
    }
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

Graph build_topology(const TopologySpec& spec) {
  const std::size_t n = spec.n;
  if (spec.kind == "ring") return make_ring(n);
  if (spec.kind == "complete") return make_complete(n);
  if (spec.kind == "expander") return make_regular_expander(n, spec.d, spec.seed);
  if (spec.kind == "cubic") return make_cubic_expander(n, spec.seed);
  if (spec.kind == "erdos_renyi") {
    const double p = spec.p > 0.0 ? spec.p : std::log(static_cast<double>(n)) / static_cast<double>(n);
    return sample_connected([&](std::uint64_t s) { return make_erdos_renyi(n, p, s); }, spec.seed);
  }
  if (spec.kind == "file") {
    std::ifstream in(spec.path);
    if (!in) throw Error(ErrorKind::Io, "cannot open graph " + spec.path);
    Graph g = [&] {
      if (std::filesystem::path(spec.path).extension() == ".json") {
        std::stringstream ss;
        ss << in.rdbuf();
        return graph_from_json(ss.str());
      }
      return read_edge_list(in);
    }();
    if (g.node_count() != n) throw Error(ErrorKind::Config, "graph file has " + std::to_string(g.node_count()) +
                                                                " nodes, config says " + std::to_string(n));
    return g;
  }
  throw Error(ErrorKind::Config, "unknown topology kind '" + spec.kind + "'");
}

std::unique_ptr<Objective> build_objective(const ModelSpec& spec, const Dataset& train) {
  if (spec.kind == "least_squares") return least_squares(train.dims());
  if (spec.kind == "logistic") return logistic_regression(train.dims(), spec.l2);
  if (spec.kind == "mlp") return mlp_classifier(train.dims(), spec.hidden, train.classes);
  throw Error(ErrorKind::Config, "unknown model kind '" + spec.kind + "'");
}

ExperimentData build_data(const DataSpec& spec, std::size_t nodes) {
  ExperimentData out;
  if (spec.kind == "synthetic_classification") {
    out.train = synthetic_classification(spec.samples, spec.dims, spec.classes, spec.separation, spec.seed, 0);
    out.test = synthetic_classification(spec.test_samples, spec.dims, spec.classes, spec.separation, spec.seed, 1);
  } else if (spec.kind == "synthetic_regression") {
    out.train = synthetic_regression(spec.samples, spec.dims, spec.groups, spec.group_shift, spec.weight_spread,
                                     spec.noise, spec.seed, 0);
    out.test = synthetic_regression(spec.test_samples, spec.dims, spec.groups, spec.group_shift, spec.weight_spread,
                                    spec.noise, spec.seed, 1);
  } else if (spec.kind == "idx") {
    out.train = load_idx(spec.train_images, spec.train_labels);
    out.test = load_idx(spec.test_images, spec.test_labels);
    if (out.test.dims() != out.train.dims()) throw Error(ErrorKind::DimensionMismatch, "train and test dims differ");
    out.train.classes = out.test.classes = std::max(out.train.classes, out.test.classes);
  } else {
    throw Error(ErrorKind::Config, "unknown data kind '" + spec.kind + "'");
  }
  out.partition = spec.partition == "label" ? partition_by_label(out.train, nodes)
                                            : partition_iid(out.train, nodes, child_seed(spec.seed, 0x9A));
  return out;
}

std::optional<double> reference_optimum(const Objective& obj, const ExperimentData& data) {
  if (obj.name() == "least_squares") {
    return global_loss(obj, least_squares_optimum(data.train, data.partition), data.train, data.partition);
  }
  if (obj.name() == "logistic") {
    const double L = max_shard_smoothness(obj, data);
    if (!(L > 0.0)) return std::nullopt;
    Vector w = Vector::Zero(static_cast<Eigen::Index>(obj.param_count()));
    for (int it = 0; it < 20000; ++it) {
      const Vector g = global_gradient(obj, w, data.train, data.partition);
      if (g.norm() < 1e-10) break;
      w -= g / L;
    }
    return global_loss(obj, w, data.train, data.partition);
  }
  return std::nullopt;
}

ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const ExperimentData& data,
                                 const TopologySpec& topology) {
  ExperimentOutcome out{build_topology(topology), {}, 0.0, {}};
  const MixingMatrix mixing = build_mixing(out.graph, cfg.mixing, &out.theta);
  const auto ext = eigen_extremes(out.graph);
  out.spectral = SpectralSummary{ext.lambda2, ext.lambdaN, ext.lambdaN / ext.lambda2, mixing.lambda()};

  const auto objective = build_objective(cfg.model, data.train);
  TrainConfig train = cfg.train;
  if (const double L = max_shard_smoothness(*objective, data); L > 0.0) train.smoothness_hint = L;
  train.track_gradients = train.track_gradients || cfg.bounds.enabled;
  ExperimentInputs inputs{out.graph, mixing, *objective, data.train, data.partition, data.test, cfg.failures, {}};
  out.run = dflmesh::run_experiment(train, inputs);
  return out;
}

namespace {

json bounds_document(const ExperimentConfig& cfg, const ExperimentData& data, const ExperimentOutcome& outcome) {
  const auto objective = build_objective(cfg.model, data.train);
  const Vector w0 = objective->initial_params(cfg.train.seed);
  std::vector<Vector> points{w0};
  points.insert(points.end(), outcome.run.avg_iterates.begin(), outcome.run.avg_iterates.end());
  const auto est = estimate_constants(*objective, data.train, data.partition, points, cfg.train.batch_size,
                                      child_seed(cfg.train.seed, 0xB0));
  const auto optimum = reference_optimum(*objective, data);
  const double f0 = global_loss(*objective, w0, data.train, data.partition);
  double sup_f = f0;
  for (const auto& r : outcome.run.records) sup_f = std::max(sup_f, r.train_loss);
  std::size_t min_shard = std::numeric_limits<std::size_t>::max();
  for (const auto& s : data.partition.shards) min_shard = std::min(min_shard, s.size());

  BoundParams p;
  p.L = est.L;
  p.sigma = est.sigma;
  p.zeta = est.zeta;
  p.B = est.B;
  p.K = static_cast<double>(cfg.train.K);
  p.T = static_cast<double>(std::max<std::size_t>(cfg.train.T, 1));
  p.beta = cfg.train.beta;
  p.lambda = outcome.spectral.lambda_mix;
  p.N = static_cast<double>(data.partition.size());
  p.n = static_cast<double>(min_shard);
  // Without a known optimum, min f >= 0 keeps the gap an over-estimate.
  p.f_gap = std::max(0.0, f0 - optimum.value_or(0.0));
  p.sup_f = sup_f;
  if (cfg.train.schedule == StepSchedule::Constant) {
    p.eta = cfg.train.eta;
  } else {
    p.c = cfg.train.c;
  }
  json doc = json::parse(bounds_report_json(p, cfg.bounds.t_max));
  doc["parameters"] = json{{"L", p.L},         {"sigma", p.sigma}, {"zeta", p.zeta}, {"B", p.B},
                           {"K", p.K},         {"T", p.T},         {"eta", p.eta},   {"c", p.c},
                           {"beta", p.beta},   {"lambda", p.lambda}, {"N", p.N},     {"n", p.n},
                           {"f_gap", p.f_gap}, {"sup_f", p.sup_f}};
  double observed = global_gradient(*objective, w0, data.train, data.partition).squaredNorm();
  for (double g : outcome.run.avg_grad_norm_sq) observed = std::min(observed, g);
  doc["observed_min_grad_norm_sq"] = observed;
  return doc;
}

}  // namespace

ExperimentOutcome run_from_config(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  const ExperimentData data = build_data(cfg.data, cfg.topology.n);
  ExperimentOutcome outcome = run_experiment(cfg, data, cfg.topology);
  std::filesystem::create_directories(out_dir);
  write_file_atomic(out_dir / "metrics.csv", metrics_csv(outcome.run.records));
  write_file_atomic(out_dir / "topology.json", to_json(outcome.graph) + "\n");
  write_file_atomic(out_dir / "spectral.json", to_json(outcome.spectral) + "\n");
  if (cfg.bounds.enabled) write_file_atomic(out_dir / "bounds.json", bounds_document(cfg, data, outcome).dump(2) + "\n");
  return outcome;
}

std::string metrics_csv(const std::vector<MetricsRecord>& records) {
  std::string out = "round,train_loss,test_loss,test_acc,consensus_dist,cum_comm_cost\n";
  for (const auto& r : records) {
    out += std::to_string(r.round) + "," + format_double(r.train_loss) + "," + format_double(r.test_loss) + "," +
           format_double(r.test_acc) + "," + format_double(r.consensus_dist) + "," + format_double(r.cum_comm_cost) +
           "\n";
  }
  return out;
}

std::vector<MetricsRecord> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "round,train_loss,test_loss,test_acc,consensus_dist,cum_comm_cost") {
    throw Error(ErrorKind::Config, "metrics csv: unexpected header");
  }
  std::vector<MetricsRecord> out;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') throw Error(ErrorKind::Config, "metrics csv: CR line ending");
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw Error(ErrorKind::Config, "metrics csv: expected 6 columns");
    MetricsRecord r;
    r.round = static_cast<std::size_t>(parse_double(cells[0]));
    r.train_loss = parse_double(cells[1]);
    r.test_loss = parse_double(cells[2]);
    r.test_acc = parse_double(cells[3]);
    r.consensus_dist = parse_double(cells[4]);
    r.cum_comm_cost = parse_double(cells[5]);
    out.push_back(r);
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<ComparisonRow> compare_topologies(const ExperimentConfig& cfg, const std::vector<TopologySpec>& topologies,
                                              const std::optional<std::filesystem::path>& out_dir) {
  const ExperimentData data = build_data(cfg.data, cfg.topology.n);
  const auto objective = build_objective(cfg.model, data.train);
  std::optional<double> threshold = cfg.compare.target_loss;
  if (auto opt = reference_optimum(*objective, data)) threshold = (1.0 + 1e-3) * *opt;

  std::vector<ComparisonRow> rows;
  for (const auto& topo : topologies) {
    if (topo.n != cfg.topology.n) throw Error(ErrorKind::Config, "all compared topologies need the same n");
    const auto outcome = run_experiment(cfg, data, topo);
    ComparisonRow row;
    row.topology = topo.display_name();
    row.lambda = outcome.spectral.lambda_mix;
    const auto& recs = outcome.run.records;
    if (threshold) {
      for (const auto& r : recs) {
        if (r.train_loss <= *threshold) {
          row.rounds_to_threshold = r.round;
          break;
        }
      }
    }
    row.final_accuracy = recs.empty() ? std::numeric_limits<double>::quiet_NaN() : recs.back().test_acc;
    row.final_train_loss = recs.empty() ? std::numeric_limits<double>::quiet_NaN() : recs.back().train_loss;
    row.total_cost = recs.empty() ? 0.0 : recs.back().cum_comm_cost;
    if (out_dir) write_file_atomic(*out_dir / ("metrics_" + slug(row.topology) + ".csv"), metrics_csv(recs));
    rows.push_back(std::move(row));
  }
  if (out_dir) {
    std::string csv = "topology,lambda,rounds_to_threshold,final_accuracy,final_train_loss,total_cost\n";
    for (const auto& r : rows) {
      csv += r.topology + "," + format_double(r.lambda) + "," +
             (r.rounds_to_threshold ? std::to_string(*r.rounds_to_threshold) : std::string()) + "," +
             format_double(r.final_accuracy) + "," + format_double(r.final_train_loss) + "," +
             format_double(r.total_cost) + "\n";
    }
    write_file_atomic(*out_dir / "comparison.csv", csv);
  }
  return rows;
}

std::vector<FailureRow> failure_sweep(const ExperimentConfig& cfg, const std::vector<TopologySpec>& topologies,
                                      const std::vector<double>& fractions,
                                      const std::optional<std::filesystem::path>& out_dir) {
  const ExperimentData data = build_data(cfg.data, cfg.topology.n);
  std::vector<FailureRow> rows;
  for (const auto& topo : topologies) {
    ExperimentConfig base_cfg = cfg;
    base_cfg.failures.fraction = 0.0;
    const auto base = run_experiment(base_cfg, data, topo);
    const double base_loss = base.run.records.empty() ? 0.0 : base.run.records.back().train_loss;
    const double base_acc = base.run.records.empty() ? 0.0 : base.run.records.back().test_acc;
    for (double f : fractions) {
      if (!(f >= 0.0 && f < 1.0)) throw Error(ErrorKind::InvalidArgument, "failure fractions must lie in [0,1)");
      ExperimentConfig run_cfg = cfg;
      run_cfg.failures.fraction = f;
      const auto outcome = f == 0.0 ? base : run_experiment(run_cfg, data, topo);
      FailureRow row;
      row.topology = topo.display_name();
      row.fraction = f;
      const auto& recs = outcome.run.records;
      row.final_train_loss = recs.empty() ? 0.0 : recs.back().train_loss;
      row.final_accuracy = recs.empty() ? 0.0 : recs.back().test_acc;
      row.loss_increase = row.final_train_loss - base_loss;
      row.accuracy_drop = base_acc - row.final_accuracy;
      row.partitioned_rounds = outcome.run.partitioned_rounds;
      row.rounds = cfg.train.T;
      rows.push_back(row);
    }
  }
  if (out_dir) {
    std::string csv =
        "topology,fraction,final_train_loss,final_accuracy,loss_increase,accuracy_drop,partitioned_rounds,rounds\n";
    for (const auto& r : rows) {
      csv += r.topology + "," + format_double(r.fraction) + "," + format_double(r.final_train_loss) + "," +
             format_double(r.final_accuracy) + "," + format_double(r.loss_increase) + "," +
             format_double(r.accuracy_drop) + "," + std::to_string(r.partitioned_rounds) + "," +
             std::to_string(r.rounds) + "\n";
    }
    write_file_atomic(*out_dir / "failures.csv", csv);
  }
  return rows;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::InvalidArgument:
    case ErrorKind::Io:
    case ErrorKind::BadMagic:
    case ErrorKind::Truncated:
    case ErrorKind::CountMismatch:
    case ErrorKind::DuplicateId:
    case ErrorKind::UnknownId:
    case ErrorKind::LabelOutOfRange:
    case ErrorKind::NotAClassifier:
    case ErrorKind::DimensionMismatch:
      return 2;
    default:
      return 3;
  }
}

}  // namespace dflmesh
