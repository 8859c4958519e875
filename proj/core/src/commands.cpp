// SPDX-License-Identifier: Apache-2.0
#include "rddc/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "rddc/baselines.hpp"
#include "rddc/checkpoint.hpp"
#include "rddc/errors.hpp"
#include "rddc/metrics.hpp"

namespace rddc {

using json = nlohmann::ordered_json;

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
  std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw FormatError("unknown configuration key '" + where + key + "'");
  }
}

template <class T>
void read_key(const json& obj, const char* key, T& target) {
  if (auto it = obj.find(key); it != obj.end()) target = it->get<T>();
}

SynthSpec parse_synth(const json& j) {
  reject_unknown(j, {"classes", "dim", "min_length", "max_length", "per_class", "seed"}, "synth.");
  SynthSpec spec;
  for (const json& c : j.at("classes")) {
    reject_unknown(c, {"frequency", "amplitude", "noise_sd"}, "synth.classes[].");
    SinusoidClass cls;
    read_key(c, "frequency", cls.frequency);
    read_key(c, "amplitude", cls.amplitude);
    read_key(c, "noise_sd", cls.noise_sd);
    spec.classes.push_back(cls);
  }
  read_key(j, "dim", spec.dim);
  read_key(j, "min_length", spec.min_length);
  read_key(j, "max_length", spec.max_length);
  read_key(j, "per_class", spec.per_class);
  read_key(j, "seed", spec.seed);
  return spec;
}

SelectOn parse_select_on(const std::string& s) {
  if (s == "train") return SelectOn::train;
  if (s == "val") return SelectOn::val;
  throw ContractError("select_on must be 'train' or 'val', got '" + s + "'");
}

std::filesystem::path ensure_out_dir(const ExperimentConfig& config) {
  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + config.out_dir.string() + "': " + ec.message());
  return config.out_dir;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::size_t resolve_clusters(const ExperimentConfig& config, const Dataset& ds) {
  std::size_t k = config.clusters ? config.clusters : ds.classes().size();
  if (k < 2) throw ContractError("need at least 2 clusters; set 'clusters' for unlabeled data");
  return k;
}

const char* display_name(BaselineMethod m) {
  switch (m) {
    case BaselineMethod::kmeans: return "k-means";
    case BaselineMethod::ward: return "HC";
    case BaselineMethod::ddc: return "DDC";
  }
  return "?";
}

}  // namespace

const char* to_string(BaselineMethod method) {
  switch (method) {
    case BaselineMethod::kmeans: return "kmeans";
    case BaselineMethod::ward: return "ward";
    case BaselineMethod::ddc: return "ddc";
  }
  return "?";
}

BaselineMethod parse_baseline_method(const std::string& name) {
  if (name == "kmeans" || name == "k-means") return BaselineMethod::kmeans;
  if (name == "ward" || name == "hc") return BaselineMethod::ward;
  if (name == "ddc") return BaselineMethod::ddc;
  throw ContractError("unknown baseline method '" + name + "' (expected kmeans, ward or ddc)");
}

// Configuration ----------------------------------------------------------------

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("configuration is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("configuration must be a JSON object");
  reject_unknown(j, {"data", "synth", "clusters", "model", "train", "split", "baselines", "checkpoint", "out", "seed"},
                 "");
  ExperimentConfig c;
  try {
    if (j.contains("data")) c.data = j["data"].get<std::string>();
    if (j.contains("synth")) c.synth = parse_synth(j["synth"]);
    read_key(j, "clusters", c.clusters);
    if (j.contains("model")) {
      const json& m = j["model"];
      reject_unknown(m, {"gru_units", "fc1_units"}, "model.");
      read_key(m, "gru_units", c.gru_units);
      read_key(m, "fc1_units", c.fc1_units);
    }
    if (j.contains("train")) {
      const json& t = j["train"];
      reject_unknown(t,
                     {"epochs", "batch_size", "restarts", "learning_rate", "beta1", "beta2", "adam_eps", "w2", "w3",
                      "normalize_l2", "sigma_fraction", "select_on", "jobs"},
                     "train.");
      read_key(t, "epochs", c.train.epochs);
      read_key(t, "batch_size", c.train.batch_size);
      read_key(t, "restarts", c.train.restarts);
      read_key(t, "learning_rate", c.train.adam.learning_rate);
      read_key(t, "beta1", c.train.adam.beta1);
      read_key(t, "beta2", c.train.adam.beta2);
      read_key(t, "adam_eps", c.train.adam.eps);
      read_key(t, "w2", c.train.loss.weights.w2);
      read_key(t, "w3", c.train.loss.weights.w3);
      read_key(t, "normalize_l2", c.train.loss.normalize_l2);
      read_key(t, "sigma_fraction", c.train.loss.sigma_fraction);
      read_key(t, "jobs", c.train.jobs);
      if (t.contains("select_on")) c.train.select_on = parse_select_on(t["select_on"].get<std::string>());
    }
    if (j.contains("split")) {
      const json& s = j["split"];
      reject_unknown(s, {"train", "val", "test"}, "split.");
      read_key(s, "train", c.split.train);
      read_key(s, "val", c.split.val);
      read_key(s, "test", c.split.test);
    }
    if (j.contains("baselines")) {
      const json& b = j["baselines"];
      reject_unknown(b, {"methods", "vectorizations", "kmeans_restarts"}, "baselines.");
      if (b.contains("methods")) {
        c.baseline_methods.clear();
        for (const auto& m : b["methods"]) c.baseline_methods.push_back(parse_baseline_method(m.get<std::string>()));
      }
      if (b.contains("vectorizations")) {
        c.vectorizations.clear();
        for (const auto& v : b["vectorizations"]) c.vectorizations.push_back(parse_vectorization(v.get<std::string>()));
      }
      read_key(b, "kmeans_restarts", c.kmeans_restarts);
    }
    if (j.contains("checkpoint")) c.checkpoint = j["checkpoint"].get<std::string>();
    if (j.contains("out")) c.out_dir = j["out"].get<std::string>();
    if (j.contains("seed")) apply_seed(c, j["seed"].get<std::uint64_t>());
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid configuration value: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open configuration '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_seed(ExperimentConfig& config, std::uint64_t seed) {
  config.seed = seed;
  config.split.seed = seed;
  config.train.seed = seed;
  if (config.synth) config.synth->seed = seed;
}

Dataset resolve_dataset(const ExperimentConfig& config) {
  Dataset ds;
  if (config.data) {
    ds = load(*config.data);
  } else if (config.synth) {
    ds = synth_sinusoid(*config.synth);
  } else {
    throw ContractError("configuration names neither 'data' nor 'synth'");
  }
  ds.validate();
  return ds;
}

std::vector<int> dense_labels(const Dataset& ds, const std::vector<int>& classes) {
  std::vector<int> out;
  out.reserve(ds.size());
  for (const auto& s : ds.sequences) {
    if (!s.label) throw ContractError("sequence '" + s.id + "' has no label");
    auto it = std::lower_bound(classes.begin(), classes.end(), *s.label);
    if (it == classes.end() || *it != *s.label) throw ContractError("label outside the known class set");
    out.push_back(static_cast<int>(it - classes.begin()));
  }
  return out;
}

void set_log_level(const std::string& level) { spdlog::set_level(spdlog::level::from_str(level)); }

// Evaluation -------------------------------------------------------------------

EvalMetrics evaluate(const RddcModel& model, const Dataset& ds, const std::vector<int>& classes,
                     const LossOptions& loss) {
  EvalMetrics m;
  ForwardResult r = infer(model, ds);
  if (ds.size() >= 2) {
    LossTerms terms = total_loss(r.h, r.alpha, loss);
    m.l1 = terms.l1;
    m.l2 = terms.l2;
    m.l3 = terms.l3;
    m.total = terms.total.item();
  }
  if (ds.labeled() && !classes.empty()) {
    std::size_t k = model.config().clusters;
    LabeledPartition p(dense_labels(ds, classes), argmax_rows(r.alpha), classes.size(), k);
    m.nmi = nmi(p);
    if (classes.size() == k) {
      m.acc = acc(p);
    } else {
      spdlog::warn("ACC skipped: {} clusters vs {} classes", k, classes.size());
    }
  }
  return m;
}

// Commands ---------------------------------------------------------------------

SynthReport cmd_synth(const ExperimentConfig& config) {
  if (!config.synth) throw ContractError("synth: configuration has no 'synth' section");
  Dataset ds = synth_sinusoid(*config.synth);
  auto dir = ensure_out_dir(config);
  SynthReport r;
  r.dataset_path = dir / "dataset.jsonl";
  save(ds, r.dataset_path);
  r.size = ds.size();
  r.dim = ds.dim;
  r.min_length = ds.min_steps();
  r.max_length = ds.max_steps();
  r.class_counts.assign(config.synth->classes.size(), 0);
  for (const auto& s : ds.sequences) ++r.class_counts[static_cast<std::size_t>(*s.label)];
  return r;
}

TrainReport cmd_train(const ExperimentConfig& config) {
  Dataset ds = resolve_dataset(config);
  std::vector<int> classes = ds.classes();
  std::size_t k = resolve_clusters(config, ds);
  auto idx = split_indices(ds.size(), config.split);
  Dataset train = ds.subset(idx[0]), val = ds.subset(idx[1]), test = ds.subset(idx[2]);

  ModelConfig mc{ds.dim, config.gru_units, config.fc1_units, k};
  spdlog::info("training on {} sequences (val {}, test {}), k={}, {} restarts x {} epochs", train.size(), val.size(),
               test.size(), k, config.train.restarts, config.train.epochs);
  auto experiment = run_experiment<RddcModel>(train, mc, config.train, &val);

  TrainReport report;
  report.test = evaluate(experiment.best, test, classes, config.train.loss);
  report.selected_restart = experiment.selected;
  report.selection_loss = experiment.records[experiment.selected].final_loss;
  report.n_train = train.size();
  report.n_val = val.size();
  report.n_test = test.size();

  auto dir = ensure_out_dir(config);
  report.metrics_path = dir / "metrics.json";
  report.log_path = dir / "run_log.jsonl";
  report.checkpoint_path = dir / "model.json";

  json metrics;
  metrics["acc"] = optional_number(report.test.acc);
  metrics["nmi"] = optional_number(report.test.nmi);
  metrics["l1"] = report.test.l1;
  metrics["l2"] = report.test.l2;
  metrics["l3"] = report.test.l3;
  metrics["total"] = report.test.total;
  metrics["clusters"] = k;
  metrics["selected_restart"] = report.selected_restart;
  metrics["selection_loss"] = report.selection_loss;
  metrics["n_train"] = report.n_train;
  metrics["n_val"] = report.n_val;
  metrics["n_test"] = report.n_test;
  write_text(report.metrics_path, metrics.dump(2) + "\n");

  std::ostringstream log, restarts;
  for (const RunRecord& rec : experiment.records) {
    for (const EpochLoss& e : rec.epochs) {
      json line{{"restart", rec.restart}, {"epoch", e.epoch}, {"l1", e.l1},
                {"l2", e.l2},             {"l3", e.l3},       {"total", e.total}};
      log << line.dump() << '\n';
    }
    json summary{{"restart", rec.restart}, {"seed", rec.seed},         {"final_loss", rec.final_loss},
                 {"selected", rec.selected}, {"failed", rec.failed}, {"diagnostic", rec.diagnostic}};
    restarts << summary.dump() << '\n';
  }
  write_text(report.log_path, log.str());
  write_text(dir / "restarts.jsonl", restarts.str());
  save_checkpoint(experiment.best, report.checkpoint_path);
  return report;
}

BaselineReport cmd_baseline(const ExperimentConfig& config) {
  Dataset ds = resolve_dataset(config);
  if (!ds.labeled()) throw ContractError("baseline: every sequence needs a label");
  std::vector<int> classes = ds.classes();
  std::size_t k = resolve_clusters(config, ds);
  auto idx = split_indices(ds.size(), config.split);
  std::vector<int> labels = dense_labels(ds, classes);
  std::vector<int> test_labels;
  for (std::size_t i : idx[2]) test_labels.push_back(labels[i]);
  const bool zero_mean = is_zero_mean(ds);

  BaselineReport report;
  for (BaselineMethod method : config.baseline_methods) {
    for (Vectorization mode : config.vectorizations) {
      BaselineRow row{method, mode, 0.0, 0.0, {}};
      if (mode == Vectorization::time_avg && zero_mean) {
        row.warning = "time averaging on zero-mean sequences yields all-zero vectors";
        spdlog::warn("{} ({}): {}", display_name(method), to_string(mode), row.warning);
      }
      Matrix all = vectorize(ds, mode);
      Matrix train = all.select_rows(idx[0]);
      Matrix test = all.select_rows(idx[2]);
      std::vector<int> pred;
      switch (method) {
        case BaselineMethod::kmeans: {
          KMeansResult km = kmeans(train, k, {config.kmeans_restarts, 300, config.seed});
          pred = assign_nearest(test, km.centroids);
          break;
        }
        case BaselineMethod::ward: {
          WardResult hc = ward_hc(train, k);
          pred = assign_nearest(test, cluster_means(train, hc.assignments, k));
          break;
        }
        case BaselineMethod::ddc: {
          DdcVectorResult dv = ddc_vector(train, k, config.train, config.fc1_units);
          pred = ddc_vector_predict(dv.model, test);
          break;
        }
      }
      LabeledPartition p(test_labels, pred, classes.size(), k);
      row.nmi = nmi(p);
      if (classes.size() == k) row.acc = acc(p);
      report.rows.push_back(row);
    }
  }

  std::ostringstream table, results;
  table << std::left << std::setw(18) << "Model" << std::right << std::setw(8) << "ACC" << std::setw(8) << "NMI"
        << '\n';
  for (const auto& row : report.rows) {
    std::string label = std::string(display_name(row.method)) + " (" + to_string(row.vectorization) + ")";
    table << std::left << std::setw(18) << label << std::right << std::fixed << std::setprecision(2) << std::setw(8)
          << row.acc << std::setw(8) << row.nmi << '\n';
    json line{{"method", to_string(row.method)},
              {"vectorization", to_string(row.vectorization)},
              {"acc", row.acc},
              {"nmi", row.nmi}};
    if (!row.warning.empty()) line["warning"] = row.warning;
    results << line.dump() << '\n';
  }
  report.table = table.str();
  auto dir = ensure_out_dir(config);
  report.table_path = dir / "baselines.txt";
  report.results_path = dir / "baselines.jsonl";
  write_text(report.table_path, report.table);
  write_text(report.results_path, results.str());
  return report;
}

EmbedReport cmd_embed(const ExperimentConfig& config) {
  if (!config.checkpoint) throw ContractError("embed: no checkpoint given");
  RddcModel model = load_checkpoint(*config.checkpoint);
  Dataset ds = resolve_dataset(config);
  if (ds.dim != model.config().input_size) {
    throw ContractError("embed: checkpoint expects d=" + std::to_string(model.config().input_size) +
                        ", dataset has d=" + std::to_string(ds.dim));
  }
  ForwardResult r = infer(model, ds);
  std::vector<int> clusters = argmax_rows(r.alpha);
  std::size_t dh = r.h.cols(), k = r.alpha.cols();
  auto h = r.h.data();
  auto a = r.alpha.data();
  std::ostringstream out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Sequence& s = ds.sequences[i];
    json line;
    line["id"] = s.id;
    line["label"] = s.label ? json(*s.label) : json(nullptr);
    line["cluster"] = clusters[i];
    line["h"] = std::vector<double>(h.begin() + static_cast<std::ptrdiff_t>(i * dh),
                                    h.begin() + static_cast<std::ptrdiff_t>((i + 1) * dh));
    line["alpha"] = std::vector<double>(a.begin() + static_cast<std::ptrdiff_t>(i * k),
                                        a.begin() + static_cast<std::ptrdiff_t>((i + 1) * k));
    out << line.dump() << '\n';
  }
  EmbedReport report;
  report.path = ensure_out_dir(config) / "embeddings.jsonl";
  report.rows = ds.size();
  write_text(report.path, out.str());
  return report;
}

EvalReport cmd_eval(const ExperimentConfig& config) {
  if (!config.checkpoint) throw ContractError("eval: no checkpoint given");
  RddcModel model = load_checkpoint(*config.checkpoint);
  Dataset ds = resolve_dataset(config);
  if (ds.dim != model.config().input_size) {
    throw ContractError("eval: checkpoint expects d=" + std::to_string(model.config().input_size) +
                        ", dataset has d=" + std::to_string(ds.dim));
  }
  EvalReport report;
  report.metrics = evaluate(model, ds, ds.classes(), config.train.loss);
  json metrics;
  metrics["acc"] = optional_number(report.metrics.acc);
  metrics["nmi"] = optional_number(report.metrics.nmi);
  metrics["l1"] = report.metrics.l1;
  metrics["l2"] = report.metrics.l2;
  metrics["l3"] = report.metrics.l3;
  metrics["total"] = report.metrics.total;
  metrics["n"] = ds.size();
  report.path = ensure_out_dir(config) / "eval_metrics.json";
  write_text(report.path, metrics.dump(2) + "\n");
  return report;
}

}  // namespace rddc
