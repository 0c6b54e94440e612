#include "taildep/commands.hpp"

#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "taildep/corpus.hpp"
#include "taildep/extremes.hpp"
#include "taildep/network.hpp"
#include "taildep/network_io.hpp"
#include "taildep/observation.hpp"
#include "taildep/rng.hpp"
#include "taildep/tensor_io.hpp"

namespace taildep {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string strf(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

std::string joined(const std::string& scope, const std::string& key) {
  return scope.empty() ? key : scope + "." + key;
}

template <typename T>
T field_or(const json& j, const std::string& scope, const std::string& key, T def) {
  if (!j.contains(key)) return def;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field \"" + joined(scope, key) + "\" has the wrong type");
  }
}

std::size_t size_field(const json& j, const std::string& scope, const std::string& key,
                       std::size_t def) {
  const auto v = field_or<std::int64_t>(j, scope, key, static_cast<std::int64_t>(def));
  if (v <= 0) throw ConfigError("config field \"" + joined(scope, key) + "\" must be positive");
  return static_cast<std::size_t>(v);
}

std::string require_str(const json& j, const std::string& scope, const std::string& key) {
  if (!j.contains(key))
    throw ConfigError("config field \"" + joined(scope, key) + "\" is required");
  try {
    return j.at(key).get<std::string>();
  } catch (const json::exception&) {
    throw ConfigError("config field \"" + joined(scope, key) + "\" must be a string");
  }
}

json section(const json& cfg, const std::string& name) {
  if (!cfg.contains(name)) return json::object();
  const json& s = cfg.at(name);
  if (!s.is_object()) throw ConfigError("config field \"" + name + "\" must be an object");
  return s;
}

json load_config(const CliOptions& opt) {
  json cfg = json::object();
  if (!opt.config_path.empty()) {
    std::ifstream in(opt.config_path, std::ios::binary);
    if (!in) throw IoError("cannot open config file: " + opt.config_path);
    const std::string text((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    try {
      cfg = json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!cfg.is_object()) throw ConfigError("config root must be a JSON object");
  }
  if (opt.has_seed) cfg["seed"] = opt.seed;
  if (opt.has_threads) cfg["threads"] = opt.threads;
  if (!opt.out_dir.empty()) cfg["out"] = opt.out_dir;
  return cfg;
}

std::uint64_t require_seed(const json& cfg) {
  if (!cfg.contains("seed"))
    throw ConfigError("seed is required: pass --seed or set the \"seed\" config field");
  try {
    return cfg.at("seed").get<std::uint64_t>();
  } catch (const json::exception&) {
    throw ConfigError("config field \"seed\" must be a non-negative integer");
  }
}

int get_threads(const json& cfg) {
  const auto t = field_or<std::int64_t>(cfg, "", "threads", 1);
  if (t < 1) throw ConfigError("config field \"threads\" must be >= 1");
  return static_cast<int>(t);
}

std::string get_out(const json& cfg) {
  return field_or<std::string>(cfg, "", "out", "run");
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("short write to " + path);
}

void append_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("short write to " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void emit_resolved(const std::string& dir, const json& resolved) {
  ensure_dir(dir);
  write_text(dir + "/resolved-config.json", resolved.dump(2) + "\n");
}

std::pair<double, double> range_field(const json& s, const std::string& key, double lo,
                                      double hi) {
  if (!s.contains(key)) return {lo, hi};
  const json& r = s.at(key);
  if (!r.is_array() || r.size() != 2)
    throw ConfigError("config field \"scenario." + key + "\" must be [lo, hi]");
  try {
    return {r[0].get<double>(), r[1].get<double>()};
  } catch (const json::exception&) {
    throw ConfigError("config field \"scenario." + key + "\" must hold two numbers");
  }
}

std::vector<double> grid_field(const json& s, const std::string& key,
                               std::vector<double> def) {
  if (!s.contains(key)) return def;
  const json& a = s.at(key);
  if (!a.is_array() || a.empty())
    throw ConfigError("config field \"scenario." + key +
                      "\" must be a non-empty array of numbers");
  std::vector<double> out;
  for (const json& v : a) {
    try {
      out.push_back(v.get<double>());
    } catch (const json::exception&) {
      throw ConfigError("config field \"scenario." + key +
                        "\" must be a non-empty array of numbers");
    }
  }
  return out;
}

std::vector<std::size_t> sizes_field(const json& j, const std::string& scope,
                                     const std::string& key, std::vector<std::size_t> def) {
  if (!j.contains(key)) return def;
  const json& a = j.at(key);
  if (!a.is_array() || a.empty())
    throw ConfigError("config field \"" + joined(scope, key) +
                      "\" must be a non-empty array of positive integers");
  std::vector<std::size_t> out;
  for (const json& v : a) {
    std::int64_t x = 0;
    try {
      x = v.get<std::int64_t>();
    } catch (const json::exception&) {
      x = 0;
    }
    if (x <= 0)
      throw ConfigError("config field \"" + joined(scope, key) +
                        "\" must be a non-empty array of positive integers");
    out.push_back(static_cast<std::size_t>(x));
  }
  return out;
}

ScenarioSpec scenario_from_config(const json& cfg) {
  const json s = section(cfg, "scenario");
  ScenarioSpec sp;
  sp.id = static_cast<int>(field_or<std::int64_t>(s, "scenario", "id", sp.id));
  sp.d = size_field(s, "scenario", "sites", sp.d);
  sp.n_datasets = size_field(s, "scenario", "datasets", sp.n_datasets);
  sp.n_reps = size_field(s, "scenario", "replications", sp.n_reps);
  sp.u = field_or<double>(s, "scenario", "threshold", sp.u);
  const auto classes = field_or<std::int64_t>(s, "scenario", "classes", 2);
  if (classes != 2 && classes != 3)
    throw ConfigError("config field \"scenario.classes\" must be 2 or 3");
  sp.three_class = classes == 3;
  std::tie(sp.sigma_lo, sp.sigma_hi) = range_field(s, "sigma_range", sp.sigma_lo, sp.sigma_hi);
  std::tie(sp.delta_lo, sp.delta_hi) = range_field(s, "delta_range", sp.delta_lo, sp.delta_hi);
  std::tie(sp.a_lo, sp.a_hi) = range_field(s, "a_range", sp.a_lo, sp.a_hi);
  sp.sigma_grid = grid_field(s, "sigma_grid", sp.sigma_grid);
  sp.delta_grid = grid_field(s, "delta_grid", sp.delta_grid);
  sp.a_grid = grid_field(s, "a_grid", sp.a_grid);
  sp.validate();
  return sp;
}

json scenario_to_json(const ScenarioSpec& sp) {
  json s;
  s["id"] = sp.id;
  s["sites"] = sp.d;
  s["datasets"] = sp.n_datasets;
  s["replications"] = sp.n_reps;
  s["threshold"] = sp.u;
  s["classes"] = sp.three_class ? 3 : 2;
  s["sigma_range"] = {sp.sigma_lo, sp.sigma_hi};
  s["delta_range"] = {sp.delta_lo, sp.delta_hi};
  s["a_range"] = {sp.a_lo, sp.a_hi};
  s["sigma_grid"] = sp.sigma_grid;
  s["delta_grid"] = sp.delta_grid;
  s["a_grid"] = sp.a_grid;
  return s;
}

const std::string kHistoryHeader = "epoch,train_loss,train_acc,val_loss,val_acc";

std::string history_row(const EpochStats& e) {
  return strf("%zu,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss, e.train_acc, e.val_loss,
              e.val_acc);
}

std::vector<EpochStats> read_history(const std::string& path) {
  const auto rows = csv::parse(read_text(path));
  const std::vector<std::string> header = {"epoch", "train_loss", "train_acc", "val_loss",
                                           "val_acc"};
  if (rows.empty() || rows.front() != header)
    throw IoError(path + ": expected header " + kHistoryHeader);
  std::vector<EpochStats> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 5) throw IoError(path + ": malformed row " + std::to_string(i + 1));
    EpochStats e;
    try {
      e.epoch = static_cast<std::size_t>(std::stoull(rows[i][0]));
      e.train_loss = std::stod(rows[i][1]);
      e.train_acc = std::stod(rows[i][2]);
      e.val_loss = std::stod(rows[i][3]);
      e.val_acc = std::stod(rows[i][4]);
    } catch (const std::exception&) {
      throw IoError(path + ": malformed row " + std::to_string(i + 1));
    }
    out.push_back(e);
  }
  return out;
}

int cmd_simulate(const json& cfg, bool verbose) {
  const std::uint64_t seed = require_seed(cfg);
  const int threads = get_threads(cfg);
  const std::string out = get_out(cfg);
  const ScenarioSpec spec = scenario_from_config(cfg);
  const std::string corpus_dir = out + "/corpus";

  const CorpusManifest m = generate_corpus(spec, seed, corpus_dir, threads);

  json resolved;
  resolved["command"] = "simulate";
  resolved["seed"] = seed;
  resolved["threads"] = threads;
  resolved["out"] = out;
  resolved["scenario"] = scenario_to_json(spec);
  emit_resolved(corpus_dir, resolved);

  std::size_t labels[3] = {0, 0, 0};
  std::size_t parts[3] = {0, 0, 0};
  std::size_t approx = 0;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    ++labels[class_index(m.records[i].label)];
    ++parts[static_cast<int>(m.split[i])];
    if (m.records[i].approximate) ++approx;
  }

  std::printf("corpus: %zu datasets, %zu sites, %zu replications (scenario %d)\n",
              m.records.size(), m.d, m.n_reps, m.scenario);
  if (verbose) {
    static const char* kLayout[] = {
        "fresh random site design per dataset, random parameters",
        "one fixed site design, random parameters",
        "one fixed site design, parameters on a regular grid",
    };
    std::printf("layout: %s\n", kLayout[m.scenario - 1]);
  }
  if (m.classes == 3)
    std::printf("labels: AD %zu, AI %zu, MIX %zu\n", labels[0], labels[1], labels[2]);
  else
    std::printf("labels: AD %zu, AI %zu\n", labels[0], labels[1]);
  std::printf("split: training %zu, validation %zu, testing %zu\n", parts[0], parts[1],
              parts[2]);
  if (approx > 0)
    std::fprintf(stderr,
                 "warning: the storm budget was exhausted in %zu datasets; "
                 "their upper tails are approximate\n",
                 approx);
  for (int p = 0; p < 3; ++p) {
    if (parts[p] == 0) {
      static const char* kPart[] = {"training", "validation", "testing"};
      std::fprintf(stderr, "warning: the %s split is empty; add datasets per class\n",
                   kPart[p]);
    }
  }
  std::printf("wrote %s\n", (corpus_dir + "/manifest.json").c_str());
  return 0;
}

int cmd_train(const json& cfg, bool verbose) {
  const std::uint64_t seed = require_seed(cfg);
  const int threads = get_threads(cfg);
  const std::string out = get_out(cfg);
  const json t = section(cfg, "train");

  const std::string corpus_dir = field_or<std::string>(t, "train", "corpus", out + "/corpus");
  TrainConfig tc;
  tc.learning_rate = field_or<double>(t, "train", "learning_rate", tc.learning_rate);
  tc.l2 = field_or<double>(t, "train", "l2", tc.l2);
  tc.batch_size = size_field(t, "train", "batch_size", tc.batch_size);
  tc.max_epochs = size_field(t, "train", "max_epochs", tc.max_epochs);
  tc.patience = size_field(t, "train", "patience", tc.patience);
  tc.early_stop = field_or<bool>(t, "train", "early_stop", tc.early_stop);
  tc.threads = threads;
  const std::size_t dense1 = size_field(t, "train", "dense1", kDefaultDense1);
  const std::size_t dense2 = size_field(t, "train", "dense2", kDefaultDense2);
  const bool resume = field_or<bool>(t, "train", "resume", false);

  const LoadedCorpus corpus = load_corpus(corpus_dir);
  const LabeledSet tr = corpus_part(corpus, SplitPart::Training);
  const LabeledSet va = corpus_part(corpus, SplitPart::Validation);
  if (tr.xs.empty()) throw ConfigError("the corpus has no training datasets");
  if (va.xs.empty()) throw ConfigError("the corpus has no validation datasets");

  const auto classes = static_cast<std::size_t>(field_or<std::int64_t>(
      t, "train", "classes", static_cast<std::int64_t>(corpus.manifest.classes)));
  if (classes != corpus.manifest.classes)
    throw ConfigError(strf("train.classes=%zu but the corpus is labeled with %zu classes",
                           classes, corpus.manifest.classes));

  const std::string model_dir = out + "/model";
  ensure_dir(model_dir);
  const std::string model_path = model_dir + "/model.xnn";
  const std::string ckpt_path = model_dir + "/checkpoint.xnn";
  const std::string hist_path = model_dir + "/history.csv";

  NetworkState net;
  if (resume) {
    net = load_model(ckpt_path);
    const Shape3 want{corpus.manifest.d, corpus.manifest.d, 2};
    if (!(net.input == want))
      throw ConfigError(strf("checkpoint input is %zux%zux%zu but the corpus needs %zux%zux2",
                             net.input.h, net.input.w, net.input.c, corpus.manifest.d,
                             corpus.manifest.d));
    if (net.classes != classes)
      throw ConfigError(strf("checkpoint has %zu classes but the corpus needs %zu",
                             net.classes, classes));
    if (net.seed != seed)
      throw ConfigError(strf("checkpoint was trained with seed %llu; resume with that seed",
                             static_cast<unsigned long long>(net.seed)));
    const auto prior = read_history(hist_path);
    for (const EpochStats& e : prior) {
      if (!tc.has_prior_best || e.val_loss < tc.prior_best_val) {
        tc.has_prior_best = true;
        tc.prior_best_val = e.val_loss;
        tc.prior_best_epoch = e.epoch;
      }
    }
  } else {
    net = build_network(corpus.manifest.d, classes, seed, dense1, dense2);
  }

  std::vector<std::size_t> dense_units;
  for (const LayerSpec& ls : net.specs)
    if (ls.kind == LayerKind::Dense && ls.act != Activation::Softmax)
      dense_units.push_back(ls.units);

  json resolved;
  resolved["command"] = "train";
  resolved["seed"] = seed;
  resolved["threads"] = threads;
  resolved["out"] = out;
  resolved["train"]["corpus"] = corpus_dir;
  resolved["train"]["classes"] = classes;
  resolved["train"]["learning_rate"] = tc.learning_rate;
  resolved["train"]["l2"] = tc.l2;
  resolved["train"]["batch_size"] = tc.batch_size;
  resolved["train"]["max_epochs"] = tc.max_epochs;
  resolved["train"]["patience"] = tc.patience;
  resolved["train"]["early_stop"] = tc.early_stop;
  resolved["train"]["dense1"] = dense_units.size() > 0 ? dense_units[0] : dense1;
  resolved["train"]["dense2"] = dense_units.size() > 1 ? dense_units[1] : dense2;
  resolved["train"]["resume"] = resume;
  emit_resolved(model_dir, resolved);

  if (verbose)
    std::printf("training on %zu datasets (validation %zu), %zu parameters\n", tr.xs.size(),
                va.xs.size(), net.param_count());

  TrainResult res = train(std::move(net), tr.xs, tr.ys, va.xs, va.ys, tc,
                          rng::Philox(seed).child(rng::domain::kShuffle));

  save_model(ckpt_path, res.last);
  if (res.best_epoch > 0) save_model(model_path, res.best);

  std::string rows;
  for (const EpochStats& e : res.history) rows += history_row(e);
  if (resume)
    append_text(hist_path, rows);
  else
    write_text(hist_path, kHistoryHeader + "\n" + rows);

  if (res.history.empty()) {
    std::printf("nothing to train: the checkpoint already covers %zu epochs\n", tc.max_epochs);
    return 0;
  }

  std::size_t best_epoch = res.best_epoch > 0 ? res.best_epoch : tc.prior_best_epoch;
  double best_val = tc.prior_best_val;
  double best_acc = 0.0;
  for (const EpochStats& e : res.history) {
    if (e.epoch == res.best_epoch) {
      best_val = e.val_loss;
      best_acc = e.val_acc;
    }
  }
  std::printf("trained epochs %zu..%zu; best epoch %zu (val_loss %.6f, val_acc %.4f)\n",
              res.history.front().epoch, res.history.back().epoch, best_epoch, best_val,
              best_acc);
  std::printf("wrote %s\n", model_path.c_str());
  return 0;
}

int cmd_evaluate(const json& cfg, bool verbose) {
  const int threads = get_threads(cfg);
  const std::string out = get_out(cfg);
  const json e = section(cfg, "evaluate");
  const std::string corpus_dir =
      field_or<std::string>(e, "evaluate", "corpus", out + "/corpus");
  const std::string model_path =
      field_or<std::string>(e, "evaluate", "model", out + "/model/model.xnn");
  const double l2 = field_or<double>(e, "evaluate", "l2", 5e-5);
  const bool probes = field_or<bool>(e, "evaluate", "held_out_probes", true);
  const std::size_t group_size = size_field(e, "evaluate", "group_size", 120);

  const NetworkState net = load_model(model_path);
  const LoadedCorpus corpus = load_corpus(corpus_dir);
  const Shape3 want{corpus.manifest.d, corpus.manifest.d, 2};
  if (!(net.input == want))
    throw ConfigError(strf("model input is %zux%zux%zu but the corpus has d=%zu", net.input.h,
                           net.input.w, net.input.c, corpus.manifest.d));
  if (net.classes != corpus.manifest.classes)
    throw ConfigError(strf("model has %zu classes but the corpus is labeled with %zu",
                           net.classes, corpus.manifest.classes));

  struct Row {
    std::string name;
    GroupEval ev;
  };
  std::vector<Row> rows;
  const auto add = [&](const std::string& name, const LabeledSet& s) {
    if (s.xs.empty()) {
      std::fprintf(stderr, "warning: group \"%s\" is empty; row omitted\n", name.c_str());
      return;
    }
    rows.push_back({name, evaluate_model(net, s.xs, s.ys, l2, threads)});
  };
  const auto test_slice = [&](auto pred) {
    LabeledSet s;
    for (std::size_t i = 0; i < corpus.manifest.records.size(); ++i) {
      if (corpus.manifest.split[i] != SplitPart::Testing) continue;
      const DatasetRecord& r = corpus.manifest.records[i];
      if (!pred(r)) continue;
      s.xs.push_back(tensor3_from_dependence(corpus.tensors[i]));
      s.ys.push_back(class_index(r.label));
    }
    return s;
  };

  add("training", corpus_part(corpus, SplitPart::Training));
  add("validation", corpus_part(corpus, SplitPart::Validation));
  add("testing", corpus_part(corpus, SplitPart::Testing));
  add("Gaussian", test_slice([](const DatasetRecord& r) {
        return r.process.family == Family::ExtremeGaussian;
      }));
  add("AD",
      test_slice([](const DatasetRecord& r) { return r.label == DependenceClass::AD; }));
  add("AI",
      test_slice([](const DatasetRecord& r) { return r.label == DependenceClass::AI; }));
  add("mixtures",
      test_slice([](const DatasetRecord& r) { return r.label == DependenceClass::MIX; }));
  if (probes) {
    for (const EvalGroup& g :
         generate_eval_groups(corpus.manifest.design, corpus.manifest.seed, group_size,
                              threads))
      add(g.name, g.data);
  }

  std::printf("%-22s %10s %10s %8s\n", "group", "loss", "accuracy", "n");
  std::string text = "group,loss,accuracy,n\n";
  for (const Row& r : rows) {
    std::printf("%-22s %10.4f %10.4f %8zu\n", r.name.c_str(), r.ev.loss, r.ev.accuracy,
                r.ev.n);
    text += strf("%s,%.6f,%.6f,%zu\n", r.name.c_str(), r.ev.loss, r.ev.accuracy, r.ev.n);
  }

  const std::string eval_dir = out + "/evaluation";
  ensure_dir(eval_dir);
  write_text(eval_dir + "/report.csv", text);

  json resolved;
  resolved["command"] = "evaluate";
  resolved["threads"] = threads;
  resolved["out"] = out;
  resolved["evaluate"]["corpus"] = corpus_dir;
  resolved["evaluate"]["model"] = model_path;
  resolved["evaluate"]["l2"] = l2;
  resolved["evaluate"]["held_out_probes"] = probes;
  resolved["evaluate"]["group_size"] = group_size;
  emit_resolved(eval_dir, resolved);

  if (verbose) std::printf("wrote %s\n", (eval_dir + "/report.csv").c_str());
  return 0;
}

int cmd_predict(const json& cfg, bool verbose) {
  const int threads = get_threads(cfg);
  const std::string out = get_out(cfg);
  const json p = section(cfg, "predict");
  const std::string model_path =
      field_or<std::string>(p, "predict", "model", out + "/model/model.xnn");
  const std::string obs_path = require_str(p, "predict", "observations");
  const std::vector<std::size_t> block_sizes =
      sizes_field(p, "predict", "block_sizes", {92, 30, 15, 7, 5, 3, 1});
  const auto window =
      static_cast<std::size_t>(field_or<std::int64_t>(p, "predict", "window", 0));
  const double u = field_or<double>(p, "predict", "threshold", kDefaultThreshold);
  if (!(u > 0.0 && u < 1.0))
    throw ConfigError("config field \"predict.threshold\" must lie in (0, 1)");

  const NetworkState net = load_model(model_path);
  const ObservationTable tab = read_observations(obs_path);
  if (tab.stations.size() != net.input.h)
    throw ShapeError(strf("observations cover %zu stations but the model expects %zu",
                          tab.stations.size(), net.input.h));

  Matrix base = tab.values;
  if (window > 0) base = moving_average_residuals(base, window);

  std::string text = "m,P(AD),P(AI)";
  if (net.classes == 3) text += ",P(MIX)";
  text += "\n";
  for (const std::size_t m : block_sizes) {
    const std::size_t blocks = base.rows() / m;
    if (blocks < 2) {
      std::fprintf(stderr, "warning: m=%zu leaves %zu blocks; row skipped\n", m, blocks);
      continue;
    }
    if (blocks < 30)
      std::fprintf(stderr,
                   "warning: m=%zu leaves only %zu blocks; the row is low-confidence\n", m,
                   blocks);
    const Matrix scores = uniform_scores(block_maxima(base, m));
    const DependenceTensor t = dependence_tensor(scores, u);
    const auto [cls, probs] = predict(net, t);
    (void)cls;
    text += std::to_string(m);
    for (const double prob : probs) text += strf(",%.3f", prob);
    text += "\n";
  }
  std::fputs(text.c_str(), stdout);

  const std::string dir = out + "/prediction";
  ensure_dir(dir);
  write_text(dir + "/predictions.csv", text);

  json resolved;
  resolved["command"] = "predict";
  resolved["threads"] = threads;
  resolved["out"] = out;
  resolved["predict"]["model"] = model_path;
  resolved["predict"]["observations"] = obs_path;
  resolved["predict"]["block_sizes"] = block_sizes;
  resolved["predict"]["window"] = window;
  resolved["predict"]["threshold"] = u;
  emit_resolved(dir, resolved);

  if (verbose) std::printf("wrote %s\n", (dir + "/predictions.csv").c_str());
  return 0;
}

int cmd_featurize(const json& cfg, bool verbose) {
  const int threads = get_threads(cfg);
  const std::string out = get_out(cfg);
  const json f = section(cfg, "featurize");
  const std::string obs_path = require_str(f, "featurize", "observations");
  const auto window =
      static_cast<std::size_t>(field_or<std::int64_t>(f, "featurize", "window", 0));
  const std::size_t block = size_field(f, "featurize", "block_size", 1);
  const double u = field_or<double>(f, "featurize", "threshold", kDefaultThreshold);
  if (!(u > 0.0 && u < 1.0))
    throw ConfigError("config field \"featurize.threshold\" must lie in (0, 1)");
  const std::size_t bins = size_field(f, "featurize", "distance_bins", 8);

  const ObservationTable tab = read_observations(obs_path);
  const SiteSet sites = tab.unit_square_sites();

  Matrix base = tab.values;
  if (window > 0) base = moving_average_residuals(base, window);
  const Matrix maxima = block_maxima(base, block);
  if (maxima.rows() < 2)
    throw ConfigError(strf("block_size=%zu leaves %zu blocks; need at least 2", block,
                           maxima.rows()));
  const Matrix scores = uniform_scores(maxima);

  TensorQuality quality;
  const DependenceTensor t = dependence_tensor(scores, u, &quality);

  const std::string dir = out + "/features";
  ensure_dir(dir);
  save_tensor(dir + "/tensor.xdt", t);

  static const char* kDirection[4] = {"N-S", "NE-SW", "E-W", "SE-NW"};
  std::string text = "direction,h,chi,chibar,pairs\n";
  for (const ProfilePoint& pt : directional_tail_profile(scores, sites, u, bins))
    text += strf("%s,%.6f,%.6f,%.6f,%zu\n", kDirection[pt.direction], pt.h, pt.chi,
                 pt.chibar, pt.pairs);
  write_text(dir + "/profile.csv", text);

  std::printf("observations: %zu stations, %zu time steps, %zu missing cells\n",
              tab.stations.size(), tab.times.size(), tab.missing);
  std::printf("tensor: d=%zu at u=%.4f from %zu block maxima", t.d, u, maxima.rows());
  if (quality.corrected_cells > 0 || quality.undefined_cells > 0)
    std::printf(" (%zu corrected, %zu undefined cells)", quality.corrected_cells,
                quality.undefined_cells);
  std::printf("\n");
  std::printf("wrote %s and %s\n", (dir + "/tensor.xdt").c_str(),
              (dir + "/profile.csv").c_str());

  json resolved;
  resolved["command"] = "featurize";
  resolved["threads"] = threads;
  resolved["out"] = out;
  resolved["featurize"]["observations"] = obs_path;
  resolved["featurize"]["window"] = window;
  resolved["featurize"]["block_size"] = block;
  resolved["featurize"]["threshold"] = u;
  resolved["featurize"]["distance_bins"] = bins;
  emit_resolved(dir, resolved);

  (void)verbose;
  return 0;
}

}  // namespace

int run_command(const CliOptions& opt) {
  try {
    const json cfg = load_config(opt);
    if (opt.command == "simulate") return cmd_simulate(cfg, opt.verbose);
    if (opt.command == "featurize") return cmd_featurize(cfg, opt.verbose);
    if (opt.command == "train") return cmd_train(cfg, opt.verbose);
    if (opt.command == "evaluate") return cmd_evaluate(cfg, opt.verbose);
    if (opt.command == "predict") return cmd_predict(cfg, opt.verbose);
    throw ConfigError("unknown command: " + opt.command);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: config: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
}

}  // namespace taildep
