// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0

#include "recollect/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>

#ifndef RECOLLECT_VERSION
#define RECOLLECT_VERSION "0.0.0"
#endif

namespace recollect {

const std::vector<ExperimentConfig::Key>& ExperimentConfig::schema() {
  static const std::vector<Key> keys = {
      {"algorithm", "", "replay | gem | online", true},
      {"seed", "", "master seed", true},
      {"out_dir", "", "directory for CSVs and checkpoints", true},
      {"dataset", "mnist", "mnist | blobs"},
      {"data_dir", "", "MNIST IDX directory; falls back to $RECOLLECT_DATA_DIR/mnist"},
      {"stream", "rotations", "rotations | class_incremental"},
      {"shared_head", "false", "class_incremental: one output head for all tasks"},
      {"tasks", "5", "task count"},
      {"per_task", "500", "training examples per task (rotations)"},
      {"test_examples", "0", "cap on test examples per task, 0 = all"},
      {"blob_classes", "4", "classes for the synthetic dataset"},
      {"blob_side", "8", "image side for the synthetic dataset"},
      {"blob_examples", "400", "training examples for the synthetic dataset"},
      {"storage", "recollections", "recollections | real"},
      {"c", "125", "categorical latent variables"},
      {"l", "4", "categories per variable"},
      {"arch", "mlp", "mlp | conv"},
      {"hidden", "0", "autoencoder width, 0 = default"},
      {"tau", "1", "Gumbel-softmax temperature"},
      {"kl_weight", "0", "KL-to-uniform weight"},
      {"deterministic_storage", "false", "store argmax codes instead of one Gumbel-max draw"},
      {"buffer", "100", "buffer capacity in items (ignored when budget_bits > 0)"},
      {"budget_bits", "0", "incremental storage budget; sets capacity = floor(budget / k)"},
      {"alpha", "0.05", "classifier learning rate"},
      {"beta", "0.05", "autoencoder learning rate"},
      {"n_sets", "3", "recollection sets per example"},
      {"batch", "25", "replay batch size"},
      {"margin", "0.5", "GEM margin"},
      {"classifier_hidden", "100,100", "comma-separated hidden widths"},
      {"loss", "ce", "ce | bce"},
      {"svg", "false", "also write learning_curve.svg"},
  };
  return keys;
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

const ExperimentConfig::Key* find_key(const std::string& name) {
  for (const auto& k : ExperimentConfig::schema()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(std::istream& is) {
  ExperimentConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  return parse(is);
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (!find_key(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

std::string ExperimentConfig::str(const std::string& key) const {
  const Key* k = find_key(key);
  if (!k) throw ConfigError("unknown config key '" + key + "'");
  if (auto it = values_.find(key); it != values_.end()) return it->second;
  if (k->required) throw ConfigError("missing required key '" + key + "'");
  return k->fallback;
}

double ExperimentConfig::num(const std::string& key) const {
  const std::string s = str(key);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw ConfigError("key '" + key + "': '" + s + "' is not a number");
  return v;
}

std::size_t ExperimentConfig::count(const std::string& key) const {
  const std::string s = str(key);
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError("key '" + key + "': '" + s + "' is not a non-negative integer");
  }
  return static_cast<std::size_t>(std::stoull(s));
}

bool ExperimentConfig::flag(const std::string& key) const {
  const std::string s = str(key);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("key '" + key + "': '" + s + "' is not a boolean");
}

void ExperimentConfig::validate() const {
  auto one_of = [&](const std::string& key, std::initializer_list<const char*> options) {
    const std::string v = str(key);
    for (const char* o : options) {
      if (v == o) return;
    }
    throw ConfigError("key '" + key + "': unsupported value '" + v + "'");
  };
  one_of("algorithm", {"replay", "gem", "online"});
  one_of("dataset", {"mnist", "blobs"});
  one_of("stream", {"rotations", "class_incremental"});
  one_of("storage", {"recollections", "real"});
  one_of("arch", {"mlp", "conv"});
  one_of("loss", {"ce", "bce"});
  str("out_dir");
  count("seed");
  for (const char* k : {"tasks", "per_task", "test_examples", "blob_classes", "blob_side", "blob_examples", "c", "l",
                        "hidden", "buffer", "n_sets", "batch"}) {
    count(k);
  }
  for (const char* k : {"tau", "kl_weight", "budget_bits", "alpha", "beta", "margin"}) num(k);
  for (const char* k : {"svg", "shared_head", "deterministic_storage"}) flag(k);
  if (count("tasks") < 1) throw ConfigError("tasks must be at least 1");
  if (!(num("alpha") > 0.0) || !(num("beta") > 0.0)) throw ConfigError("learning rates must be positive");
}

std::string ExperimentConfig::echo() const {
  std::ostringstream os;
  for (const auto& k : schema()) {
    auto it = values_.find(k.name);
    os << k.name << '=' << (it != values_.end() ? it->second : k.fallback) << '\n';
  }
  return os.str();
}

namespace {

std::filesystem::path mnist_dir(const ExperimentConfig& cfg) {
  std::string dir = cfg.str("data_dir");
  if (dir.empty()) {
    const char* env = std::getenv("RECOLLECT_DATA_DIR");
    if (!env) throw ConfigError("dataset=mnist needs data_dir or RECOLLECT_DATA_DIR");
    return std::filesystem::path(env) / "mnist";
  }
  return dir;
}

std::vector<std::size_t> parse_widths(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (part.empty()) continue;
    if (part.find_first_not_of("0123456789") != std::string::npos || std::stoull(part) == 0) {
      throw ConfigError("classifier_hidden: bad width '" + part + "'");
    }
    out.push_back(std::stoull(part));
  }
  return out;
}

}  // namespace

TaskStream build_stream(const ExperimentConfig& cfg) {
  const std::uint64_t seed = cfg.count("seed");
  Dataset train, test;
  if (cfg.str("dataset") == "mnist") {
    const auto dir = mnist_dir(cfg);
    if (!std::filesystem::exists(dir)) throw ConfigError("dataset directory not found: " + dir.string());
    train = load_mnist(dir, true);
    test = load_mnist(dir, false);
  } else {
    const std::size_t classes = cfg.count("blob_classes"), side = cfg.count("blob_side");
    // Shared prototypes: the test set differs from the training set only in
    // its noise draws.
    const std::size_t n = cfg.count("blob_examples");
    Dataset all = synth_blobs(classes, side, 2 * n, seed);
    std::vector<std::size_t> a(n), b(n);
    std::iota(a.begin(), a.end(), 0);
    std::iota(b.begin(), b.end(), n);
    train = all.subset(a);
    test = all.subset(b);
  }
  if (const std::size_t cap = cfg.count("test_examples"); cap > 0) test = test.head(cap);
  if (cfg.str("stream") == "rotations") return make_rotations(train, test, cfg.count("tasks"), cfg.count("per_task"), seed);
  return make_class_incremental(train, test, cfg.count("tasks"));
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::filesystem::path out = cfg.str("out_dir");
  const TaskStream stream = build_stream(cfg);
  const std::string algorithm = cfg.str("algorithm");
  Rng root(cfg.count("seed"));
  Rng init = root.split();

  PredictiveModel model =
      PredictiveModel::mlp(stream.shape.size(), parse_widths(cfg.str("classifier_hidden")), stream.classes, init);
  if (!cfg.flag("shared_head")) model.set_head_groups(stream.heads);
  model.set_loss(cfg.str("loss") == "bce" ? ClassLoss::bce : ClassLoss::cross_entropy);

  std::unique_ptr<DiscreteVae> vae;
  std::unique_ptr<Recollector> rec;
  std::optional<IndexBuffer> buffer;
  ExperimentResult result;
  if (algorithm != "online") {
    if (cfg.str("storage") == "real") {
      rec = std::make_unique<RawRecollector>(stream.shape.size());
    } else {
      VaeConfig vc;
      vc.c = cfg.count("c");
      vc.l = cfg.count("l");
      vc.tau = cfg.num("tau");
      vc.input = stream.shape;
      vc.arch = cfg.str("arch") == "conv" ? Architecture::conv : Architecture::mlp;
      vc.hidden = cfg.count("hidden");
      vc.kl_weight = cfg.num("kl_weight");
      vc.deterministic_storage = cfg.flag("deterministic_storage");
      vae = std::make_unique<DiscreteVae>(vc, init);
      rec = std::make_unique<VaeRecollector>(*vae);
    }
    const CodeGeometry g = rec->geometry();
    result.code_bits = g.bits();
    std::size_t capacity = cfg.count("buffer");
    if (const double budget = cfg.num("budget_bits"); budget > 0.0) {
      capacity = static_cast<std::size_t>(budget / static_cast<double>(g.bits()));
    }
    buffer = algorithm == "gem" ? IndexBuffer::per_task_recent(g, capacity, stream.task_count())
                                : IndexBuffer::reservoir(g, capacity);
  }

  ReplayConfig rc;
  rc.alpha = cfg.num("alpha");
  rc.beta = cfg.num("beta");
  rc.n_sets = cfg.count("n_sets");
  rc.batch = cfg.count("batch");
  rc.seed = root.next();
  std::unique_ptr<StreamTrainer> trainer;
  IndexBuffer* buf = buffer ? &*buffer : nullptr;
  if (algorithm == "gem") {
    GemConfig gc;
    gc.replay = rc;
    gc.margin = cfg.num("margin");
    trainer = std::make_unique<GemTrainer>(model, rec.get(), buf, gc);
  } else {
    trainer = std::make_unique<ReplayTrainer>(model, rec.get(), buf, rc);
  }

  for (std::size_t t = 0; t < stream.task_count(); ++t) {
    trainer->run(stream, stream.tasks[t].train_y.size());
    double seen = 0.0;
    for (std::size_t k = 0; k <= t; ++k) {
      seen += model.accuracy(stream.tasks[k].test_x, stream.tasks[k].test_y, static_cast<int>(k));
    }
    result.curve.push_back(seen / static_cast<double>(t + 1));
  }
  result.retention = retention(model, stream);
  if (buffer) result.storage = buffer->storage_report(8 * stream.shape.size());

  std::filesystem::create_directories(out);
  {
    std::ofstream os(out / "config.txt");
    os << "# recollect " << version_string() << '\n' << cfg.echo();
  }
  std::vector<std::vector<std::string>> rows;
  for (std::size_t t = 0; t < stream.task_count(); ++t) {
    rows.push_back({std::to_string(t), fmt(stream.tasks[t].angle, 3), fmt(result.retention.accuracies[t])});
  }
  rows.push_back({"mean", "", fmt(result.retention.mean)});
  write_csv(out / "retention.csv", {"task", "angle", "accuracy"}, rows);

  rows.clear();
  for (std::size_t t = 0; t < result.curve.size(); ++t) rows.push_back({std::to_string(t + 1), fmt(result.curve[t])});
  write_csv(out / "learning_curve.csv", {"tasks_seen", "mean_accuracy"}, rows);
  if (cfg.flag("svg")) {
    PlotSeries s{algorithm, {}, result.curve};
    for (std::size_t t = 0; t < result.curve.size(); ++t) s.x.push_back(static_cast<double>(t + 1));
    write_svg_plot(out / "learning_curve.svg", "mean accuracy over seen tasks", "tasks seen", "accuracy", {s});
  }
  if (buffer) {
    write_csv(out / "storage.csv", {"code_bits", "items", "bits_used", "effective_examples"},
              {{std::to_string(result.code_bits), std::to_string(result.storage.items),
                std::to_string(result.storage.bits_used), fmt(result.storage.effective_examples, 3)}});
  }
  trainer->save_checkpoint(out / "checkpoint");
  return result;
}

std::string version_string() { return RECOLLECT_VERSION; }

std::string fmt(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + '"';
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) os << (i ? "," : "") << csv_field(fields[i]);
    os << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
}

void write_svg_plot(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                    const std::string& y_label, const std::vector<PlotSeries>& series) {
  constexpr double kW = 640, kH = 400, kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool first = true;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (first) {
        x0 = x1 = s.x[i];
        y0 = y1 = s.y[i];
        first = false;
      }
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * (kW - kLeft - kRight); };
  auto py = [&](double y) { return kH - kBottom - (y - y0) / (y1 - y0) * (kH - kTop - kBottom); };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << xml_escape(title)
     << "</text>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight << "\" y2=\"" << kH - kBottom
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kH - kBottom
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
     << xml_escape(x_label) << "</text>\n";
  os << "<text x=\"14\" y=\"" << kH / 2 << "\" transform=\"rotate(-90 14 " << kH / 2
     << ")\" text-anchor=\"middle\" font-size=\"12\">" << xml_escape(y_label) << "</text>\n";
  for (double v : {y0, y1}) {
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(v, 3)
       << "</text>\n";
  }
  for (double v : {x0, x1}) {
    os << "<text x=\"" << px(v) << "\" y=\"" << kH - kBottom + 14 << "\" text-anchor=\"middle\" font-size=\"10\">"
       << fmt(v, 3) << "</text>\n";
  }
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kColors[si % 6];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      os << (i ? " " : "") << fmt(px(s.x[i]), 2) << ',' << fmt(py(s.y[i]), 2);
    }
    os << "\"/>\n";
    os << "<text x=\"" << kW - kRight - 4 << "\" y=\"" << kTop + 14 * static_cast<double>(si + 1)
       << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << color << "\">" << xml_escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace recollect
