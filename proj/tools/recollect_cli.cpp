// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0

#include "recollect/budget.hpp"
#include "recollect/continuous_ae.hpp"
#include "recollect/distill.hpp"
#include "recollect/experiment.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>

using namespace recollect;

namespace {

std::filesystem::path default_mnist_dir() {
  if (const char* env = std::getenv("RECOLLECT_DATA_DIR")) return std::filesystem::path(env) / "mnist";
  return "data/mnist";
}

std::vector<std::size_t> parse_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!part.empty()) out.push_back(std::stoull(part));
  }
  return out;
}

void print_row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) std::cout << (i ? "," : "") << fields[i];
  std::cout << '\n';
}

struct TrainArgs {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_train_command(CLI::App& app, const std::string& name, const std::string& algorithm, TrainArgs& args) {
  auto* cmd = app.add_subcommand(name, "run " + algorithm + " training over a task stream from a config file");
  cmd->add_option("--config", args.config, "key=value config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", args.sets, "override, key=value (repeatable)");
  cmd->add_option("--seed", args.seed, "master seed")->required();
  cmd->add_option("--out", args.out, "output directory (overrides out_dir)");
  cmd->callback([&args, algorithm]() {
    ExperimentConfig cfg;
    if (!args.config.empty()) cfg = ExperimentConfig::load(args.config);
    for (const auto& kv : args.sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    // train-replay also runs the online baseline when the config asks for it.
    if (!(algorithm == "replay" && cfg.has("algorithm") && cfg.str("algorithm") == "online")) {
      cfg.set("algorithm", algorithm);
    }
    cfg.set("seed", std::to_string(*args.seed));
    if (!args.out.empty()) cfg.set("out_dir", args.out);
    const ExperimentResult r = run_experiment(cfg);
    print_row({"metric", "value"});
    for (std::size_t t = 0; t < r.retention.accuracies.size(); ++t) {
      print_row({"task" + std::to_string(t), fmt(r.retention.accuracies[t])});
    }
    print_row({"mean_retention", fmt(r.retention.mean)});
    if (r.code_bits > 0) print_row({"effective_examples", fmt(r.storage.effective_examples, 3)});
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"recollect: continual learning with compressed experience replay"};
  app.require_subcommand(1);

  TrainArgs replay_args, gem_args;
  add_train_command(app, "train-replay", "replay", replay_args);
  add_train_command(app, "train-gem", "gem", gem_args);

  // optimize-code
  double budget_bits = 0, n_examples = 0, rho = 1.0, param_scale = 0.0;
  bool total = false;
  std::size_t c_max = 512, l_max = 64;
  auto* opt = app.add_subcommand("optimize-code", "choose (c, l) for a storage budget");
  opt->add_option("--budget-bits", budget_bits, "total storage budget in bits")->required();
  opt->add_option("--n", n_examples, "expected number of examples")->required();
  opt->add_option("--rho", rho, "storage probability (about L/N for a buffer of size L)");
  opt->add_flag("--total", total, "also charge parameter bits a*(c*l)^2");
  opt->add_option("--param-scale", param_scale, "a in a*(c*l)^2");
  opt->add_option("--c-max", c_max, "largest c searched");
  opt->add_option("--l-max", l_max, "largest l searched");
  opt->callback([&]() {
    BudgetSpec spec{budget_bits, n_examples, rho, nullptr};
    if (total) spec.param_model = quadratic_param_model(param_scale);
    const CodeGrid grid{1, c_max, 2, l_max};
    const CodeChoice ch = total ? optimize_total(spec, grid) : optimize_incremental(spec, grid);
    print_row({"c", "l", "k", "capacity"});
    print_row({std::to_string(ch.c), std::to_string(ch.l), std::to_string(ch.bits), fmt(ch.capacity, 3)});
  });

  // make-tasks
  std::size_t mt_tasks = 5, mt_per_task = 500;
  std::uint64_t mt_seed = 0;
  std::string mt_data = default_mnist_dir().string(), mt_kind = "rotations";
  auto* mt = app.add_subcommand("make-tasks", "describe the task stream a seed produces");
  mt->add_option("--tasks", mt_tasks, "task count");
  mt->add_option("--per-task", mt_per_task, "examples per task");
  mt->add_option("--seed", mt_seed, "seed")->required();
  mt->add_option("--data-dir", mt_data, "MNIST IDX directory");
  mt->add_option("--kind", mt_kind, "rotations | class_incremental")->check(CLI::IsMember({"rotations", "class_incremental"}));
  mt->callback([&]() {
    const Dataset train = load_mnist(mt_data, true), test = load_mnist(mt_data, false);
    const TaskStream s = mt_kind == "rotations" ? make_rotations(train, test, mt_tasks, mt_per_task, mt_seed)
                                                : make_class_incremental(train, test, mt_tasks);
    print_row({"task", "angle", "train_examples", "test_examples"});
    for (std::size_t t = 0; t < s.task_count(); ++t) {
      print_row({std::to_string(t), fmt(s.tasks[t].angle, 3), std::to_string(s.tasks[t].train_y.size()),
                 std::to_string(s.tasks[t].test_y.size())});
    }
  });

  // bench-compression
  std::string bc_codes = "38x2,6x20,10x20", bc_hidden = "2,8,32", bc_data = default_mnist_dir().string();
  std::size_t bc_epochs = 10, bc_examples = 4000;
  double bc_lr = 0.1;
  std::optional<std::uint64_t> bc_seed;
  auto* bc = app.add_subcommand("bench-compression", "compression vs reconstruction distortion, discrete and continuous");
  bc->add_option("--codes", bc_codes, "comma-separated c x l list, e.g. 38x2,6x20");
  bc->add_option("--hidden", bc_hidden, "continuous bottleneck widths");
  bc->add_option("--epochs", bc_epochs, "training epochs per model");
  bc->add_option("--examples", bc_examples, "training images used");
  bc->add_option("--lr", bc_lr, "learning rate");
  bc->add_option("--data-dir", bc_data, "MNIST IDX directory");
  bc->add_option("--seed", bc_seed, "seed")->required();
  bc->callback([&]() {
    const Dataset train = load_mnist(bc_data, true).head(bc_examples);
    print_row({"model", "c", "l", "h", "compression", "l1_distortion"});
    std::stringstream codes(bc_codes);
    std::string item;
    while (std::getline(codes, item, ',')) {
      const auto x = item.find('x');
      if (x == std::string::npos) throw CLI::ValidationError("--codes", "expected CxL, got " + item);
      VaeConfig vc;
      vc.c = std::stoull(item.substr(0, x));
      vc.l = std::stoull(item.substr(x + 1));
      vc.arch = Architecture::mlp;
      vc.input = train.shape;
      Rng rng(*bc_seed);
      DiscreteVae vae(vc, rng);
      fit(vae, train.x, bc_epochs, 50, bc_lr, rng);
      print_row({"discrete", std::to_string(vc.c), std::to_string(vc.l), "", fmt(discrete_compression(vc.c, vc.l), 3),
                 fmt(vae.reconstruction_l1(train.x))});
    }
    for (std::size_t h : parse_list(bc_hidden)) {
      Rng rng(*bc_seed);
      ContinuousAutoencoder ae(train.shape, Architecture::mlp, 200, h, rng);
      fit(ae, train.x, bc_epochs, 50, bc_lr, rng);
      print_row({"continuous", "", "", std::to_string(h), fmt(continuous_compression(h), 3),
                 fmt(ae.reconstruction_l1(train.x))});
    }
  });

  // sample-compare
  std::size_t sc_c = 10, sc_l = 20, sc_epochs = 10, sc_examples = 4000, sc_samples = 500;
  double sc_lr = 0.1;
  std::string sc_data = default_mnist_dir().string();
  std::optional<std::uint64_t> sc_seed;
  auto* sc = app.add_subcommand("sample-compare", "buffer sampling vs code sampling distortion");
  sc->add_option("--c", sc_c, "latent variables");
  sc->add_option("--l", sc_l, "categories per variable");
  sc->add_option("--epochs", sc_epochs, "autoencoder training epochs");
  sc->add_option("--examples", sc_examples, "training images used");
  sc->add_option("--samples", sc_samples, "recollections drawn per strategy");
  sc->add_option("--lr", sc_lr, "learning rate");
  sc->add_option("--data-dir", sc_data, "MNIST IDX directory");
  sc->add_option("--seed", sc_seed, "seed")->required();
  sc->callback([&]() {
    const Dataset train = load_mnist(sc_data, true).head(sc_examples);
    VaeConfig vc;
    vc.c = sc_c;
    vc.l = sc_l;
    vc.arch = Architecture::mlp;
    vc.input = train.shape;
    Rng rng(*sc_seed);
    DiscreteVae vae(vc, rng);
    fit(vae, train.x, sc_epochs, 50, sc_lr, rng);
    VaeRecollector rec(vae);
    IndexBuffer buffer = IndexBuffer::reservoir(rec.geometry(), train.size());
    const auto codes = rec.store(train.x, rng);
    for (std::size_t i = 0; i < codes.size(); ++i) buffer.insert({codes[i], static_cast<std::uint16_t>(train.y[i]), 0}, rng);
    const double recon = vae.reconstruction_l1(train.x);
    const std::string arch = std::to_string(sc_c) + "x" + std::to_string(sc_l);
    print_row({"architecture", "strategy", "reconstruction_distortion", "nn_distortion"});
    print_row({arch, "buffer", fmt(recon), fmt(nn_distortion(::recollect::recollect(buffer, rec, rng, sc_samples).x, train.x))});
    print_row({arch, "code", fmt(recon), fmt(nn_distortion(code_sample(vae, rng, sc_samples), train.x))});
  });

  // distill
  std::string ds_source = "real", ds_data = default_mnist_dir().string(), ds_episodes = "10,100,1000,10000";
  std::size_t ds_c = 313, ds_l = 4, ds_vae_epochs = 10, ds_teacher_epochs = 5;
  double ds_lr = 0.05, ds_fraction = 0.1;
  std::optional<std::uint64_t> ds_seed;
  auto* ds = app.add_subcommand("distill", "teacher to student transfer; one CSV row per checkpoint");
  ds->add_option("--source", ds_source, "real | real-x-teacher-y | subset | buffer | code | active | diverse")
      ->check(CLI::IsMember({"real", "real-x-teacher-y", "subset", "buffer", "code", "active", "diverse"}));
  ds->add_option("--episodes", ds_episodes, "ascending checkpoint list");
  ds->add_option("--c", ds_c, "latent variables for recollection sources");
  ds->add_option("--l", ds_l, "categories per variable");
  ds->add_option("--vae-epochs", ds_vae_epochs, "autoencoder training epochs");
  ds->add_option("--teacher-epochs", ds_teacher_epochs, "teacher training epochs");
  ds->add_option("--fraction", ds_fraction, "subset fraction");
  ds->add_option("--lr", ds_lr, "student learning rate");
  ds->add_option("--data-dir", ds_data, "MNIST IDX directory");
  ds->add_option("--seed", ds_seed, "seed")->required();
  ds->callback([&]() {
    const Dataset train = load_mnist(ds_data, true), test = load_mnist(ds_data, false);
    Rng rng(*ds_seed);
    PredictiveModel teacher = PredictiveModel::small_cnn(train.shape, train.classes, rng);
    const double teacher_acc = teacher_train(teacher, train, test, ds_teacher_epochs, 20, 0.05, rng);
    std::cerr << "teacher test accuracy " << fmt(teacher_acc, 4) << '\n';

    DistillSource src;
    src.data = &train;
    src.fraction = ds_fraction;
    src.checkpoints = parse_list(ds_episodes);
    std::optional<DiscreteVae> vae;
    std::optional<VaeRecollector> rec;
    std::optional<IndexBuffer> buffer;
    if (ds_source == "real") src.kind = SourceKind::real_data;
    else if (ds_source == "real-x-teacher-y") src.kind = SourceKind::real_x_teacher_y;
    else if (ds_source == "subset") src.kind = SourceKind::subset_sample;
    else {
      src.kind = SourceKind::recollections;
      VaeConfig vc;
      vc.c = ds_c;
      vc.l = ds_l;
      vc.arch = Architecture::mlp;
      vc.input = train.shape;
      vae.emplace(vc, rng);
      fit(*vae, train.x, ds_vae_epochs, 50, 0.1, rng);
      rec.emplace(*vae);
      buffer.emplace(IndexBuffer::reservoir(rec->geometry(), train.size()));
      const auto codes = rec->store(train.x, rng);
      for (std::size_t i = 0; i < codes.size(); ++i) {
        buffer->insert({codes[i], static_cast<std::uint16_t>(train.y[i]), 0}, rng);
      }
      src.vae = &*vae;
      src.recollector = &*rec;
      src.buffer = &*buffer;
      src.strategy = ds_source == "buffer" ? RecollectionStrategy::buffer
                     : ds_source == "code" ? RecollectionStrategy::code
                     : ds_source == "active" ? RecollectionStrategy::active
                                             : RecollectionStrategy::diverse;
    }
    PredictiveModel student = PredictiveModel::small_cnn(train.shape, train.classes, rng);
    const auto curve = distill(teacher, student, src, test, ds_lr, rng);
    print_row({"source", "episodes", "accuracy"});
    for (const auto& p : curve) print_row({ds_source, std::to_string(p.episodes), fmt(p.accuracy, 4)});
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
