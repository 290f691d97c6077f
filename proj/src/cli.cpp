#include "tfln/cli.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "tfln/dataset.hpp"
#include "tfln/error.hpp"
#include "tfln/experiment.hpp"
#include "tfln/hooks.hpp"
#include "tfln/iris_data.hpp"

namespace tfln {

namespace {

constexpr std::size_t kIrisFeatures = 4;
constexpr std::size_t kIrisClasses = 3;
const std::vector<std::size_t> kIrisHiddenUnits = {10, 20, 10};

struct CliArgs {
  std::string config_path;
  std::string model_dir;
  std::string output;
  std::string input_csv;
  std::string ckpt_path;
  std::string mode = "sync";
  std::int64_t steps = 200;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::optional<std::size_t> batch_size;
};

/// Flag beats config file beats TFLN_CONFIG beats defaults.
RunConfig resolve_config(const CliArgs& args, bool required) {
  std::string path = args.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("TFLN_CONFIG")) path = env;
  }
  if (path.empty()) {
    if (required) {
      throw ValidationError("no configuration given: pass --config or set TFLN_CONFIG");
    }
    return {};
  }
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open config file: " + path);
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str());
}

std::uint64_t resolve_seed(const CliArgs& args, const RunConfig& config) {
  return args.seed_given ? args.seed : config.random_seed;
}

std::string resolve_model_dir(const CliArgs& args, const RunConfig& config) {
  return !args.model_dir.empty() ? args.model_dir : config.model_dir;
}

Dataset bundled_iris() { return parse_iris_csv(embedded_iris_csv()); }

Estimator make_iris_dnn(const RunConfig& config, std::uint64_t seed) {
  Dataset iris = bundled_iris();
  return Estimator::dnn_classifier(infer_real_valued_columns(iris.features),
                                   kIrisHiddenUnits, kIrisClasses, config, seed);
}

Estimator load_model_for_inference(const std::string& model_dir, const RunConfig& config) {
  if (model_dir.empty()) {
    throw ValidationError("no model directory: pass --model-dir or set model_dir in the config");
  }
  const std::filesystem::path dir(model_dir);
  if (std::filesystem::exists(dir / "manifest.json")) {
    return load_exported_model(dir);
  }
  if (auto latest = find_latest_checkpoint(dir)) {
    Estimator e = make_iris_dnn(config, 0);
    e.restore_checkpoint(*latest);
    return e;
  }
  throw StateError("no manifest.json or ckpt-* files in " + model_dir);
}

/// Feature rows for predict: one row per line, comma-separated, optional
/// header line.
Tensor parse_feature_csv(const std::string& text, std::size_t n_features) {
  std::stringstream in(text);
  std::string line;
  std::vector<double> values;
  std::size_t n_rows = 0;
  std::size_t line_no = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::vector<std::string> fields;
    std::string field;
    std::stringstream fs(line);
    while (std::getline(fs, field, ',')) fields.push_back(field);

    if (first_content_line) {
      first_content_line = false;
      double probe = 0.0;
      const auto& f = fields.empty() ? std::string() : fields[0];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), probe);
      if (ec != std::errc() || ptr != f.data() + f.size()) continue;  // header
    }
    if (fields.size() != n_features) {
      throw ValidationError("line " + std::to_string(line_no) + ": row has " +
                            std::to_string(fields.size()) + " columns; model expects " +
                            std::to_string(n_features));
    }
    for (const std::string& f : fields) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw ParseError("line " + std::to_string(line_no) + ": '" + f +
                         "' is not a number");
      }
      values.push_back(v);
    }
    ++n_rows;
  }
  if (n_rows == 0) {
    throw ParseError("input csv has no data rows");
  }
  return Tensor(n_rows, n_features, std::move(values));
}

std::string full_precision(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void print_metrics(std::ostream& out, const std::map<std::string, double>& metrics) {
  for (const auto& [name, value] : metrics) {
    out << name << "=" << format_metric_value(value) << "\n";
  }
}

int run_demo_iris(const CliArgs& args, std::ostream& out, std::ostream& err) {
  const RunConfig config = resolve_config(args, false);
  const std::uint64_t seed = resolve_seed(args, config);
  const std::string model_dir = resolve_model_dir(args, config);

  Dataset iris = bundled_iris();
  auto [train, test] = train_test_split(iris, 0.2, seed);
  Estimator classifier = make_iris_dnn(config, seed);

  LoggingHook progress(50, [&err](const std::string& line) { err << line << "\n"; });
  std::vector<SessionHook*> hooks{&progress};
  classifier.fit(train.features, train.targets, args.steps, hooks);

  const auto metrics =
      classifier.evaluate(test.features, test.targets, {Metric::kAccuracy});
  print_metrics(out, metrics);

  if (!model_dir.empty()) {
    std::filesystem::create_directories(model_dir);
    classifier.save_checkpoint(std::filesystem::path(model_dir) /
                               checkpoint_file_name(classifier.global_step()));
  }
  return 0;
}

int run_train(const CliArgs& args, std::ostream& out, std::ostream& err) {
  (void)err;
  const RunConfig config = resolve_config(args, true);
  const std::uint64_t seed = resolve_seed(args, config);
  const std::string model_dir = resolve_model_dir(args, config);
  if (model_dir.empty()) {
    throw ValidationError("train requires a model directory (--model-dir or config model_dir)");
  }

  RunConfig effective = config;
  effective.random_seed = seed;
  effective.model_dir = model_dir;

  Dataset iris = bundled_iris();
  auto [train, test] = train_test_split(iris, 0.2, seed);

  ExperimentOptions options;
  options.train_steps = args.steps;
  options.batch_size = args.batch_size;
  options.distributed_mode = dist_mode_from_string(args.mode);

  Experiment experiment(make_iris_dnn(effective, seed), train, test, options);
  const TrainingReport report = experiment.train();

  std::filesystem::create_directories(model_dir);
  experiment.estimator().save_checkpoint(
      std::filesystem::path(model_dir) /
      checkpoint_file_name(experiment.estimator().global_step()));

  out << "mode=" << report.mode << "\n";
  out << "global_step=" << report.final_global_step << "\n";
  if (!report.ok) {
    throw TrainingError(report.error_code + ": " + report.error_detail);
  }
  return 0;
}

int run_evaluate(const CliArgs& args, std::ostream& out, std::ostream& err) {
  (void)err;
  const RunConfig config = resolve_config(args, true);
  const std::uint64_t seed = resolve_seed(args, config);
  Estimator e = load_model_for_inference(resolve_model_dir(args, config), config);

  Dataset iris = bundled_iris();
  auto [train, test] = train_test_split(iris, 0.2, seed);
  const auto metrics = e.evaluate(test.features, test.targets, e.default_metrics());
  print_metrics(out, metrics);
  return 0;
}

int run_predict(const CliArgs& args, std::ostream& out, std::ostream& err) {
  (void)err;
  const RunConfig config = resolve_config(args, false);
  Estimator e = load_model_for_inference(resolve_model_dir(args, config), config);

  std::ifstream in(args.input_csv);
  if (!in) {
    throw ValidationError("cannot open input csv: " + args.input_csv);
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  const Tensor features =
      parse_feature_csv(buffer.str(), e.architecture().n_features);

  std::ofstream file_out;
  std::ostream* target = &out;
  if (!args.output.empty() && args.output != "-") {
    file_out.open(args.output, std::ios::trunc);
    if (!file_out) {
      throw IoError("cannot open output file: " + args.output);
    }
    target = &file_out;
  }

  const auto predictions = e.predict(features);
  const bool classifier = predictions.contains("class");
  for (std::size_t i = 0; i < features.rows(); ++i) {
    *target << i;
    if (classifier) {
      const auto& cls = predictions.at("class");
      const auto& prob = predictions.at("prob");
      *target << "," << static_cast<std::int64_t>(cls(i, 0));
      for (std::size_t j = 0; j < prob.cols(); ++j) {
        *target << "," << full_precision(prob(i, j));
      }
    } else {
      *target << "," << full_precision(predictions.at("score")(i, 0));
    }
    *target << "\n";
  }
  return 0;
}

int run_export(const CliArgs& args, std::ostream& out, std::ostream& err) {
  (void)err;
  const RunConfig config = resolve_config(args, false);
  Estimator e = load_model_for_inference(resolve_model_dir(args, config), config);
  if (args.output.empty()) {
    throw ValidationError("export requires --output DIR");
  }
  export_estimator(e, args.output);
  out << "export_dir=" << args.output << "\n";
  return 0;
}

int run_inspect_ckpt(const CliArgs& args, std::ostream& out, std::ostream& err) {
  (void)err;
  const Checkpoint ckpt = checkpoint_restore(args.ckpt_path);
  out << "global_step=" << ckpt.global_step << "\n";
  for (const auto& [name, tensor] : ckpt.tensors) {
    out << "tensor " << name << " " << tensor.shape_str() << "\n";
  }
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"tfln: estimators with fit/predict/evaluate, training hooks, and parameter-server training"};
  app.require_subcommand(1);
  CliArgs args;

  auto add_common = [&](CLI::App* cmd, bool with_seed = true) {
    cmd->add_option("--config", args.config_path, "JSON run configuration file");
    cmd->add_option("--model-dir", args.model_dir, "model directory");
    if (with_seed) {
      cmd->add_option("--seed", args.seed, "random seed")
          ->each([&](const std::string&) { args.seed_given = true; });
    }
  };

  CLI::App* demo = app.add_subcommand("demo-iris",
                                      "train the iris DNN end to end and print accuracy");
  add_common(demo);
  demo->add_option("--steps", args.steps, "training steps");

  CLI::App* train = app.add_subcommand("train", "train the iris model under a config");
  add_common(train);
  train->add_option("--steps", args.steps, "training steps");
  train->add_option("--mode", args.mode, "distributed mode (sync|async)");
  train->add_option("--batch-size", args.batch_size, "mini-batch size (default: full batch)");

  CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate the latest checkpoint");
  add_common(evaluate);

  CLI::App* predict = app.add_subcommand("predict", "write per-row predictions for a csv");
  add_common(predict, false);
  predict->add_option("input", args.input_csv, "input feature csv")->required();
  predict->add_option("--output", args.output, "output file ('-' for stdout)");

  CLI::App* export_cmd = app.add_subcommand("export", "export the latest checkpoint");
  add_common(export_cmd, false);
  export_cmd->add_option("--output", args.output, "export directory")->required();

  CLI::App* inspect = app.add_subcommand("inspect-ckpt", "describe a checkpoint file");
  inspect->add_option("path", args.ckpt_path, "checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (demo->parsed()) return run_demo_iris(args, out, err);
    if (train->parsed()) return run_train(args, out, err);
    if (evaluate->parsed()) return run_evaluate(args, out, err);
    if (predict->parsed()) return run_predict(args, out, err);
    if (export_cmd->parsed()) return run_export(args, out, err);
    if (inspect->parsed()) return run_inspect_ckpt(args, out, err);
    err << "no subcommand\n" << app.help();
    return 1;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const StateError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace tfln
