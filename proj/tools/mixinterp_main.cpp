#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "mixinterp/config.hpp"
#include "mixinterp/errors.hpp"
#include "mixinterp/experiment.hpp"

using namespace mixinterp;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kMissing = 3, kNumeric = 4 };

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string method;
  std::string models;
  std::string run;
  bool overwrite = false;
};

ExperimentConfig resolve(const Options& o) {
  ExperimentConfig cfg = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
  // Selection flags narrow the work; results still land in the config file's run.
  cfg.run_id = cfg.effective_run_id();
  if (o.seed) cfg.seeds = {*o.seed};
  if (!o.out_dir.empty()) cfg.output_dir = o.out_dir;
  if (!o.method.empty()) apply_setting(cfg, "methods", o.method);
  if (!o.models.empty()) apply_setting(cfg, "models", o.models);
  cfg.validate();
  return cfg;
}

void print_records(const std::vector<ResultRecord>& recs) {
  for (const auto& r : recs) {
    std::cout << r.model_id << '\t' << r.method << '\t' << r.metric << '\t' << r.value;
    if (r.se > 0.0) std::cout << " ± " << r.se;
    std::cout << '\n';
  }
}

int run(const std::string& command, const Options& o) {
  if (command == "report" && !o.run.empty()) {
    const std::filesystem::path out = o.out_dir.empty() ? resolve(o).output_dir : std::filesystem::path(o.out_dir);
    const ReportFiles files = write_report(out / "runs" / o.run);
    for (const auto& p : files.tables) std::cout << p.string() << '\n';
    for (const auto& p : files.plots) std::cout << p.string() << '\n';
    return kOk;
  }
  Experiment exp(resolve(o), &std::cerr);
  if (command == "train") {
    for (const auto& p : exp.train(o.overwrite)) std::cout << p.string() << '\n';
  } else if (command == "attribute") {
    const std::size_t n = exp.attribute();
    std::cout << n << " attribution maps under " << (exp.run_dir() / "attributions").string() << '\n';
  } else if (command == "eval-align") {
    print_records(exp.evaluate_alignment());
  } else if (command == "eval-faith") {
    print_records(exp.evaluate_faithfulness());
  } else if (command == "dissect") {
    print_records(exp.evaluate_dissection());
  } else if (command == "report") {
    const ReportFiles files = write_report(exp.run_dir());
    for (const auto& p : files.tables) std::cout << p.string() << '\n';
    for (const auto& p : files.plots) std::cout << p.string() << '\n';
  }
  std::cerr << "run id " << exp.run_id() << " (config hash " << exp.config().hash() << ")\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train classifiers under mixed-sample augmentation and measure their interpretability."};
  app.require_subcommand(0, 1);
  Options o;
  bool list_keys = false;
  app.add_flag("--list-keys", list_keys, "print the configuration keys and exit");

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "flat key = value configuration file");
    sub->add_option("--seed", o.seed, "run a single seed instead of the configured list");
    sub->add_option("--out", o.out_dir, "output directory (overrides output_dir)");
    sub->add_option("--models", o.models, "comma-separated regimes (overrides models)");
  };
  auto add_method = [&](CLI::App* sub) {
    sub->add_option("--method", o.method, "gradcam or iba (default: both)")
        ->check(CLI::IsMember({"gradcam", "iba"}));
  };
  CLI::App* train = app.add_subcommand("train", "train one model per regime and seed");
  add_common(train);
  train->add_flag("--overwrite", o.overwrite, "retrain even when a checkpoint exists");
  for (const char* name : {"attribute", "eval-align", "eval-faith"}) {
    CLI::App* sub = app.add_subcommand(name, name == std::string("attribute") ? "compute and store attribution maps"
                                             : name == std::string("eval-align") ? "EnergyPG, EHR and WSOL IoU"
                                                                                 : "inter-model deletion and insertion");
    add_common(sub);
    add_method(sub);
  }
  add_common(app.add_subcommand("dissect", "network dissection of the final conv layer"));
  CLI::App* report = app.add_subcommand("report", "tables and plots from stored records");
  add_common(report);
  report->add_option("--run", o.run, "run id (default: the id derived from --config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  if (list_keys) {
    for (const auto& k : config_keys()) std::cout << k.name << '\t' << k.help << '\n';
    return kOk;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return kConfig;
  }

  try {
    return run(app.get_subcommands().front()->get_name(), o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const InsufficientSamples& e) {
    std::cerr << "error: " << e.what() << " (enlarge data.eval_pool_size or lower eval.samples)\n";
    return kConfig;
  } catch (const MissingArtifact& e) {
    std::cerr << "missing artifact: " << e.what() << '\n';
    return kMissing;
  } catch (const TrainingFailure& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const AttributionFailure& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const OracleFailure& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
