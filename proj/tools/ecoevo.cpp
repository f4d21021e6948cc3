#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "ecoevo/harness/config.hpp"
#include "ecoevo/harness/plots.hpp"
#include "ecoevo/harness/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitAllFailed = 3;

struct RunArgs {
  std::string config;
  std::uint64_t seed = 0;
  std::optional<unsigned> threads;
  std::optional<std::string> out;
};

int run_mode(ecoevo::Mode mode, const RunArgs& args) {
  auto doc = ecoevo::read_json_file(args.config);
  if (!doc.is_object()) throw ecoevo::Error(ecoevo::Errc::ConfigError, "config: expected an object");
  doc["mode"] = std::string(ecoevo::to_string(mode));
  doc["seed"] = args.seed;
  if (args.threads) doc["threads"] = *args.threads;
  if (args.out) doc["output_dir"] = *args.out;
  const auto config = ecoevo::config_from_json(doc);
  const auto manifest = ecoevo::run_experiment(config);
  std::cerr << "ecoevo: " << ecoevo::to_string(mode) << ": " << manifest.replicates.size()
            << " replicate(s), " << manifest.failed() << " failed, " << manifest.files.size()
            << " file(s) in " << config.output_dir << "\n";
  for (const auto& r : manifest.replicates)
    if (!r.error.empty()) std::cerr << "  replicate " << r.index << ": " << r.error << "\n";
  return manifest.all_failed() ? kExitAllFailed : kExitOk;
}

int check_iif(const std::string& path, std::size_t grid) {
  auto doc = ecoevo::read_json_file(path);
  if (!doc.is_object() || !doc.contains("model"))
    throw ecoevo::Error(ecoevo::Errc::ConfigError, "model: missing required object");
  int K = 1000;
  if (doc.contains("K")) {
    if (!doc["K"].is_number_integer() || doc["K"].get<long long>() < 1)
      throw ecoevo::Error(ecoevo::Errc::ConfigError, "K: expected a positive integer");
    K = doc["K"].get<int>();
  }
  const auto spec = ecoevo::model_from_json(doc["model"], K);
  std::cout << ecoevo::iif_grid_csv(spec, grid);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Eco-evolutionary simulation suite: exact individual-based model, its limit "
               "processes, and the experiments that compare them."};
  app.require_subcommand(1);

  RunArgs args;
  ecoevo::Mode selected = ecoevo::Mode::Ibm;
  for (const auto& [mode, name] : ecoevo::kModeNames) {
    if (mode == ecoevo::Mode::CheckIif) continue;
    auto* sub = app.add_subcommand(std::string(name), "Run mode " + std::string(name));
    sub->add_option("--config", args.config, "JSON configuration file")->required();
    sub->add_option("--seed", args.seed, "Master seed (u64)")->required();
    sub->add_option("--threads", args.threads, "Worker threads for replicates");
    sub->add_option("--out", args.out, "Output directory");
    sub->callback([&selected, m = mode] { selected = m; });
  }

  std::string iif_config;
  std::size_t grid = 41;
  auto* iif = app.add_subcommand("check-iif", "Print the invasion-implies-fixation class over a trait grid");
  iif->add_option("--config", iif_config, "JSON configuration file")->required();
  iif->add_option("--grid", grid, "Grid points per axis")->check(CLI::Range(2, 100000));

  std::string run_dir, figure;
  auto* plot = app.add_subcommand("plot", "Emit tidy CSV for a figure from a finished run");
  plot->add_option("--run", run_dir, "Run output directory")->required();
  plot->add_option("--figure", figure, "fig2-support | fig3-allele-counts | fig4-dimorphic")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*iif) return check_iif(iif_config, grid);
    if (*plot) {
      std::cout << ecoevo::emit_plot_data(run_dir, figure).string() << "\n";
      return kExitOk;
    }
    return run_mode(selected, args);
  } catch (const ecoevo::Error& e) {
    std::cerr << "ecoevo: " << e.what() << "\n";
    switch (e.code()) {
      case ecoevo::Errc::ConfigError:
      case ecoevo::Errc::NonPositiveFitness:
      case ecoevo::Errc::NoCoexistence: return kExitConfig;
      default: return kExitFailure;
    }
  } catch (const std::exception& e) {
    std::cerr << "ecoevo: " << e.what() << "\n";
    return kExitFailure;
  }
}
