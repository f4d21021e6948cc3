#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "ecoevo/harness/config.hpp"
#include "ecoevo/harness/plots.hpp"
#include "ecoevo/harness/runner.hpp"

using namespace ecoevo;
namespace fs = std::filesystem;

namespace {

json base_doc(std::string_view mode) {
  json doc = json::parse(R"({
    "seed": 12345,
    "K": 100,
    "horizon": 2.0,
    "replicates": 3,
    "sampling_interval": 0.5,
    "model": {"preset": "dieckmann-doebeli"},
    "initial": {"trait": -1.0, "marker": 0.0}
  })");
  doc["mode"] = std::string(mode);
  return doc;
}

json two_allele_model() {
  return json::parse(R"({
    "preset": "dieckmann-doebeli",
    "marker_space": {"labels": ["a", "A"]},
    "mutation": {"marker_kernel": {"kind": "two-allele", "q_a": 0.3, "q_A": 0.1}}
  })");
}

std::string config_error_message(const json& doc) {
  try {
    config_from_json(doc);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ConfigError);
    return e.what();
  }
  ADD_FAILURE() << "expected ConfigError";
  return {};
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("ecoevo_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

 private:
  fs::path path_;
};

ExperimentConfig config_in(json doc, const TempDir& dir) {
  doc["output_dir"] = dir.str();
  return config_from_json(doc);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST(Config, PresetExpansion) {
  const auto c = [] {
    json doc = base_doc("ibm");
    doc["K"] = 1000;
    return config_from_json(doc);
  }();
  const ModelSpec& m = c.model;
  EXPECT_EQ(m.K, 1000);
  EXPECT_DOUBLE_EQ(m.ecology.birth.sigma, 0.9);
  EXPECT_DOUBLE_EQ(m.ecology.comp_kernel.sigma, 0.8);
  EXPECT_EQ(m.ecology.comp_sensitivity, ParamFn::constant(1.0));
  EXPECT_EQ(m.ecology.death, ParamFn::constant(0.0));
  EXPECT_NEAR(m.mutation.q_K, 0.0316, 1e-4);
  EXPECT_DOUBLE_EQ(m.mutation.p_K, 1e-6);
  EXPECT_DOUBLE_EQ(m.mutation.trait_variance, 0.1);
  EXPECT_EQ(m.trait_space, (Interval{-1, 1}));
  EXPECT_EQ(m.marker_space.interval(), (Interval{-2, 2}));
  EXPECT_EQ(m, dieckmann_doebeli(1000));
}

TEST(Config, PresetParametersAndPartialOverride) {
  json doc = base_doc("ibm");
  doc["model"] = json::parse(R"({"preset": "dieckmann-doebeli", "sigma_c": 0.7,
                                 "mutation": {"p_K": 0.001}})");
  const auto c = config_from_json(doc);
  EXPECT_DOUBLE_EQ(c.model.ecology.comp_kernel.sigma, 0.7);
  EXPECT_DOUBLE_EQ(c.model.mutation.p_K, 0.001);
  EXPECT_DOUBLE_EQ(c.model.mutation.q_K, 0.1);  // untouched preset value at K = 100
}

TEST(Config, MissingSeed) {
  json doc = base_doc("ibm");
  doc.erase("seed");
  EXPECT_NE(config_error_message(doc).find("seed"), std::string::npos);
  doc = base_doc("ibm");
  doc.erase("mode");
  EXPECT_NE(config_error_message(doc).find("mode"), std::string::npos);
}

TEST(Config, TwoAlleleOverride) {
  json doc = base_doc("ibm");
  doc["model"] = two_allele_model();
  const auto c = config_from_json(doc);
  ASSERT_TRUE(c.model.mutation.two_allele());
  const auto& k = std::get<TwoAllele>(c.model.mutation.marker_kernel);
  EXPECT_DOUBLE_EQ(k.q_a, 0.3);
  EXPECT_DOUBLE_EQ(k.q_A, 0.1);
  EXPECT_EQ(c.model.marker_space.alphabet().labels, (std::vector<std::string>{"a", "A"}));
}

TEST(Config, ErrorsNameTheField) {
  json doc = base_doc("ibm");
  doc["model"]["mutation"] = {{"q_K", "often"}};
  EXPECT_NE(config_error_message(doc).find("model.mutation.q_K"), std::string::npos);

  doc = base_doc("ibm");
  doc["model"]["ecology"] = {{"brith", {{"kind", "constant"}, {"value", 1}}}};
  EXPECT_NE(config_error_message(doc).find("model.ecology.brith: unknown key"), std::string::npos);

  doc = base_doc("ibm");
  doc["initial"]["trait"] = 3.0;
  EXPECT_NE(config_error_message(doc).find("initial.trait"), std::string::npos);

  doc = base_doc("ibm");
  doc["options"] = {{"particles", 1}};
  EXPECT_NE(config_error_message(doc).find("options.particles"), std::string::npos);

  doc = base_doc("ibm");
  doc["model"]["preset"] = "lotka";
  EXPECT_NE(config_error_message(doc).find("model.preset"), std::string::npos);

  doc = base_doc("ibm");
  doc["replicates"] = -2;
  EXPECT_NE(config_error_message(doc).find("replicates"), std::string::npos);
}

TEST(Config, CompetitionPositivityNamesGridPoint) {
  json doc = base_doc("ibm");
  doc["model"]["ecology"] = {{"comp_kernel", {{"kind", "constant"}, {"value", 0.0}}}};
  const auto msg = config_error_message(doc);
  EXPECT_NE(msg.find("model.ecology"), std::string::npos);
  EXPECT_NE(msg.find("(x, y) = ("), std::string::npos);
}

TEST(Config, UnknownKeysAndModeRequirements) {
  json doc = base_doc("ibm");
  doc["seeds"] = 3;
  EXPECT_NE(config_error_message(doc).find("seeds: unknown key"), std::string::npos);
  EXPECT_NE(config_error_message(base_doc("invasion")).find("mutant"), std::string::npos);
  EXPECT_NE(config_error_message(base_doc("dimorphic-fv")).find("mutant"), std::string::npos);
  EXPECT_NE(config_error_message(base_doc("teleport")).find("mode"), std::string::npos);
  doc = base_doc("ibm");
  doc["initial"]["allele_a_frequency"] = 0.5;
  EXPECT_NE(config_error_message(doc).find("initial.allele_a_frequency"), std::string::npos);
}

TEST(Config, RoundTrip) {
  std::vector<json> docs{base_doc("ibm"), base_doc("sfvp")};
  json two = base_doc("wf");
  two["model"] = two_allele_model();
  two["initial"]["allele_a_frequency"] = 0.25;
  two["options"] = {{"wf_dt", 1e-3}, {"event_log", true}};
  docs.push_back(two);
  json inv = base_doc("invasion");
  inv["mutant"] = {{"trait", 0.0}};
  inv["options"] = {{"t_K", 12.5}, {"epsilon", 0.01}, {"particles", 40}};
  docs.push_back(inv);
  json dim = base_doc("dimorphic-fv");
  dim["model"]["sigma_c"] = 0.6;
  dim["mutant"] = {{"trait", 0.0}, {"marker", 0.5}};
  dim["initial"]["mass"] = 0.3;
  docs.push_back(dim);
  json custom = base_doc("fv");
  custom["model"] = json::parse(R"({
    "ecology": {"birth": {"kind": "gaussian", "amplitude": 2, "sigma": 0.5, "center": 0.1},
                "death": {"kind": "constant", "value": 0.2},
                "comp_sensitivity": {"kind": "constant", "value": 1.5},
                "comp_kernel": {"kind": "gaussian", "amplitude": 1, "sigma": 1.1}},
    "mutation": {"trait_variance": 0.05, "p_K": 0.0, "q_K": 0.02,
                 "marker_kernel": {"kind": "gaussian", "variance": 0.01}},
    "trait_space": {"lo": -1, "hi": 1},
    "marker_space": {"lo": -3, "hi": 3}
  })");
  docs.push_back(custom);
  for (const auto& doc : docs) {
    const auto c = config_from_json(doc);
    EXPECT_EQ(config_from_json(json::parse(serialize(c))), c) << doc.dump();
  }
}

TEST(Config, ParseFromFile) {
  TempDir dir;
  fs::create_directories(dir.path());
  const auto path = dir.path() / "c.json";
  std::ofstream(path) << base_doc("tss").dump();
  EXPECT_EQ(parse_config(path).mode, Mode::Tss);
  std::ofstream(path) << "{ not json";
  EXPECT_THROW(parse_config(path), Error);
  EXPECT_THROW(parse_config(dir.path() / "missing.json"), Error);
}

TEST(Runner, Sha256) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Runner, ZeroReplicatesGiveEmptyManifest) {
  TempDir dir;
  auto c = config_in(base_doc("ibm"), dir);
  c.replicates = 0;
  const auto m = run_experiment(c);
  EXPECT_TRUE(m.replicates.empty());
  EXPECT_TRUE(m.files.empty());
  EXPECT_FALSE(m.all_failed());
  EXPECT_TRUE(fs::exists(dir.path() / kManifestName));
}

TEST(Runner, ManifestListsEveryFile) {
  TempDir dir;
  json doc = base_doc("ibm");
  doc["options"] = {{"event_log", true}};
  const auto m = run_experiment(config_in(doc, dir));
  ASSERT_EQ(m.replicates.size(), 3u);
  std::set<std::string> listed;
  for (const auto& f : m.files) {
    listed.insert(f.path);
    const auto content = slurp(dir.path() / f.path);
    EXPECT_EQ(sha256_hex(content), f.sha256);
    EXPECT_EQ(content.size(), f.bytes);
  }
  std::set<std::string> on_disk;
  for (const auto& e : fs::directory_iterator(dir.path()))
    if (e.path().filename() != kManifestName) on_disk.insert(e.path().filename().string());
  EXPECT_EQ(listed, on_disk);
  EXPECT_EQ(listed.size(), 6u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(m.replicates[i].seed, stream_seed(12345, i));
  const auto snap = lines(slurp(dir.path() / "replicate_0000_snapshots.csv"));
  EXPECT_EQ(snap[0], "# ecoevo-snapshot/1");
  EXPECT_EQ(snap[1], "time,trait,marker,count");
  EXPECT_EQ(snap[2].rfind("0,-1,0,", 0), 0u);
}

TEST(Runner, OutputsIndependentOfThreadCount) {
  json fv = base_doc("fv");
  fv["options"] = {{"particles", 50}};
  fv["horizon"] = 0.5;
  fv["sampling_interval"] = 0.1;
  json sfvp = base_doc("sfvp");
  sfvp["options"] = {{"particles", 30}};
  sfvp["horizon"] = 5.0;
  json wf = base_doc("wf");
  wf["model"] = two_allele_model();
  wf["initial"]["allele_a_frequency"] = 0.5;
  for (const json& doc : {base_doc("ibm"), base_doc("tss"), fv, sfvp, wf}) {
    TempDir one, eight;
    auto c1 = config_in(doc, one);
    auto c8 = config_in(doc, eight);
    c1.replicates = c8.replicates = 6;
    c8.threads = 8;
    const auto m1 = run_experiment(c1);
    const auto m8 = run_experiment(c8);
    ASSERT_EQ(m1.files.size(), m8.files.size());
    ASSERT_FALSE(m1.files.empty());
    for (std::size_t i = 0; i < m1.files.size(); ++i) {
      EXPECT_EQ(m1.files[i].path, m8.files[i].path);
      EXPECT_EQ(m1.files[i].sha256, m8.files[i].sha256) << doc.at("mode") << " " << m1.files[i].path;
    }
  }
}

TEST(Runner, InvasionReport) {
  TempDir dir;
  json doc = base_doc("invasion");
  doc["mutant"] = {{"trait", 0.0}};
  doc["replicates"] = 40;
  doc["options"] = {{"t_K", 10.0}};
  const auto m = run_experiment(config_in(doc, dir));
  EXPECT_EQ(m.failed(), 0u);
  const auto report = json::parse(slurp(dir.path() / "report.json"));
  EXPECT_NEAR(report.at("oracle").get<double>(), 0.753041, 1e-6);
  const double est = report.at("survival").at("estimate").get<double>();
  EXPECT_GE(est, 0.0);
  EXPECT_LE(est, 1.0);
  EXPECT_EQ(report.at("survival").at("n_trials").get<int>(), 40);
  EXPECT_EQ(report.at("epsilon_sensitivity").size(), 3u);
  EXPECT_FALSE(report.at("config").contains("threads"));
  EXPECT_EQ(report.at("config").at("seed").get<std::uint64_t>(), 12345u);
  const auto table = lines(slurp(dir.path() / "invasion_trials.csv"));
  EXPECT_EQ(table.size(), 42u);
  EXPECT_EQ(table[1],
            "trial,seed,survived_at_tK,marker_max_atom_at_tK,fixation_completed,mutant_mass_at_tK,t_K");
}

TEST(Runner, InvasionNeedsPositiveFitness) {
  TempDir dir;
  json doc = base_doc("invasion");
  doc["mutant"] = {{"trait", -1.0}};
  try {
    run_experiment(config_in(doc, dir));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NonPositiveFitness);
  }
}

TEST(Runner, AllReplicatesFailWithoutCoexistence) {
  TempDir dir;
  json doc = base_doc("dimorphic-fv");
  doc["initial"]["trait"] = -0.5;
  doc["mutant"] = {{"trait", -0.3}};
  doc["options"] = {{"particles", 10}};
  const auto m = run_experiment(config_in(doc, dir));
  EXPECT_TRUE(m.all_failed());
  EXPECT_NE(m.replicates[0].error.find("NoCoexistence"), std::string::npos);
}

TEST(Runner, CheckIifGrid) {
  TempDir dir;
  json doc = base_doc("check-iif");
  doc["options"] = {{"grid", 5}};
  run_experiment(config_in(doc, dir));
  const auto rows = lines(slurp(dir.path() / "iif.csv"));
  ASSERT_EQ(rows.size(), 27u);
  EXPECT_EQ(rows[1], "x,y,class,f_y_x,f_x_y");
  EXPECT_EQ(rows[2].rfind("-1,-1,Degenerate,0,0", 0), 0u);
  EXPECT_EQ(iif_grid_csv(dieckmann_doebeli(), 41).size(), iif_grid_csv(dieckmann_doebeli(), 41).size());
}

TEST(Plots, EmptyDirectoryHasNoSeries) {
  TempDir dir;
  fs::create_directories(dir.path());
  try {
    emit_plot_data(dir.path(), "fig2-support");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingSeries);
  }
}

TEST(Plots, SupportFromContinuousIbmRun) {
  TempDir dir;
  run_experiment(config_in(base_doc("ibm"), dir));
  const auto path = emit_plot_data(dir.path(), "fig2-support");
  const auto rows = lines(slurp(path));
  EXPECT_EQ(rows[0], "# ecoevo-fig2-support/1");
  EXPECT_EQ(rows[1], "replicate,time,trait,marker_min,marker_max,size");
  EXPECT_EQ(rows[2], "0,0,-1,0,0,54");
  EXPECT_GT(rows.size(), 3u * 5u);
  try {
    emit_plot_data(dir.path(), "fig3-allele-counts");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingSeries);
  }
  EXPECT_THROW(emit_plot_data(dir.path(), "fig9"), Error);
}

TEST(Plots, AlleleCountsFromTwoAlleleIbmRun) {
  TempDir dir;
  json doc = base_doc("ibm");
  doc["model"] = two_allele_model();
  doc["initial"]["allele_a_frequency"] = 0.5;
  run_experiment(config_in(doc, dir));
  const auto rows = lines(slurp(emit_plot_data(dir.path(), "fig3-allele-counts")));
  EXPECT_EQ(rows[1], "replicate,time,count_a,count_A,trait");
  EXPECT_EQ(rows[2], "0,0,27,27,-1");
}

TEST(Plots, DimorphicFromDimorphicRun) {
  TempDir dir;
  json doc = base_doc("dimorphic-fv");
  doc["model"]["sigma_c"] = 0.7;
  doc["initial"]["trait"] = -0.1;
  doc["mutant"] = {{"trait", 0.1}, {"marker", 0.5}};
  doc["options"] = {{"particles", 20}};
  doc["horizon"] = 0.2;
  doc["sampling_interval"] = 0.1;
  run_experiment(config_in(doc, dir));
  const auto rows = lines(slurp(emit_plot_data(dir.path(), "fig4-dimorphic")));
  EXPECT_EQ(rows[1], "replicate,time,trait,marker_min,marker_max,marker_mean,marker_var,size");
  EXPECT_EQ(rows[2], "0,0,-0.1,0,0,0,0,1");
  EXPECT_EQ(rows[3], "0,0,0.1,0.5,0.5,0.5,0,1");
  EXPECT_EQ(rows.size(), 2u + 3u * 3u * 2u);
  EXPECT_THROW(emit_plot_data(dir.path(), "fig3-allele-counts"), Error);
}

TEST(Plots, DimorphicNeedsTwoTraits) {
  TempDir dir;
  run_experiment(config_in(base_doc("ibm"), dir));
  EXPECT_THROW(emit_plot_data(dir.path(), "fig4-dimorphic"), Error);
  TempDir wf_dir;
  json wf = base_doc("wf");
  wf["model"] = two_allele_model();
  run_experiment(config_in(wf, wf_dir));
  EXPECT_THROW(emit_plot_data(wf_dir.path(), "fig2-support"), Error);
}
