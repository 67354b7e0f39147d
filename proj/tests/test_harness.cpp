#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pathflow/pathflow.hpp"

using namespace pathflow;
using namespace pathflow::harness;

namespace {

namespace fs = std::filesystem;

std::string fresh_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool files_equal(const std::string& a, const std::string& b) {
  return read_file(a) == read_file(b);
}

struct TinyCorpus {
  std::string dir;
  std::string manifest;
  TinyCorpus() {
    dir = fresh_dir("pf_tiny_corpus");
    dataio::CorpusSpec spec;
    spec.slides_per_class = 10;
    spec.image_size = 64;
    spec.censor_prob = 0.4;
    const auto result = dataio::synth_corpus(spec, 31, dir);
    manifest = result.manifest_path;
  }
};

const TinyCorpus& tiny_corpus() {
  static TinyCorpus corpus;
  return corpus;
}

ExperimentConfig tiny_cfg(Task task) {
  ExperimentConfig cfg;
  cfg.task = task;
  cfg.patches_per_slide = 8;
  cfg.patch_size = 16;
  cfg.epochs = 2;
  cfg.batch_size = task == Task::SurvivalCox ? 32 : 8;
  cfg.bootstrap_b = 100;
  cfg.seed = 77;
  return cfg;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PATHFLOW_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

double recompute_tolerance(double a, double b) { return std::abs(a - b); }

}  // namespace

TEST_CASE("classification training is bit-identical across reruns and worker counts") {
  const auto& corpus = tiny_corpus();
  const std::string out_a = fresh_dir("pf_train_a");
  const std::string out_b = fresh_dir("pf_train_b");
  const std::string out_c = fresh_dir("pf_train_c");

  auto cfg = tiny_cfg(Task::Idh);
  train_task(cfg, corpus.manifest, out_a);
  train_task(cfg, corpus.manifest, out_b);
  auto cfg_threads = cfg;
  cfg_threads.workers = 3;
  train_task(cfg_threads, corpus.manifest, out_c);

  for (const char* name :
       {"idh_all_0.report.json", "idh_all_0.metrics.csv", "idh_all_0.roc.csv"}) {
    INFO(name);
    REQUIRE(files_equal(out_a + "/" + name, out_b + "/" + name));
    REQUIRE(files_equal(out_a + "/" + name, out_c + "/" + name));
  }
  // model files are byte-identical too
  REQUIRE(files_equal(out_a + "/idh_all_0.model.pfnn", out_c + "/idh_all_0.model.pfnn"));
}

TEST_CASE("patch extraction results do not depend on the worker count") {
  const auto& corpus = tiny_corpus();
  auto cfg = tiny_cfg(Task::Idh);
  const auto manifest = dataio::load_manifest(corpus.manifest);
  const auto cohort = select_cohort(manifest, Task::Idh, GradeFilter::All);
  const std::string dir = fs::path(corpus.manifest).parent_path().string();
  const auto serial = extract_cohort_patches(cohort, dir, cfg);
  auto cfg4 = cfg;
  cfg4.workers = 4;
  const auto parallel = extract_cohort_patches(cohort, dir, cfg4);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    REQUIRE(serial[i].slide_id == parallel[i].slide_id);
    REQUIRE(serial[i].data == parallel[i].data);
  }
}

TEST_CASE("classification report: schema, NA survival fields, recomputable metrics") {
  const auto& corpus = tiny_corpus();
  const std::string out = fresh_dir("pf_report_cls");
  auto cfg = tiny_cfg(Task::Idh);
  const auto result = train_task(cfg, corpus.manifest, out);
  REQUIRE(result.reports.size() == 1);
  const auto& r = result.reports[0];

  // exact CSV contract
  std::ifstream csv(out + "/idh_all_0.metrics.csv");
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  CHECK(header ==
        "task,grade,accuracy,sensitivity,specificity,auc,auc_se,ci_low,ci_high,c_index,"
        "pearson,spearman");
  CHECK(row.find("idh,all,") == 0);
  // classification rows end with NA,NA,NA
  CHECK(row.rfind(",NA,NA,NA") == row.size() - 9);

  // metrics recompute from the per-slide table
  std::vector<int> pred, truth;
  metrics::ScoredCohort cohort;
  for (const auto& s : r.slides) {
    pred.push_back(s.pred_label);
    truth.push_back(s.true_label);
    cohort.scores.push_back(s.positive_fraction);
    cohort.labels.push_back(s.true_label);
  }
  const auto cs = metrics::confusion_stats(pred, truth);
  CHECK(recompute_tolerance(100.0 * cs.accuracy, r.accuracy) <= 1e-12);
  CHECK(recompute_tolerance(100.0 * cs.sensitivity, r.sensitivity) <= 1e-12);
  CHECK(recompute_tolerance(100.0 * cs.specificity, r.specificity) <= 1e-12);
  const auto roc = metrics::roc_auc_with_ci(cohort, r.bootstrap_b, r.bootstrap_seed);
  CHECK(recompute_tolerance(roc.auc, r.roc.auc) <= 1e-12);
  CHECK(recompute_tolerance(roc.se, r.roc.se) <= 1e-12);
  CHECK(recompute_tolerance(roc.ci_low, r.roc.ci_low) <= 1e-12);
  CHECK(recompute_tolerance(roc.ci_high, r.roc.ci_high) <= 1e-12);

  // JSON -> CSV -> JSON keeps 12 significant digits
  const auto parsed = report_from_json_file(out + "/idh_all_0.report.json");
  const auto csv_row = parse_metrics_csv(out + "/idh_all_0.metrics.csv");
  CHECK(std::abs(parsed.accuracy - csv_row.accuracy) <=
        std::abs(parsed.accuracy) * 1e-12);
  CHECK(std::abs(parsed.roc.auc - csv_row.auc) <= std::abs(parsed.roc.auc) * 1e-12);
  CHECK(std::isnan(csv_row.c_index));
  CHECK(std::isnan(csv_row.pearson));
  CHECK(std::isnan(csv_row.spearman));
}

TEST_CASE("cox training emits survival artifacts with NA classification fields") {
  const auto& corpus = tiny_corpus();
  const std::string out = fresh_dir("pf_report_cox");
  auto cfg = tiny_cfg(Task::SurvivalCox);
  const auto result = train_task(cfg, corpus.manifest, out);
  const auto& r = result.reports[0];

  CHECK(std::isnan(r.accuracy));
  CHECK_FALSE(r.has_roc);
  CHECK(r.cindex >= 0.0);
  CHECK(r.cindex <= 1.0);
  CHECK_FALSE(std::isnan(r.pearson));
  CHECK_FALSE(std::isnan(r.spearman));

  CHECK(fs::exists(out + "/survival_cox_all_0.scatter.csv"));
  CHECK(fs::exists(out + "/survival_cox_all_0.risk_by_grade.csv"));
  CHECK_FALSE(fs::exists(out + "/survival_cox_all_0.roc.csv"));

  // scatter rows recompute to the reported correlations
  std::vector<double> risks, times, os;
  std::vector<int> events;
  for (const auto& s : r.slides) {
    risks.push_back(s.risk);
    times.push_back(s.os_days);
    events.push_back(s.event);
    os.push_back(s.os_days);
  }
  CHECK(recompute_tolerance(metrics::c_index(risks, times, events), r.cindex) <= 1e-12);
  const auto corr = metrics::correlations(risks, os);
  CHECK(recompute_tolerance(corr.pearson, r.pearson) <= 1e-12);
  CHECK(recompute_tolerance(corr.spearman, r.spearman) <= 1e-12);

  // metrics csv: classification columns are NA
  const auto row = parse_metrics_csv(out + "/survival_cox_all_0.metrics.csv");
  CHECK(std::isnan(row.accuracy));
  CHECK(std::isnan(row.auc));
  CHECK(std::abs(row.c_index - r.cindex) <= std::abs(r.cindex) * 1e-12);
}

TEST_CASE("survival_class derives labels, stores the cutoff and trains") {
  const auto& corpus = tiny_corpus();
  const std::string out = fresh_dir("pf_report_sc");
  auto cfg = tiny_cfg(Task::SurvivalClass);
  const auto result = train_task(cfg, corpus.manifest, out);
  const auto& r = result.reports[0];
  CHECK(r.has_roc);
  const auto model = nn::load_model(result.model_paths[0]);
  REQUIRE(model.meta.survival_cutoff_days.has_value());
  CHECK(*model.meta.survival_cutoff_days > 0.0);
  CHECK(model.meta.task == "survival_class");
}

TEST_CASE("evaluate reproduces the training-time test metrics from the saved model") {
  const auto& corpus = tiny_corpus();
  const std::string out = fresh_dir("pf_eval");
  auto cfg = tiny_cfg(Task::Idh);
  const auto trained = train_task(cfg, corpus.manifest, out);

  // the eval cohort is the full manifest here; scores of the test slides
  // must match the training-time report exactly (same patches, same params)
  auto eval_cfg = cfg;
  const auto report =
      evaluate_model(trained.model_paths[0], corpus.manifest, Task::Idh, GradeFilter::All,
                     eval_cfg, /*repeat_tag=*/9);
  CHECK(report.repeat == 9);
  for (const auto& trained_slide : trained.reports[0].slides) {
    bool found = false;
    for (const auto& s : report.slides)
      if (s.slide_id == trained_slide.slide_id) {
        REQUIRE(s.positive_fraction == trained_slide.positive_fraction);
        REQUIRE(s.pred_label == trained_slide.pred_label);
        found = true;
      }
    REQUIRE(found);
  }
}

TEST_CASE("evaluate applies grade filters exactly") {
  const auto& corpus = tiny_corpus();
  const std::string out = fresh_dir("pf_eval_grade");
  auto cfg = tiny_cfg(Task::Idh);
  const auto trained = train_task(cfg, corpus.manifest, out);

  const auto manifest = dataio::load_manifest(corpus.manifest);
  std::size_t grade3 = 0;
  for (const auto& rec : manifest) grade3 += rec.grade == dataio::Grade::III;

  const auto report = evaluate_model(trained.model_paths[0], corpus.manifest, Task::Idh,
                                     GradeFilter::III, cfg);
  CHECK(report.slides.size() == grade3);
  for (const auto& s : report.slides) CHECK(s.grade == dataio::Grade::III);
}

TEST_CASE("model/task head mismatches are compatibility errors") {
  const auto& corpus = tiny_corpus();
  const std::string out = fresh_dir("pf_eval_mismatch");
  auto cfg = tiny_cfg(Task::Idh);
  const auto trained = train_task(cfg, corpus.manifest, out);
  CHECK_THROWS_AS(evaluate_model(trained.model_paths[0], corpus.manifest, Task::SurvivalCox,
                                 GradeFilter::All, tiny_cfg(Task::SurvivalCox)),
                  DataError);
}

TEST_CASE("grade-IV 1p/19q experiments are rejected") {
  auto cfg = tiny_cfg(Task::Codel);
  cfg.grade = GradeFilter::IV;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("summary csv aggregates repeats with a mean row") {
  const auto& corpus = tiny_corpus();
  const std::string out = fresh_dir("pf_summary");
  auto cfg = tiny_cfg(Task::Idh);
  cfg.repeats = 4;
  cfg.test_ratio = 0.25;
  const auto result = train_task(cfg, corpus.manifest, out);
  REQUIRE(result.reports.size() == 4);
  // four disjoint test sets
  std::set<std::string> seen;
  for (const auto& r : result.reports)
    for (const auto& s : r.slides) REQUIRE(seen.insert(s.slide_id).second);

  const std::string path = out + "/summary.csv";
  write_summary_csv(result.reports, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line ==
        "task,grade,repeat,accuracy,sensitivity,specificity,auc,auc_se,ci_low,ci_high,"
        "c_index,pearson,spearman");
  int rows = 0;
  bool mean_row = false;
  while (std::getline(in, line)) {
    ++rows;
    mean_row = mean_row || line.find("idh,all,mean,") == 0;
  }
  CHECK(rows == 5);  // 4 repeats + mean
  CHECK(mean_row);
}

// --------------------------------------------------------------------------
// CLI

TEST_CASE("cli: config files feed flags and flags win on conflict") {
  const auto& corpus = tiny_corpus();
  const std::string out = fresh_dir("pf_cli_train");
  const std::string cfg_path = out + "/run.cfg";
  {
    std::ofstream cfg(cfg_path);
    cfg << "# desk-scale smoke run\n"
        << "epochs = 1\n"
        << "patch_size = 16\n"
        << "patches_per_slide = 4\n"
        << "batch_size = 8\n"
        << "bootstrap_b = 100\n"
        << "seed = 5\n";
  }
  const int rc = run_cli("train --manifest " + corpus.manifest + " --out " + out +
                         " --task idh --config " + cfg_path + " --patches_per_slide 6");
  REQUIRE(rc == 0);
  const auto model = nn::load_model(out + "/idh_all_0.model.pfnn");
  CHECK(model.meta.patches_per_slide == 6);  // flag beat the config file
  CHECK(model.meta.patch_size == 16);        // config file beat the default
}

TEST_CASE("cli: exit codes follow the error taxonomy") {
  const auto& corpus = tiny_corpus();
  CHECK(run_cli("train --manifest " + corpus.manifest +
                " --out /tmp/pf_cli_x --task bogus") == 2);
  CHECK(run_cli("train --manifest /nonexistent/manifest.csv --out /tmp/pf_cli_x --task idh "
                "--patch_size 16 --epochs 1") == 3);
  CHECK(run_cli("split --manifest " + corpus.manifest +
                " --out /tmp/pf_cli_split --task idh --train_ratio 0.9 --val_ratio 0.2 "
                "--test_ratio 0.1") == 2);
}

TEST_CASE("cli: synth and split produce loadable artifacts") {
  const std::string dir = fresh_dir("pf_cli_synth");
  REQUIRE(run_cli("synth --out " + dir + " --slides_per_class 4 --image_size 64 --seed 3") == 0);
  const auto manifest = dataio::load_manifest(dir + "/manifest.csv");
  CHECK(manifest.size() == 8);

  const std::string split_dir = fresh_dir("pf_cli_splitdir");
  REQUIRE(run_cli("split --manifest " + dir + "/manifest.csv --out " + split_dir +
                  " --task idh") == 0);
  std::ifstream in(split_dir + "/idh_all_0.split.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "slide_id,split");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 8);
}
