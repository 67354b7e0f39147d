// Command-line front end: corpus synthesis, split inspection, training,
// evaluation, report summarization and gradient checking.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "pathflow/pathflow.hpp"

namespace {

using namespace pathflow;

struct CliConfig {
  harness::ExperimentConfig cfg;
  std::string task = "idh";
  std::string grade = "all";
};

void add_experiment_flags(CLI::App* cmd, CliConfig& c) {
  cmd->add_option("--task", c.task, "idh | codel | survival_class | survival_cox");
  cmd->add_option("--grade", c.grade, "grade filter: all | II | III | IV");
  cmd->add_option("--train_ratio", c.cfg.train_ratio, "training fraction");
  cmd->add_option("--val_ratio", c.cfg.val_ratio, "validation fraction");
  cmd->add_option("--test_ratio", c.cfg.test_ratio, "test fraction");
  cmd->add_option("--repeats", c.cfg.repeats, "number of disjoint-test repeats");
  cmd->add_option("--patches_per_slide", c.cfg.patches_per_slide, "patches sampled per slide");
  cmd->add_option("--patch_size", c.cfg.patch_size, "patch side length, pixels");
  cmd->add_option("--epochs", c.cfg.epochs, "training epochs");
  cmd->add_option("--batch_size", c.cfg.batch_size, "minibatch size");
  cmd->add_option("--lr", c.cfg.lr, "learning rate");
  cmd->add_option("--momentum", c.cfg.momentum, "SGD momentum");
  cmd->add_option("--weight_decay", c.cfg.weight_decay, "weight decay");
  cmd->add_option("--seed", c.cfg.seed, "master seed");
  cmd->add_option("--workers", c.cfg.workers, "worker threads for extraction/inference");
  cmd->add_option("--bootstrap_b", c.cfg.bootstrap_b, "bootstrap resamples for the AUC CI");
  cmd->add_option("--white_thresh", c.cfg.white_thresh, "tissue mask luminance threshold");
  cmd->add_option("--var_thresh", c.cfg.var_thresh, "tissue mask variance threshold");
  cmd->add_option("--mask_window", c.cfg.mask_window, "tissue mask window, pixels");
  cmd->set_config("--config", "", "key = value config file, overridden by flags");
}

void finalize(CliConfig& c) {
  c.cfg.task = harness::task_from_name(c.task);
  c.cfg.grade = harness::grade_filter_from_name(c.grade);
  c.cfg.validate();
}

int run(int argc, char** argv) {
  CLI::App app{"pathflow: patch-based tissue image classification and survival modeling"};
  app.require_subcommand(1);

  // synth ------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate the synthetic desk-scale corpus");
  dataio::CorpusSpec corpus;
  std::string synth_out;
  std::uint64_t synth_seed = 1234;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--slides_per_class", corpus.slides_per_class, "slides per class");
  synth->add_option("--image_size", corpus.image_size, "image side length, pixels");
  synth->add_option("--censor_prob", corpus.censor_prob, "censoring probability");
  synth->add_option("--format", corpus.format, "image format: png | ppm");
  synth->add_option("--theta_lo_class0", corpus.theta_lo_class0, "class 0 frequency low");
  synth->add_option("--theta_hi_class0", corpus.theta_hi_class0, "class 0 frequency high");
  synth->add_option("--theta_lo_class1", corpus.theta_lo_class1, "class 1 frequency low");
  synth->add_option("--theta_hi_class1", corpus.theta_hi_class1, "class 1 frequency high");
  synth->add_option("--contrast", corpus.contrast, "texture contrast");
  synth->add_option("--os_scale_days", corpus.os_scale_days, "survival scale, days");
  synth->add_option("--log_hazard_slope", corpus.log_hazard_slope,
                    "slope of -log(os) in normalized theta");
  synth->add_option("--os_sigma", corpus.os_sigma, "lognormal spread of survival");

  // split ------------------------------------------------------------------
  auto* split_cmd = app.add_subcommand("split", "write stratified split assignments");
  CliConfig split_cfg;
  std::string split_manifest, split_out;
  split_cmd->add_option("--manifest", split_manifest, "manifest CSV")->required();
  split_cmd->add_option("--out", split_out, "output directory")->required();
  add_experiment_flags(split_cmd, split_cfg);

  // train ------------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "train a model and emit reports");
  CliConfig train_cfg;
  std::string train_manifest, train_out;
  train_cmd->add_option("--manifest", train_manifest, "manifest CSV")->required();
  train_cmd->add_option("--out", train_out, "output directory")->required();
  add_experiment_flags(train_cmd, train_cfg);

  // eval -------------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a saved model on a manifest");
  CliConfig eval_cfg;
  std::string eval_model, eval_manifest, eval_out;
  int eval_tag = 0;
  eval_cmd->add_option("--model", eval_model, "model file (.pfnn)")->required();
  eval_cmd->add_option("--manifest", eval_manifest, "manifest CSV")->required();
  eval_cmd->add_option("--out", eval_out, "output directory")->required();
  eval_cmd->add_option("--repeat_tag", eval_tag, "repeat index used in output names");
  add_experiment_flags(eval_cmd, eval_cfg);

  // report -----------------------------------------------------------------
  auto* report_cmd = app.add_subcommand("report", "summarize report JSONs into one CSV");
  std::string report_in, report_out;
  report_cmd->add_option("--in", report_in, "directory containing *.report.json")->required();
  report_cmd->add_option("--out", report_out, "summary CSV path")->required();

  // gradcheck ---------------------------------------------------------------
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of the default network");
  double gc_eps = 1e-5;
  std::uint64_t gc_seed = 7;
  gc_cmd->add_option("--epsilon", gc_eps, "finite-difference step");
  gc_cmd->add_option("--seed", gc_seed, "seed for input and coordinate sampling");

  CLI11_PARSE(app, argc, argv);

  if (synth->parsed()) {
    const auto result = dataio::synth_corpus(corpus, synth_seed, synth_out);
    std::printf("wrote %zu slides to %s\n", result.manifest.size(), result.manifest_path.c_str());
    return 0;
  }

  if (split_cmd->parsed()) {
    finalize(split_cfg);
    const auto manifest = dataio::load_manifest(split_manifest);
    const auto cohort = harness::select_cohort(manifest, split_cfg.cfg.task, split_cfg.cfg.grade);
    std::filesystem::create_directories(split_out);
    for (int r = 0; r < split_cfg.cfg.repeats; ++r) {
      const auto split = harness::stratified_split(cohort, split_cfg.cfg, r);
      const std::string path =
          (std::filesystem::path(split_out) /
           (harness::task_name(split_cfg.cfg.task) + "_" +
            harness::grade_filter_name(split_cfg.cfg.grade) + "_" + std::to_string(r) +
            ".split.csv"))
              .string();
      std::ofstream out(path);
      if (!out) throw DataError("cannot write split csv: " + path);
      out << "slide_id,split\n";
      for (const auto& rec : cohort)
        out << rec.slide_id << ',' << harness::split_part_name(split.parts.at(rec.slide_id))
            << "\n";
      std::printf("wrote %s\n", path.c_str());
    }
    return 0;
  }

  if (train_cmd->parsed()) {
    finalize(train_cfg);
    const auto result = harness::train_task(train_cfg.cfg, train_manifest, train_out);
    for (std::size_t i = 0; i < result.reports.size(); ++i) {
      const auto& r = result.reports[i];
      std::printf("repeat %d: best_epoch=%d val_metric=%.4f", r.repeat, r.best_epoch,
                  r.val_metric);
      if (r.has_roc) std::printf(" test_auc=%.4f acc=%.2f%%", r.roc.auc, r.accuracy);
      if (!std::isnan(r.cindex)) std::printf(" c_index=%.4f", r.cindex);
      std::printf(" model=%s\n", result.model_paths[i].c_str());
    }
    return 0;
  }

  if (eval_cmd->parsed()) {
    finalize(eval_cfg);
    const auto report = harness::evaluate_model(eval_model, eval_manifest, eval_cfg.cfg.task,
                                                eval_cfg.cfg.grade, eval_cfg.cfg, eval_tag);
    harness::emit_report(report, eval_out);
    std::printf("evaluated %zu slides", report.slides.size());
    if (report.has_roc) std::printf(" auc=%.4f acc=%.2f%%", report.roc.auc, report.accuracy);
    if (!std::isnan(report.cindex)) std::printf(" c_index=%.4f", report.cindex);
    std::printf("\n");
    return 0;
  }

  if (report_cmd->parsed()) {
    std::vector<harness::ExperimentReport> reports;
    std::vector<std::string> paths;
    for (const auto& entry : std::filesystem::directory_iterator(report_in))
      if (entry.path().string().ends_with(".report.json")) paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());
    for (const auto& p : paths) reports.push_back(harness::report_from_json_file(p));
    if (reports.empty()) throw DataError("no .report.json files under " + report_in);
    harness::write_summary_csv(reports, report_out);
    std::printf("summarized %zu reports into %s\n", reports.size(), report_out.c_str());
    return 0;
  }

  // gradcheck
  Rng rng(gc_seed);
  Tensor4 x(8, 3, 16, 16);
  for (auto& v : x.v) v = rng.uniform(-1.0, 1.0);
  std::vector<int> labels(8);
  for (auto& l : labels) l = static_cast<int>(rng.below(2));
  nn::Network net(nn::default_network_spec(3, 1), {3, 16, 16});
  net.init_params(derive_seed(gc_seed, "init"));
  auto loss_fn = [&labels](const Tensor4& out) {
    heads::BinaryBatch bb;
    for (int i = 0; i < out.n; ++i) bb.logits.push_back(out.at(i, 0, 0, 0));
    bb.labels = labels;
    auto res = heads::bce_loss(bb);
    Tensor4 dout(out.n, 1, 1, 1);
    for (int i = 0; i < out.n; ++i) dout.at(i, 0, 0, 0) = res.grad[i];
    return std::make_pair(res.loss, dout);
  };
  const auto report = nn::grad_check(net, x, loss_fn, gc_eps, derive_seed(gc_seed, "coords"));
  for (const auto& b : report.blocks)
    std::printf("%-24s max_rel_error=%.3e\n", b.name.c_str(), b.max_rel_error);
  std::printf("global max_rel_error=%.3e (epsilon=%.1e)\n", report.global_max, report.epsilon);
  if (report.global_max > 1e-4) {
    std::fprintf(stderr, "gradient check FAILED\n");
    return 4;
  }
  std::printf("gradient check passed\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const pathflow::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const pathflow::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const pathflow::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
