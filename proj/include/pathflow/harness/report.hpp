#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "pathflow/dataio/manifest.hpp"
#include "pathflow/errors.hpp"
#include "pathflow/harness/config.hpp"
#include "pathflow/metrics.hpp"

namespace pathflow::harness {

constexpr double kNa = std::numeric_limits<double>::quiet_NaN();

// One row of the per-slide predictions table. Classification runs fill the
// label/fraction fields, survival runs the risk/os fields.
struct SlideScore {
  std::string slide_id;
  dataio::Grade grade = dataio::Grade::II;
  int true_label = -1;
  int pred_label = -1;
  double positive_fraction = kNa;
  double risk = kNa;
  double os_days = kNa;
  int event = -1;
};

struct ExperimentReport {
  std::string task;
  std::string grade;
  int repeat = 0;
  int best_epoch = -1;
  double val_metric = kNa;
  // percentages, NaN = not applicable
  double accuracy = kNa;
  double sensitivity = kNa;
  double specificity = kNa;
  bool has_roc = false;
  metrics::RocSummary roc;
  double cindex = kNa;
  double pearson = kNa;
  double spearman = kNa;
  std::uint64_t seed = 0;
  std::uint64_t bootstrap_seed = 0;
  int bootstrap_b = 0;
  std::vector<SlideScore> slides;
};

inline std::string report_basename(const ExperimentReport& r) {
  return r.task + "_" + r.grade + "_" + std::to_string(r.repeat);
}

namespace detail {

inline std::string fmt(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_na(const std::string& s) {
  if (s == "NA") return kNa;
  return std::stod(s);
}

}  // namespace detail

inline constexpr const char* kMetricsCsvHeader =
    "task,grade,accuracy,sensitivity,specificity,auc,auc_se,ci_low,ci_high,c_index,pearson,"
    "spearman";

inline std::string metrics_csv_row(const ExperimentReport& r) {
  std::string row = r.task + "," + r.grade + ",";
  row += detail::fmt(r.accuracy) + "," + detail::fmt(r.sensitivity) + "," +
         detail::fmt(r.specificity) + ",";
  if (r.has_roc)
    row += detail::fmt(r.roc.auc) + "," + detail::fmt(r.roc.se) + "," +
           detail::fmt(r.roc.ci_low) + "," + detail::fmt(r.roc.ci_high) + ",";
  else
    row += "NA,NA,NA,NA,";
  row += detail::fmt(r.cindex) + "," + detail::fmt(r.pearson) + "," + detail::fmt(r.spearman);
  return row;
}

inline nlohmann::ordered_json report_to_json(const ExperimentReport& r) {
  nlohmann::ordered_json j;
  j["task"] = r.task;
  j["grade"] = r.grade;
  j["repeat"] = r.repeat;
  j["best_epoch"] = r.best_epoch;
  j["val_metric"] = r.val_metric;
  j["seed"] = r.seed;
  j["bootstrap_seed"] = r.bootstrap_seed;
  j["bootstrap_b"] = r.bootstrap_b;
  auto put_opt = [&](const char* key, double v) {
    if (std::isnan(v)) j["metrics"][key] = nullptr;
    else j["metrics"][key] = v;
  };
  put_opt("accuracy", r.accuracy);
  put_opt("sensitivity", r.sensitivity);
  put_opt("specificity", r.specificity);
  if (r.has_roc) {
    j["metrics"]["auc"] = r.roc.auc;
    j["metrics"]["auc_se"] = r.roc.se;
    j["metrics"]["ci_low"] = r.roc.ci_low;
    j["metrics"]["ci_high"] = r.roc.ci_high;
  } else {
    j["metrics"]["auc"] = nullptr;
    j["metrics"]["auc_se"] = nullptr;
    j["metrics"]["ci_low"] = nullptr;
    j["metrics"]["ci_high"] = nullptr;
  }
  put_opt("c_index", r.cindex);
  put_opt("pearson", r.pearson);
  put_opt("spearman", r.spearman);

  j["slides"] = nlohmann::ordered_json::array();
  for (const auto& s : r.slides) {
    nlohmann::ordered_json js;
    js["slide_id"] = s.slide_id;
    js["grade"] = dataio::grade_to_string(s.grade);
    if (s.true_label >= 0) js["true_label"] = s.true_label;
    if (s.pred_label >= 0) js["pred_label"] = s.pred_label;
    if (!std::isnan(s.positive_fraction)) js["positive_fraction"] = s.positive_fraction;
    if (!std::isnan(s.risk)) js["risk"] = s.risk;
    if (!std::isnan(s.os_days)) js["os_days"] = s.os_days;
    if (s.event >= 0) js["event"] = s.event;
    j["slides"].push_back(js);
  }
  return j;
}

inline ExperimentReport report_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad report JSON in " + path + ": " + e.what());
  }
  ExperimentReport r;
  r.task = j.at("task").get<std::string>();
  r.grade = j.at("grade").get<std::string>();
  r.repeat = j.at("repeat").get<int>();
  r.best_epoch = j.at("best_epoch").get<int>();
  r.val_metric = j.at("val_metric").is_null() ? kNa : j.at("val_metric").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.bootstrap_seed = j.at("bootstrap_seed").get<std::uint64_t>();
  r.bootstrap_b = j.at("bootstrap_b").get<int>();
  auto opt = [&](const char* key) {
    const auto& v = j.at("metrics").at(key);
    return v.is_null() ? kNa : v.get<double>();
  };
  r.accuracy = opt("accuracy");
  r.sensitivity = opt("sensitivity");
  r.specificity = opt("specificity");
  if (!j.at("metrics").at("auc").is_null()) {
    r.has_roc = true;
    r.roc.auc = opt("auc");
    r.roc.se = opt("auc_se");
    r.roc.ci_low = opt("ci_low");
    r.roc.ci_high = opt("ci_high");
  }
  r.cindex = opt("c_index");
  r.pearson = opt("pearson");
  r.spearman = opt("spearman");
  for (const auto& js : j.at("slides")) {
    SlideScore s;
    s.slide_id = js.at("slide_id").get<std::string>();
    s.grade = dataio::grade_from_string(js.at("grade").get<std::string>(), 0);
    if (js.contains("true_label")) s.true_label = js.at("true_label").get<int>();
    if (js.contains("pred_label")) s.pred_label = js.at("pred_label").get<int>();
    if (js.contains("positive_fraction"))
      s.positive_fraction = js.at("positive_fraction").get<double>();
    if (js.contains("risk")) s.risk = js.at("risk").get<double>();
    if (js.contains("os_days")) s.os_days = js.at("os_days").get<double>();
    if (js.contains("event")) s.event = js.at("event").get<int>();
    r.slides.push_back(s);
  }
  return r;
}

// Writes report JSON, the Table-2-style metrics CSV row, the ROC point CSV
// and for survival runs the scatter and per-grade risk CSVs.
inline void emit_report(const ExperimentReport& r, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create output directory: " + out_dir);
  const std::string base = (fs::path(out_dir) / report_basename(r)).string();

  {
    std::ofstream out(base + ".report.json");
    if (!out) throw DataError("cannot write report: " + base + ".report.json");
    out << report_to_json(r).dump(2) << "\n";
    if (!out) throw DataError("report write failed");
  }
  {
    std::ofstream out(base + ".metrics.csv");
    if (!out) throw DataError("cannot write metrics csv");
    out << kMetricsCsvHeader << "\n" << metrics_csv_row(r) << "\n";
  }
  if (r.has_roc) metrics::write_roc_csv(r.roc, base + ".roc.csv");
  if (r.task == "survival_cox") {
    std::ofstream scatter(base + ".scatter.csv");
    if (!scatter) throw DataError("cannot write scatter csv");
    scatter << "slide_id,predicted,true\n";
    for (const auto& s : r.slides)
      scatter << s.slide_id << ',' << detail::fmt(s.risk) << ',' << detail::fmt(s.os_days)
              << "\n";
    std::ofstream bygrade(base + ".risk_by_grade.csv");
    if (!bygrade) throw DataError("cannot write risk_by_grade csv");
    bygrade << "slide_id,grade,predicted\n";
    for (const auto& s : r.slides)
      bygrade << s.slide_id << ',' << dataio::grade_to_string(s.grade) << ','
              << detail::fmt(s.risk) << "\n";
  }
}

// Parsed metrics CSV row (for round-trip checks and summaries).
struct MetricsRow {
  std::string task, grade;
  double accuracy, sensitivity, specificity, auc, auc_se, ci_low, ci_high, c_index, pearson,
      spearman;
};

inline MetricsRow parse_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open metrics csv: " + path);
  std::string header, row;
  if (!std::getline(in, header) || !std::getline(in, row))
    throw DataError("metrics csv too short: " + path);
  if (header != kMetricsCsvHeader) throw DataError("metrics csv header mismatch: " + path);
  std::vector<std::string> f;
  std::string cur;
  for (char ch : row) {
    if (ch == ',') {
      f.push_back(cur);
      cur.clear();
    } else if (ch != '\r') cur += ch;
  }
  f.push_back(cur);
  if (f.size() != 12) throw DataError("metrics csv needs 12 fields: " + path);
  MetricsRow m;
  m.task = f[0];
  m.grade = f[1];
  m.accuracy = detail::parse_na(f[2]);
  m.sensitivity = detail::parse_na(f[3]);
  m.specificity = detail::parse_na(f[4]);
  m.auc = detail::parse_na(f[5]);
  m.auc_se = detail::parse_na(f[6]);
  m.ci_low = detail::parse_na(f[7]);
  m.ci_high = detail::parse_na(f[8]);
  m.c_index = detail::parse_na(f[9]);
  m.pearson = detail::parse_na(f[10]);
  m.spearman = detail::parse_na(f[11]);
  return m;
}

// Combined per-repeat rows plus a mean row per (task, grade).
inline void write_summary_csv(const std::vector<ExperimentReport>& reports,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write summary csv: " + path);
  out << "task,grade,repeat," << &kMetricsCsvHeader[11] << "\n";  // skip "task,grade,"
  auto emit_row = [&](const std::string& task, const std::string& grade,
                      const std::string& repeat, const std::vector<double>& vals) {
    out << task << ',' << grade << ',' << repeat;
    for (double v : vals) out << ',' << detail::fmt(v);
    out << "\n";
  };
  std::vector<std::pair<std::string, std::string>> groups;
  for (const auto& r : reports) {
    std::pair<std::string, std::string> key{r.task, r.grade};
    bool found = false;
    for (const auto& g : groups) found = found || g == key;
    if (!found) groups.push_back(key);
  }
  for (const auto& [task, grade] : groups) {
    std::vector<std::vector<double>> rows;
    for (const auto& r : reports) {
      if (r.task != task || r.grade != grade) continue;
      std::vector<double> vals = {r.accuracy,
                                  r.sensitivity,
                                  r.specificity,
                                  r.has_roc ? r.roc.auc : kNa,
                                  r.has_roc ? r.roc.se : kNa,
                                  r.has_roc ? r.roc.ci_low : kNa,
                                  r.has_roc ? r.roc.ci_high : kNa,
                                  r.cindex,
                                  r.pearson,
                                  r.spearman};
      emit_row(task, grade, std::to_string(r.repeat), vals);
      rows.push_back(vals);
    }
    if (rows.size() > 1) {
      std::vector<double> mean(rows[0].size(), 0.0);
      for (std::size_t k = 0; k < mean.size(); ++k) {
        double sum = 0.0;
        int cnt = 0;
        for (const auto& row : rows)
          if (!std::isnan(row[k])) {
            sum += row[k];
            ++cnt;
          }
        mean[k] = cnt ? sum / cnt : kNa;
      }
      emit_row(task, grade, "mean", mean);
    }
  }
  if (!out) throw DataError("summary write failed: " + path);
}

}  // namespace pathflow::harness
