#pragma once

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "pathflow/errors.hpp"

namespace pathflow::dataio {

enum class IdhStatus { Wildtype = 0, Mutant = 1, Unknown };
enum class CodelStatus { NonCodeleted = 0, Codeleted = 1, Unknown };
enum class Grade { II, III, IV };
enum class Sex { M, F, Unknown };

struct SlideRecord {
  std::string slide_id;
  std::string patient_id;
  std::string image_path;
  IdhStatus idh = IdhStatus::Unknown;
  CodelStatus codel = CodelStatus::Unknown;
  Grade grade = Grade::II;
  std::optional<double> os_days;
  std::optional<int> event;  // 1 = death observed, 0 = censored
  Sex sex = Sex::Unknown;
  std::optional<double> age_years;
};

inline constexpr const char* kManifestHeader =
    "slide_id,patient_id,image_path,idh,codel,grade,os_days,event,sex,age";

inline std::string grade_to_string(Grade g) {
  switch (g) {
    case Grade::II: return "II";
    case Grade::III: return "III";
    default: return "IV";
  }
}

inline Grade grade_from_string(const std::string& s, int row) {
  if (s == "II") return Grade::II;
  if (s == "III") return Grade::III;
  if (s == "IV") return Grade::IV;
  throw DataError("manifest row " + std::to_string(row) + ": bad grade '" + s + "'");
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::optional<double> parse_real(const std::string& s, const char* field, int row) {
  if (s == "NA") return std::nullopt;
  double val = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, val);
  if (ec != std::errc() || ptr != end)
    throw DataError("manifest row " + std::to_string(row) + ": malformed " +
                    std::string(field) + " '" + s + "'");
  return val;
}

inline std::optional<int> parse_binary(const std::string& s, const char* field, int row) {
  if (s == "NA") return std::nullopt;
  if (s == "0") return 0;
  if (s == "1") return 1;
  throw DataError("manifest row " + std::to_string(row) + ": malformed " +
                  std::string(field) + " '" + s + "' (expected 0, 1 or NA)");
}

inline std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace detail

inline void validate_record(const SlideRecord& r, int row) {
  if (r.codel != CodelStatus::Unknown && r.idh != IdhStatus::Mutant)
    throw DataError("manifest row " + std::to_string(row) + ": slide '" + r.slide_id +
                    "' has 1p/19q status but is not IDH-mutant");
  if (r.event.has_value() && *r.event == 1 && !r.os_days.has_value())
    throw DataError("manifest row " + std::to_string(row) + ": slide '" + r.slide_id +
                    "' has event=1 but unknown os_days");
  if (r.os_days.has_value() && *r.os_days < 0)
    throw DataError("manifest row " + std::to_string(row) + ": negative os_days");
  if (r.age_years.has_value() && *r.age_years < 0)
    throw DataError("manifest row " + std::to_string(row) + ": negative age");
}

inline std::vector<SlideRecord> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError("manifest is empty: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader)
    throw DataError("manifest header mismatch in " + path + " (got '" + line + "')");

  std::vector<SlideRecord> records;
  std::unordered_set<std::string> seen_ids;
  int row = 1;  // header is row 1
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != 10)
      throw DataError("manifest row " + std::to_string(row) + ": expected 10 fields, got " +
                      std::to_string(fields.size()));
    SlideRecord r;
    r.slide_id = fields[0];
    r.patient_id = fields[1];
    r.image_path = fields[2];
    if (r.slide_id.empty())
      throw DataError("manifest row " + std::to_string(row) + ": empty slide_id");
    if (!seen_ids.insert(r.slide_id).second)
      throw DataError("manifest row " + std::to_string(row) + ": duplicate slide_id '" +
                      r.slide_id + "'");

    auto idh = detail::parse_binary(fields[3], "idh", row);
    r.idh = !idh ? IdhStatus::Unknown : (*idh ? IdhStatus::Mutant : IdhStatus::Wildtype);
    auto codel = detail::parse_binary(fields[4], "codel", row);
    r.codel = !codel ? CodelStatus::Unknown
                     : (*codel ? CodelStatus::Codeleted : CodelStatus::NonCodeleted);
    r.grade = grade_from_string(fields[5], row);
    r.os_days = detail::parse_real(fields[6], "os_days", row);
    r.event = detail::parse_binary(fields[7], "event", row);
    if (fields[8] == "M") r.sex = Sex::M;
    else if (fields[8] == "F") r.sex = Sex::F;
    else if (fields[8] == "NA") r.sex = Sex::Unknown;
    else
      throw DataError("manifest row " + std::to_string(row) + ": bad sex '" + fields[8] + "'");
    r.age_years = detail::parse_real(fields[9], "age", row);

    validate_record(r, row);
    records.push_back(std::move(r));
  }
  return records;
}

inline void write_manifest(const std::vector<SlideRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest: " + path);
  out << kManifestHeader << "\n";
  int row = 1;
  for (const auto& r : records) {
    validate_record(r, ++row);
    out << r.slide_id << ',' << r.patient_id << ',' << r.image_path << ',';
    out << (r.idh == IdhStatus::Unknown ? "NA" : (r.idh == IdhStatus::Mutant ? "1" : "0")) << ',';
    out << (r.codel == CodelStatus::Unknown ? "NA"
                                            : (r.codel == CodelStatus::Codeleted ? "1" : "0"))
        << ',';
    out << grade_to_string(r.grade) << ',';
    out << (r.os_days ? detail::format_real(*r.os_days) : "NA") << ',';
    out << (r.event ? std::to_string(*r.event) : "NA") << ',';
    out << (r.sex == Sex::Unknown ? "NA" : (r.sex == Sex::M ? "M" : "F")) << ',';
    out << (r.age_years ? detail::format_real(*r.age_years) : "NA") << "\n";
  }
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace pathflow::dataio
