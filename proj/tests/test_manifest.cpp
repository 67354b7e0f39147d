#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pathflow/dataio/manifest.hpp"
#include "pathflow/rng.hpp"

using namespace pathflow;
using namespace pathflow::dataio;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

// cohort mirroring the study's class structure: 333 wildtype and 330
// mutants, of which 129 are codeleted and 201 are not
std::vector<SlideRecord> tcga_style_cohort() {
  std::vector<SlideRecord> records;
  Rng rng(55);
  auto push = [&](int idx, IdhStatus idh, CodelStatus codel, Grade grade) {
    SlideRecord r;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "TCGA-%04d", idx);
    r.slide_id = buf;
    r.patient_id = std::string("P-") + (buf + 5);
    r.image_path = std::string("images/") + buf + ".png";
    r.idh = idh;
    r.codel = codel;
    r.grade = grade;
    r.os_days = 100.0 + rng.uniform() * 2000.0;
    r.event = rng.uniform() < 0.6 ? 1 : 0;
    r.sex = idx % 2 == 0 ? Sex::M : Sex::F;
    r.age_years = 30.0 + rng.uniform() * 40.0;
    records.push_back(r);
  };
  int idx = 0;
  // wildtype: 14 II, 57 III, 262 IV
  for (int i = 0; i < 14; ++i) push(idx++, IdhStatus::Wildtype, CodelStatus::Unknown, Grade::II);
  for (int i = 0; i < 57; ++i) push(idx++, IdhStatus::Wildtype, CodelStatus::Unknown, Grade::III);
  for (int i = 0; i < 262; ++i) push(idx++, IdhStatus::Wildtype, CodelStatus::Unknown, Grade::IV);
  // codeleted: 69 II, 60 III
  for (int i = 0; i < 69; ++i) push(idx++, IdhStatus::Mutant, CodelStatus::Codeleted, Grade::II);
  for (int i = 0; i < 60; ++i) push(idx++, IdhStatus::Mutant, CodelStatus::Codeleted, Grade::III);
  // non-codeleted: 96 II, 88 III, 17 IV
  for (int i = 0; i < 96; ++i)
    push(idx++, IdhStatus::Mutant, CodelStatus::NonCodeleted, Grade::II);
  for (int i = 0; i < 88; ++i)
    push(idx++, IdhStatus::Mutant, CodelStatus::NonCodeleted, Grade::III);
  for (int i = 0; i < 17; ++i)
    push(idx++, IdhStatus::Mutant, CodelStatus::NonCodeleted, Grade::IV);
  return records;
}

}  // namespace

TEST_CASE("663-row cohort round-trips with the expected class counts") {
  const auto records = tcga_style_cohort();
  REQUIRE(records.size() == 663);
  const std::string path = temp_path("manifest_663.csv");
  write_manifest(records, path);
  const auto loaded = load_manifest(path);
  REQUIRE(loaded.size() == 663);
  int wt = 0, mut = 0, codel = 0, noncodel = 0;
  for (const auto& r : loaded) {
    wt += r.idh == IdhStatus::Wildtype;
    mut += r.idh == IdhStatus::Mutant;
    codel += r.codel == CodelStatus::Codeleted;
    noncodel += r.codel == CodelStatus::NonCodeleted;
  }
  CHECK(wt == 333);
  CHECK(mut == 330);
  CHECK(codel == 129);
  CHECK(noncodel == 201);
}

TEST_CASE("load after write is the identity on valid record lists") {
  const auto records = tcga_style_cohort();
  const std::string path = temp_path("manifest_rt.csv");
  write_manifest(records, path);
  const auto loaded = load_manifest(path);
  REQUIRE(loaded.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(loaded[i].slide_id == records[i].slide_id);
    CHECK(loaded[i].patient_id == records[i].patient_id);
    CHECK(loaded[i].image_path == records[i].image_path);
    CHECK(loaded[i].idh == records[i].idh);
    CHECK(loaded[i].codel == records[i].codel);
    CHECK(loaded[i].grade == records[i].grade);
    CHECK(loaded[i].os_days == records[i].os_days);  // %.17g is lossless
    CHECK(loaded[i].event == records[i].event);
    CHECK(loaded[i].sex == records[i].sex);
    CHECK(loaded[i].age_years == records[i].age_years);
  }
}

TEST_CASE("empty data section yields an empty list") {
  const std::string path = temp_path("manifest_empty.csv");
  std::ofstream(path) << kManifestHeader << "\n";
  CHECK(load_manifest(path).empty());
}

TEST_CASE("codel status on a wildtype row is a taxonomy error with the row number") {
  const std::string path = temp_path("manifest_taxonomy.csv");
  std::ofstream(path) << kManifestHeader << "\n"
                      << "s1,p1,img1.png,1,0,II,NA,NA,M,NA\n"
                      << "s2,p2,img2.png,0,1,III,NA,NA,F,NA\n";
  try {
    load_manifest(path);
    FAIL("expected taxonomy error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
}

TEST_CASE("duplicate slide_id is rejected with the row number") {
  const std::string path = temp_path("manifest_dup.csv");
  std::ofstream(path) << kManifestHeader << "\n"
                      << "s1,p1,a.png,0,NA,II,NA,NA,M,NA\n"
                      << "s1,p2,b.png,0,NA,II,NA,NA,M,NA\n";
  try {
    load_manifest(path);
    FAIL("expected duplicate error");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("duplicate") != std::string::npos);
    CHECK(msg.find("row 3") != std::string::npos);
  }
}

TEST_CASE("malformed numeric fields are parse errors") {
  const std::string path = temp_path("manifest_badnum.csv");
  std::ofstream(path) << kManifestHeader << "\n"
                      << "s1,p1,a.png,0,NA,II,12x4,NA,M,NA\n";
  CHECK_THROWS_AS(load_manifest(path), DataError);
}

TEST_CASE("event=1 with unknown os_days violates the record invariant") {
  const std::string path = temp_path("manifest_event.csv");
  std::ofstream(path) << kManifestHeader << "\n"
                      << "s1,p1,a.png,0,NA,II,NA,1,M,NA\n";
  CHECK_THROWS_AS(load_manifest(path), DataError);
}

TEST_CASE("header mismatch and missing file are errors") {
  const std::string path = temp_path("manifest_hdr.csv");
  std::ofstream(path) << "slide,patient\n";
  CHECK_THROWS_AS(load_manifest(path), DataError);
  CHECK_THROWS_AS(load_manifest(temp_path("does_not_exist.csv")), DataError);
}
