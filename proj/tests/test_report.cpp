#include <gtest/gtest.h>

#include <sstream>

#include "tspsel/report.hpp"

using namespace tspsel;

namespace {

RunTable sample_table() {
  RunTable t;
  t.cutoff = 10.0;
  t.solvers = {"a", "b"};
  const std::vector<std::pair<Family, std::vector<double>>> rows{
      {Family::rue, {1.0, 2.0}}, {Family::rue, {3.0, 3.0}}, {Family::cluster, {100.0, 4.0}}};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    t.instances.push_back("i" + std::to_string(i));
    t.families.push_back(rows[i].first);
    for (double v : rows[i].second) {
      t.t.push_back(v);
      t.success.push_back(v < t.penalty() ? 1 : 0);
    }
  }
  return t;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::size_t count_prefix(const std::vector<std::string>& lines, const std::string& prefix) {
  std::size_t n = 0;
  for (const auto& l : lines) n += l.rfind(prefix, 0) == 0;
  return n;
}

}  // namespace

TEST(FamilyReport, OneBlockPerFamilyPlusTotal) {
  const auto t = sample_table();
  const auto text = format_family_report(t, family_stats(t));
  const auto lines = lines_of(text);
  EXPECT_EQ(count_prefix(lines, "rue (2)"), 4u);
  EXPECT_EQ(count_prefix(lines, "cluster (1)"), 4u);
  EXPECT_EQ(count_prefix(lines, "Total (3)"), 4u);
  for (const char* row : {"Unique", "Shared", "Failed", "PAR10"})
    EXPECT_NE(text.find(row), std::string::npos) << row;
}

TEST(FamilyReport, SummaryLines) {
  const auto t = sample_table();
  const auto text = format_family_report(t, family_stats(t), 3);
  EXPECT_NE(text.find("instances 3, solvers 2, cutoff 10, penalty 100\n"), std::string::npos);
  // VBS picks 1, 3, 4; SBS is b with 2, 3, 4.
  EXPECT_NE(text.find("VBS PAR10 2.667\n"), std::string::npos);
  EXPECT_NE(text.find("SBS b PAR10 3.000\n"), std::string::npos);
}

TEST(FamilyReport, ColumnsAreAligned) {
  const auto t = sample_table();
  const auto lines = lines_of(format_family_report(t, family_stats(t)));
  const std::size_t width = lines[0].size();
  for (std::size_t i = 1; i < lines.size() && !lines[i].empty(); ++i) EXPECT_EQ(lines[i].size(), width) << lines[i];
}

TEST(FamilyReport, JsonMatchesStats) {
  const auto t = sample_table();
  const auto stats = family_stats(t);
  const auto j = family_report_json(t, stats);
  EXPECT_EQ(j["families"].size(), stats.size());
  EXPECT_EQ(j["sbs"], "b");
  EXPECT_DOUBLE_EQ(j["vbs_par10"].get<double>(), 8.0 / 3.0);
  EXPECT_EQ(j["families"].back()["family"], "Total");
  EXPECT_EQ(j["families"].back()["shared"], 1);
}

TEST(EvalReport, RowsAndColumns) {
  EvalReport r;
  r.par10 = 1.5;
  r.avg_rank = 1.25;
  r.impro_pct = 50.0;
  r.notwo_pct = 100.0;
  r.accuracy_pct = 75.0;
  r.timeouts = 2;
  const auto lines = lines_of(format_eval_report({{"VBS", r}, {"kNN k=5", r}}, 2));
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0].rfind("method", 0), 0u);
  EXPECT_NE(lines[0].find("Avg. Rank"), std::string::npos);
  EXPECT_NE(lines[2].find("1.50"), std::string::npos);
  EXPECT_NE(lines[2].find("100.00"), std::string::npos);
  EXPECT_EQ(lines[2].substr(lines[2].size() - 1), "2");
  const auto j = eval_report_json({{"VBS", r}});
  EXPECT_EQ(j[0]["method"], "VBS");
  EXPECT_EQ(j[0]["timeouts"], 2);
}

TEST(Scatter, OneRowPerInstance) {
  const auto t = sample_table();
  std::ostringstream out;
  write_scatter(t, out);
  const auto lines = lines_of(out.str());
  ASSERT_EQ(lines.size(), t.rows() + 1);
  EXPECT_EQ(lines[0], "instance_id,family,sbs_time,vbs_time,alt_time");
  EXPECT_EQ(lines[3], "i2,cluster,4,4,100");
  EXPECT_EQ(lines[1], "i0,rue,2,1,1");
}
