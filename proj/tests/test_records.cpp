#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "rlrt/records.hpp"

using namespace rlrt;

namespace {

RolloutRecord sample_record() {
  RolloutRecord rec;
  rec.rollout.prompt = 2;
  rec.rollout.response = {1, 0, 3};
  rec.rollout.reward = 1;
  rec.rollout.student_logprobs = {-0.5, -1.25, -2.0};
  rec.rollout.seed = 1234;
  rec.profile.tokens = rec.rollout.response;
  rec.profile.d_hat = {0.1, -0.2, 0.0};
  rec.profile.d_bar = {0.01, std::numeric_limits<double>::infinity(), 0.0};
  rec.profile.skipped = {false, false, true};
  rec.credit.weights = {1.1, 0.8, 1.0};
  rec.credit.mixed = {1.05, 0.9, 1.0};
  rec.credit.advantages = {0.7, 0.6, 0.65};
  return rec;
}

}  // namespace

TEST(Records, MetricsRowHasOneFieldPerColumn) {
  StepMetrics m;
  m.step = 4;
  m.mean_reward = 0.1 + 0.2;
  m.lambda = 0.5;
  const std::string row = metrics_row(m, Scheme::kRlrt);
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), std::count(kMetricsHeader.begin(), kMetricsHeader.end(), ','));
  EXPECT_EQ(row.substr(0, 7), "4,RLRT,");
  EXPECT_NE(row.find("0.30000000000000004"), std::string::npos);
}

TEST(Records, RolloutLineValidates) {
  const std::string line = rollout_json_line(sample_record(), Scheme::kRlrt, 7);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  EXPECT_EQ(validate_rollout_line(line), std::nullopt) << *validate_rollout_line(line);
  EXPECT_NE(line.find("\"d_bar\":[0.01,null,0"), std::string::npos) << line;
  EXPECT_NE(line.find("\"scheme\":\"RLRT\""), std::string::npos);
  EXPECT_NE(line.find("\"step\":7"), std::string::npos);
  EXPECT_NE(line.find("\"seed\":1234"), std::string::npos);
}

TEST(Records, ValidatorRejectsBrokenLines) {
  EXPECT_TRUE(validate_rollout_line("not json").has_value());
  EXPECT_TRUE(validate_rollout_line("[1,2]").has_value());
  const std::string good = rollout_json_line(sample_record(), Scheme::kGrpo, 0);
  std::string missing = good;
  missing.replace(missing.find("\"reward\""), 8, "\"rewardx\"");
  EXPECT_TRUE(validate_rollout_line(missing).has_value());
  RolloutRecord short_rec = sample_record();
  short_rec.credit.weights.pop_back();
  EXPECT_TRUE(validate_rollout_line(rollout_json_line(short_rec, Scheme::kGrpo, 0)).has_value());
  std::string bad_reward = good;
  bad_reward.replace(bad_reward.find("\"reward\":1"), 10, "\"reward\":2");
  EXPECT_TRUE(validate_rollout_line(bad_reward).has_value());
}

TEST(Records, FormatReal) {
  EXPECT_EQ(format_real(0.5), "0.5");
  EXPECT_EQ(format_real(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(std::stod(format_real(0.1 + 0.2)), 0.1 + 0.2);
}

TEST(Records, ReportCsvsHaveHeaders) {
  TheoryReport tr;
  PositionTheory p;
  p.f = {0.5, 0.5};
  p.f_bar = 0.5;
  tr.add(p);
  const std::string theory = theory_csv(tr);
  EXPECT_EQ(std::count(theory.begin(), theory.end(), '\n'), 2);

  MarkerStats ms;
  ms.tokens.push_back(MarkerToken{3, 40, 2, 1.0, 3.5, true});
  const std::string markers = markers_csv(ms);
  EXPECT_EQ(markers.substr(0, markers.find('\n')), "token,explore,exploit,delta,z,flagged");
  EXPECT_NE(markers.find("\n3,40,2,1,3.5,1"), std::string::npos) << markers;
}
