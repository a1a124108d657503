// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "descnet/app/commands.hpp"
#include "support/synthetic.hpp"

namespace descnet::app {
namespace {

namespace fs = std::filesystem;

const std::string kData = DESCNET_TEST_DATA;

class CommandTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("descnet_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  RunConfig config(const std::string& train_file) const {
    RunConfig cfg = load_run_config(kData + "/small.cfg");
    cfg.train = kData + "/" + train_file;
    cfg.out_dir = dir_.string();
    cfg.model.max_epochs = 2;
    return cfg;
  }

  int run(const std::function<int(Io)>& command) {
    out_.str({});
    err_.str({});
    return command(Io{in_, out_, err_});
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
  std::istringstream in_;
  std::ostringstream out_, err_;
};

TEST(RunConfig, KeyValuesRoundTrip) {
  RunConfig cfg;
  cfg.train = "a.csv";
  cfg.threshold = 0.25;
  cfg.validation_fraction = 0.2;
  cfg.model.gru_units = 7;
  RunConfig back;
  back.apply(cfg.to_key_values());
  EXPECT_EQ(back.to_key_values(), cfg.to_key_values());
  EXPECT_THROW(back.apply("colour", "red"), InputError);
}

TEST(RunConfig, CheckpointSiblings) {
  RunConfig cfg;
  cfg.out_dir = "o";
  EXPECT_EQ(cfg.checkpoint_path(), (fs::path("o") / "model.ckpt").string());
  cfg.checkpoint = "elsewhere/m.ckpt";
  EXPECT_EQ(cfg.threshold_path(), (fs::path("elsewhere") / "threshold.txt").string());
}

TEST(HoldOut, PartitionsInFileOrder) {
  const auto corpus = testing::marker_corpus(50, 2, 10, 3);
  const auto [train, held] = detail::hold_out(corpus, 0.2, 9);
  EXPECT_EQ(held.size(), 10u);
  EXPECT_EQ(train.size(), 40u);
  for (const auto* part : {&train, &held}) {
    for (std::size_t i = 1; i < part->size(); ++i) EXPECT_LT((*part)[i - 1].id, (*part)[i].id);
  }
  EXPECT_EQ(detail::hold_out(corpus, 0.2, 9).second.front().id, held.front().id);
  EXPECT_THROW(detail::hold_out(corpus, 0.001, 9), InputError);
}

TEST_F(CommandTest, ExtractDescriptorsFindsMarkers) {
  RunConfig cfg = config("marker_train.csv");
  cfg.model.descriptor_dimension = 1;
  ASSERT_EQ(run([&](Io io) { return cmd_extract_descriptors(cfg, io); }), 0);
  EXPECT_NE(out_.str().find("Sports: league"), std::string::npos) << out_.str();
  EXPECT_NE(out_.str().find("World: treaty"), std::string::npos);
  EXPECT_NE(out_.str().find("Business: profit"), std::string::npos);
  const auto set = ClassDescriptorSet::load((dir_ / "descriptors.tsv").string());
  EXPECT_EQ(set.class_names(), (std::vector<std::string>{"Sports", "World", "Business"}));
  EXPECT_TRUE(fs::exists(dir_ / "vocab.tsv"));
}

TEST_F(CommandTest, TrainEvaluatePredictMultiClass) {
  RunConfig cfg = config("marker_train.csv");
  ASSERT_EQ(run([&](Io io) { return cmd_train(cfg, io); }), 0);
  EXPECT_NE(out_.str().find("epoch 1 train_loss "), std::string::npos) << out_.str();
  for (const char* f : {"model.ckpt", "history.csv", "vocab.tsv", "descriptors.tsv", "config.effective"}) {
    EXPECT_TRUE(fs::exists(dir_ / f)) << f;
  }
  EXPECT_FALSE(fs::exists(dir_ / "threshold.txt"));
  EXPECT_EQ(slurp(dir_ / "history.csv").substr(0, 27), "epoch,train_loss,val_metric");

  cfg.test = kData + "/marker_test.csv";
  ASSERT_EQ(run([&](Io io) { return cmd_evaluate(cfg, io); }), 0);
  EXPECT_NE(out_.str().find("accuracy\t"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "report.json"));

  ASSERT_EQ(run([&](Io io) { return cmd_predict(cfg, {"filler1 league filler2", "treaty"}, io); }), 0);
  std::istringstream lines(out_.str());
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    ++count;
    EXPECT_NE(line.find("\tSports="), std::string::npos) << line;
    EXPECT_NE(line.find("\tWorld="), std::string::npos) << line;
    EXPECT_NE(line.find("\tBusiness="), std::string::npos) << line;
  }
  EXPECT_EQ(count, 2);
}

TEST_F(CommandTest, MultiLabelThresholdFlow) {
  RunConfig cfg = config("multilabel.jsonl");
  cfg.model.mode = TaskMode::multi_label;
  ASSERT_EQ(run([&](Io io) { return cmd_train(cfg, io); }), 0);
  const std::string text = slurp(dir_ / "threshold.txt");
  ASSERT_FALSE(text.empty());
  EXPECT_EQ(text.back(), '\n');
  const double t = std::stod(text);
  EXPECT_GT(t, 0.0);
  EXPECT_LT(t, 1.0);

  cfg.threshold = 0.99;
  ASSERT_EQ(run([&](Io io) { return cmd_predict(cfg, {"filler3 filler4"}, io); }), 0);
  EXPECT_EQ(out_.str().front(), '\t') << out_.str();

  cfg.threshold.reset();
  fs::remove(dir_ / "threshold.txt");
  cfg.test = kData + "/multilabel.jsonl";
  try {
    run([&](Io io) { return cmd_evaluate(cfg, io); });
    FAIL();
  } catch (const InputError& e) {
    EXPECT_EQ(e.exit_code(), 2);
    EXPECT_NE(std::string(e.what()).find("run `train`"), std::string::npos) << e.what();
  }
}

TEST_F(CommandTest, MissingTrainFileIsInputError) {
  RunConfig cfg = config("does_not_exist.csv");
  EXPECT_THROW(run([&](Io io) { return cmd_train(cfg, io); }), InputError);
  cfg.train.clear();
  EXPECT_THROW(run([&](Io io) { return cmd_extract_descriptors(cfg, io); }), InputError);
}

TEST_F(CommandTest, UnknownLabelIsInputError) {
  RunConfig cfg = config("marker_train.csv");
  ASSERT_EQ(run([&](Io io) { return cmd_train(cfg, io); }), 0);
  cfg.test = kData + "/bad_label.csv";
  EXPECT_THROW(run([&](Io io) { return cmd_evaluate(cfg, io); }), InputError);
}

TEST_F(CommandTest, ChangedVocabularyIsCompatibilityError) {
  RunConfig cfg = config("marker_train.csv");
  ASSERT_EQ(run([&](Io io) { return cmd_train(cfg, io); }), 0);
  std::ofstream(dir_ / "vocab.tsv", std::ios::app) << "extra\t1\n";
  try {
    run([&](Io io) { return cmd_predict(cfg, {"league"}, io); });
    FAIL();
  } catch (const CompatibilityError& e) {
    EXPECT_EQ(e.exit_code(), 4);
  }
}

TEST_F(CommandTest, VerifyPassesAndDetectsFault) {
  verify::SuiteOptions quick;
  quick.random_corpora = 50;
  quick.fuzz_runs = 20;
  quick.metric_instances = 20;
  EXPECT_EQ(run([&](Io io) { return cmd_verify(io, false, quick); }), 0);
  EXPECT_NE(out_.str().find(" 0 failed"), std::string::npos) << out_.str();
  EXPECT_EQ(run([&](Io io) { return cmd_verify(io, true, quick); }), 1);
  EXPECT_FALSE(numerics::fault::corrupt_tanh_adjoint);
}

}  // namespace
}  // namespace descnet::app
