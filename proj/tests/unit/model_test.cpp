// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "descnet/model/checkpoint.hpp"
#include "descnet/model/dual_channel.hpp"
#include "descnet/model/trainer.hpp"
#include "descnet/verify/suite.hpp"
#include "support/synthetic.hpp"

namespace descnet {
namespace {

ModelConfig small_config(TaskMode mode = TaskMode::multi_class) {
  ModelConfig c;
  c.mode = mode;
  c.d_embed = 8;
  c.gru_units = 4;
  c.text_length = 6;
  c.batch_size = 8;
  c.max_epochs = 3;
  c.seed = 3;
  return c;
}

std::vector<EncodedExample> random_examples(TaskMode mode, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return verify::toy_examples(mode, n, 6, rng);
}

template <class T>
void randomize(DualChannelModel<T>& model, Rng& rng, double limit) {
  for (auto* p : model.params()) {
    for (auto& v : p->value.values()) v = static_cast<T>(rng.uniform(-limit, limit));
  }
  model.text_embedding().clear_padding_row();
  model.descriptor_embedding().clear_padding_row();
}

TEST(ModelConfig, DefaultsAndFeatureWidth) {
  const ModelConfig c;
  EXPECT_EQ(c.d_embed, 300u);
  EXPECT_EQ(c.gru_units, 128u);
  EXPECT_EQ(c.dropout_rate, 0.5);
  EXPECT_EQ(c.recurrent_dropout_rate, 0.5);
  EXPECT_EQ(c.descriptor_dimension, 100u);
  EXPECT_EQ(c.text_length, 80u);
  EXPECT_EQ(c.effective_descriptor_length(), 80u);
  EXPECT_EQ(c.vocabulary_max, 130000u);
  EXPECT_EQ(c.batch_size, 32u);
  EXPECT_EQ(c.max_epochs, 20u);
  EXPECT_EQ(c.patience, 3u);
  EXPECT_EQ(c.learning_rate, 1e-3);
  EXPECT_EQ(c.feature_width(), 2u * (2 * 128) + 2 * 128);
}

TEST(ModelConfig, KeyValueRoundTripAndValidation) {
  ModelConfig c = small_config(TaskMode::multi_label);
  c.learning_rate = 0.0123;
  c.descriptor_test = DescriptorTest::anova;
  ModelConfig back;
  for (const auto& [k, v] : c.to_key_values()) EXPECT_TRUE(back.apply(k, v)) << k;
  EXPECT_EQ(back.to_key_values(), c.to_key_values());
  EXPECT_FALSE(back.apply("not_a_key", "1"));
  EXPECT_THROW(back.apply("d_embed", "-3"), InputError);
  c.dropout_rate = 1.0;
  EXPECT_THROW(c.validate(), InputError);
  c = small_config();
  c.gru_units = 0;
  EXPECT_THROW(c.validate(), InputError);
}

TEST(Encoding, TargetsAndPaddingLayout) {
  const auto corpus = testing::marker_corpus(20, 2, 10, 1);
  const auto vocab = build_vocabulary(corpus, 100);
  const auto desc = extract_descriptors(corpus, vocab, testing::class_space(2), {DescriptorTest::chi2, 1, 2});
  const ExampleEncoder enc(vocab, desc, 2, 7, 3);
  for (const auto& ex : enc.encode_corpus(corpus)) {
    ASSERT_EQ(ex.text_ids.size(), 7u);
    ASSERT_EQ(ex.descriptor_ids.size(), 3u);
    double s = 0;
    for (double t : ex.target) s += t;
    EXPECT_EQ(s, 1.0);
    for (const auto* ids : {&ex.text_ids, &ex.descriptor_ids}) {
      const std::size_t len = valid_length(*ids);
      for (std::size_t i = 0; i < ids->size(); ++i) {
        EXPECT_EQ((*ids)[i] == 0, i >= len);
        EXPECT_LT((*ids)[i], static_cast<std::int32_t>(vocab.size()));
      }
    }
  }
}

TEST(DualChannel, MultiClassRowsAreDistributions) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    DualChannelModel<float> model(small_config(), verify::kToyVocabulary, verify::kToyClasses);
    randomize(model, rng, 2.0);
    const auto ex = random_examples(TaskMode::multi_class, 7, trial);
    const auto probs = model.predict_proba(ex);
    for (std::size_t r = 0; r < probs.rows; ++r) {
      double s = 0;
      for (double p : probs.row(r)) {
        EXPECT_GE(p, 0.0);
        s += p;
      }
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(DualChannel, MultiLabelEntriesInsideUnitInterval) {
  Rng rng(5);
  DualChannelModel<float> model(small_config(TaskMode::multi_label), verify::kToyVocabulary, verify::kToyClasses);
  randomize(model, rng, 1.0);
  const auto probs = model.predict_proba(random_examples(TaskMode::multi_label, 9, 2));
  for (double p : probs.values) {
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
}

TEST(DualChannel, EmptyDescriptorChannelGivesZeroContext) {
  DualChannelModel<double> model(small_config(), verify::kToyVocabulary, verify::kToyClasses);
  auto ex = random_examples(TaskMode::multi_class, 3, 7);
  ex[1].descriptor_ids.assign(ex[1].descriptor_ids.size(), 0);
  const auto batch = make_batch<double>(ex);
  numerics::Tape<double> tape;
  const auto trace = model.forward_trace(tape, batch, false);
  for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(trace.attention_context.value().at(1, k), 0.0);
  for (std::size_t c = 0; c < verify::kToyClasses; ++c) EXPECT_TRUE(std::isfinite(trace.probabilities.value().at(1, c)));
}

TEST(DualChannel, MultiLabelHeadRowsAreIndependent) {
  Rng rng(6);
  DualChannelModel<double> model(small_config(TaskMode::multi_label), verify::kToyVocabulary, verify::kToyClasses);
  randomize(model, rng, 1.0);
  const auto ex = random_examples(TaskMode::multi_label, 5, 8);
  const auto before = model.predict_proba(ex);
  auto& w = model.head().weights.value;
  for (std::size_t i = 0; i < w.dim(0); ++i) w.at(i, 1) += 0.5;
  const auto after = model.predict_proba(ex);
  for (std::size_t r = 0; r < before.rows; ++r) {
    EXPECT_EQ(before.at(r, 0), after.at(r, 0));
    EXPECT_EQ(before.at(r, 2), after.at(r, 2));
    EXPECT_NE(before.at(r, 1), after.at(r, 1));
  }
}

TEST(DualChannel, InferenceIsBitDeterministic) {
  DualChannelModel<float> model(small_config(), verify::kToyVocabulary, verify::kToyClasses);
  const auto ex = random_examples(TaskMode::multi_class, 6, 9);
  EXPECT_EQ(model.predict_proba(ex).values, model.predict_proba(ex).values);
}

TEST(DualChannel, AblatedChannelIgnoresDescriptors) {
  ModelConfig c = small_config();
  c.ablate_descriptor_channel = true;
  DualChannelModel<double> model(c, verify::kToyVocabulary, verify::kToyClasses);
  auto ex = random_examples(TaskMode::multi_class, 4, 10);
  const auto base = model.predict_proba(ex);
  for (auto& e : ex) e.descriptor_ids.assign(e.descriptor_ids.size(), 0);
  EXPECT_EQ(model.predict_proba(ex).values, base.values);
}

TEST(DualChannel, FullModelGradientCheck) {
  for (TaskMode mode : {TaskMode::multi_class, TaskMode::multi_label}) {
    const auto g = verify::full_model_gradient_check(mode, 20190807);
    EXPECT_LT(g.result.max_relative_error, 1e-4) << to_string(mode) << ": " << verify::describe(g.result);
  }
}

struct Separable {
  Vocabulary vocab{1000};
  ClassDescriptorSet desc{DescriptorTest::chi2, 1};
  std::vector<EncodedExample> train, validation;
};

Separable separable(std::size_t docs, std::uint64_t seed) {
  const auto corpus = testing::marker_corpus(docs, 2, 40, seed);
  const auto val_corpus = testing::marker_corpus(40, 2, 40, seed + 1);
  Separable s;
  s.vocab = build_vocabulary(corpus, 1000);
  s.desc = extract_descriptors(corpus, s.vocab, testing::class_space(2), {DescriptorTest::chi2, 5, 2});
  const ExampleEncoder enc(s.vocab, s.desc, 2, 12, 12);
  s.train = enc.encode_corpus(corpus);
  s.validation = enc.encode_corpus(val_corpus);
  return s;
}

ModelConfig separable_config() {
  ModelConfig c;
  c.d_embed = 16;
  c.gru_units = 16;
  c.text_length = 12;
  c.batch_size = 16;
  c.max_epochs = 10;
  c.patience = 10;
  c.seed = 1;
  return c;
}

TEST(Train, LearnsSeparableCorpus) {
  auto s = separable(200, 42);
  DualChannelModel<float> model(separable_config(), s.vocab.size(), 2);
  const auto history = train(model, s.train, s.validation);
  EXPECT_GE(validation_metric(model, s.train), 0.99);
  EXPECT_LE(history.epochs.size(), 10u);
}

TEST(Train, LossFallsOverFirstEpoch) {
  auto s = separable(200, 42);
  ModelConfig c = separable_config();
  c.max_epochs = 1;
  DualChannelModel<float> model(c, s.vocab.size(), 2);
  const auto history = train(model, s.train, s.validation);
  EXPECT_LT(mean_loss(model, s.train), history.first_batch_loss);
}

TEST(Train, PatienceZeroRunsOneEpoch) {
  auto s = separable(40, 1);
  ModelConfig c = separable_config();
  c.patience = 0;
  DualChannelModel<float> model(c, s.vocab.size(), 2);
  EXPECT_EQ(train(model, s.train, s.validation).epochs.size(), 1u);
}

TEST(Train, IdenticalSeedsGiveIdenticalHistories) {
  auto s = separable(60, 2);
  ModelConfig c = separable_config();
  c.max_epochs = 3;
  DualChannelModel<float> a(c, s.vocab.size(), 2), b(c, s.vocab.size(), 2);
  EXPECT_EQ(train(a, s.train, s.validation).to_csv(), train(b, s.train, s.validation).to_csv());
}

TEST(Train, KeepsBestEpochParameters) {
  auto s = separable(60, 3);
  ModelConfig c = separable_config();
  c.max_epochs = 4;
  DualChannelModel<float> model(c, s.vocab.size(), 2);
  const auto history = train(model, s.train, s.validation);
  EXPECT_DOUBLE_EQ(validation_metric(model, s.validation), history.best_metric);
}

TEST(Train, NonFiniteLossIsReported) {
  auto s = separable(20, 4);
  DualChannelModel<float> model(separable_config(), s.vocab.size(), 2);
  model.head().bias.value[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    train(model, s.train, s.validation);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1, batch 0"), std::string::npos) << e.what();
  }
}

TEST(Predict, DecisionRules) {
  const std::vector<double> a{0.1, 0.7, 0.2}, b{0.9, 0.4, 0.6}, c{0.2, 0.2}, tie{0.4, 0.4, 0.2};
  EXPECT_EQ(make_prediction(a, TaskMode::multi_class, std::nullopt).labels, LabelSet{1});
  EXPECT_EQ(make_prediction(tie, TaskMode::multi_class, std::nullopt).labels, LabelSet{0});
  EXPECT_EQ(make_prediction(b, TaskMode::multi_label, 0.5).labels, (LabelSet{0, 2}));
  EXPECT_TRUE(make_prediction(c, TaskMode::multi_label, 0.5).labels.empty());
  EXPECT_THROW(make_prediction(c, TaskMode::multi_label, std::nullopt), InputError);
  EXPECT_EQ(make_prediction(a, TaskMode::multi_class, std::nullopt).probabilities, a);
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("descnet_ckpt_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  CheckpointInfo info_for(const ModelConfig& c) {
    CheckpointInfo info;
    info.config = c;
    info.labels = {"class0", "class1", "class2"};
    info.vocab_size = verify::kToyVocabulary;
    info.vocabulary_sha256 = sha256_hex("vocab");
    info.descriptors_sha256 = sha256_hex("desc");
    info.epoch = 2;
    info.validation_metric = 0.75;
    return info;
  }

  std::filesystem::path dir_;
};

TEST_F(CheckpointTest, RoundTripGivesBitIdenticalForward) {
  ModelConfig c = small_config(TaskMode::multi_label);
  c.share_embeddings = false;
  DualChannelModel<float> model(c, verify::kToyVocabulary, verify::kToyClasses);
  Rng rng(11);
  randomize(model, rng, 1.0);
  const auto path = (dir_ / "m.ckpt").string();
  save_checkpoint(model, info_for(c), path);
  const auto data = read_checkpoint(path);
  EXPECT_EQ(data.info.labels, info_for(c).labels);
  EXPECT_EQ(data.info.descriptors_sha256, sha256_hex("desc"));
  EXPECT_EQ(data.info.epoch, 2u);
  auto loaded = load_checkpoint_model<float>(data);
  const auto ex = random_examples(TaskMode::multi_label, 5, 12);
  EXPECT_EQ(loaded.predict_proba(ex).values, model.predict_proba(ex).values);
  EXPECT_EQ(serialize_checkpoint(loaded, data.info), serialize_checkpoint(model, info_for(c)));
}

TEST_F(CheckpointTest, TruncatedFileIsRejected) {
  DualChannelModel<float> model(small_config(), verify::kToyVocabulary, verify::kToyClasses);
  const std::string bytes = serialize_checkpoint(model, info_for(small_config()));
  for (std::size_t cut : {std::size_t{4}, std::size_t{30}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(parse_checkpoint(std::string_view(bytes).substr(0, cut), "cut"), CompatibilityError) << cut;
  }
  EXPECT_THROW(parse_checkpoint(bytes + "x", "long"), CompatibilityError);
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(parse_checkpoint(bad, "magic"), CompatibilityError);
}

TEST_F(CheckpointTest, FailedRestoreLeavesModelUntouched) {
  DualChannelModel<float> source(small_config(), verify::kToyVocabulary + 5, verify::kToyClasses);
  const auto data = parse_checkpoint(serialize_checkpoint(source, info_for(small_config())), "mem");
  DualChannelModel<float> target(small_config(), verify::kToyVocabulary, verify::kToyClasses);
  const auto ex = random_examples(TaskMode::multi_class, 3, 13);
  const auto before = target.predict_proba(ex).values;
  try {
    restore_parameters(target, data);
    FAIL();
  } catch (const CompatibilityError& e) {
    EXPECT_NE(std::string(e.what()).find("shape mismatch"), std::string::npos) << e.what();
  }
  EXPECT_EQ(target.predict_proba(ex).values, before);
}

TEST_F(CheckpointTest, UnknownHeaderKeyIsRejected) {
  KeyValues kv = info_for(small_config()).to_key_values();
  kv.emplace_back("surprise", "1");
  EXPECT_THROW(CheckpointInfo::from_key_values(kv), CompatibilityError);
}

TEST(Sha256, KnownDigest) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

}  // namespace
}  // namespace descnet
