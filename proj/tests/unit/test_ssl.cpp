#include <gtest/gtest.h>

#include <map>
#include <mutex>
#include <set>

#include "roiloc/error.hpp"
#include "roiloc/ssl.hpp"

using namespace roiloc;

namespace {

struct Stub {
  std::map<std::string, BoundingBox> truth;
  std::map<std::string, double> confidence;  // per candidate, unlabelled scans
  std::vector<std::size_t> pool_sizes;
  std::vector<bool> warm;
  std::mutex mu;
  TrainConfig tiny;

  Stub() {
    tiny.input_shape = {4, 4, 4};
    tiny.channel_widths = {1, 1, 1};
  }

  SslHooks hooks() {
    SslHooks h;
    h.train = [this](const std::vector<LabelledScan>& pool, const ModelBundle* warm_start) {
      pool_sizes.push_back(pool.size());
      warm.push_back(warm_start != nullptr);
      // The pool size tags the bundle.
      return initial_bundle(tiny, {static_cast<int>(pool.size()), 4, 4});
    };
    h.localize = [this](const UnlabelledScan& s, const ModelBundle& m) {
      std::lock_guard lock(mu);
      std::vector<Candidate> out(6);
      const auto it = truth.find(s.scan_id);
      const double conf = confidence.count(s.scan_id) ? confidence[s.scan_id] : 0.0;
      for (int k = 0; k < 6; ++k) {
        out[k].arch_id = k / 2 + 1;
        out[k].readout = k % 2 ? Readout::Last10Mean : Readout::Terminal;
        out[k].confidence = k < 2 ? conf : 0.0;
        // Validation quality improves with the pool size.
        if (it != truth.end() && m.box_size[0] >= 8) {
          out[k].box = it->second;
        } else {
          out[k].box = {{0, 0, 0}, {2, 2, 2}};
        }
      }
      return out;
    };
    return h;
  }
};

std::shared_ptr<const Volume> flat() {
  return std::make_shared<const Volume>(Index3{16, 16, 16}, Vec3{1, 1, 1}, IntensityUnits::HU,
                                        std::vector<std::int16_t>(4096, 0));
}

}  // namespace

TEST(EarlyStopper, PatienceTrace) {
  EarlyStopper s(2, 0.5);
  EXPECT_FALSE(s.update(1, 70.0));
  EXPECT_FALSE(s.update(2, 70.2));
  EXPECT_TRUE(s.update(3, 70.3));
  EXPECT_EQ(s.best_round(), 1);
  EXPECT_DOUBLE_EQ(s.best_score(), 70.0);
}

TEST(EarlyStopper, ImprovementResetsPatience) {
  EarlyStopper s(2, 0.5);
  s.update(0, 10);
  EXPECT_FALSE(s.update(1, 10.4));
  EXPECT_FALSE(s.update(2, 11.0));
  EXPECT_EQ(s.best_round(), 2);
  EXPECT_FALSE(s.update(3, 11.0));
  EXPECT_TRUE(s.update(4, 9.0));
}

TEST(Splits, RatioAndFolds) {
  std::vector<std::string> ids;
  for (int i = 0; i < 100; ++i) ids.push_back("s" + std::to_string(i));
  const auto sp = make_ssl_splits(ids, 0.4, 3, 7);
  EXPECT_EQ(sp.labelled.size(), 40u);
  EXPECT_EQ(sp.unlabelled.size(), 60u);
  std::set<std::string> seen_test;
  for (int k = 0; k < 3; ++k) {
    const auto f = sp.fold(k);
    std::set<std::string> train(f.train_labelled.begin(), f.train_labelled.end());
    train.insert(f.train_unlabelled.begin(), f.train_unlabelled.end());
    for (const auto& t : f.test) {
      EXPECT_EQ(train.count(t), 0u);
      EXPECT_TRUE(seen_test.insert(t).second);
    }
    EXPECT_EQ(train.size() + f.test.size(), 100u);
  }
  EXPECT_EQ(seen_test.size(), 100u);
  EXPECT_EQ(make_ssl_splits(ids, 0.4, 3, 7).labelled, sp.labelled);
  EXPECT_NE(make_ssl_splits(ids, 0.4, 3, 8).labelled, sp.labelled);

  const auto thirty = make_ssl_splits(std::vector<std::string>(ids.begin(), ids.begin() + 30), 0.3, 3, 1);
  EXPECT_EQ(thirty.labelled.size(), 9u);
  EXPECT_THROW(make_ssl_splits(ids, 0.001, 3, 1), Error);
  EXPECT_THROW(make_ssl_splits(ids, 0.02, 3, 1), Error);
  EXPECT_THROW(make_ssl_splits(ids, 0.4, 1, 1), Error);
  EXPECT_THROW(sp.fold(3), Error);
}

TEST(SelfTrain, NoConfidentScansKeepsThePretrainedModel) {
  Stub stub;
  std::vector<LabelledScan> lab;
  for (int i = 0; i < 5; ++i) {
    const std::string id = "l" + std::to_string(i);
    stub.truth[id] = {{4, 4, 4}, {6, 6, 6}};
    lab.push_back({id, flat(), stub.truth[id]});
  }
  std::vector<UnlabelledScan> unl{{"u0", flat()}, {"u1", flat()}};
  const auto r = self_train(lab, unl, stub.tiny, SslConfig{}, FusionConfig{}, InferenceConfig{}, stub.hooks());
  EXPECT_TRUE(r.ledger.empty());
  EXPECT_EQ(r.best_round, 0);
  ASSERT_EQ(r.rounds.size(), 1u);
  EXPECT_EQ(stub.pool_sizes.size(), 1u);
  EXPECT_EQ(r.bundle.box_size[0], 4);  // 5 labelled, 1 held out for validation
}

TEST(SelfTrain, PseudoLabelRoundTrace) {
  Stub stub;
  std::vector<LabelledScan> lab;
  for (int i = 0; i < 5; ++i) {
    const std::string id = "l" + std::to_string(i);
    stub.truth[id] = {{4, 4, 4}, {6, 6, 6}};
    lab.push_back({id, flat(), stub.truth[id]});
  }
  std::vector<UnlabelledScan> unl;
  for (int i = 0; i < 6; ++i) unl.push_back({"u" + std::to_string(i), flat()});
  // Four clear the 1.2 bar (2 x 0.7), two never do.
  for (int i = 0; i < 4; ++i) stub.confidence["u" + std::to_string(i)] = 0.7;
  stub.confidence["u4"] = 0.55;

  SslConfig cfg;
  cfg.max_rounds = 4;
  const auto r = self_train(lab, unl, stub.tiny, cfg, FusionConfig{}, InferenceConfig{}, stub.hooks());
  ASSERT_EQ(r.ledger.size(), 4u);
  for (const auto& p : r.ledger) {
    EXPECT_EQ(p.round, 1);
    EXPECT_EQ(p.arch_id, 1);
    EXPECT_DOUBLE_EQ(p.confidence_sum, 1.4);
    EXPECT_EQ(p.box, (BoundingBox{{0, 0, 0}, {2, 2, 2}}));
  }
  // Round 2 adds nothing and ends the loop without another training run.
  ASSERT_EQ(r.rounds.size(), 2u);
  EXPECT_EQ(stub.pool_sizes, (std::vector<std::size_t>{4, 8}));
  EXPECT_EQ(stub.warm, (std::vector<bool>{false, true}));
  EXPECT_EQ(r.rounds[1].new_labels, 4u);
  EXPECT_EQ(r.rounds[1].pool_size, 8u);
  EXPECT_DOUBLE_EQ(r.rounds[0].val_dice, 0.0);
  EXPECT_DOUBLE_EQ(r.rounds[1].val_dice, 100.0);
  EXPECT_DOUBLE_EQ(r.rounds[1].val_accuracy, 100.0);
  EXPECT_EQ(r.best_round, 1);
  EXPECT_EQ(r.bundle.box_size[0], 8);

  const auto csv = ssl_rounds_csv(r.rounds);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kSslRoundHeader);
  EXPECT_NE(pseudo_labels_json(r.ledger).find("\"u0\""), std::string::npos);
}

TEST(SelfTrain, TinyLabelledSetValidatesInSample) {
  Stub stub;
  std::vector<LabelledScan> lab;
  for (int i = 0; i < 2; ++i) {
    const std::string id = "l" + std::to_string(i);
    stub.truth[id] = {{4, 4, 4}, {6, 6, 6}};
    lab.push_back({id, flat(), stub.truth[id]});
  }
  self_train(lab, {}, stub.tiny, SslConfig{}, FusionConfig{}, InferenceConfig{}, stub.hooks());
  EXPECT_EQ(stub.pool_sizes, (std::vector<std::size_t>{2}));
}

TEST(SelfTrain, ConfigErrors) {
  Stub stub;
  EXPECT_THROW(self_train({}, {}, stub.tiny, SslConfig{}, FusionConfig{}, InferenceConfig{}, stub.hooks()), Error);
  SslConfig c;
  c.pseudo_threshold = 0.5;
  EXPECT_THROW(c.validate(0.66), Error);
  c = SslConfig{};
  c.max_rounds = 0;
  EXPECT_THROW(c.validate(0.66), Error);
}
