#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "../common/pipeline.hpp"
#include "../oracles/metrics.hpp"
#include "retroid/data/hash.hpp"
#include "retroid/errors.hpp"
#include "retroid/harness/classifier.hpp"
#include "retroid/harness/features.hpp"
#include "support.hpp"

using namespace retroid;
using namespace retroid::harness;
using retroid::test::TempDir;

namespace {

LabeledSet constant_classes(int per_class, int px = 32) {
  LabeledSet s;
  for (int i = 0; i < per_class; ++i) {
    s.add(Image(px, px, 1, 40), "dark", "d" + std::to_string(i));
    s.add(Image(px, px, 1, 210), "light", "l" + std::to_string(i));
  }
  return s;
}

// Three classes told apart by a bright square in different places, with noise.
LabeledSet blob_classes(int per_class, std::uint64_t seed) {
  Rng rng(seed);
  LabeledSet s;
  const int pos[3][2] = {{4, 4}, {20, 4}, {12, 20}};
  for (int i = 0; i < per_class; ++i)
    for (int k = 0; k < 3; ++k) {
      Image img(32, 32, 1);
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
          const bool in = x >= pos[k][0] && x < pos[k][0] + 8 && y >= pos[k][1] && y < pos[k][1] + 8;
          img.at(x, y) = saturate_u8((in ? 180.0 : 70.0) + 25.0 * rng.normal());
        }
      s.add(std::move(img), "c" + std::to_string(k), std::to_string(i) + "_" + std::to_string(k));
    }
  return s;
}

Hyperparams quick(int epochs = 15, std::uint64_t seed = 3) {
  Hyperparams hp;
  hp.epochs = epochs;
  hp.seed = seed;
  hp.batch_size = 16;
  return hp;
}

}  // namespace

TEST(Hyperparams, DefaultsAndValidation) {
  const Hyperparams hp;
  EXPECT_EQ(hp.optimizer, "adam");
  EXPECT_DOUBLE_EQ(hp.learning_rate, 0.001);
  EXPECT_DOUBLE_EQ(hp.weight_decay, 0.0001);
  EXPECT_EQ(hp.epochs, 100);
  EXPECT_EQ(hp.loss, "cross-entropy");
  EXPECT_EQ(Hyperparams::from_json(hp.to_json()), hp);
  Hyperparams bad;
  bad.epochs = 0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = {};
  bad.learning_rate = -1;
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Features, DownsampleAveragesBlocks) {
  Image img(4, 4, 1);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) img.at(x, y) = static_cast<std::uint8_t>(x < 2 ? 10 : 30);
  const auto f = downsample_gray(img, 2);
  EXPECT_EQ(f, (std::vector<float>{10, 30, 10, 30}));
}

TEST(NearestCentroid, SeparatesConstantClasses) {
  const auto s = constant_classes(5);
  const auto clf = train(s, "nearest-centroid", {});
  EXPECT_EQ(clf.labels, (std::vector<std::string>{"dark", "light"}));
  const auto m = evaluate(clf, s);
  EXPECT_DOUBLE_EQ(m.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(m.macro_f1, 1.0);
}

TEST(NearestCentroid, CentroidProbeWinsItsClass) {
  const auto s = blob_classes(10, 1);
  const auto clf = train(s, "nearest-centroid", {});
  for (int k = 0; k < 3; ++k) {
    // Pixel mean of class k is its centroid before normalization.
    Image mean(32, 32, 1);
    for (std::size_t p = 0; p < mean.pixels.size(); ++p) {
      double sum = 0;
      int n = 0;
      for (std::size_t i = 0; i < s.size(); ++i)
        if (s.labels[i] == "c" + std::to_string(k)) sum += s.images[i].pixels[p], ++n;
      mean.pixels[p] = saturate_u8(sum / n);
    }
    const auto p = clf.predict(mean);
    EXPECT_EQ(std::max_element(p.begin(), p.end()) - p.begin(), clf.label_index("c" + std::to_string(k)));
  }
}

TEST(Train, RejectsSingleClassAndUnknownBackend) {
  LabeledSet one;
  one.add(Image(8, 8, 1, 1), "a");
  one.add(Image(8, 8, 1, 2), "a");
  EXPECT_THROW(train(one, "nearest-centroid", {}), ValidationError);
  EXPECT_THROW(train(constant_classes(2), "resnet-9000", {}), ConfigError);
  EXPECT_THROW(train(LabeledSet{}, "small-cnn", {}), ValidationError);
}

TEST(Predict, ShapeMismatchRejected) {
  const auto clf = train(constant_classes(3), "nearest-centroid", {});
  EXPECT_THROW(clf.predict(Image(16, 16, 1)), ValidationError);
  EXPECT_THROW(clf.predict(Image(32, 32, 3)), ValidationError);
}

TEST(Predict, DistributionsOverRandomProbes) {
  const auto s = blob_classes(8, 2);
  for (const char* backend : {"nearest-centroid", "small-cnn"}) {
    const auto clf = train(s, backend, quick(5));
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
      Image probe(32, 32, 1);
      for (auto& v : probe.pixels) v = static_cast<std::uint8_t>(rng.below(256));
      const auto p = clf.predict(probe);
      ASSERT_EQ(p.size(), 3u);
      double sum = 0;
      for (double v : p) {
        EXPECT_GE(v, 0.0);
        sum += v;
      }
      EXPECT_NEAR(sum, 1.0, 1e-6) << backend;
      EXPECT_EQ(clf.predict(probe), p);
    }
  }
}

TEST(SmallCnn, LearnsBlobClasses) {
  const auto clf = train(blob_classes(30, 3), "small-cnn", quick(20));
  EXPECT_GE(evaluate(clf, blob_classes(20, 4)).accuracy, 0.95);
}

TEST(SmallCnn, SameSeedSamePredictions) {
  const auto s = blob_classes(10, 5);
  const auto a = train(s, "small-cnn", quick(5, 9));
  const auto b = train(s, "small-cnn", quick(5, 9));
  const auto c = train(s, "small-cnn", quick(5, 10));
  EXPECT_EQ(a.model->blob(), b.model->blob());
  EXPECT_NE(a.model->blob(), c.model->blob());
  const auto probe = blob_classes(3, 6);
  for (const auto& img : probe.images) EXPECT_EQ(a.predict(img), b.predict(img));
  EXPECT_EQ(evaluate(a, probe), evaluate(b, probe));
}

TEST(SmallCnn, ThreadCountDoesNotChangeResult) {
  const auto s = blob_classes(10, 7);
  TrainOptions one, four;
  four.jobs = 4;
  EXPECT_EQ(train(s, "small-cnn", quick(3), one).model->blob(), train(s, "small-cnn", quick(3), four).model->blob());
}

TEST(SmallCnn, SameDayHoldoutOnSynthAtZeroDrift) {
  synth::DriftConfig c;
  c.drift_rate = 0.0;
  c.images_per_session = 40;
  c.frame_width = 320;
  c.frame_height = 240;
  c.subject_scale = 0.5;
  pipeline::Geometry geo;
  geo.align.crop_px = 200;
  geo.align.out_px = 128;
  const auto inds = synth::individual_params(c);
  const auto all = pipeline::session_crops(c, inds, {1, 1}, geo);
  LabeledSet tr, te;
  for (std::size_t i = 0; i < all.size(); ++i) (i % 40 < 30 ? tr : te).add(all.images[i], all.labels[i]);
  Hyperparams hp;
  hp.epochs = 30;
  const auto clf = train(tr, "small-cnn", hp);
  EXPECT_GE(evaluate(clf, te).accuracy, 0.95);
}

TEST(Classifier, SaveLoadRoundTrip) {
  TempDir dir;
  const auto s = blob_classes(6, 8);
  for (const char* backend : {"nearest-centroid", "small-cnn"}) {
    const auto clf = train(s, backend, quick(3));
    clf.save(dir / backend);
    const auto back = Classifier::load(dir / backend);
    EXPECT_EQ(back.backend, backend);
    EXPECT_EQ(back.labels, clf.labels);
    EXPECT_EQ(back.hp, clf.hp);
    EXPECT_EQ(back.input, clf.input);
    for (const auto& img : s.images) ASSERT_EQ(back.predict(img), clf.predict(img));
  }
  EXPECT_THROW(Classifier::load(dir / "missing"), std::exception);
}

TEST(Classifier, PretrainedBackboneFineTunes) {
  TempDir dir;
  const auto base = train(blob_classes(10, 9), "small-cnn", quick(5));
  base.save(dir / "blobnet");
  TrainOptions opts;
  opts.backbone_dir = dir.path();
  // Two-class task on the same input spec: new head, tuned features.
  const auto s = constant_classes(10);
  const auto clf = train(s, "pretrained-backbone:blobnet", quick(5), opts);
  EXPECT_EQ(clf.labels.size(), 2u);
  EXPECT_DOUBLE_EQ(evaluate(clf, s).accuracy, 1.0);
  EXPECT_THROW(train(s, "pretrained-backbone:nope", quick(1), opts), ConfigError);
  EXPECT_THROW(train(constant_classes(3, 16), "pretrained-backbone:blobnet", quick(1), opts), ConfigError);
}

TEST(Metrics, AllCorrect) {
  const std::vector<int> t = {0, 1, 2, 1};
  const auto m = compute_metrics(t, t, 3);
  EXPECT_DOUBLE_EQ(m.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(m.macro_f1, 1.0);
}

TEST(Metrics, ThreeOfFourBalancedTwoClass) {
  // truth a a b b, predicted a a a b: class a P=2/3 R=1, class b P=1 R=1/2.
  const std::vector<int> t = {0, 0, 1, 1}, p = {0, 0, 0, 1};
  const auto m = compute_metrics(t, p, 2);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.75);
  EXPECT_NEAR(m.macro_f1, (0.8 + 2.0 / 3.0) / 2.0, 1e-15);
  EXPECT_EQ(m.confusion, (std::vector<std::vector<long>>{{2, 0}, {1, 1}}));
}

TEST(Metrics, ClassMissingFromPredictionsScoresZero) {
  const std::vector<int> t = {0, 1, 2}, p = {0, 1, 1};
  const auto m = compute_metrics(t, p, 3);
  // F1: class0 1, class1 2/3, class2 0.
  EXPECT_NEAR(m.macro_f1, (1.0 + 2.0 / 3.0 + 0.0) / 3.0, 1e-15);
}

TEST(Metrics, EmptyRejected) { EXPECT_THROW(compute_metrics({}, {}, 2), ValidationError); }

TEST(Metrics, MatchesBruteForceOracle) {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(8));
    const int n = 1 + static_cast<int>(rng.below(300));
    std::vector<int> t(n), p(n);
    for (int i = 0; i < n; ++i) {
      t[i] = static_cast<int>(rng.below(k));
      p[i] = rng.uniform() < 0.6 ? t[i] : static_cast<int>(rng.below(k));
    }
    const auto m = compute_metrics(t, p, k);
    const auto o = oracle::brute_force_metrics(t, p);
    EXPECT_LT(std::abs(m.accuracy - o.accuracy), 1e-12);
    EXPECT_LT(std::abs(m.macro_f1 - o.macro_f1), 1e-12);
    long total = 0;
    for (int r = 0; r < k; ++r) {
      long row = 0;
      for (long v : m.confusion[r]) row += v;
      EXPECT_EQ(row, std::count(t.begin(), t.end(), r));
      total += m.confusion[r][r];
    }
    EXPECT_DOUBLE_EQ(m.accuracy, static_cast<double>(total) / n);
  }
}

TEST(Metrics, LabelPermutationEquivariance) {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 3 + static_cast<int>(rng.below(5));
    std::vector<int> t(100), p(100), perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = k - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    for (int i = 0; i < 100; ++i) {
      t[i] = static_cast<int>(rng.below(k));
      p[i] = rng.uniform() < 0.5 ? t[i] : static_cast<int>(rng.below(k));
    }
    std::vector<int> tp(100), pp(100);
    for (int i = 0; i < 100; ++i) tp[i] = perm[t[i]], pp[i] = perm[p[i]];
    const auto a = compute_metrics(t, p, k), b = compute_metrics(tp, pp, k);
    EXPECT_DOUBLE_EQ(a.accuracy, b.accuracy);
    EXPECT_NEAR(a.macro_f1, b.macro_f1, 1e-15);
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < k; ++c) EXPECT_EQ(a.confusion[r][c], b.confusion[perm[r]][perm[c]]);
  }
}

TEST(Metrics, JsonRoundTrip) {
  const std::vector<int> t = {0, 1, 1}, p = {0, 0, 1};
  const auto m = compute_metrics(t, p, 2);
  EXPECT_EQ(Metrics::from_json(m.to_json()), m);
}

TEST(Dataset, LoadLabeledRejectsDiscardAndUnenhanced) {
  TempDir dir;
  data::Manifest m;
  m.meta.num_days = 2;
  m.meta.individuals = {"bee_00"};
  auto r = test::make_record("bee_00", 1, 1, 0, 1);
  const Image img(8, 8, 1, 77);
  const auto bytes = encode_png(img);
  r.sha256 = data::hash_image(bytes);
  write_file_bytes(dir / "crops" / (r.crop_id + ".png"), bytes);
  m.records.push_back(r);
  const data::DirectoryImageStore src(dir.path());
  const auto s = load_labeled(m, src);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s.images[0], img);
  EXPECT_EQ(s.labels[0], "bee_00");

  m.records[0].qc = data::QcStatus::discard;
  EXPECT_THROW(load_labeled(m, src), ValidationError);
  m.records[0].qc = data::QcStatus::keep;
  m.records[0].stage = data::Stage::aligned;
  EXPECT_THROW(load_labeled(m, src), ValidationError);
}
