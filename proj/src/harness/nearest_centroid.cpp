#include <algorithm>
#include <cmath>
#include <limits>

#include "backends.hpp"
#include "retroid/errors.hpp"
#include "retroid/harness/features.hpp"
#include "retroid/parallel.hpp"

namespace retroid::harness::detail {

namespace {

constexpr int kFeaturePx = 16;

class NearestCentroid final : public Model {
 public:
  NearestCentroid(int px, Normalization norm, std::vector<std::vector<float>> centroids, double tau)
      : px_(px), norm_(norm), centroids_(std::move(centroids)), tau_(tau) {}

  int num_classes() const override { return static_cast<int>(centroids_.size()); }

  std::vector<double> squared_distances(const std::vector<float>& f) const {
    std::vector<double> d(centroids_.size());
    for (std::size_t k = 0; k < centroids_.size(); ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < f.size(); ++i) {
        const double diff = f[i] - centroids_[k][i];
        s += diff * diff;
      }
      d[k] = s;
    }
    return d;
  }

  std::vector<double> predict(const Image& img) const override {
    auto f = downsample_gray(img, px_);
    norm_.apply(f);
    const auto d = squared_distances(f);
    const double dmin = *std::min_element(d.begin(), d.end());
    std::vector<double> p(d.size());
    double z = 0.0;
    for (std::size_t k = 0; k < d.size(); ++k) {
      p[k] = std::exp(-(d[k] - dmin) / tau_);
      z += p[k];
    }
    for (auto& v : p) v /= z;
    return p;
  }

  nlohmann::json describe() const override {
    return {{"feature_px", px_}, {"mean", norm_.mean}, {"std", norm_.std}, {"tau", tau_},
            {"num_classes", num_classes()}};
  }

  std::vector<float> blob() const override {
    std::vector<float> out;
    for (const auto& c : centroids_) out.insert(out.end(), c.begin(), c.end());
    return out;
  }

 private:
  int px_;
  Normalization norm_;
  std::vector<std::vector<float>> centroids_;
  double tau_;  // softmax temperature: mean within-class squared distance
};

}  // namespace

std::shared_ptr<const Model> train_nearest_centroid(const TrainData& data, const Hyperparams&, int jobs) {
  const auto& images = *data.images;
  std::vector<std::vector<float>> feats(images.size());
  parallel_for(images.size(), jobs, [&](std::size_t i) { feats[i] = downsample_gray(images[i], kFeaturePx); });
  const Normalization norm = Normalization::fit(feats);
  for (auto& f : feats) norm.apply(f);

  const std::size_t dim = static_cast<std::size_t>(kFeaturePx) * kFeaturePx;
  std::vector<std::vector<double>> sums(data.num_classes, std::vector<double>(dim, 0.0));
  std::vector<long> counts(data.num_classes, 0);
  for (std::size_t i = 0; i < feats.size(); ++i) {
    const int k = data.labels[i];
    ++counts[k];
    for (std::size_t j = 0; j < dim; ++j) sums[k][j] += feats[i][j];
  }
  std::vector<std::vector<float>> centroids(data.num_classes, std::vector<float>(dim, 0.0f));
  for (int k = 0; k < data.num_classes; ++k)
    for (std::size_t j = 0; j < dim; ++j) centroids[k][j] = static_cast<float>(sums[k][j] / counts[k]);

  NearestCentroid probe(kFeaturePx, norm, centroids, 1.0);
  double within = 0.0;
  for (std::size_t i = 0; i < feats.size(); ++i) within += probe.squared_distances(feats[i])[data.labels[i]];
  double tau = within / static_cast<double>(feats.size());
  if (!(tau > 1e-9)) tau = 1.0;
  return std::make_shared<NearestCentroid>(kFeaturePx, norm, std::move(centroids), tau);
}

std::shared_ptr<const Model> load_nearest_centroid(const nlohmann::json& desc, const std::vector<float>& blob) {
  const int px = desc.at("feature_px").get<int>();
  const int k = desc.at("num_classes").get<int>();
  const std::size_t dim = static_cast<std::size_t>(px) * px;
  if (blob.size() != dim * k) throw ValidationError("nearest-centroid: parameter blob has wrong size");
  std::vector<std::vector<float>> centroids(k);
  for (int c = 0; c < k; ++c) centroids[c].assign(blob.begin() + c * dim, blob.begin() + (c + 1) * dim);
  Normalization norm{desc.at("mean").get<double>(), desc.at("std").get<double>()};
  return std::make_shared<NearestCentroid>(px, norm, std::move(centroids), desc.at("tau").get<double>());
}

}  // namespace retroid::harness::detail
