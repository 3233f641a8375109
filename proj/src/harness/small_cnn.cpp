// Two conv/ReLU/max-pool stages and a linear head, trained with Adam on
// softmax cross-entropy. Everything is float32 and single-threaded per
// chunk; gradients are reduced in a fixed chunk order so results do not
// depend on the number of worker threads.

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "backends.hpp"
#include "retroid/errors.hpp"
#include "retroid/harness/features.hpp"
#include "retroid/parallel.hpp"
#include "retroid/rng.hpp"

namespace retroid::harness::detail {

namespace {

constexpr int kGradChunks = 4;
constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

struct Arch {
  int input_px = 24;
  int c1 = 6;
  int c2 = 12;
  int classes = 2;

  int p1() const { return input_px / 2; }  // after first pool
  int p2() const { return input_px / 4; }  // after second pool
  int fc_in() const { return c2 * p2() * p2(); }

  // Parameter layout offsets.
  std::size_t w1() const { return 0; }
  std::size_t b1() const { return w1() + static_cast<std::size_t>(c1) * 9; }
  std::size_t w2() const { return b1() + c1; }
  std::size_t b2() const { return w2() + static_cast<std::size_t>(c2) * c1 * 9; }
  std::size_t wf() const { return b2() + c2; }
  std::size_t bf() const { return wf() + static_cast<std::size_t>(classes) * fc_in(); }
  std::size_t size() const { return bf() + classes; }

  nlohmann::json to_json() const { return {{"input_px", input_px}, {"c1", c1}, {"c2", c2}, {"classes", classes}}; }
  static Arch from_json(const nlohmann::json& j) {
    return {j.at("input_px").get<int>(), j.at("c1").get<int>(), j.at("c2").get<int>(), j.at("classes").get<int>()};
  }
  bool same_features(const Arch& o) const { return input_px == o.input_px && c1 == o.c1 && c2 == o.c2; }
};

// Scratch buffers for one forward/backward pass.
struct Workspace {
  std::vector<float> in_pad, a1, p1_pad, a2, p2, logits;
  std::vector<int> arg1, arg2;
  std::vector<float> d_p2, d_a2, d_p1_pad, d_a1, acc;
  std::vector<double> prob;

  explicit Workspace(const Arch& a) {
    const int n = a.input_px, h = a.p1(), q = a.p2();
    in_pad.assign(static_cast<std::size_t>(n + 2) * (n + 2), 0.0f);
    a1.resize(static_cast<std::size_t>(a.c1) * n * n);
    p1_pad.assign(static_cast<std::size_t>(a.c1) * (h + 2) * (h + 2), 0.0f);
    arg1.resize(static_cast<std::size_t>(a.c1) * h * h);
    a2.resize(static_cast<std::size_t>(a.c2) * h * h);
    p2.resize(static_cast<std::size_t>(a.c2) * q * q);
    arg2.resize(p2.size());
    logits.resize(a.classes);
    prob.resize(a.classes);
    d_p2.resize(p2.size());
    d_a2.resize(a2.size());
    d_p1_pad.resize(p1_pad.size());
    d_a1.resize(a1.size());
    acc.resize(static_cast<std::size_t>(n));
  }
};

// out[oc] = bias + sum_ic W[oc][ic] (*) in_pad[ic]  (3x3, "same" padding)
void conv3x3_forward(const float* in_pad, int cin, int n, const float* w, const float* b, int cout, float* out) {
  const int np = n + 2;
  for (int oc = 0; oc < cout; ++oc) {
    float* o = out + static_cast<std::size_t>(oc) * n * n;
    std::fill(o, o + n * n, b[oc]);
    for (int ic = 0; ic < cin; ++ic) {
      const float* src = in_pad + static_cast<std::size_t>(ic) * np * np;
      const float* k = w + (static_cast<std::size_t>(oc) * cin + ic) * 9;
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const float wv = k[ky * 3 + kx];
          for (int y = 0; y < n; ++y) {
            float* orow = o + y * n;
            const float* irow = src + (y + ky) * np + kx;
            for (int x = 0; x < n; ++x) orow[x] += wv * irow[x];
          }
        }
    }
  }
}

// dW[oc][ic] += d_out[oc] (x) in_pad[ic]; db[oc] += sum d_out[oc];
// optionally d_in_pad[ic] += W^T d_out.
void conv3x3_backward(const float* in_pad, int cin, int n, const float* w, const float* d_out, int cout, float* dw,
                      float* db, float* d_in_pad, float* acc) {
  const int np = n + 2;
  for (int oc = 0; oc < cout; ++oc) {
    const float* g = d_out + static_cast<std::size_t>(oc) * n * n;
    float bsum = 0.0f;
    for (int i = 0; i < n * n; ++i) bsum += g[i];
    db[oc] += bsum;
    for (int ic = 0; ic < cin; ++ic) {
      const float* src = in_pad + static_cast<std::size_t>(ic) * np * np;
      const float* k = w + (static_cast<std::size_t>(oc) * cin + ic) * 9;
      float* dk = dw + (static_cast<std::size_t>(oc) * cin + ic) * 9;
      float* dsrc = d_in_pad ? d_in_pad + static_cast<std::size_t>(ic) * np * np : nullptr;
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          std::fill(acc, acc + n, 0.0f);
          const float wv = k[ky * 3 + kx];
          for (int y = 0; y < n; ++y) {
            const float* grow = g + y * n;
            const float* irow = src + (y + ky) * np + kx;
            for (int x = 0; x < n; ++x) acc[x] += grow[x] * irow[x];
            if (dsrc) {
              float* drow = dsrc + (y + ky) * np + kx;
              for (int x = 0; x < n; ++x) drow[x] += wv * grow[x];
            }
          }
          float s = 0.0f;
          for (int x = 0; x < n; ++x) s += acc[x];
          dk[ky * 3 + kx] += s;
        }
    }
  }
}

// ReLU in place followed by 2x2 max-pool; writes pooled values into `out`
// (with row stride out_stride and offset) and remembers the argmax.
void relu_pool(float* a, int channels, int n, float* out, int out_np, int out_off, int* arg) {
  const int h = n / 2;
  for (int c = 0; c < channels; ++c) {
    float* plane = a + static_cast<std::size_t>(c) * n * n;
    for (int i = 0; i < n * n; ++i) plane[i] = std::max(plane[i], 0.0f);
    float* o = out + static_cast<std::size_t>(c) * out_np * out_np;
    int* ag = arg + static_cast<std::size_t>(c) * h * h;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < h; ++x) {
        int best = (2 * y) * n + 2 * x;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const int idx = (2 * y + dy) * n + 2 * x + dx;
            if (plane[idx] > plane[best]) best = idx;
          }
        o[(y + out_off) * out_np + x + out_off] = plane[best];
        ag[y * h + x] = best;
      }
  }
}

class SmallCnn final : public Model {
 public:
  SmallCnn(Arch arch, Normalization norm, std::vector<float> params)
      : arch_(arch), norm_(norm), params_(std::move(params)) {
    if (params_.size() != arch_.size()) throw ValidationError("small-cnn: parameter blob has wrong size");
  }

  const Arch& arch() const { return arch_; }
  const Normalization& norm() const { return norm_; }
  const std::vector<float>& params() const { return params_; }

  int num_classes() const override { return arch_.classes; }

  std::vector<double> predict(const Image& img) const override {
    auto f = downsample_gray(img, arch_.input_px);
    norm_.apply(f);
    Workspace ws(arch_);
    forward(params_.data(), arch_, f.data(), ws);
    return ws.prob;
  }

  nlohmann::json describe() const override {
    auto j = arch_.to_json();
    j["mean"] = norm_.mean;
    j["std"] = norm_.std;
    return j;
  }

  std::vector<float> blob() const override { return params_; }

  // Forward pass on a normalized input_px^2 feature vector; fills ws.prob.
  static void forward(const float* p, const Arch& a, const float* input, Workspace& ws) {
    const int n = a.input_px, h = a.p1(), q = a.p2();
    for (int y = 0; y < n; ++y) std::copy(input + y * n, input + (y + 1) * n, ws.in_pad.begin() + (y + 1) * (n + 2) + 1);
    conv3x3_forward(ws.in_pad.data(), 1, n, p + a.w1(), p + a.b1(), a.c1, ws.a1.data());
    relu_pool(ws.a1.data(), a.c1, n, ws.p1_pad.data(), h + 2, 1, ws.arg1.data());
    conv3x3_forward(ws.p1_pad.data(), a.c1, h, p + a.w2(), p + a.b2(), a.c2, ws.a2.data());
    relu_pool(ws.a2.data(), a.c2, h, ws.p2.data(), q, 0, ws.arg2.data());

    const int fi = a.fc_in();
    for (int k = 0; k < a.classes; ++k) {
      const float* wr = p + a.wf() + static_cast<std::size_t>(k) * fi;
      float s = p[a.bf() + k];
      for (int i = 0; i < fi; ++i) s += wr[i] * ws.p2[i];
      ws.logits[k] = s;
    }
    const double mx = *std::max_element(ws.logits.begin(), ws.logits.end());
    double z = 0.0;
    for (int k = 0; k < a.classes; ++k) {
      ws.prob[k] = std::exp(static_cast<double>(ws.logits[k]) - mx);
      z += ws.prob[k];
    }
    for (auto& v : ws.prob) v /= z;
  }

  // Accumulates d(loss)/d(params) for one sample into `grad`; `scale` is 1/batch.
  // Returns the sample's cross-entropy.
  static double backward(const float* p, const Arch& a, const float* input, int label, float scale, Workspace& ws,
                         float* grad) {
    forward(p, a, input, ws);
    const int n = a.input_px, h = a.p1(), q = a.p2(), fi = a.fc_in();
    const double loss = -std::log(std::max(ws.prob[label], 1e-300));

    std::fill(ws.d_p2.begin(), ws.d_p2.end(), 0.0f);
    for (int k = 0; k < a.classes; ++k) {
      const float g = static_cast<float>(ws.prob[k] - (k == label ? 1.0 : 0.0)) * scale;
      grad[a.bf() + k] += g;
      float* gw = grad + a.wf() + static_cast<std::size_t>(k) * fi;
      const float* wr = p + a.wf() + static_cast<std::size_t>(k) * fi;
      for (int i = 0; i < fi; ++i) {
        gw[i] += g * ws.p2[i];
        ws.d_p2[i] += g * wr[i];
      }
    }

    // Unpool + ReLU mask (a2 already holds post-ReLU values).
    std::fill(ws.d_a2.begin(), ws.d_a2.end(), 0.0f);
    for (int c = 0; c < a.c2; ++c)
      for (int i = 0; i < q * q; ++i) {
        const std::size_t pi = static_cast<std::size_t>(c) * q * q + i;
        const std::size_t ai = static_cast<std::size_t>(c) * h * h + ws.arg2[pi];
        if (ws.a2[ai] > 0.0f) ws.d_a2[ai] += ws.d_p2[pi];
      }

    std::fill(ws.d_p1_pad.begin(), ws.d_p1_pad.end(), 0.0f);
    conv3x3_backward(ws.p1_pad.data(), a.c1, h, p + a.w2(), ws.d_a2.data(), a.c2, grad + a.w2(), grad + a.b2(),
                     ws.d_p1_pad.data(), ws.acc.data());

    std::fill(ws.d_a1.begin(), ws.d_a1.end(), 0.0f);
    for (int c = 0; c < a.c1; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < h; ++x) {
          const float g = ws.d_p1_pad[static_cast<std::size_t>(c) * (h + 2) * (h + 2) + (y + 1) * (h + 2) + x + 1];
          const std::size_t ai = static_cast<std::size_t>(c) * n * n + ws.arg1[static_cast<std::size_t>(c) * h * h + y * h + x];
          if (ws.a1[ai] > 0.0f) ws.d_a1[ai] += g;
        }

    conv3x3_backward(ws.in_pad.data(), 1, n, p + a.w1(), ws.d_a1.data(), a.c1, grad + a.w1(), grad + a.b1(), nullptr,
                     ws.acc.data());
    return loss;
  }

 private:
  Arch arch_;
  Normalization norm_;
  std::vector<float> params_;
};

void init_uniform(std::vector<float>& p, std::size_t off, std::size_t count, int fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / fan_in);
  for (std::size_t i = 0; i < count; ++i) p[off + i] = static_cast<float>(rng.uniform(-bound, bound));
}

}  // namespace

std::shared_ptr<const Model> train_small_cnn(const TrainData& data, const Hyperparams& hp, int jobs,
                                             const Model* init) {
  static_assert(std::endian::native == std::endian::little);
  Arch arch;
  arch.classes = data.num_classes;

  const auto& images = *data.images;
  std::vector<std::vector<float>> feats(images.size());
  parallel_for(images.size(), jobs, [&](std::size_t i) { feats[i] = downsample_gray(images[i], arch.input_px); });
  const Normalization norm = Normalization::fit(feats);
  for (auto& f : feats) norm.apply(f);

  std::vector<float> params(arch.size(), 0.0f);
  Rng init_rng(derive_seed(hp.seed, {0x1a17}));
  const auto* backbone = dynamic_cast<const SmallCnn*>(init);
  if (init && !backbone) throw ConfigError("pretrained backbone is not a small-cnn model");
  if (backbone) {
    if (!backbone->arch().same_features(arch)) throw ConfigError("pretrained backbone architecture mismatch");
    std::copy(backbone->params().begin(), backbone->params().begin() + static_cast<long>(arch.wf()), params.begin());
  } else {
    init_uniform(params, arch.w1(), static_cast<std::size_t>(arch.c1) * 9, 9, init_rng);
    init_uniform(params, arch.w2(), static_cast<std::size_t>(arch.c2) * arch.c1 * 9, arch.c1 * 9, init_rng);
  }
  // Fresh classification head in both cases.
  init_uniform(params, arch.wf(), static_cast<std::size_t>(arch.classes) * arch.fc_in(), arch.fc_in(), init_rng);

  const std::size_t np = params.size();
  std::vector<double> m(np, 0.0), v(np, 0.0);
  std::vector<std::vector<float>> chunk_grad(kGradChunks, std::vector<float>(np));
  std::vector<Workspace> workspaces(kGradChunks, Workspace(arch));
  std::vector<std::size_t> order(feats.size());
  std::iota(order.begin(), order.end(), 0);

  long step = 0;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(hp.seed, {0x5f1e, static_cast<std::uint64_t>(epoch)}));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(hp.batch_size));
      const float scale = 1.0f / static_cast<float>(end - start);
      const std::size_t per_chunk = (end - start + kGradChunks - 1) / kGradChunks;

      parallel_for(kGradChunks, jobs, [&](std::size_t c) {
        auto& g = chunk_grad[c];
        std::fill(g.begin(), g.end(), 0.0f);
        const std::size_t b = start + c * per_chunk;
        const std::size_t e = std::min(end, b + per_chunk);
        for (std::size_t k = b; k < e; ++k) {
          const std::size_t idx = order[k];
          SmallCnn::backward(params.data(), arch, feats[idx].data(), data.labels[idx], scale, workspaces[c], g.data());
        }
      });

      ++step;
      const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      for (std::size_t i = 0; i < np; ++i) {
        double g = 0.0;
        for (int c = 0; c < kGradChunks; ++c) g += chunk_grad[c][i];
        g += hp.weight_decay * params[i];  // L2 penalty folded into the gradient
        m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g;
        v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g * g;
        const double mhat = m[i] / bc1, vhat = v[i] / bc2;
        params[i] = static_cast<float>(params[i] - hp.learning_rate * mhat / (std::sqrt(vhat) + kAdamEps));
      }
    }
  }
  return std::make_shared<SmallCnn>(arch, norm, std::move(params));
}

std::shared_ptr<const Model> load_small_cnn(const nlohmann::json& desc, const std::vector<float>& blob) {
  const Arch arch = Arch::from_json(desc);
  Normalization norm{desc.at("mean").get<double>(), desc.at("std").get<double>()};
  return std::make_shared<SmallCnn>(arch, norm, blob);
}

}  // namespace retroid::harness::detail
