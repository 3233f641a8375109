#include "retroid/harness/classifier.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>

#include "backends.hpp"
#include "retroid/errors.hpp"
#include "retroid/parallel.hpp"

namespace retroid::harness {

using nlohmann::json;

namespace {

constexpr std::string_view kPretrainedPrefix = "pretrained-backbone:";
constexpr int kFormatVersion = 1;

std::vector<float> read_blob(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open " + path.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes % sizeof(float) != 0) throw ValidationError(path.string() + ": truncated parameter blob");
  std::vector<float> out(bytes / sizeof(float));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw IoError("read failed for " + path.string());
  return out;
}

std::filesystem::path resolve_backbone_dir(const TrainOptions& opts) {
  if (!opts.backbone_dir.empty()) return opts.backbone_dir;
  if (const char* env = std::getenv("RETROID_BACKBONE_DIR")) return env;
  return {};
}

}  // namespace

void Hyperparams::validate() const {
  if (optimizer != "adam") throw ConfigError("unsupported optimizer '" + optimizer + "'");
  if (loss != "cross-entropy") throw ConfigError("unsupported loss '" + loss + "'");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
  if (!(weight_decay >= 0)) throw ConfigError("weight_decay must be >= 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

json Hyperparams::to_json() const {
  return {{"optimizer", optimizer}, {"learning_rate", learning_rate}, {"weight_decay", weight_decay},
          {"epochs", epochs},       {"loss", loss},                   {"batch_size", batch_size},
          {"seed", seed}};
}

Hyperparams Hyperparams::from_json(const json& j) {
  Hyperparams hp;
  hp.optimizer = j.value("optimizer", hp.optimizer);
  hp.learning_rate = j.value("learning_rate", hp.learning_rate);
  hp.weight_decay = j.value("weight_decay", hp.weight_decay);
  hp.epochs = j.value("epochs", hp.epochs);
  hp.loss = j.value("loss", hp.loss);
  hp.batch_size = j.value("batch_size", hp.batch_size);
  hp.seed = j.value("seed", hp.seed);
  hp.validate();
  return hp;
}

std::vector<std::string> registered_backends() {
  return {"nearest-centroid", "small-cnn", std::string(kPretrainedPrefix) + "<name>"};
}

int Classifier::label_index(const std::string& label) const {
  auto it = std::lower_bound(labels.begin(), labels.end(), label);
  return (it != labels.end() && *it == label) ? static_cast<int>(it - labels.begin()) : -1;
}

std::vector<double> Classifier::predict(const Image& img) const {
  if (!model) throw ValidationError("classifier has no trained model");
  if (img.width != input.out_px || img.height != input.out_px || img.channels != input.channels) {
    throw ValidationError("predict: expected " + std::to_string(input.out_px) + "x" + std::to_string(input.out_px) +
                          "x" + std::to_string(input.channels) + " image, got " + std::to_string(img.width) + "x" +
                          std::to_string(img.height) + "x" + std::to_string(img.channels));
  }
  return model->predict(img);
}

int Classifier::predict_index(const Image& img) const {
  const auto p = predict(img);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

void Classifier::save(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string());
  const json spec = {{"format_version", kFormatVersion},
                     {"backend", backend},
                     {"labels", labels},
                     {"input", {{"out_px", input.out_px}, {"channels", input.channels}}},
                     {"hp", hp.to_json()},
                     {"model", model->describe()}};
  {
    std::ofstream out(dir / "spec.json", std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / "spec.json").string());
    out << spec.dump(2) << '\n';
  }
  const auto blob = model->blob();
  std::ofstream out(dir / "params.bin", std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size() * sizeof(float)));
  if (!out) throw IoError("cannot write " + (dir / "params.bin").string());
}

Classifier Classifier::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "spec.json");
  if (!in) throw IoError("cannot open " + (dir / "spec.json").string());
  json spec;
  try {
    spec = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError((dir / "spec.json").string() + ": " + e.what());
  }
  Classifier c;
  c.backend = spec.at("backend").get<std::string>();
  c.labels = spec.at("labels").get<std::vector<std::string>>();
  c.input.out_px = spec.at("input").at("out_px").get<int>();
  c.input.channels = spec.at("input").at("channels").get<int>();
  c.hp = Hyperparams::from_json(spec.at("hp"));
  const auto blob = read_blob(dir / "params.bin");
  if (c.backend == "nearest-centroid") {
    c.model = detail::load_nearest_centroid(spec.at("model"), blob);
  } else if (c.backend == "small-cnn" || c.backend.starts_with(kPretrainedPrefix)) {
    c.model = detail::load_small_cnn(spec.at("model"), blob);
  } else {
    throw ConfigError("unknown backend '" + c.backend + "'");
  }
  if (c.model->num_classes() != static_cast<int>(c.labels.size())) {
    throw ValidationError(dir.string() + ": label count does not match model");
  }
  return c;
}

Classifier train(const LabeledSet& train_set, std::string_view backend, const Hyperparams& hp,
                 const TrainOptions& opts) {
  hp.validate();
  const bool pretrained = backend.starts_with(kPretrainedPrefix);
  if (backend != "nearest-centroid" && backend != "small-cnn" && !pretrained) {
    throw ConfigError("unknown backend '" + std::string(backend) + "'");
  }
  if (train_set.empty()) throw ValidationError("train: empty training set");

  Classifier clf;
  clf.backend = std::string(backend);
  clf.labels = train_set.label_set();
  if (clf.labels.size() < 2) throw ValidationError("train: need at least 2 classes, got " + std::to_string(clf.labels.size()));
  clf.hp = hp;
  const Image& first = train_set.images.front();
  if (first.width != first.height) throw ValidationError("train: crops must be square");
  clf.input = {first.width, first.channels};

  detail::TrainData data;
  data.images = &train_set.images;
  data.num_classes = static_cast<int>(clf.labels.size());
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    const auto& img = train_set.images[i];
    if (img.width != clf.input.out_px || img.height != clf.input.out_px || img.channels != clf.input.channels) {
      throw ValidationError("train: crop " + train_set.crop_ids[i] + " does not match the input spec");
    }
    data.labels.push_back(clf.label_index(train_set.labels[i]));
  }

  if (backend == "nearest-centroid") {
    clf.model = detail::train_nearest_centroid(data, hp, opts.jobs);
  } else if (backend == "small-cnn") {
    clf.model = detail::train_small_cnn(data, hp, opts.jobs);
  } else {
    const std::string name(backend.substr(kPretrainedPrefix.size()));
    const auto root = resolve_backbone_dir(opts);
    if (name.empty() || root.empty()) {
      throw ConfigError("backend '" + std::string(backend) + "' needs a backbone directory (--backbone-dir or RETROID_BACKBONE_DIR)");
    }
    if (!std::filesystem::exists(root / name / "spec.json")) {
      throw ConfigError("no pretrained backbone '" + name + "' under " + root.string());
    }
    const Classifier base = Classifier::load(root / name);
    if (base.input != clf.input) throw ConfigError("backbone '" + name + "' was trained on a different input spec");
    clf.model = detail::train_small_cnn(data, hp, opts.jobs, base.model.get());
  }
  return clf;
}

Metrics evaluate(const Classifier& clf, const LabeledSet& test_set, int jobs) {
  if (test_set.empty()) throw ValidationError("evaluate: empty test set");
  std::vector<int> truth(test_set.size()), pred(test_set.size());
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    truth[i] = clf.label_index(test_set.labels[i]);
    if (truth[i] < 0) throw ValidationError("evaluate: test label '" + test_set.labels[i] + "' unknown to classifier");
  }
  parallel_for(test_set.size(), jobs, [&](std::size_t i) { pred[i] = clf.predict_index(test_set.images[i]); });
  return compute_metrics(truth, pred, static_cast<int>(clf.labels.size()));
}

}  // namespace retroid::harness
