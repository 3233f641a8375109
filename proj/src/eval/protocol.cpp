#include "retroid/eval/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "retroid/errors.hpp"
#include "retroid/harness/dataset.hpp"

namespace retroid::eval {

using nlohmann::json;

namespace {

// JSON has no infinities; encode them as strings.
json number_or_string(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

std::string fmt(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string safe_filename(const std::string& s) {
  std::string out;
  for (char c : s) out.push_back((std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_');
  return out.empty() ? "model" : out;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  if (!out) throw IoError("write failed for " + p.string());
}

}  // namespace

std::vector<double> EvalGrid::accuracies(std::size_t model) const {
  std::vector<double> out;
  for (const auto& m : cells.at(model)) out.push_back(m.accuracy);
  return out;
}

std::vector<double> EvalGrid::mean_accuracy() const {
  std::vector<double> out(columns(), 0.0);
  for (std::size_t c = 0; c < columns(); ++c) {
    std::vector<double> col;
    for (const auto& row : cells) col.push_back(row[c].accuracy);
    out[c] = mean(col);
  }
  return out;
}

std::vector<double> EvalGrid::std_accuracy() const {
  std::vector<double> out(columns(), 0.0);
  for (std::size_t c = 0; c < columns(); ++c) {
    std::vector<double> col;
    for (const auto& row : cells) col.push_back(row[c].accuracy);
    out[c] = sample_std(col);
  }
  return out;
}

void EvalGrid::validate() const {
  if (models.empty()) throw ValidationError("grid: no models");
  if (std::set<std::string>(models.begin(), models.end()).size() != models.size()) {
    throw ValidationError("grid: duplicate model names");
  }
  if (cells.size() != models.size()) throw ValidationError("grid: row count does not match models");
  if (offsets.size() != columns()) throw ValidationError("grid: offsets do not match schedule");
  for (const auto& row : cells)
    if (row.size() != columns()) throw ValidationError("grid: ragged row");
}

json EvalGrid::to_json() const {
  json metrics = json::array();
  for (const auto& row : cells) {
    json r = json::array();
    for (const auto& m : row) r.push_back(m.to_json());
    metrics.push_back(r);
  }
  json means = json::array(), stds = json::array();
  for (double v : mean_accuracy()) means.push_back(number_or_string(v));
  for (double v : std_accuracy()) stds.push_back(number_or_string(v));
  return {{"schedule", schedule.to_json()}, {"models", models},  {"offsets", offsets}, {"metrics", metrics},
          {"mean", means},                  {"std", stds},       {"config", config}};
}

EvalGrid EvalGrid::from_json(const json& j) {
  EvalGrid g;
  g.schedule = Schedule::from_json(j.at("schedule"));
  g.models = j.at("models").get<std::vector<std::string>>();
  g.offsets = j.at("offsets").get<std::vector<int>>();
  for (const auto& row : j.at("metrics")) {
    std::vector<harness::Metrics> r;
    for (const auto& m : row) r.push_back(harness::Metrics::from_json(m));
    g.cells.push_back(std::move(r));
  }
  g.config = j.value("config", json::object());
  g.validate();
  return g;
}

EvalGrid grid_from_values(const Schedule& schedule, const std::vector<std::string>& models,
                          const std::vector<std::vector<double>>& accuracy,
                          const std::vector<std::vector<double>>& macro_f1) {
  EvalGrid g;
  g.schedule = schedule;
  g.models = models;
  for (const auto& t : schedule.test) g.offsets.push_back(std::abs(t.day - schedule.train.day));
  for (std::size_t i = 0; i < accuracy.size(); ++i) {
    std::vector<harness::Metrics> row;
    for (std::size_t c = 0; c < accuracy[i].size(); ++c) {
      harness::Metrics m;
      m.accuracy = accuracy[i][c];
      m.macro_f1 = macro_f1.empty() ? 0.0 : macro_f1.at(i).at(c);
      row.push_back(m);
    }
    g.cells.push_back(std::move(row));
  }
  g.validate();
  return g;
}

EvalGrid run_protocol(const data::Manifest& manifest, const data::ImageSource& images, const Schedule& schedule,
                      const std::vector<std::string>& backends, const harness::Hyperparams& hp,
                      const ProtocolOptions& opts) {
  if (backends.empty()) throw ValidationError("run_protocol: no backends");
  if (schedule.test.empty()) throw ValidationError("run_protocol: schedule has no test sessions");

  const data::Manifest kept = data::usable(manifest);
  const data::Manifest train_m = kept.session_subset(schedule.train);
  if (train_m.records.empty()) throw ValidationError("run_protocol: no usable crops for training " + data::to_string(schedule.train));
  data::require_usable(train_m, data::Stage::enhanced);

  std::vector<data::Manifest> test_ms;
  for (const auto& s : schedule.test) {
    data::Manifest t = kept.session_subset(s);
    if (t.records.empty()) throw ValidationError("run_protocol: no usable crops for test " + data::to_string(s));
    data::require_usable(t, data::Stage::enhanced);
    auto report = data::verify_segregation(train_m, t);
    if (!report.pass()) throw data::LeakageError(std::move(report));
    test_ms.push_back(std::move(t));
  }

  EvalGrid grid;
  grid.schedule = schedule;
  grid.models = backends;
  for (const auto& t : schedule.test) grid.offsets.push_back(std::abs(t.day - schedule.train.day));
  grid.config = {{"hp", hp.to_json()}, {"backends", backends}};
  if (std::set<std::string>(backends.begin(), backends.end()).size() != backends.size()) {
    throw ValidationError("run_protocol: duplicate backends");
  }

  std::vector<harness::Classifier> classifiers;
  {
    const harness::LabeledSet train_set = harness::load_labeled(train_m, images, opts.jobs);
    for (const auto& b : backends) classifiers.push_back(harness::train(train_set, b, hp, opts.train));
  }

  grid.cells.assign(backends.size(), std::vector<harness::Metrics>(schedule.test.size()));
  for (std::size_t c = 0; c < test_ms.size(); ++c) {
    const harness::LabeledSet test_set = harness::load_labeled(test_ms[c], images, opts.jobs);
    for (std::size_t m = 0; m < classifiers.size(); ++m) {
      grid.cells[m][c] = harness::evaluate(classifiers[m], test_set, opts.jobs);
    }
  }
  grid.validate();
  return grid;
}

DirectionComparison compare_directions(const EvalGrid& forward, const EvalGrid& backward, double alpha,
                                       TTestVariant variant) {
  forward.validate();
  backward.validate();
  auto fm = forward.models, bm = backward.models;
  std::sort(fm.begin(), fm.end());
  std::sort(bm.begin(), bm.end());
  if (fm != bm) throw ValidationError("compare_directions: grids cover different model sets");
  if (forward.columns() != backward.columns()) {
    throw ValidationError("compare_directions: grids have different numbers of day offsets");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");

  DirectionComparison cmp;
  cmp.forward_means = forward.mean_accuracy();
  cmp.backward_means = backward.mean_accuracy();
  cmp.forward_std = forward.std_accuracy();
  cmp.backward_std = backward.std_accuracy();
  cmp.alpha = alpha;
  cmp.test = ttest_two_sample(cmp.forward_means, cmp.backward_means, variant);
  return cmp;
}

json DirectionComparison::to_json(const json& config) const {
  auto series = [](const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(number_or_string(x));
    return a;
  };
  return {{"forward", {{"means", series(forward_means)}, {"std", series(forward_std)}}},
          {"backward", {{"means", series(backward_means)}, {"std", series(backward_std)}}},
          {"t_stat", number_or_string(test.t)},
          {"p_value", number_or_string(test.p)},
          {"df", test.df},
          {"alpha", alpha},
          {"test", to_string(test.variant)},
          {"decision", decision()},
          {"config", config}};
}

std::string table_csv(const EvalGrid& forward, const EvalGrid& backward) {
  std::ostringstream out;
  out << "model";
  for (const auto& s : forward.schedule.test) out << ",re-id day " << s.day;
  for (const auto& s : backward.schedule.test) out << ",retro-id day " << s.day;
  out << '\n';
  for (std::size_t i = 0; i < forward.models.size(); ++i) {
    const auto& name = forward.models[i];
    const auto bi = static_cast<std::size_t>(
        std::find(backward.models.begin(), backward.models.end(), name) - backward.models.begin());
    out << name;
    for (double v : forward.accuracies(i)) out << ',' << fmt(v, 4);
    if (bi < backward.models.size())
      for (double v : backward.accuracies(bi)) out << ',' << fmt(v, 4);
    out << '\n';
  }
  out << "mean";
  for (double v : forward.mean_accuracy()) out << ',' << fmt(v, 2);
  for (double v : backward.mean_accuracy()) out << ',' << fmt(v, 2);
  out << "\nstd.dev";
  for (double v : forward.std_accuracy()) out << ',' << fmt(v, 2);
  for (double v : backward.std_accuracy()) out << ',' << fmt(v, 2);
  out << '\n';
  return out.str();
}

std::string accuracy_chart_svg(const std::string& model, const std::vector<double>& forward,
                               const std::vector<double>& backward) {
  constexpr int W = 360, H = 240, L = 48, R = 16, T = 28, B = 36;
  const std::size_t n = std::max(forward.size(), backward.size());
  auto px = [&](std::size_t i) { return L + (n <= 1 ? 0.0 : (W - L - R) * static_cast<double>(i) / (n - 1)); };
  auto py = [&](double acc) { return T + (H - T - B) * (1.0 - std::clamp(acc, 0.0, 1.0)); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
    << model << "</text>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (double tick : {0.0, 0.5, 1.0}) {
    s << "<text x=\"" << L - 6 << "\" y=\"" << fmt(py(tick) + 4, 1)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << fmt(tick, 1) << "</text>\n";
  }
  for (std::size_t i = 0; i < n; ++i) {
    s << "<text x=\"" << fmt(px(i), 1) << "\" y=\"" << H - B + 14
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << i + 1 << "</text>\n";
  }
  s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 6
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">day offset</text>\n";
  auto series = [&](const std::vector<double>& v, const char* color, const char* label, int legend_y) {
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? " " : "") << fmt(px(i), 1) << ',' << fmt(py(v[i]), 1);
    s << "\"/>\n";
    for (std::size_t i = 0; i < v.size(); ++i)
      s << "<circle cx=\"" << fmt(px(i), 1) << "\" cy=\"" << fmt(py(v[i]), 1) << "\" r=\"3\" fill=\"" << color
        << "\"/>\n";
    s << "<text x=\"" << W - R << "\" y=\"" << legend_y << "\" text-anchor=\"end\" fill=\"" << color
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << label << "</text>\n";
  };
  series(forward, "blue", "re-id (forward)", T + 10);
  series(backward, "orange", "retro-id (backward)", T + 24);
  s << "</svg>\n";
  return s.str();
}

std::vector<std::filesystem::path> write_report(const std::filesystem::path& dir, const DirectionComparison& cmp,
                                                const EvalGrid& forward, const EvalGrid& backward,
                                                const json& config) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create report directory " + dir.string());

  std::vector<std::filesystem::path> written;
  json report = cmp.to_json(config);
  report["forward"]["grid"] = forward.to_json();
  report["backward"]["grid"] = backward.to_json();
  write_text(dir / "report.json", report.dump(2) + "\n");
  written.push_back(dir / "report.json");
  write_text(dir / "table.csv", table_csv(forward, backward));
  written.push_back(dir / "table.csv");

  for (std::size_t i = 0; i < forward.models.size(); ++i) {
    const auto& name = forward.models[i];
    const auto it = std::find(backward.models.begin(), backward.models.end(), name);
    const auto back = backward.accuracies(static_cast<std::size_t>(it - backward.models.begin()));
    const auto path = dir / ("chart_" + safe_filename(name) + ".svg");
    write_text(path, accuracy_chart_svg(name, forward.accuracies(i), back));
    written.push_back(path);
  }
  return written;
}

}  // namespace retroid::eval
