#include "retroid/cli/dispatch.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include "retroid/align/align.hpp"
#include "retroid/align/detection.hpp"
#include "retroid/cli/config.hpp"
#include "retroid/clahe/clahe.hpp"
#include "retroid/data/hash.hpp"
#include "retroid/data/image_store.hpp"
#include "retroid/data/manifest.hpp"
#include "retroid/data/segregation.hpp"
#include "retroid/errors.hpp"
#include "retroid/eval/protocol.hpp"
#include "retroid/eval/schedule.hpp"
#include "retroid/eval/selection.hpp"
#include "retroid/harness/classifier.hpp"
#include "retroid/harness/dataset.hpp"
#include "retroid/parallel.hpp"
#include "retroid/qc/decisions.hpp"
#include "retroid/qc/service.hpp"
#include "retroid/synth/synth.hpp"
#include "retroid/version.hpp"

namespace retroid::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Values collected from the command line; unset optionals fall back to the
// config file (or its defaults).
struct Args {
  std::string config;
  std::optional<int> jobs;

  // synth
  std::string out;
  std::optional<int> individuals, days, images, final_day_sets;
  std::optional<double> drift, noise;
  std::optional<std::uint64_t> seed;

  // align / enhance
  std::string in, images_root;
  std::optional<int> crop_px, out_px;
  std::optional<std::string> pad, grid;
  std::optional<double> clip;

  // qc
  std::string manifest, decisions, bind = "127.0.0.1:8077", static_dir;

  // train / eval / screen
  std::optional<int> day, set;
  int train_set = 1;
  std::string backend = "small-cnn";
  std::vector<std::string> backends;
  std::string direction = "forward";
  std::optional<int> epochs, batch_size;
  std::optional<double> lr, weight_decay;
  std::optional<std::string> backbone_dir;

  // select / compare / verify
  std::string table, forward, backward, train, test;
  std::optional<double> min_acc, min_f1, alpha;
  std::optional<std::string> ttest;
};

RunConfig resolve(const Args& a) {
  RunConfig c = a.config.empty() ? RunConfig{} : RunConfig::load(a.config);
  apply_seed_env(c);
  if (a.jobs) c.jobs = *a.jobs;
  if (a.individuals) c.synth.num_individuals = *a.individuals;
  if (a.days) c.synth.num_days = *a.days;
  if (a.images) c.synth.images_per_session = *a.images;
  if (a.final_day_sets) c.synth.final_day_sets = *a.final_day_sets;
  if (a.drift) c.synth.drift_rate = *a.drift;
  if (a.noise) c.synth.intra_session_noise = *a.noise;
  if (a.seed) {
    c.synth.seed = *a.seed;
    c.hp.seed = *a.seed;
  }
  if (a.crop_px) c.align.crop_px = *a.crop_px;
  if (a.out_px) c.align.out_px = *a.out_px;
  if (a.pad) c.align.pad_mode = data::parse_pad_mode(*a.pad);
  if (a.clip) c.clahe.clip_limit = *a.clip;
  if (a.grid) std::tie(c.clahe.tiles_x, c.clahe.tiles_y) = parse_grid(*a.grid);
  if (a.epochs) c.hp.epochs = *a.epochs;
  if (a.batch_size) c.hp.batch_size = *a.batch_size;
  if (a.lr) c.hp.learning_rate = *a.lr;
  if (a.weight_decay) c.hp.weight_decay = *a.weight_decay;
  if (a.backbone_dir) c.backbone_dir = *a.backbone_dir;
  if (a.min_acc) c.thresholds.min_accuracy = *a.min_acc;
  if (a.min_f1) c.thresholds.min_f1 = *a.min_f1;
  if (a.alpha) c.alpha = *a.alpha;
  if (a.ttest) c.ttest = eval::parse_ttest_variant(*a.ttest);
  c.validate();
  return c;
}

int jobs_of(const RunConfig& c) { return c.jobs > 0 ? c.jobs : default_jobs(); }

fs::path image_root(const Args& a, const fs::path& manifest_path) {
  if (!a.images_root.empty()) return a.images_root;
  return manifest_path.parent_path().empty() ? fs::path(".") : manifest_path.parent_path();
}

void write_json(const fs::path& path, const json& j) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

bool same_dir(const fs::path& a, const fs::path& b) {
  return fs::weakly_canonical(fs::absolute(a)) == fs::weakly_canonical(fs::absolute(b));
}

harness::TrainOptions train_options(const RunConfig& c) {
  harness::TrainOptions o;
  o.backbone_dir = c.backbone_dir;
  o.jobs = jobs_of(c);
  return o;
}

// ---------------------------------------------------------------------------

int cmd_synth(const Args& a, const std::string& cmdline, std::ostream& out) {
  const RunConfig c = resolve(a);
  const auto ds = synth::generate_dataset(c.synth, a.out, provenance(c, cmdline), jobs_of(c));
  out << "wrote " << ds.manifest.records.size() << " frames for " << c.synth.num_individuals << " individuals over "
      << c.synth.num_days << " days to " << ds.root.string() << "\n";
  return 0;
}

int cmd_align(const Args& a, const std::string& cmdline, std::ostream& out, std::ostream& err) {
  const RunConfig c = resolve(a);
  const data::Manifest in = data::read_manifest(a.in);
  const data::DirectoryImageStore src(image_root(a, a.in));
  const fs::path out_root = a.out;
  const data::DirectoryImageStore dst(out_root);

  // Group raw records by (individual, session), keeping manifest order.
  std::map<std::pair<std::string, data::SessionKey>, std::vector<const data::CropRecord*>> groups;
  for (const auto& r : in.records) {
    if (r.stage != data::Stage::raw) throw ValidationError("align expects raw records, got " + r.crop_id);
    groups[{r.individual, r.session}].push_back(&r);
  }

  data::Manifest result;
  result.meta = in.meta;
  result.meta.generator = provenance(c, cmdline);
  result.meta.generator["upstream"] = in.meta.generator;
  json skips = json::array();
  std::size_t n_skipped = 0;

  for (const auto& [key, recs] : groups) {
    const auto& [individual, session] = key;
    std::vector<align::Frame> frames(recs.size());
    parallel_for(recs.size(), jobs_of(c), [&](std::size_t i) {
      frames[i] = {recs[i]->frame_index, src.load(*recs[i]), recs[i]->source};
    });
    const fs::path sidecar = src.path_for(*recs.front()).parent_path() / "detections.jsonl";
    const auto loaded = align::load_detections(sidecar);
    auto so = align::process_session(frames, loaded.detections, session, individual, c.align, jobs_of(c));

    for (const auto& w : so.warnings) err << "warning: " << individual << ' ' << data::to_string(session) << ": " << w << "\n";
    auto log_skip = [&](const align::SkipEntry& s, const char* origin) {
      skips.push_back({{"individual", individual}, {"day", session.day}, {"set", session.set}, {"origin", origin},
                       {"line", s.line}, {"frame_index", s.frame_index}, {"reason", s.reason}});
      ++n_skipped;
    };
    for (const auto& s : loaded.skipped) log_skip(s, "sidecar");
    std::set<int> sidecar_frames;
    for (const auto& s : loaded.skipped) sidecar_frames.insert(s.frame_index);
    for (const auto& s : so.skipped)
      if (!sidecar_frames.contains(s.frame_index)) log_skip(s, "align");  // already logged from the sidecar

    parallel_for(so.crops.size(), jobs_of(c), [&](std::size_t i) {
      const auto bytes = encode_png(so.crops[i].pixels);
      write_file_bytes(dst.crop_path(so.crops[i].record.crop_id), bytes);
    });
    for (auto& crop : so.crops) result.records.push_back(std::move(crop.record));
  }

  data::write_manifest(result, out_root / "manifest.jsonl");
  std::ofstream skip_log(out_root / "skips.jsonl", std::ios::trunc);
  for (const auto& s : skips) skip_log << s.dump() << '\n';
  out << "aligned " << result.records.size() << " crops, skipped " << n_skipped << "; manifest "
      << (out_root / "manifest.jsonl").string() << "\n";
  return 0;
}

int cmd_enhance(const Args& a, const std::string& cmdline, std::ostream& out) {
  const RunConfig c = resolve(a);
  const fs::path in_path = a.in, out_path = a.out;
  const fs::path in_root = image_root(a, in_path);
  const fs::path out_root = out_path.parent_path().empty() ? fs::path(".") : out_path.parent_path();
  if (same_dir(in_root, out_root)) {
    throw ValidationError("enhance: output directory must differ from the input image directory");
  }
  const data::Manifest in = data::read_manifest(in_path);
  const data::DirectoryImageStore src(in_root), dst(out_root);

  data::Manifest result = in;
  result.meta.generator = provenance(c, cmdline);
  result.meta.generator["upstream"] = in.meta.generator;
  for (const auto& r : in.records) data::check_stage_transition(r.stage, data::Stage::enhanced);

  parallel_for(result.records.size(), jobs_of(c), [&](std::size_t i) {
    auto& r = result.records[i];
    const Image enhanced = clahe::clahe(src.load(in.records[i]), c.clahe);
    const auto bytes = encode_png(enhanced);
    r.sha256 = data::hash_image(bytes);
    r.stage = data::Stage::enhanced;
    write_file_bytes(dst.crop_path(r.crop_id), bytes);
  });
  data::write_manifest(result, out_path);
  out << "enhanced " << result.records.size() << " crops -> " << out_path.string() << "\n";
  return 0;
}

int cmd_qc_serve(const Args& a, std::ostream& out) {
  const data::Manifest m = data::read_manifest(a.manifest);
  qc::ServiceOptions opts;
  opts.image_root = image_root(a, a.manifest);
  if (!a.static_dir.empty()) opts.static_dir = a.static_dir;
  qc::QcService svc(m, a.decisions, opts);
  const auto [host, port] = qc::parse_bind(a.bind);
  const int bound = svc.bind(host, port);
  for (const auto& w : svc.warnings()) out << "warning: " << w << "\n";
  out << "serving " << m.records.size() << " crops on http://" << host << ':' << bound << "/" << std::endl;
  svc.listen();
  return 0;
}

int cmd_qc_apply(const Args& a, std::ostream& out, std::ostream& err) {
  const data::Manifest m = data::read_manifest(a.manifest);
  std::vector<std::string> warnings;
  const data::Manifest applied = qc::apply_decisions(m, fs::path(a.decisions), &warnings);
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  data::write_manifest(applied, a.out);
  std::size_t discarded = 0;
  for (const auto& r : applied.records) discarded += r.qc == data::QcStatus::discard;
  out << "applied decisions: " << discarded << " of " << applied.records.size() << " crops discarded -> " << a.out
      << "\n";
  return 0;
}

harness::LabeledSet load_session(const data::Manifest& m, const data::ImageSource& src, data::SessionKey s, int jobs) {
  const auto subset = data::usable(m).session_subset(s);
  if (subset.records.empty()) throw ValidationError("no usable crops in session " + data::to_string(s));
  return harness::load_labeled(subset, src, jobs);
}

int cmd_train(const Args& a, const std::string& cmdline, std::ostream& out) {
  const RunConfig c = resolve(a);
  const data::Manifest m = data::read_manifest(a.manifest);
  const data::DirectoryImageStore src(image_root(a, a.manifest));
  const data::SessionKey s{a.day.value_or(m.meta.num_days), a.set.value_or(1)};
  const auto set = load_session(m, src, s, jobs_of(c));
  const auto clf = harness::train(set, a.backend, c.hp, train_options(c));
  clf.save(a.out);
  json run = provenance(c, cmdline);
  run["session"] = {{"day", s.day}, {"set", s.set}};
  run["backend"] = a.backend;
  run["n_train"] = set.size();
  write_json(fs::path(a.out) / "run.json", run);
  out << "trained " << a.backend << " on " << set.size() << " crops (" << clf.labels.size() << " individuals) -> "
      << a.out << "\n";
  return 0;
}

int cmd_eval(const Args& a, const std::string& cmdline, std::ostream& out) {
  const RunConfig c = resolve(a);
  const data::Manifest m = data::read_manifest(a.manifest);
  const data::DirectoryImageStore src(image_root(a, a.manifest));
  const auto sched = eval::build_schedule(a.day.value_or(1), a.train_set, m.meta.num_days,
                                          eval::parse_direction(a.direction));
  if (sched.test.empty()) throw ValidationError("eval: empty schedule: " + (sched.warnings.empty() ? std::string{} : sched.warnings.front()));
  const auto backends = a.backends.empty() ? std::vector<std::string>{a.backend} : a.backends;

  eval::ProtocolOptions popts;
  popts.train = train_options(c);
  popts.jobs = jobs_of(c);
  auto grid = eval::run_protocol(m, src, sched, backends, c.hp, popts);
  grid.config = provenance(c, cmdline);
  write_json(a.out, grid.to_json());

  out << eval::to_string(sched.direction) << " from day " << sched.train.day << ": mean accuracy";
  for (double v : grid.mean_accuracy()) out << ' ' << std::fixed << std::setprecision(4) << v;
  out << "\n";
  return 0;
}

int cmd_screen(const Args& a, const std::string& cmdline, std::ostream& out) {
  const RunConfig c = resolve(a);
  const data::Manifest m = data::read_manifest(a.manifest);
  const data::DirectoryImageStore src(image_root(a, a.manifest));
  const int day = a.day.value_or(m.meta.num_days);
  const auto set1 = load_session(m, src, {day, 1}, jobs_of(c));
  const auto set2 = load_session(m, src, {day, 2}, jobs_of(c));
  {
    data::Manifest s1 = m.session_subset({day, 1}), s2 = m.session_subset({day, 2});
    auto report = data::verify_segregation(s1, s2);
    if (!report.pass()) throw data::LeakageError(std::move(report));
  }
  const auto backends = a.backends.empty() ? std::vector<std::string>{a.backend} : a.backends;
  const auto table = eval::screen_models(backends, set1, set2, c.hp, train_options(c));
  json j = {{"table", eval::to_json(table)}, {"config", provenance(c, cmdline)}};
  write_json(a.out, j);
  for (const auto& r : table) out << r.model << ' ' << r.accuracy << ' ' << r.macro_f1 << "\n";
  return 0;
}

eval::ScreenTable read_table(const fs::path& p) {
  const json j = read_json(p);
  return eval::table_from_json(j.is_object() && j.contains("table") ? j["table"] : j);
}

int cmd_select(const Args& a, const std::string& cmdline, std::ostream& out) {
  const RunConfig c = resolve(a);
  auto table = read_table(a.table);
  eval::rank_table(table);
  const auto selected = eval::select_models(table, c.thresholds);
  if (!a.out.empty()) {
    json names = json::array();
    for (const auto& r : selected) names.push_back(r.model);
    write_json(a.out, {{"selected", names}, {"table", eval::to_json(selected)}, {"config", provenance(c, cmdline)}});
  }
  for (const auto& r : selected) out << r.model << "\n";
  return 0;
}

int cmd_compare(const Args& a, const std::string& cmdline, std::ostream& out) {
  const RunConfig c = resolve(a);
  const auto fwd = eval::EvalGrid::from_json(read_json(a.forward));
  const auto bwd = eval::EvalGrid::from_json(read_json(a.backward));
  const auto cmp = eval::compare_directions(fwd, bwd, c.alpha, c.ttest);
  json cfg = provenance(c, cmdline);
  cfg["inputs"] = {{"forward", a.forward}, {"backward", a.backward}};
  eval::write_report(a.out, cmp, fwd, bwd, cfg);
  out << "t = " << cmp.test.t << ", p = " << cmp.test.p << ", df = " << cmp.test.df << ": " << cmp.decision()
      << "\n";
  return 0;
}

int cmd_verify(const Args& a, std::ostream& out) {
  const auto report = data::verify_segregation(data::read_manifest(a.train), data::read_manifest(a.test));
  if (report.pass()) {
    out << "PASS\n";
    return 0;
  }
  out << "FAIL: " << report.summary() << "\n";
  return 1;
}

std::string join(const std::vector<std::string>& args) {
  std::string s = kToolName;
  for (const auto& x : args) s += ' ' + x;
  return s;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Re-/retro-identification experiment pipeline", kToolName};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Args a;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", a.config, "JSON run config")->check(CLI::ExistingFile);
    s->add_option("--jobs", a.jobs, "worker threads (default: all cores)");
    return s;
  };

  auto* synth = common(app.add_subcommand("synth", "generate a synthetic drifting-appearance dataset"));
  synth->add_option("--out", a.out, "output directory")->required();
  synth->add_option("--individuals", a.individuals);
  synth->add_option("--days", a.days);
  synth->add_option("--images", a.images, "images per session");
  synth->add_option("--final-day-sets", a.final_day_sets);
  synth->add_option("--drift", a.drift, "drift rate per day");
  synth->add_option("--noise", a.noise, "intra-session noise");
  synth->add_option("--seed", a.seed);

  auto* align = common(app.add_subcommand("align", "orientation-normalize and crop raw frames"));
  align->add_option("--in", a.in, "raw manifest")->required();
  align->add_option("--out", a.out, "output directory")->required();
  align->add_option("--images", a.images_root, "image root (default: manifest directory)");
  align->add_option("--crop-px", a.crop_px);
  align->add_option("--out-px", a.out_px);
  align->add_option("--pad", a.pad, "edge or zero");

  auto* enhance = common(app.add_subcommand("enhance", "apply CLAHE to aligned crops"));
  enhance->add_option("--in", a.in, "aligned manifest")->required();
  enhance->add_option("--out", a.out, "output manifest (crops go next to it)")->required();
  enhance->add_option("--images", a.images_root);
  enhance->add_option("--clip", a.clip, "clip limit");
  enhance->add_option("--grid", a.grid, "tile grid, e.g. 8x8");

  auto* qc = app.add_subcommand("qc", "quality-control review");
  qc->require_subcommand(1);
  auto* serve = qc->add_subcommand("serve", "serve crops for review");
  serve->add_option("--manifest", a.manifest)->required();
  serve->add_option("--decisions", a.decisions)->required();
  serve->add_option("--bind", a.bind, "host:port")->capture_default_str();
  serve->add_option("--images", a.images_root);
  serve->add_option("--static", a.static_dir, "front-end asset directory");
  auto* apply = qc->add_subcommand("apply", "apply logged decisions to a manifest");
  apply->add_option("--manifest", a.manifest)->required();
  apply->add_option("--decisions", a.decisions)->required();
  apply->add_option("--out", a.out)->required();

  auto hp_flags = [&](CLI::App* s) {
    s->add_option("--epochs", a.epochs);
    s->add_option("--batch-size", a.batch_size);
    s->add_option("--lr", a.lr);
    s->add_option("--weight-decay", a.weight_decay);
    s->add_option("--seed", a.seed);
    s->add_option("--backbone-dir", a.backbone_dir);
    s->add_option("--images", a.images_root);
  };

  auto* train = common(app.add_subcommand("train", "train one classifier on one session"));
  train->add_option("--manifest", a.manifest)->required();
  train->add_option("--day", a.day, "default: last day");
  train->add_option("--set", a.set, "default: 1");
  train->add_option("--backend", a.backend)->capture_default_str();
  train->add_option("--out", a.out, "model directory")->required();
  hp_flags(train);

  auto* evalc = common(app.add_subcommand("eval", "train on one session and test across days"));
  evalc->add_option("--manifest", a.manifest)->required();
  evalc->add_option("--train-day", a.day)->required();
  evalc->add_option("--train-set", a.train_set)->capture_default_str();
  evalc->add_option("--direction", a.direction, "forward, backward or both")->capture_default_str();
  evalc->add_option("--backend", a.backend)->capture_default_str();
  evalc->add_option("--backends", a.backends, "several backends")->delimiter(',');
  evalc->add_option("--out", a.out, "grid JSON")->required();
  hp_flags(evalc);

  auto* screen = common(app.add_subcommand("screen", "rank backends: train on set 1, test on set 2 of a day"));
  screen->add_option("--manifest", a.manifest)->required();
  screen->add_option("--day", a.day, "default: last day");
  screen->add_option("--backend", a.backend)->capture_default_str();
  screen->add_option("--backends", a.backends)->delimiter(',');
  screen->add_option("--out", a.out, "table JSON")->required();
  hp_flags(screen);

  auto* select = common(app.add_subcommand("select", "keep backends above the accuracy/F1 thresholds"));
  select->add_option("--table", a.table, "screening table JSON")->required();
  select->add_option("--min-acc", a.min_acc);
  select->add_option("--min-f1", a.min_f1);
  select->add_option("--out", a.out);

  auto* compare = common(app.add_subcommand("compare", "t-test forward vs backward mean accuracy"));
  compare->add_option("--forward", a.forward)->required();
  compare->add_option("--backward", a.backward)->required();
  compare->add_option("--out", a.out, "report directory")->required();
  compare->add_option("--alpha", a.alpha);
  compare->add_option("--test", a.ttest, "student-pooled or welch");

  auto* verify = app.add_subcommand("verify", "check train/test manifests for temporal leakage");
  verify->add_option("--train", a.train)->required();
  verify->add_option("--test", a.test)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  const std::string cmdline = join(args);
  try {
    if (synth->parsed()) return cmd_synth(a, cmdline, out);
    if (align->parsed()) return cmd_align(a, cmdline, out, err);
    if (enhance->parsed()) return cmd_enhance(a, cmdline, out);
    if (serve->parsed()) return cmd_qc_serve(a, out);
    if (apply->parsed()) return cmd_qc_apply(a, out, err);
    if (train->parsed()) return cmd_train(a, cmdline, out);
    if (evalc->parsed()) return cmd_eval(a, cmdline, out);
    if (screen->parsed()) return cmd_screen(a, cmdline, out);
    if (select->parsed()) return cmd_select(a, cmdline, out);
    if (compare->parsed()) return cmd_compare(a, cmdline, out);
    if (verify->parsed()) return cmd_verify(a, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const data::LeakageError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed input: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "fatal: " << e.what() << "\n";
    return 2;
  }
  err << app.help();
  return 1;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace retroid::cli
