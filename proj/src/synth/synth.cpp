#include "retroid/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "retroid/align/align.hpp"
#include "retroid/data/hash.hpp"
#include "retroid/errors.hpp"
#include "retroid/parallel.hpp"

namespace retroid::synth {

using nlohmann::json;

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kPoseMargin = 195.0;
constexpr double kBackgroundLevel = 175.0;

// Render-unit ranges for each normalized appearance dimension.
struct Units {
  double half_length, half_width, body_intensity, stripe_freq, stripe_phase, stripe_contrast;
  double head_length, head_offset, spot_x, spot_y, spot_sigma;
};

Units to_units(const Appearance& u, double scale) {
  Units r{};
  r.half_length = scale * (105.0 + 60.0 * u[kHalfLength]);
  r.half_width = scale * (42.0 + 30.0 * u[kHalfWidth]);
  r.body_intensity = 45.0 + 90.0 * u[kBodyIntensity];
  r.stripe_freq = 1.5 + 2.5 * u[kStripeFrequency];
  r.stripe_phase = 2.0 * std::numbers::pi * u[kStripePhase];
  r.stripe_contrast = 10.0 + 50.0 * u[kStripeContrast];
  r.head_length = (0.22 + 0.12 * u[kHeadLength]) * r.half_length;
  r.head_offset = -45.0 + 90.0 * u[kHeadIntensity];
  r.spot_x = (-0.45 + 0.9 * u[kSpotX]) * r.half_width;
  r.spot_y = (-0.3 + 0.5 * u[kSpotY]) * r.half_length;
  r.spot_sigma = scale * (7.5 + 18.0 * u[kSpotSize]);
  return r;
}

Appearance clamp01(Appearance a) {
  for (auto& v : a) v = std::clamp(v, 0.0, 1.0);
  return a;
}

align::Point rotate_cw(align::Point v, double deg) {
  const double c = std::cos(deg * kDegToRad), s = std::sin(deg * kDegToRad);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

// Axis-aligned box of an ellipse with semi-axes (sa along local x, sb along local y)
// centred at `c`, rotated clockwise by `deg`.
align::Box rotated_ellipse_box(align::Point c, double sa, double sb, double deg) {
  const double cs = std::cos(deg * kDegToRad), sn = std::sin(deg * kDegToRad);
  const double hx = std::sqrt(sa * sa * cs * cs + sb * sb * sn * sn);
  const double hy = std::sqrt(sa * sa * sn * sn + sb * sb * cs * cs);
  return {c.x - hx, c.y - hy, 2 * hx, 2 * hy, 1.0};
}

// Soft coverage of an axis-aligned ellipse at local point (x, y): ~1 px ramp.
double ellipse_coverage(double x, double y, double sa, double sb) {
  const double f = (x * x) / (sa * sa) + (y * y) / (sb * sb) - 1.0;
  const double gx = 2.0 * x / (sa * sa), gy = 2.0 * y / (sb * sb);
  const double g = std::sqrt(gx * gx + gy * gy);
  const double d = g > 1e-12 ? f / g : f * std::min(sa, sb);
  return std::clamp(0.5 - d, 0.0, 1.0);
}

double lattice(std::uint64_t seed, std::int64_t ix, std::int64_t iy) {
  const std::uint64_t h = mix64(seed ^ mix64(static_cast<std::uint64_t>(ix) * 0x9e3779b97f4a7c15ULL +
                                             static_cast<std::uint64_t>(iy)));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Value noise with precomputed lattice over a bounded scene rectangle.
class ValueNoise {
 public:
  ValueNoise(std::uint64_t seed, double cell, double x0, double y0, double x1, double y1) : inv_cell_(1.0 / cell) {
    ix0_ = static_cast<std::int64_t>(std::floor(x0 / cell)) - 1;
    iy0_ = static_cast<std::int64_t>(std::floor(y0 / cell)) - 1;
    nx_ = static_cast<std::int64_t>(std::floor(x1 / cell)) + 2 - ix0_ + 1;
    ny_ = static_cast<std::int64_t>(std::floor(y1 / cell)) + 2 - iy0_ + 1;
    values_.resize(static_cast<std::size_t>(nx_ * ny_));
    for (std::int64_t j = 0; j < ny_; ++j)
      for (std::int64_t i = 0; i < nx_; ++i) values_[j * nx_ + i] = lattice(seed, ix0_ + i, iy0_ + j);
  }

  // Smooth value in [0, 1).
  double at(double x, double y) const {
    const double gx = x * inv_cell_, gy = y * inv_cell_;
    const int fx0 = floor_int(gx), fy0 = floor_int(gy);
    const std::int64_t i = std::clamp<std::int64_t>(fx0 - ix0_, 0, nx_ - 2);
    const std::int64_t j = std::clamp<std::int64_t>(fy0 - iy0_, 0, ny_ - 2);
    double tx = gx - fx0, ty = gy - fy0;
    tx = tx * tx * (3 - 2 * tx);
    ty = ty * ty * (3 - 2 * ty);
    const double* r0 = &values_[j * nx_ + i];
    const double* r1 = r0 + nx_;
    return (r0[0] * (1 - tx) + r0[1] * tx) * (1 - ty) + (r1[0] * (1 - tx) + r1[1] * tx) * ty;
  }

  // Adds weight * at(x0 + k, y) for k in [0, n); same values as at(), cheaper per pixel.
  void accumulate_row(double x0, double y, int n, double weight, double* out) const {
    const double gy = y * inv_cell_;
    const int fy0 = floor_int(gy);
    const std::int64_t j = std::clamp<std::int64_t>(fy0 - iy0_, 0, ny_ - 2);
    double ty = gy - fy0;
    ty = ty * ty * (3 - 2 * ty);
    const double* r0 = &values_[j * nx_];
    const double* r1 = r0 + nx_;
    for (int k = 0; k < n; ++k) {
      const double gx = (x0 + k) * inv_cell_;
      const int fx0 = floor_int(gx);
      const std::int64_t i = std::clamp<std::int64_t>(fx0 - ix0_, 0, nx_ - 2);
      double tx = gx - fx0;
      tx = tx * tx * (3 - 2 * tx);
      const double c0 = r0[i] * (1 - ty) + r1[i] * ty;
      const double c1 = r0[i + 1] * (1 - ty) + r1[i + 1] * ty;
      out[k] += weight * (c0 * (1 - tx) + c1 * tx);
    }
  }

 private:
  double inv_cell_;
  std::int64_t ix0_ = 0, iy0_ = 0, nx_ = 0, ny_ = 0;
  std::vector<double> values_;
};

// Approximately Gaussian (Irwin-Hall, 4 terms) per-pixel noise from a hash.
double pixel_noise(std::uint64_t seed, int x, int y) {
  std::uint64_t h = mix64(seed ^ (static_cast<std::uint64_t>(y) << 32 | static_cast<std::uint32_t>(x)));
  double s = 0.0;
  for (int k = 0; k < 4; ++k) {
    s += static_cast<double>(h & 0xffff) / 65536.0;
    h >>= 16;
  }
  return (s - 2.0) * std::sqrt(3.0);  // unit variance
}

}  // namespace

void DriftConfig::validate() const {
  if (num_individuals < 2) throw ConfigError("synth: num_individuals must be >= 2");
  if (num_days < 2) throw ConfigError("synth: num_days must be >= 2");
  if (images_per_session < 1) throw ConfigError("synth: images_per_session must be >= 1");
  if (!(drift_rate >= 0.0)) throw ConfigError("synth: drift_rate must be >= 0");
  if (!(intra_session_noise >= 0.0)) throw ConfigError("synth: intra_session_noise must be >= 0");
  if (!(sensor_noise >= 0.0)) throw ConfigError("synth: sensor_noise must be >= 0");
  if (!(subject_scale >= 0.1 && subject_scale <= 4.0)) throw ConfigError("synth: subject_scale must lie in [0.1, 4]");
  if (final_day_sets < 1) throw ConfigError("synth: final_day_sets must be >= 1");
  if (frame_width < 64 || frame_height < 64) throw ConfigError("synth: frame must be at least 64x64");
}

json DriftConfig::to_json() const {
  return {{"num_individuals", num_individuals},
          {"num_days", num_days},
          {"images_per_session", images_per_session},
          {"drift_rate", drift_rate},
          {"intra_session_noise", intra_session_noise},
          {"seed", seed},
          {"frame_size", {frame_width, frame_height}},
          {"final_day_sets", final_day_sets},
          {"sensor_noise", sensor_noise},
          {"subject_scale", subject_scale}};
}

DriftConfig DriftConfig::from_json(const json& j) {
  DriftConfig c;
  c.num_individuals = j.value("num_individuals", c.num_individuals);
  c.num_days = j.value("num_days", c.num_days);
  c.images_per_session = j.value("images_per_session", c.images_per_session);
  c.drift_rate = j.value("drift_rate", c.drift_rate);
  c.intra_session_noise = j.value("intra_session_noise", c.intra_session_noise);
  c.seed = j.value("seed", c.seed);
  if (j.contains("frame_size")) {
    c.frame_width = j["frame_size"].at(0).get<int>();
    c.frame_height = j["frame_size"].at(1).get<int>();
  }
  c.final_day_sets = j.value("final_day_sets", c.final_day_sets);
  c.sensor_noise = j.value("sensor_noise", c.sensor_noise);
  c.subject_scale = j.value("subject_scale", c.subject_scale);
  c.validate();
  return c;
}

std::vector<data::SessionKey> DriftConfig::sessions() const {
  std::vector<data::SessionKey> out;
  for (int d = 1; d <= num_days; ++d) {
    const int sets = d == num_days ? final_day_sets : 1;
    for (int s = 1; s <= sets; ++s) out.push_back({d, s});
  }
  return out;
}

Appearance IndividualParams::at_day(int day, const DriftConfig& cfg) const {
  const double offset = (day - (cfg.num_days + 1) / 2.0) * cfg.drift_rate;
  Appearance a{};
  for (int k = 0; k < kNumDims; ++k) a[k] = base[k] + offset * direction[k];
  return clamp01(a);
}

IndividualParams IndividualParams::reversed() const {
  IndividualParams r = *this;
  for (auto& v : r.direction) v = -v;
  return r;
}

std::string individual_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "bee_%02d", index);
  return buf;
}

std::vector<IndividualParams> individual_params(const DriftConfig& cfg) {
  cfg.validate();
  std::vector<IndividualParams> out;
  for (int i = 0; i < cfg.num_individuals; ++i) {
    Rng rng(derive_seed(cfg.seed, {0x1d, static_cast<std::uint64_t>(i)}));
    IndividualParams p;
    p.id = individual_id(i);
    for (auto& v : p.base) v = rng.uniform(0.15, 0.85);
    double norm = 0.0;
    do {
      norm = 0.0;
      for (auto& v : p.direction) {
        v = rng.normal();
        norm += v * v;
      }
      norm = std::sqrt(norm);
    } while (norm < 1e-9);
    for (auto& v : p.direction) v /= norm;
    out.push_back(p);
  }
  return out;
}

Rendered render_subject(const Appearance& appearance, const Pose& pose, const RenderSettings& st) {
  const Units u = to_units(clamp01(appearance), st.subject_scale);
  const double a = u.half_width, b = u.half_length;
  const double head_a = 0.6 * a, head_b = u.head_length;
  const double head_cy = -b + head_b;
  const double abd_a = 0.85 * a, abd_b = 0.5 * b, abd_cy = 0.5 * b;

  // Scene -> frame: rotate the scene clockwise by st.scene.degrees about its pivot.
  const align::Point piv = st.scene.pivot;
  const align::Point c0{pose.cx, pose.cy};
  const align::Point rel = rotate_cw({c0.x - piv.x, c0.y - piv.y}, st.scene.degrees);
  const align::Point center{piv.x + rel.x, piv.y + rel.y};
  const double rot = pose.rotation_deg + st.scene.degrees;

  // Background lives in scene coordinates; find the scene rectangle the frame covers.
  double sx0 = 1e300, sy0 = 1e300, sx1 = -1e300, sy1 = -1e300;
  for (auto [fx, fy] : {std::pair{0.0, 0.0}, {double(st.width), 0.0}, {0.0, double(st.height)},
                        {double(st.width), double(st.height)}}) {
    const align::Point q = rotate_cw({fx - piv.x, fy - piv.y}, -st.scene.degrees);
    sx0 = std::min(sx0, q.x + piv.x);
    sy0 = std::min(sy0, q.y + piv.y);
    sx1 = std::max(sx1, q.x + piv.x);
    sy1 = std::max(sy1, q.y + piv.y);
  }
  const ValueNoise coarse(st.background_seed, 96.0 * st.subject_scale, sx0, sy0, sx1, sy1);
  const ValueNoise fine(mix64(st.background_seed + 1), 33.0 * st.subject_scale, sx0, sy0, sx1, sy1);

  const double cs = std::cos(st.scene.degrees * kDegToRad), sn = std::sin(st.scene.degrees * kDegToRad);
  const double rc = std::cos(rot * kDegToRad), rs = std::sin(rot * kDegToRad);
  const double reach = std::max(a, b) + 2.0;

  Image frame(st.width, st.height, 1);
  std::vector<double> background(st.width);
  const bool unrotated = st.scene.degrees == 0.0;
  for (int y = 0; y < st.height; ++y) {
    const double fy = y + 0.5;
    if (unrotated) {
      std::fill(background.begin(), background.end(), kBackgroundLevel - 26.0);
      coarse.accumulate_row(0.5, fy, st.width, 36.0, background.data());
      fine.accumulate_row(0.5, fy, st.width, 16.0, background.data());
    } else {
      for (int x = 0; x < st.width; ++x) {
        // Inverse scene rotation (counter-clockwise) to find the scene point.
        const double dx = x + 0.5 - piv.x, dy = fy - piv.y;
        const double qx = piv.x + cs * dx + sn * dy;
        const double qy = piv.y - sn * dx + cs * dy;
        background[x] = kBackgroundLevel - 26.0 + 36.0 * coarse.at(qx, qy) + 16.0 * fine.at(qx, qy);
      }
    }
    for (int x = 0; x < st.width; ++x) {
      const double fx = x + 0.5;
      double v = background[x];

      const double ox = fx - center.x, oy = fy - center.y;
      if (std::abs(ox) <= reach && std::abs(oy) <= reach) {
        // Frame offset -> subject-local coordinates (undo clockwise rotation).
        const double lx = rc * ox + rs * oy;
        const double ly = -rs * ox + rc * oy;
        const double alpha = ellipse_coverage(lx, ly, a, b);
        if (alpha > 0.0) {
          double s = u.body_intensity;
          const double w_abd = ellipse_coverage(lx, ly - abd_cy, abd_a, abd_b);
          s += w_abd * 0.5 * u.stripe_contrast * std::sin(2.0 * std::numbers::pi * u.stripe_freq * ly / b + u.stripe_phase);
          const double w_head = ellipse_coverage(lx, ly - head_cy, head_a, head_b);
          s = s * (1.0 - w_head) + (u.body_intensity + u.head_offset) * w_head;
          const double ddx = lx - u.spot_x, ddy = ly - u.spot_y;
          s += 70.0 * std::exp(-(ddx * ddx + ddy * ddy) / (2.0 * u.spot_sigma * u.spot_sigma));
          v = v * (1.0 - alpha) + s * alpha;
        }
      }
      v *= st.lighting_gain;
      if (st.sensor_noise > 0.0) v += st.sensor_noise * pixel_noise(st.noise_seed, x, y);
      frame.at(x, y) = saturate_u8(v);
    }
  }

  align::Detection det;
  det.body = rotated_ellipse_box(center, a, b, rot);
  const align::Point hc = rotate_cw({0.0, head_cy}, rot);
  det.head = rotated_ellipse_box({center.x + hc.x, center.y + hc.y}, head_a, head_b, rot);
  const align::Point ac = rotate_cw({0.0, abd_cy}, rot);
  det.abdomen = rotated_ellipse_box({center.x + ac.x, center.y + ac.y}, abd_a, abd_b, rot);
  return {std::move(frame), det};
}

Rendered render_individual(const Appearance& a, Rng& rng, const DriftConfig& cfg) {
  Appearance jittered = a;
  for (auto& v : jittered) v += cfg.intra_session_noise * rng.normal();
  jittered = clamp01(jittered);

  Pose pose;
  const double mx = std::min(kPoseMargin * cfg.subject_scale, cfg.frame_width / 2.0);
  const double my = std::min(kPoseMargin * cfg.subject_scale, cfg.frame_height / 2.0);
  pose.cx = rng.uniform(mx, cfg.frame_width - mx);
  pose.cy = rng.uniform(my, cfg.frame_height - my);
  pose.rotation_deg = rng.uniform(-180.0, 180.0);

  RenderSettings st;
  st.width = cfg.frame_width;
  st.height = cfg.frame_height;
  st.sensor_noise = cfg.sensor_noise;
  st.subject_scale = cfg.subject_scale;
  st.lighting_gain = std::clamp(1.0 + cfg.intra_session_noise * rng.normal(), 0.5, 1.5);
  st.background_seed = rng.next();
  st.noise_seed = rng.next();
  return render_subject(jittered, pose, st);
}

SessionRender render_session(const DriftConfig& cfg, const IndividualParams& ind, int individual_index,
                             const data::SessionKey& session) {
  SessionRender out;
  out.individual = ind.id;
  out.session = session;
  const Appearance day_appearance = ind.at_day(session.day, cfg);
  Rng rng(derive_seed(cfg.seed, {0x5e55, static_cast<std::uint64_t>(individual_index),
                                 static_cast<std::uint64_t>(session.day), static_cast<std::uint64_t>(session.set)}));
  out.frames.reserve(cfg.images_per_session);
  for (int f = 0; f < cfg.images_per_session; ++f) {
    Rendered r = render_individual(day_appearance, rng, cfg);
    r.detection.frame_index = f;
    out.frames.push_back(std::move(r));
  }
  return out;
}

std::filesystem::path session_dir(const std::string& individual, const data::SessionKey& s) {
  return std::filesystem::path("frames") / individual / ("d" + std::to_string(s.day) + "_s" + std::to_string(s.set));
}

json params_to_json(const DriftConfig& cfg, const std::vector<IndividualParams>& inds) {
  json arr = json::array();
  for (const auto& p : inds) {
    json days = json::object();
    for (int d = 1; d <= cfg.num_days; ++d) days[std::to_string(d)] = p.at_day(d, cfg);
    arr.push_back({{"id", p.id}, {"base", p.base}, {"direction", p.direction}, {"days", days}});
  }
  return {{"config", cfg.to_json()}, {"individuals", arr}};
}

DatasetOutput generate_dataset(const DriftConfig& cfg, const std::filesystem::path& out_dir,
                               const json& provenance, int jobs) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) throw IoError("synth: cannot create output dir " + out_dir.string());

  const auto inds = individual_params(cfg);
  struct Job {
    int ind;
    data::SessionKey session;
  };
  std::vector<Job> work;
  for (int i = 0; i < cfg.num_individuals; ++i)
    for (const auto& s : cfg.sessions()) work.push_back({i, s});

  std::vector<std::vector<data::CropRecord>> per_job(work.size());
  parallel_for(work.size(), jobs, [&](std::size_t k) {
    const auto& job = work[k];
    const auto& ind = inds[job.ind];
    SessionRender sr = render_session(cfg, ind, job.ind, job.session);
    const auto rel_dir = session_dir(ind.id, job.session);
    std::vector<align::Detection> dets;
    for (const auto& fr : sr.frames) {
      char name[32];
      std::snprintf(name, sizeof name, "f%06d.png", fr.detection.frame_index);
      const auto rel = rel_dir / name;
      const auto bytes = write_png(fr.frame, out_dir / rel);
      data::CropRecord r;
      r.crop_id = align::make_crop_id(ind.id, job.session, fr.detection.frame_index);
      r.sha256 = data::hash_image(bytes);
      r.individual = ind.id;
      r.session = job.session;
      r.frame_index = fr.detection.frame_index;
      r.source = rel.generic_string();
      r.stage = data::Stage::raw;
      per_job[k].push_back(std::move(r));
      dets.push_back(fr.detection);
    }
    align::write_detections(dets, out_dir / rel_dir / "detections.jsonl");
  });

  DatasetOutput out;
  out.root = out_dir;
  out.manifest.meta.num_days = cfg.num_days;
  for (const auto& p : inds) out.manifest.meta.individuals.push_back(p.id);
  out.manifest.meta.generator = provenance;
  out.manifest.meta.generator["synth"] = cfg.to_json();
  for (auto& v : per_job)
    for (auto& r : v) out.manifest.records.push_back(std::move(r));

  const auto params = params_to_json(cfg, inds);
  const std::string text = params.dump(2) + "\n";
  write_file_bytes(out_dir / "params.json", std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  out.manifest_path = write_manifest(out.manifest, out_dir / "manifest.jsonl");
  return out;
}

}  // namespace retroid::synth
