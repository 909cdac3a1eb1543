// vvtrace: command-line front end for the volumetric viewing-trace
// toolkit. Subcommands cover ingestion, validation, resampling, ROI
// computation, kinematics, heatmaps, predictor training/evaluation,
// ablations, and the cube-streaming simulation. Every run writes a
// machine-readable manifest next to its artifacts; reruns with identical
// inputs, options and seed produce byte-identical files.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "vvt/checksum.hpp"
#include "vvt/errors.hpp"
#include "vvt/kinematics.hpp"
#include "vvt/ply.hpp"
#include "vvt/predictor.hpp"
#include "vvt/session_ops.hpp"
#include "vvt/streaming.hpp"
#include "vvt/trace_io.hpp"
#include "vvt/voxel_roi.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";
constexpr const char* kTraceFormatVersion = "1";
constexpr const char* kModelFormatVersion = "1";

// rotation-composition convention, settable via --euler-order
vvt::EulerOrder g_euler_order = vvt::EulerOrder::kRollPitchYaw;

struct RunContext {
  std::string subcommand;
  std::string out_dir = ".";
  int threads = 1;
  json options = json::object();
  std::vector<std::pair<std::string, std::string>> inputs;   // path, checksum
  std::vector<std::string> outputs;
  json extra = json::object();

  std::string path(const std::string& name) const {
    return (fs::path(out_dir) / name).string();
  }

  void note_input(const std::string& p) {
    inputs.emplace_back(p, vvt::to_hex(vvt::fnv1a64_file(p)));
  }
  void note_output(const std::string& p) { outputs.push_back(p); }

  void write_manifest(const json& status) const {
    json m;
    m["tool"] = "vvtrace";
    m["version"] = kToolVersion;
    m["trace_format"] = kTraceFormatVersion;
    m["model_format"] = kModelFormatVersion;
    m["subcommand"] = subcommand;
    m["options"] = options;
    m["status"] = status;
    json in = json::array();
    for (const auto& [p, sum] : inputs) {
      in.push_back({{"path", p}, {"fnv1a64", sum}});
    }
    m["inputs"] = in;
    json out = json::array();
    for (const std::string& p : outputs) {
      json entry{{"path", p}};
      if (fs::exists(p)) {
        entry["fnv1a64"] = vvt::to_hex(vvt::fnv1a64_file(p));
      }
      out.push_back(entry);
    }
    m["outputs"] = out;
    if (!extra.empty()) m["results"] = extra;

    std::ofstream f(path(subcommand + "_manifest.json"), std::ios::binary);
    f << m.dump(2) << '\n';
  }
};

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw vvt::DataError("cannot open output file: " + path);
  out << j.dump(2) << '\n';
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw vvt::DataError("cannot open file: " + path);
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw vvt::DataError("JSON parse error in " + path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------
// scene loading

std::vector<vvt::Vec3> load_scene_union(
    const std::string& scene_file, const std::string& scene_dir,
    std::vector<std::string>* frame_files = nullptr) {
  if (!scene_file.empty()) {
    if (frame_files) frame_files->push_back(scene_file);
    return vvt::read_ply(scene_file);
  }
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(scene_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ply") {
      files.push_back(entry.path().string());
    }
  }
  if (files.empty()) {
    throw vvt::DataError("no .ply files found in " + scene_dir);
  }
  std::sort(files.begin(), files.end());
  std::vector<vvt::Vec3> all;
  for (const std::string& f : files) {
    const std::vector<vvt::Vec3> pts = vvt::read_ply(f);
    all.insert(all.end(), pts.begin(), pts.end());
  }
  if (frame_files) *frame_files = files;
  return all;
}

// ---------------------------------------------------------------------
// trajectory CSV

void write_trajectory_csv(const std::string& path,
                          const vvt::predict::ViewportTrajectory& traj) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw vvt::DataError("cannot open output file: " + path);
  out << "step,pos_x,pos_y,pos_z,fwd_x,fwd_y,fwd_z,yaw,pitch,roll\n";
  char buf[320];
  for (std::size_t i = 0; i < traj.size(); ++i) {
    vvt::Vec3 fwd = traj[i].forward;
    const double norm = fwd.norm();
    if (norm > 0) fwd /= norm;
    const vvt::EulerAngles e = vvt::forward_to_euler(fwd);
    std::snprintf(buf, sizeof(buf),
                  "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  i, traj[i].position.x(), traj[i].position.y(),
                  traj[i].position.z(), fwd.x(), fwd.y(), fwd.z(), e.yaw,
                  e.pitch, e.roll);
    out << buf;
  }
}

vvt::predict::ViewportTrajectory read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw vvt::DataError("cannot open trajectory file: " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw vvt::DataError("empty trajectory file: " + path);
  }
  vvt::predict::ViewportTrajectory traj;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> fields;
    std::size_t start = 0;
    while (start <= line.size()) {
      const std::size_t comma = line.find(',', start);
      const std::string field =
          line.substr(start, comma == std::string::npos ? std::string::npos
                                                        : comma - start);
      char* end = nullptr;
      fields.push_back(std::strtod(field.c_str(), &end));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() < 7) {
      throw vvt::DataError("trajectory row too short at line " +
                           std::to_string(line_no) + " in " + path);
    }
    vvt::predict::ViewportState st;
    st.position = vvt::Vec3(fields[1], fields[2], fields[3]);
    st.forward = vvt::Vec3(fields[4], fields[5], fields[6]);
    traj.push_back(st);
  }
  return traj;
}

// ---------------------------------------------------------------------
// dataset list for train/eval/ablate

struct DatasetEntry {
  std::string session;
  std::string scene;
  std::string user;
  std::string video;
};

std::vector<DatasetEntry> load_dataset_list(const std::string& path) {
  const json j = load_json_file(path);
  std::vector<DatasetEntry> out;
  for (const json& item : j.at("items")) {
    DatasetEntry e;
    e.session = item.at("session").get<std::string>();
    e.scene = item.at("scene").get<std::string>();
    e.user = item.value("user", std::string("u0"));
    e.video = item.value("video", std::string("v0"));
    out.push_back(std::move(e));
  }
  if (out.empty()) throw vvt::DataError("dataset list is empty: " + path);
  return out;
}

std::vector<vvt::predict::TrainingItem> build_items(
    RunContext& ctx, const std::vector<DatasetEntry>& entries,
    const vvt::predict::PredictorConfig& cfg, int stride) {
  std::map<std::string, std::shared_ptr<const std::vector<vvt::Vec3>>> scenes;
  std::vector<vvt::predict::TrainingItem> items;
  for (const DatasetEntry& e : entries) {
    ctx.note_input(e.session);
    vvt::Session session = vvt::parse_trace_file(
        e.session, vvt::TraceSchema::standard(), e.user, e.video);
    session = vvt::validate_session(session, vvt::ValidationPolicy{});

    auto scene_it = scenes.find(e.scene);
    if (scene_it == scenes.end()) {
      ctx.note_input(e.scene);
      std::vector<vvt::Vec3> pts = vvt::read_ply(e.scene);
      if (static_cast<int>(pts.size()) > cfg.scene_points) {
        const std::vector<int> keep =
            vvt::predict::farthest_point_indices(pts, cfg.scene_points);
        std::vector<vvt::Vec3> sampled;
        sampled.reserve(keep.size());
        for (int i : keep) sampled.push_back(pts[static_cast<std::size_t>(i)]);
        pts = std::move(sampled);
      }
      scene_it = scenes
                     .emplace(e.scene,
                              std::make_shared<const std::vector<vvt::Vec3>>(
                                  std::move(pts)))
                     .first;
    }
    const std::vector<vvt::GlobalGaze> gaze =
      vvt::session_gaze(session, g_euler_order);
    std::vector<vvt::predict::TrainingItem> session_items =
        vvt::predict::make_items(session, gaze, scene_it->second,
                                 cfg.history_len, cfg.horizon, stride,
                                 g_euler_order);
    items.insert(items.end(), std::make_move_iterator(session_items.begin()),
                 std::make_move_iterator(session_items.end()));
  }
  if (items.empty()) {
    throw vvt::DataError(
        "dataset yields no windows; sessions shorter than history+horizon");
  }
  return items;
}

// option helper: config-file value applies when the flag was not passed
template <typename T>
void apply_config(const CLI::App& app, const json& cfg,
                  const std::string& flag, const std::string& key, T& value) {
  if (app.count(flag) == 0 && cfg.contains(key)) {
    value = cfg.at(key).get<T>();
  }
}

// ---------------------------------------------------------------------
// shared ROI pipeline (also used by simulate)

struct RoiBundle {
  vvt::VoxelGrid grid{vvt::VoxelGrid::build(
      std::vector<vvt::Vec3>{{0, 0, 0}}, 1.0)};
  std::vector<vvt::CubeKey> effective;
  vvt::RoiMap map;
  std::int64_t n_sample = 0;
};

RoiBundle compute_roi(const vvt::Session& session,
                      const std::vector<vvt::GlobalGaze>& gaze,
                      const std::vector<vvt::Vec3>& union_cloud,
                      const std::vector<std::string>& frame_files,
                      bool per_frame_density, double edge, double half_angle,
                      const vvt::ThresholdRule& rule,
                      vvt::RoiDistanceMode mode, int threads) {
  RoiBundle b;
  b.grid = vvt::VoxelGrid::build(union_cloud, edge);

  std::vector<vvt::Vec3> trajectory;
  trajectory.reserve(session.samples.size());
  for (const vvt::TraceSample& s : session.samples) {
    trajectory.push_back(s.headset.position);
  }
  b.effective = vvt::filter_cubes(b.grid, rule, trajectory);
  if (b.effective.empty()) {
    throw vvt::DataError("no effective cubes survive the density filter");
  }

  const auto hits =
      vvt::count_hits(session, gaze, b.grid, b.effective, half_angle, threads);
  b.n_sample = static_cast<std::int64_t>(session.samples.size());

  if (per_frame_density && frame_files.size() > 1) {
    std::vector<std::map<vvt::CubeKey, std::int64_t>> frame_counts;
    frame_counts.reserve(frame_files.size());
    for (const std::string& f : frame_files) {
      std::map<vvt::CubeKey, std::int64_t> counts;
      for (const vvt::Vec3& p : vvt::read_ply(f)) {
        const vvt::CubeKey key = b.grid.key_for_point(p);
        if (key >= 0) counts[key] += 1;
      }
      frame_counts.push_back(std::move(counts));
    }
    const auto density = vvt::mean_viewed_density(
        session, gaze, b.grid, b.effective, half_angle, frame_counts);
    b.map = vvt::roi_levels(hits, b.grid, b.effective, b.n_sample, mode,
                            &density);
  } else {
    b.map = vvt::roi_levels(hits, b.grid, b.effective, b.n_sample, mode);
  }
  return b;
}

// ---------------------------------------------------------------------
// subcommand bodies

int run_ingest(RunContext& ctx, const std::string& trace_path,
               const std::string& user, const std::string& video,
               const std::string& axis_spec, double rate,
               const std::string& metadata_path) {
  ctx.note_input(trace_path);
  if (!metadata_path.empty()) {
    ctx.note_input(metadata_path);
    const vvt::DatasetConfig meta = vvt::load_dataset_config(metadata_path);
    const bool video_known =
        std::any_of(meta.videos.begin(), meta.videos.end(),
                    [&](const vvt::VideoMeta& v) { return v.name == video; });
    const bool user_known =
        std::any_of(meta.users.begin(), meta.users.end(),
                    [&](const vvt::UserProfile& u) { return u.user_id == user; });
    if (!video_known) {
      throw vvt::DataError("video '" + video + "' not in the dataset config");
    }
    if (!user_known) {
      throw vvt::DataError("user '" + user + "' not in the dataset config");
    }
  }
  vvt::Session session = vvt::parse_trace_file(
      trace_path, vvt::TraceSchema::standard(), user, video);
  session.nominal_rate_hz = rate;
  const vvt::AxisMap map = vvt::AxisMap::parse(axis_spec);
  if (!map.is_identity()) {
    session = vvt::axis_map(session, map);
  }
  const std::string out = ctx.path("session.csv");
  vvt::serialize_trace_file(session, vvt::TraceSchema::standard(), out);
  ctx.note_output(out);
  ctx.extra["samples"] = session.samples.size();
  return 0;
}

int run_validate(RunContext& ctx, const std::string& session_path,
                 const std::string& policy_name, double min_confidence) {
  ctx.note_input(session_path);
  const vvt::Session session = vvt::parse_trace_file(
      session_path, vvt::TraceSchema::standard());
  vvt::ValidationPolicy policy;
  policy.min_confidence = min_confidence;
  if (policy_name == "zero") {
    policy.confidence = vvt::ValidationPolicy::Confidence::kZeroBelowMin;
  } else if (policy_name == "clamp") {
    policy.confidence = vvt::ValidationPolicy::Confidence::kClampToRange;
  } else if (policy_name == "drop") {
    policy.confidence = vvt::ValidationPolicy::Confidence::kDropSample;
  } else {
    throw vvt::UsageError("unknown policy: " + policy_name);
  }
  vvt::ValidationReport report;
  const vvt::Session out = vvt::validate_session(session, policy, &report);

  const std::string out_csv = ctx.path("validated.csv");
  vvt::serialize_trace_file(out, vvt::TraceSchema::standard(), out_csv);
  ctx.note_output(out_csv);

  json rep;
  rep["input_samples"] = session.samples.size();
  rep["output_samples"] = out.samples.size();
  rep["duplicate_timestamps_dropped"] = report.duplicate_timestamps_dropped;
  rep["non_increasing_dropped"] = report.non_increasing_dropped;
  rep["non_finite_dropped"] = report.non_finite_dropped;
  rep["low_confidence_eyes_zeroed"] = report.low_confidence_eyes_zeroed;
  rep["confidences_clamped"] = report.confidences_clamped;
  rep["low_confidence_samples_dropped"] =
      report.low_confidence_samples_dropped;
  const std::string rep_path = ctx.path("validation_report.json");
  write_json_file(rep_path, rep);
  ctx.note_output(rep_path);
  ctx.extra = rep;
  return 0;
}

int run_resample(RunContext& ctx, const std::string& session_path,
                 double rate) {
  ctx.note_input(session_path);
  vvt::Session session = vvt::parse_trace_file(
      session_path, vvt::TraceSchema::standard());
  // repair timestamps without touching gaze validity
  vvt::ValidationPolicy clamp_only;
  clamp_only.confidence = vvt::ValidationPolicy::Confidence::kClampToRange;
  session = vvt::validate_session(session, clamp_only);
  const vvt::Session out = vvt::resample(session, rate);
  const std::string out_csv = ctx.path("resampled.csv");
  vvt::serialize_trace_file(out, vvt::TraceSchema::standard(), out_csv);
  ctx.note_output(out_csv);
  ctx.extra["samples"] = out.samples.size();
  return 0;
}

int run_roi(RunContext& ctx, const std::string& session_path,
            const std::string& scene_file, const std::string& scene_dir,
            double edge, double half_angle, const std::string& filter_mode,
            double tau, double d_ref, std::int64_t min_hits,
            const std::string& distance_mode, int bins) {
  ctx.note_input(session_path);
  vvt::Session session = vvt::parse_trace_file(
      session_path, vvt::TraceSchema::standard());
  session = vvt::validate_session(session, vvt::ValidationPolicy{});
  const std::vector<vvt::GlobalGaze> gaze =
      vvt::session_gaze(session, g_euler_order);

  std::vector<std::string> frame_files;
  const std::vector<vvt::Vec3> cloud =
      load_scene_union(scene_file, scene_dir, &frame_files);
  for (const std::string& f : frame_files) ctx.note_input(f);

  vvt::ThresholdRule rule;
  rule.tau0 = tau;
  rule.distance_ref_m = d_ref;
  if (filter_mode == "adaptive") {
    rule.mode = vvt::ThresholdRule::Mode::kDistanceAdaptive;
  } else if (filter_mode != "fixed") {
    throw vvt::UsageError("unknown filter mode: " + filter_mode);
  }
  const vvt::RoiDistanceMode mode =
      distance_mode == "per-sample" ? vvt::RoiDistanceMode::kPerSample
                                    : vvt::RoiDistanceMode::kMeanDistance;

  const RoiBundle bundle =
      compute_roi(session, gaze, cloud, frame_files, frame_files.size() > 1,
                  edge, half_angle, rule, mode, ctx.threads);

  const std::string roi_csv = ctx.path("roi.csv");
  vvt::write_roi_csv(bundle.map, roi_csv);
  ctx.note_output(roi_csv);

  const vvt::RoiDistribution dist =
      vvt::roi_distribution(bundle.map, bins, min_hits);
  const std::string hist_csv = ctx.path("roi_hist.csv");
  vvt::write_histogram_csv(dist, hist_csv);
  ctx.note_output(hist_csv);

  json summary;
  summary["cubes_total"] = bundle.grid.cubes().size();
  summary["cubes_effective"] = bundle.effective.size();
  summary["samples"] = bundle.n_sample;
  summary["roi_mean"] = dist.mean;
  summary["roi_std_dev"] = dist.std_dev;
  summary["distribution_cubes"] = dist.cube_count;
  const std::string sum_path = ctx.path("roi_summary.json");
  write_json_file(sum_path, summary);
  ctx.note_output(sum_path);
  ctx.extra = summary;
  return 0;
}

int run_kinematics(RunContext& ctx, const std::string& session_path,
                   double resample_rate) {
  ctx.note_input(session_path);
  vvt::Session session = vvt::parse_trace_file(
      session_path, vvt::TraceSchema::standard());
  session = vvt::validate_session(session, vvt::ValidationPolicy{});
  if (resample_rate > 0) {
    session = vvt::resample(session, resample_rate);
  }

  const vvt::MovementSeries movement =
      vvt::axis_distances(session, g_euler_order);
  const std::string move_csv = ctx.path("movement.csv");
  vvt::write_movement_csv(movement, move_csv);
  ctx.note_output(move_csv);

  json summary;
  summary["total_distance_m"] = vvt::total_distance(session);
  summary["lateral_distance_m"] = movement.lateral.back();
  summary["forward_distance_m"] = movement.forward.back();
  summary["vertical_distance_m"] = movement.vertical.back();
  summary["duration_s"] =
      session.samples.back().timestamp - session.samples.front().timestamp;

  const vvt::RotationSeries rotation =
      vvt::rotational_acceleration(session, g_euler_order);
  const std::string rot_csv = ctx.path("rotation.csv");
  vvt::write_rotation_csv(rotation, rot_csv);
  ctx.note_output(rot_csv);

  const auto accel_cdf = vvt::cdf(rotation.accel_deg_s2);
  const std::string cdf_csv = ctx.path("accel_cdf.csv");
  vvt::write_cdf_csv(accel_cdf, cdf_csv);
  ctx.note_output(cdf_csv);

  double peak = 0;
  for (double a : rotation.accel_deg_s2) peak = std::max(peak, a);
  summary["peak_accel_deg_s2"] = peak;
  double over100 = 0;
  for (double a : rotation.accel_deg_s2) over100 += (a > 100.0);
  summary["fraction_accel_over_100"] =
      rotation.accel_deg_s2.empty()
          ? 0.0
          : over100 / double(rotation.accel_deg_s2.size());

  const std::string sum_path = ctx.path("kinematics_summary.json");
  write_json_file(sum_path, summary);
  ctx.note_output(sum_path);
  ctx.extra = summary;
  return 0;
}

int run_heatmap(RunContext& ctx, const std::string& session_path, double cell,
                bool intersection, double tolerance, double floor_z) {
  ctx.note_input(session_path);
  vvt::Session session = vvt::parse_trace_file(
      session_path, vvt::TraceSchema::standard());
  session = vvt::validate_session(session, vvt::ValidationPolicy{});

  const vvt::DwellHeatmap dwell = vvt::dwell_heatmap(session, cell);
  const std::string dwell_csv = ctx.path("dwell.csv");
  vvt::write_matrix_csv(dwell.dwell_s, dwell_csv);
  ctx.note_output(dwell_csv);
  const std::string dwell_pgm = ctx.path("dwell.pgm");
  vvt::write_pgm(dwell.dwell_s, dwell_pgm);
  ctx.note_output(dwell_pgm);
  ctx.extra["total_dwell_s"] = dwell.total_dwell();

  if (intersection) {
    const std::vector<vvt::GlobalGaze> gaze =
      vvt::session_gaze(session, g_euler_order);
    const vvt::IntersectionMask mask = vvt::gaze_trajectory_intersection(
        session, gaze, cell, tolerance, floor_z);
    Eigen::MatrixXd as_double = mask.mask.cast<double>();
    const std::string mask_csv = ctx.path("intersection.csv");
    vvt::write_matrix_csv(as_double, mask_csv);
    ctx.note_output(mask_csv);
    const std::string mask_pgm = ctx.path("intersection.pgm");
    vvt::write_pgm(as_double, mask_pgm);
    ctx.note_output(mask_pgm);
    ctx.extra["intersection_cells"] = as_double.sum();
  }
  return 0;
}

vvt::predict::PredictorConfig predictor_config(const std::string& config_path,
                                               std::uint64_t seed_override) {
  vvt::predict::PredictorConfig cfg;  // documented defaults
  if (!config_path.empty()) {
    cfg = vvt::predict::predictor_config_from_json_file(config_path);
  }
  if (seed_override != 0) cfg.seed = seed_override;
  return cfg;
}

int run_train(RunContext& ctx, const std::string& dataset_path,
              const std::string& config_path, const std::string& model_out,
              int stride, double val_fraction, std::uint64_t seed) {
  ctx.note_input(dataset_path);
  if (!config_path.empty()) ctx.note_input(config_path);
  const vvt::predict::PredictorConfig cfg = predictor_config(config_path, seed);
  const std::vector<DatasetEntry> entries = load_dataset_list(dataset_path);
  const std::vector<vvt::predict::TrainingItem> items =
      build_items(ctx, entries, cfg, stride);

  std::vector<vvt::predict::TrainingItem> train_items, val_items;
  vvt::predict::split_by_user(items, val_fraction, cfg.seed, train_items,
                              val_items);
  if (train_items.empty()) train_items = items;

  vvt::predict::GazePredictor model(cfg);
  vvt::predict::TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.learning_rate = cfg.learning_rate;
  tc.seed = cfg.seed;
  const vvt::predict::TrainResult result =
      vvt::predict::train(model, train_items, tc);

  const std::string model_path =
      model_out.empty() ? ctx.path("model.bin") : model_out;
  vvt::predict::save_model(model, model_path);
  ctx.note_output(model_path);
  ctx.note_output(model_path + ".manifest.txt");

  const std::string curve_csv = ctx.path("loss_curve.csv");
  {
    std::ofstream out(curve_csv, std::ios::binary);
    out << "epoch,loss\n";
    char buf[64];
    for (std::size_t e = 0; e < result.loss_curve.size(); ++e) {
      std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", e, result.loss_curve[e]);
      out << buf;
    }
  }
  ctx.note_output(curve_csv);

  json rep;
  rep["train_items"] = train_items.size();
  rep["val_items"] = val_items.size();
  rep["parameters"] = model.parameter_count();
  rep["final_loss"] = result.loss_curve.back();
  if (!val_items.empty()) {
    double maea = 0;
    for (const auto& item : val_items) {
      const auto pred = model.predict(item.window, *item.scene);
      maea += vvt::predict::evaluate_maea(pred, item.target).maea_deg;
    }
    rep["val_maea_deg"] = maea / double(val_items.size());
  }
  const std::string rep_path = ctx.path("train_report.json");
  write_json_file(rep_path, rep);
  ctx.note_output(rep_path);
  ctx.extra = rep;
  return 0;
}

int run_predict(RunContext& ctx, const std::string& model_path,
                const std::string& session_path, const std::string& scene_path,
                std::int64_t at) {
  ctx.note_input(model_path);
  ctx.note_input(session_path);
  ctx.note_input(scene_path);
  vvt::predict::GazePredictor model = vvt::predict::load_model(model_path);
  const vvt::predict::PredictorConfig& cfg = model.config();

  vvt::Session session = vvt::parse_trace_file(
      session_path, vvt::TraceSchema::standard());
  session = vvt::validate_session(session, vvt::ValidationPolicy{});
  const std::vector<vvt::GlobalGaze> gaze =
      vvt::session_gaze(session, g_euler_order);

  std::vector<vvt::Vec3> pts = vvt::read_ply(scene_path);
  if (static_cast<int>(pts.size()) > cfg.scene_points) {
    const std::vector<int> keep =
        vvt::predict::farthest_point_indices(pts, cfg.scene_points);
    std::vector<vvt::Vec3> sampled;
    for (int i : keep) sampled.push_back(pts[static_cast<std::size_t>(i)]);
    pts = std::move(sampled);
  }

  const auto n = static_cast<std::int64_t>(cfg.history_len);
  if (at < 0) at = n;
  if (at < n || at > static_cast<std::int64_t>(session.samples.size())) {
    throw vvt::UsageError("--at must lie in [history_len, sample count]");
  }
  std::vector<vvt::predict::HistoryStep> window;
  for (std::int64_t i = at - n; i < at; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    window.push_back(vvt::predict::HistoryStep{
        vvt::predict::viewport_state_of(session.samples[iu], g_euler_order),
        gaze[iu]});
  }
  const vvt::predict::ViewportTrajectory traj = model.predict(window, pts);
  const std::string out_csv = ctx.path("prediction.csv");
  write_trajectory_csv(out_csv, traj);
  ctx.note_output(out_csv);
  ctx.extra["steps"] = traj.size();
  return 0;
}

int run_eval(RunContext& ctx, const std::string& pred_path,
             const std::string& truth_path, const std::string& model_path,
             const std::string& dataset_path, int stride) {
  json rep;
  if (!pred_path.empty()) {
    ctx.note_input(pred_path);
    ctx.note_input(truth_path);
    const auto pred = read_trajectory_csv(pred_path);
    const auto truth = read_trajectory_csv(truth_path);
    const vvt::predict::Metrics m = vvt::predict::evaluate_maea(pred, truth);
    rep["maea_deg"] = m.maea_deg;
    rep["position_mae_m"] = m.position_mae_m;
  } else {
    ctx.note_input(model_path);
    ctx.note_input(dataset_path);
    vvt::predict::GazePredictor model = vvt::predict::load_model(model_path);
    const std::vector<DatasetEntry> entries = load_dataset_list(dataset_path);
    const std::vector<vvt::predict::TrainingItem> items =
        build_items(ctx, entries, model.config(), stride);

    double model_maea = 0, model_pos = 0;
    double persist_maea = 0, linear_maea = 0;
    for (const auto& item : items) {
      const auto pred = model.predict(item.window, *item.scene);
      const vvt::predict::Metrics m =
          vvt::predict::evaluate_maea(pred, item.target);
      model_maea += m.maea_deg;
      model_pos += m.position_mae_m;
      const auto persist = vvt::predict::persistence_baseline(
          item.window, model.config().horizon);
      persist_maea +=
          vvt::predict::evaluate_maea(persist, item.target).maea_deg;
      const auto linear = vvt::predict::linear_regression_baseline(
          item.window, model.config().horizon);
      linear_maea += vvt::predict::evaluate_maea(linear, item.target).maea_deg;
    }
    const double n = double(items.size());
    rep["windows"] = items.size();
    rep["model_maea_deg"] = model_maea / n;
    rep["model_position_mae_m"] = model_pos / n;
    rep["persistence_maea_deg"] = persist_maea / n;
    rep["linear_maea_deg"] = linear_maea / n;
  }
  const std::string rep_path = ctx.path("eval_metrics.json");
  write_json_file(rep_path, rep);
  ctx.note_output(rep_path);
  ctx.extra = rep;
  return 0;
}

int run_ablate(RunContext& ctx, const std::string& dataset_path,
               const std::string& config_path, int stride,
               double val_fraction, std::uint64_t seed) {
  ctx.note_input(dataset_path);
  if (!config_path.empty()) ctx.note_input(config_path);
  const vvt::predict::PredictorConfig cfg = predictor_config(config_path, seed);
  const std::vector<DatasetEntry> entries = load_dataset_list(dataset_path);
  const std::vector<vvt::predict::TrainingItem> items =
      build_items(ctx, entries, cfg, stride);

  std::vector<vvt::predict::TrainingItem> train_items, val_items;
  vvt::predict::split_by_user(items, val_fraction, cfg.seed, train_items,
                              val_items);
  if (train_items.empty() || val_items.empty()) {
    train_items = items;
    val_items = items;
  }

  vvt::predict::TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.learning_rate = cfg.learning_rate;
  tc.seed = cfg.seed;
  const vvt::predict::AblationReport report =
      vvt::predict::run_ablations(train_items, val_items, cfg, tc);

  const std::string csv_path = ctx.path("ablation_report.csv");
  {
    std::ofstream out(csv_path, std::ios::binary);
    out << "variant,maea_deg,position_mae_m,parameters\n";
    char buf[160];
    for (const auto& row : report.rows) {
      std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%lld\n",
                    row.variant.c_str(), row.maea_deg, row.position_mae_m,
                    static_cast<long long>(row.parameters));
      out << buf;
    }
  }
  ctx.note_output(csv_path);

  json rep;
  rep["rows"] = json::array();
  for (const auto& row : report.rows) {
    rep["rows"].push_back({{"variant", row.variant},
                           {"maea_deg", row.maea_deg},
                           {"position_mae_m", row.position_mae_m},
                           {"parameters", row.parameters}});
  }
  rep["full_parameters"] = report.full_parameters;
  rep["cross_modal_parameters"] = report.cross_modal_parameters;
  rep["parameter_audit_ok"] = report.parameter_audit_ok;
  const std::string rep_path = ctx.path("ablation_report.json");
  write_json_file(rep_path, rep);
  ctx.note_output(rep_path);
  ctx.extra = rep;
  return 0;
}

int run_simulate(RunContext& ctx, const std::string& session_path,
                 const std::string& scene_file, const std::string& scene_dir,
                 const std::string& predictor_name,
                 const std::string& model_path, const std::string& ladder_path,
                 double edge, double half_angle, double tau,
                 const std::vector<double>& budgets, int horizon, bool sliding,
                 bool emit_trace) {
  ctx.note_input(session_path);
  vvt::Session session = vvt::parse_trace_file(
      session_path, vvt::TraceSchema::standard());
  session = vvt::validate_session(session, vvt::ValidationPolicy{});
  const std::vector<vvt::GlobalGaze> gaze =
      vvt::session_gaze(session, g_euler_order);

  std::vector<std::string> frame_files;
  const std::vector<vvt::Vec3> cloud =
      load_scene_union(scene_file, scene_dir, &frame_files);
  for (const std::string& f : frame_files) ctx.note_input(f);

  vvt::ThresholdRule rule;
  rule.tau0 = tau;
  const RoiBundle bundle =
      compute_roi(session, gaze, cloud, frame_files, false, edge, half_angle,
                  rule, vvt::RoiDistanceMode::kMeanDistance, ctx.threads);

  vvt::stream::QualityLadder ladder;
  if (!ladder_path.empty()) {
    ctx.note_input(ladder_path);
    ladder = vvt::stream::QualityLadder::from_json_file(ladder_path);
  }

  std::unique_ptr<vvt::stream::SimPredictor> predictor;
  std::shared_ptr<vvt::predict::GazePredictor> model;
  if (predictor_name == "oracle") {
    predictor = vvt::stream::make_oracle_predictor();
  } else if (predictor_name == "persistence") {
    predictor = vvt::stream::make_persistence_predictor();
  } else if (predictor_name == "linear") {
    predictor = vvt::stream::make_linear_predictor(10);
  } else if (predictor_name == "model") {
    if (model_path.empty()) {
      throw vvt::UsageError("--predictor model needs --model");
    }
    ctx.note_input(model_path);
    model = std::make_shared<vvt::predict::GazePredictor>(
        vvt::predict::load_model(model_path));
    auto scene = std::make_shared<const std::vector<vvt::Vec3>>(cloud);
    predictor = vvt::stream::make_model_predictor(model, scene, g_euler_order);
    horizon = std::min(horizon, model->config().horizon);
  } else {
    throw vvt::UsageError("unknown predictor: " + predictor_name);
  }

  vvt::stream::SimConfig cfg;
  cfg.half_angle_deg = half_angle;
  cfg.horizon = horizon;
  cfg.sliding_window = sliding;

  json all = json::array();
  std::vector<vvt::stream::FrameTrace> trace;
  for (double budget : budgets) {
    std::vector<vvt::stream::FrameTrace>* trace_ptr =
        (emit_trace && budget == budgets.back()) ? &trace : nullptr;
    const vvt::stream::SimReport report =
        vvt::stream::simulate(session, gaze, *predictor, bundle.grid,
                              bundle.effective, bundle.map, ladder, budget,
                              cfg, trace_ptr);
    json r;
    r["predictor"] = predictor->name();
    r["budget_bits_per_frame"] = budget;
    r["bandwidth_used_bits"] = report.bandwidth_used_bits;
    r["bandwidth_full_bits"] = report.bandwidth_full_bits;
    r["bandwidth_saved_fraction"] = report.bandwidth_saved_fraction;
    r["recall"] = report.recall;
    r["mean_viewed_quality"] = report.mean_viewed_quality;
    r["frames_scored"] = report.frames_scored;
    r["viewed_cube_count"] = report.viewed_cube_count;
    all.push_back(r);
  }

  const std::string rep_path = ctx.path("sim_report.json");
  write_json_file(rep_path, all.size() == 1 ? all[0] : all);
  ctx.note_output(rep_path);

  const std::string csv_path = ctx.path("sim_report.csv");
  {
    std::ofstream out(csv_path, std::ios::binary);
    out << "predictor,budget_bits_per_frame,bandwidth_used_bits,"
           "bandwidth_saved_fraction,recall,mean_viewed_quality,"
           "frames_scored\n";
    char buf[320];
    for (const json& r : all) {
      std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%lld\n",
                    r["predictor"].get<std::string>().c_str(),
                    r["budget_bits_per_frame"].get<double>(),
                    r["bandwidth_used_bits"].get<double>(),
                    r["bandwidth_saved_fraction"].get<double>(),
                    r["recall"].get<double>(),
                    r["mean_viewed_quality"].get<double>(),
                    static_cast<long long>(
                        r["frames_scored"].get<std::int64_t>()));
      out << buf;
    }
  }
  ctx.note_output(csv_path);

  if (emit_trace) {
    const std::string trace_path = ctx.path("sim_trace.csv");
    std::ofstream out(trace_path, std::ios::binary);
    out << "frame,visible,viewed,viewed_sent,bits\n";
    char buf[160];
    for (const auto& f : trace) {
      std::snprintf(buf, sizeof(buf), "%zu,%zu,%zu,%zu,%.17g\n", f.frame,
                    f.visible, f.viewed, f.viewed_sent, f.bits);
      out << buf;
    }
    ctx.note_output(trace_path);
  }
  ctx.extra["reports"] = all;
  return 0;
}

int run_report(RunContext& ctx, const std::string& dir) {
  json combined = json::array();
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() > 14 &&
        name.substr(name.size() - 14) == "_manifest.json" &&
        name != ctx.subcommand + "_manifest.json") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  for (const std::string& f : files) {
    ctx.note_input(f);
    combined.push_back(load_json_file(f));
  }
  const std::string rep_path = ctx.path("report.json");
  write_json_file(rep_path, combined);
  ctx.note_output(rep_path);

  const std::string csv_path = ctx.path("report.csv");
  {
    std::ofstream out(csv_path, std::ios::binary);
    out << "subcommand,status,outputs\n";
    for (const json& m : combined) {
      std::string status = "ok";
      if (m.contains("status") && m["status"].is_object()) status = "error";
      out << m.value("subcommand", std::string("?")) << ',' << status << ','
          << (m.contains("outputs") ? m["outputs"].size() : 0) << '\n';
    }
  }
  ctx.note_output(csv_path);
  ctx.extra["runs"] = combined.size();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"volumetric viewing-trace analytics, prediction and "
               "streaming-simulation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag(
      "--version",
      std::string("vvtrace ") + kToolVersion + " (trace format v" +
          kTraceFormatVersion + ", model format v" + kModelFormatVersion + ")");

  std::string out_dir;
  if (const char* env = std::getenv("VVTRACE_OUT_DIR")) {
    out_dir = env;
  } else {
    out_dir = ".";
  }
  int threads = 1;
  std::string config_path;
  app.add_option("--out-dir", out_dir, "directory for artifacts");
  app.add_option("--threads", threads,
                 "worker cap; 1 is the deterministic reference path");
  app.add_option("--config", config_path,
                 "JSON file of option defaults (flags override)");
  std::string euler_order = "roll-pitch-yaw";
  app.add_option("--euler-order", euler_order,
                 "rotation factor order: roll-pitch-yaw | yaw-pitch-roll");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "parse a raw trace CSV and "
                                              "map it into the analysis frame");
  std::string in_trace, in_user = "u0", in_video = "v0", in_axis = "x,z,y";
  double in_rate = 144.0;
  ingest->add_option("--trace", in_trace)->required();
  ingest->add_option("--user", in_user);
  ingest->add_option("--video", in_video);
  ingest->add_option("--axis-map", in_axis,
                     "signed permutation, e.g. x,z,y or x,-z,y; x,y,z is "
                     "identity");
  ingest->add_option("--rate", in_rate, "nominal sample rate in Hz");
  std::string in_metadata;
  ingest->add_option("--metadata", in_metadata,
                     "dataset config; --user/--video must appear in it");

  // validate
  auto* validate = app.add_subcommand("validate", "repair a session per "
                                                  "policy and report");
  std::string va_session, va_policy = "zero";
  double va_min_conf = 0.5;
  validate->add_option("--session", va_session)->required();
  validate->add_option("--policy", va_policy, "zero | clamp | drop");
  validate->add_option("--min-confidence", va_min_conf);

  // resample
  auto* resample_cmd = app.add_subcommand("resample", "uniform-rate "
                                                      "resampling");
  std::string rs_session;
  double rs_rate = 30.0;
  resample_cmd->add_option("--session", rs_session)->required();
  resample_cmd->add_option("--rate", rs_rate)->required();

  // roi
  auto* roi = app.add_subcommand("roi", "voxelize the scene, count gaze "
                                        "hits and compute ROI levels");
  std::string roi_session, roi_scene, roi_scene_dir, roi_filter = "fixed";
  std::string roi_distance = "mean";
  double roi_edge = 0.25, roi_half = 30.0, roi_tau = 4.0, roi_dref = 1.0;
  std::int64_t roi_min_hits = 5;
  int roi_bins = 20;
  roi->add_option("--session", roi_session)->required();
  roi->add_option("--scene", roi_scene, "union point cloud (.ply)");
  roi->add_option("--scene-dir", roi_scene_dir, "directory of per-frame .ply");
  roi->add_option("--edge", roi_edge, "cube edge in meters");
  roi->add_option("--half-angle", roi_half, "gaze cone half-angle, degrees");
  roi->add_option("--filter", roi_filter, "fixed | adaptive");
  roi->add_option("--tau", roi_tau, "density filter threshold, points");
  roi->add_option("--d-ref", roi_dref, "adaptive filter reference distance");
  roi->add_option("--min-hits", roi_min_hits,
                  "rarely-watched cutoff for the distribution");
  roi->add_option("--distance-mode", roi_distance, "mean | per-sample");
  roi->add_option("--bins", roi_bins, "histogram bins");

  // kinematics
  auto* kin = app.add_subcommand("kinematics", "movement and rotation "
                                               "analytics");
  std::string kin_session;
  double kin_resample = 0.0;
  kin->add_option("--session", kin_session)->required();
  kin->add_option("--resample", kin_resample,
                  "resample to this rate first (0 = off)");

  // heatmap
  auto* heat = app.add_subcommand("heatmap", "aerial dwell heatmap and "
                                             "gaze intersection mask");
  std::string heat_session;
  double heat_cell = 0.1, heat_tol = 0.0, heat_floor = 0.0;
  bool heat_intersection = false;
  heat->add_option("--session", heat_session)->required();
  heat->add_option("--cell", heat_cell, "cell size in meters");
  heat->add_flag("--intersection", heat_intersection,
                 "also emit the gaze/trajectory intersection mask");
  heat->add_option("--tolerance", heat_tol,
                   "intersection tolerance (0 = one cell diagonal)");
  heat->add_option("--floor-z", heat_floor);

  // train
  auto* train_cmd = app.add_subcommand("train", "train the gaze-assisted "
                                                "viewport predictor");
  std::string tr_dataset, tr_config, tr_model_out;
  int tr_stride = 5;
  double tr_val = 0.2;
  std::uint64_t tr_seed = 0;
  train_cmd->add_option("--dataset", tr_dataset, "JSON list of "
                                                 "session/scene pairs")
      ->required();
  train_cmd->add_option("--train-config", tr_config,
                        "JSON predictor configuration");
  train_cmd->add_option("--model-out", tr_model_out);
  train_cmd->add_option("--stride", tr_stride, "window stride in samples");
  train_cmd->add_option("--val-fraction", tr_val);
  train_cmd->add_option("--seed", tr_seed, "overrides the config seed");

  // predict
  auto* pred = app.add_subcommand("predict", "one-window viewport "
                                             "prediction from a checkpoint");
  std::string pd_model, pd_session, pd_scene;
  std::int64_t pd_at = -1;
  pred->add_option("--model", pd_model)->required();
  pred->add_option("--session", pd_session)->required();
  pred->add_option("--scene", pd_scene)->required();
  pred->add_option("--at", pd_at, "window end sample index");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score predictions against "
                                              "ground truth");
  std::string ev_pred, ev_truth, ev_model, ev_dataset;
  int ev_stride = 5;
  eval_cmd->add_option("--pred", ev_pred, "trajectory CSV");
  eval_cmd->add_option("--truth", ev_truth, "trajectory CSV");
  eval_cmd->add_option("--model", ev_model, "model checkpoint");
  eval_cmd->add_option("--dataset", ev_dataset, "JSON dataset list");
  eval_cmd->add_option("--stride", ev_stride);

  // ablate
  auto* abl = app.add_subcommand("ablate", "train the full model and its "
                                           "three ablations");
  std::string ab_dataset, ab_config;
  int ab_stride = 5;
  double ab_val = 0.2;
  std::uint64_t ab_seed = 0;
  abl->add_option("--dataset", ab_dataset)->required();
  abl->add_option("--train-config", ab_config);
  abl->add_option("--stride", ab_stride);
  abl->add_option("--val-fraction", ab_val);
  abl->add_option("--seed", ab_seed);

  // simulate
  auto* sim = app.add_subcommand("simulate", "cube-streaming value "
                                             "simulation");
  std::string sm_session, sm_scene, sm_scene_dir, sm_predictor = "oracle";
  std::string sm_model, sm_ladder, sm_sweep;
  double sm_edge = 0.25, sm_half = 30.0, sm_tau = 4.0, sm_budget = 1e6;
  int sm_horizon = 30;
  bool sm_sliding = false, sm_trace = false;
  sim->add_option("--session", sm_session)->required();
  sim->add_option("--scene", sm_scene);
  sim->add_option("--scene-dir", sm_scene_dir);
  sim->add_option("--predictor", sm_predictor,
                  "oracle | persistence | linear | model");
  sim->add_option("--model", sm_model);
  sim->add_option("--ladder", sm_ladder, "JSON quality ladder");
  sim->add_option("--edge", sm_edge);
  sim->add_option("--half-angle", sm_half);
  sim->add_option("--tau", sm_tau);
  sim->add_option("--budget", sm_budget, "bits per frame");
  sim->add_option("--budget-sweep", sm_sweep, "comma-separated budgets");
  sim->add_option("--horizon", sm_horizon, "prediction horizon in frames");
  sim->add_flag("--sliding", sm_sliding, "re-predict every frame");
  sim->add_flag("--trace", sm_trace, "emit the per-frame allocation trace");

  // report
  auto* rpt = app.add_subcommand("report", "aggregate run manifests");
  std::string rp_dir;
  rpt->add_option("--dir", rp_dir, "directory to scan (default: out-dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  RunContext ctx;
  ctx.out_dir = out_dir;
  ctx.threads = threads;
  if (euler_order == "yaw-pitch-roll") {
    g_euler_order = vvt::EulerOrder::kYawPitchRoll;
  } else if (euler_order != "roll-pitch-yaw") {
    std::cerr << "vvtrace: unknown --euler-order: " << euler_order << '\n';
    return 2;
  }

  json file_cfg = json::object();
  try {
    if (!config_path.empty()) file_cfg = load_json_file(config_path);
  } catch (const std::exception& e) {
    std::cerr << "vvtrace: " << e.what() << '\n';
    return 3;
  }

  try {
    fs::create_directories(out_dir);
  } catch (const std::exception& e) {
    std::cerr << "vvtrace: cannot create out dir: " << e.what() << '\n';
    return 3;
  }

  int rc = 0;
  try {
    if (ingest->parsed()) {
      ctx.subcommand = "ingest";
      apply_config(*ingest, file_cfg, "--axis-map", "axis_map", in_axis);
      apply_config(*ingest, file_cfg, "--rate", "rate", in_rate);
      ctx.options = {{"trace", in_trace},   {"user", in_user},
                     {"video", in_video},   {"axis_map", in_axis},
                     {"rate", in_rate},     {"metadata", in_metadata}};
      rc = run_ingest(ctx, in_trace, in_user, in_video, in_axis, in_rate,
                      in_metadata);
    } else if (validate->parsed()) {
      ctx.subcommand = "validate";
      apply_config(*validate, file_cfg, "--policy", "policy", va_policy);
      apply_config(*validate, file_cfg, "--min-confidence", "min_confidence",
                   va_min_conf);
      ctx.options = {{"session", va_session}, {"policy", va_policy},
                     {"min_confidence", va_min_conf}};
      rc = run_validate(ctx, va_session, va_policy, va_min_conf);
    } else if (resample_cmd->parsed()) {
      ctx.subcommand = "resample";
      ctx.options = {{"session", rs_session}, {"rate", rs_rate}};
      rc = run_resample(ctx, rs_session, rs_rate);
    } else if (roi->parsed()) {
      ctx.subcommand = "roi";
      apply_config(*roi, file_cfg, "--edge", "edge", roi_edge);
      apply_config(*roi, file_cfg, "--half-angle", "half_angle", roi_half);
      apply_config(*roi, file_cfg, "--tau", "tau", roi_tau);
      apply_config(*roi, file_cfg, "--min-hits", "min_hits", roi_min_hits);
      apply_config(*roi, file_cfg, "--bins", "bins", roi_bins);
      if (roi_scene.empty() == roi_scene_dir.empty()) {
        throw vvt::UsageError("pass exactly one of --scene or --scene-dir");
      }
      ctx.options = {{"session", roi_session},   {"scene", roi_scene},
                     {"scene_dir", roi_scene_dir}, {"edge", roi_edge},
                     {"half_angle", roi_half},   {"filter", roi_filter},
                     {"tau", roi_tau},           {"d_ref", roi_dref},
                     {"min_hits", roi_min_hits}, {"distance_mode", roi_distance},
                     {"bins", roi_bins},         {"threads", threads}};
      rc = run_roi(ctx, roi_session, roi_scene, roi_scene_dir, roi_edge,
                   roi_half, roi_filter, roi_tau, roi_dref, roi_min_hits,
                   roi_distance, roi_bins);
    } else if (kin->parsed()) {
      ctx.subcommand = "kinematics";
      ctx.options = {{"session", kin_session}, {"resample", kin_resample}};
      rc = run_kinematics(ctx, kin_session, kin_resample);
    } else if (heat->parsed()) {
      ctx.subcommand = "heatmap";
      apply_config(*heat, file_cfg, "--cell", "cell", heat_cell);
      ctx.options = {{"session", heat_session},
                     {"cell", heat_cell},
                     {"intersection", heat_intersection},
                     {"tolerance", heat_tol},
                     {"floor_z", heat_floor}};
      rc = run_heatmap(ctx, heat_session, heat_cell, heat_intersection,
                       heat_tol, heat_floor);
    } else if (train_cmd->parsed()) {
      ctx.subcommand = "train";
      ctx.options = {{"dataset", tr_dataset}, {"train_config", tr_config},
                     {"stride", tr_stride},   {"val_fraction", tr_val},
                     {"seed", tr_seed}};
      rc = run_train(ctx, tr_dataset, tr_config, tr_model_out, tr_stride,
                     tr_val, tr_seed);
    } else if (pred->parsed()) {
      ctx.subcommand = "predict";
      ctx.options = {{"model", pd_model}, {"session", pd_session},
                     {"scene", pd_scene}, {"at", pd_at}};
      rc = run_predict(ctx, pd_model, pd_session, pd_scene, pd_at);
    } else if (eval_cmd->parsed()) {
      ctx.subcommand = "eval";
      if (ev_pred.empty() == ev_model.empty()) {
        throw vvt::UsageError(
            "pass either --pred/--truth or --model/--dataset");
      }
      if (!ev_pred.empty() && ev_truth.empty()) {
        throw vvt::UsageError("--pred needs --truth");
      }
      if (!ev_model.empty() && ev_dataset.empty()) {
        throw vvt::UsageError("--model needs --dataset");
      }
      ctx.options = {{"pred", ev_pred}, {"truth", ev_truth},
                     {"model", ev_model}, {"dataset", ev_dataset},
                     {"stride", ev_stride}};
      rc = run_eval(ctx, ev_pred, ev_truth, ev_model, ev_dataset, ev_stride);
    } else if (abl->parsed()) {
      ctx.subcommand = "ablate";
      ctx.options = {{"dataset", ab_dataset}, {"train_config", ab_config},
                     {"stride", ab_stride},   {"val_fraction", ab_val},
                     {"seed", ab_seed}};
      rc = run_ablate(ctx, ab_dataset, ab_config, ab_stride, ab_val, ab_seed);
    } else if (sim->parsed()) {
      ctx.subcommand = "simulate";
      if (sm_scene.empty() == sm_scene_dir.empty()) {
        throw vvt::UsageError("pass exactly one of --scene or --scene-dir");
      }
      std::vector<double> budgets;
      if (!sm_sweep.empty()) {
        std::size_t start = 0;
        while (start <= sm_sweep.size()) {
          const std::size_t comma = sm_sweep.find(',', start);
          budgets.push_back(std::stod(sm_sweep.substr(
              start,
              comma == std::string::npos ? std::string::npos : comma - start)));
          if (comma == std::string::npos) break;
          start = comma + 1;
        }
      } else {
        budgets.push_back(sm_budget);
      }
      ctx.options = {{"session", sm_session},   {"scene", sm_scene},
                     {"scene_dir", sm_scene_dir}, {"predictor", sm_predictor},
                     {"model", sm_model},       {"ladder", sm_ladder},
                     {"edge", sm_edge},         {"half_angle", sm_half},
                     {"tau", sm_tau},           {"budgets", budgets},
                     {"horizon", sm_horizon},   {"sliding", sm_sliding},
                     {"trace", sm_trace},       {"threads", threads}};
      rc = run_simulate(ctx, sm_session, sm_scene, sm_scene_dir, sm_predictor,
                        sm_model, sm_ladder, sm_edge, sm_half, sm_tau, budgets,
                        sm_horizon, sm_sliding, sm_trace);
    } else if (rpt->parsed()) {
      ctx.subcommand = "report";
      const std::string dir = rp_dir.empty() ? out_dir : rp_dir;
      ctx.options = {{"dir", dir}};
      rc = run_report(ctx, dir);
    }
    ctx.write_manifest("ok");
  } catch (const vvt::UsageError& e) {
    std::cerr << "vvtrace: usage error: " << e.what() << '\n';
    ctx.write_manifest(
        {{"error", {{"category", "usage"}, {"message", e.what()}}}});
    return 2;
  } catch (const vvt::NumericError& e) {
    std::cerr << "vvtrace: numeric error: " << e.what() << '\n';
    ctx.write_manifest(
        {{"error", {{"category", "numeric"}, {"message", e.what()}}}});
    return 4;
  } catch (const vvt::Error& e) {
    std::cerr << "vvtrace: data error: " << e.what() << '\n';
    ctx.write_manifest(
        {{"error", {{"category", "data"}, {"message", e.what()}}}});
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "vvtrace: error: " << e.what() << '\n';
    ctx.write_manifest(
        {{"error", {{"category", "internal"}, {"message", e.what()}}}});
    return 4;
  }
  return rc;
}
