// gpmvs: command-line front end for plane-sweep cost volumes, latent GP
// fusion (batch and online), depth metrics, synthetic sequences and the
// end-to-end pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gpmvs/batch_gp.hpp"
#include "gpmvs/depth_metrics.hpp"
#include "gpmvs/error.hpp"
#include "gpmvs/io.hpp"
#include "gpmvs/online_gp.hpp"
#include "gpmvs/pipeline.hpp"
#include "gpmvs/plane_sweep.hpp"
#include "gpmvs/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gpmvs;

namespace {

std::string frame_file(const char* stem, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05zu.gpmv", stem, i);
  return buf;
}

Intrinsics parse_k(const std::string& text, int width, int height) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "--K expects fx,fy,cx,cy");
    }
  }
  if (v.size() != 4) throw Error(ErrorCode::InvalidArgument, "--K expects fx,fy,cx,cy");
  return Intrinsics{v[0], v[1], v[2], v[3], width, height};
}

Eigen::MatrixXd load_latents(const std::string& path, std::size_t expected_rows) {
  Eigen::MatrixXd Y = matrix_from_tensor(read_tensor(fs::path(path)));
  if (static_cast<std::size_t>(Y.rows()) != expected_rows) {
    std::ostringstream os;
    os << "latents have " << Y.rows() << " rows but the pose file has " << expected_rows << " poses";
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
  return Y;
}

// ---------------------------------------------------------------------------

struct CostvolArgs {
  std::string ref, nbr, poses, K, out, planes_out;
  double d_min = 0.5, d_max = 50.0;
  int planes = 64;
};

void cmd_costvol(const CostvolArgs& a) {
  const ImageTensor ref = ImageTensor::from_tensor(read_tensor(fs::path(a.ref)));
  const ImageTensor nbr = ImageTensor::from_tensor(read_tensor(fs::path(a.nbr)));
  const auto poses = read_poses_jsonl(fs::path(a.poses));
  if (poses.size() != 2)
    throw Error(ErrorCode::InvalidArgument, "--poses must hold exactly two poses: reference, then neighbour");
  const Intrinsics K = parse_k(a.K, ref.width(), ref.height());
  const auto planes = depth_planes(a.d_min, a.d_max, a.planes);
  const NeighborView view{&nbr, relative_pose(poses[0], poses[1])};
  const CostVolume vol = cost_volume(ref, std::span(&view, 1), K, planes);
  write_tensor(fs::path(a.out), vol.to_tensor());
  if (!a.planes_out.empty()) {
    Tensor p{{static_cast<std::uint32_t>(planes.size())}, {}};
    for (double d : planes) p.data.push_back(static_cast<float>(d));
    write_tensor(fs::path(a.planes_out), p);
  }
}

struct FuseArgs {
  std::string latents, poses, out, var_out, resume, save_state, kernel = "matern32";
  double gamma2 = 13.82, ell = 1.098, sigma2 = 1.443;
  std::size_t max_frames = kDefaultBatchCap;
};

KernelSpec spec_from(const FuseArgs& a) {
  KernelSpec spec{parse_kernel_family(a.kernel), a.gamma2, a.ell, a.sigma2};
  spec.validate();
  return spec;
}

void cmd_fuse_batch(const FuseArgs& a) {
  const auto poses = read_poses_jsonl(fs::path(a.poses));
  const Eigen::MatrixXd Y = load_latents(a.latents, poses.size());
  const KernelSpec spec = spec_from(a);
  BatchOptions opts;
  opts.max_frames = a.max_frames;
  const BatchPosterior post = batch_posterior(gram_matrix(poses, spec), Y, spec.sigma_sq, opts);
  write_tensor(fs::path(a.out), tensor_from_matrix(post.mean));
  if (!a.var_out.empty()) write_tensor(fs::path(a.var_out), tensor_from_matrix(post.var));
}

void cmd_fuse_online(const FuseArgs& a, const CLI::App& sub) {
  const auto poses = read_poses_jsonl(fs::path(a.poses));
  const Eigen::MatrixXd Y = load_latents(a.latents, poses.size());
  OnlineState state;
  if (!a.resume.empty()) {
    state = load_state(fs::path(a.resume));
    for (const char* flag : {"--gamma2", "--ell", "--sigma2"}) {
      if (sub.count(flag) == 0) continue;
      const double given = sub.get_option(flag)->as<double>();
      const double stored = std::string(flag) == "--gamma2" ? state.spec.gamma_sq
                            : std::string(flag) == "--ell"  ? state.spec.ell
                                                            : state.spec.sigma_sq;
      if (given != stored)
        throw Error(ErrorCode::InvalidArgument,
                    std::string(flag) + " differs from the hyperparameters stored in the resumed state");
    }
    if (state.dims() != Y.cols()) throw Error(ErrorCode::DimensionMismatch, "latent width differs from the resumed state");
  } else {
    state = init_state(spec_from(a), Y.cols());
  }
  Eigen::MatrixXd fused(Y.rows(), Y.cols());
  for (Eigen::Index i = 0; i < Y.rows(); ++i)
    fused.row(i) = step(state, poses[static_cast<std::size_t>(i)], Y.row(i).transpose()).transpose();
  write_tensor(fs::path(a.out), tensor_from_matrix(fused));
  if (!a.save_state.empty()) save_state(state, fs::path(a.save_state));
}

struct MetricsArgs {
  std::string pred, gt, mask;
};

void cmd_metrics(const MetricsArgs& a) {
  std::optional<Tensor> mask;
  if (!a.mask.empty()) mask = read_tensor(fs::path(a.mask));
  const DepthMap pred = DepthMap::from_tensor(read_tensor(fs::path(a.pred)));
  const DepthMap gt = DepthMap::from_tensor(read_tensor(fs::path(a.gt)), mask);
  std::cout << to_json(evaluate(pred, gt)).dump(2) << '\n';
}

struct SimulateArgs {
  std::string kind = "collinear", out_dir;
  std::size_t n = 10;
  std::uint64_t seed = 0;
  int width = 320, height = 256;
  double focal = 0.0, spacing = 0.15, spacing_max = 0.0, scene_depth = 3.0, texture_scale = 0.05;
};

struct Simulation {
  Intrinsics K;
  std::vector<Pose> poses;
  std::vector<RenderedView> views;
};

Simulation simulate(const SimulateArgs& a) {
  TrajectoryOptions opts;
  opts.kind = parse_trajectory_kind(a.kind);
  opts.frames = a.n;
  opts.seed = a.seed;
  opts.spacing = a.spacing;
  opts.spacing_max = a.spacing_max;
  opts.scene_depth = a.scene_depth;
  Simulation sim;
  const double f = a.focal > 0.0 ? a.focal : static_cast<double>(a.width);
  sim.K = Intrinsics{f, f, (a.width - 1) / 2.0, (a.height - 1) / 2.0, a.width, a.height};
  sim.K.validate();
  sim.poses = simulate_trajectory(opts);
  const PlaneScene scene{a.scene_depth, a.texture_scale, a.seed};
  for (const Pose& p : sim.poses) sim.views.push_back(render_plane(scene, p, sim.K));
  return sim;
}

Tensor depth_tensor(const DepthMap& m) {
  Tensor t{{static_cast<std::uint32_t>(m.height), static_cast<std::uint32_t>(m.width)}, {}};
  t.data.reserve(m.depth.size());
  for (std::size_t i = 0; i < m.depth.size(); ++i) t.data.push_back(m.valid[i] ? static_cast<float>(m.depth[i]) : 0.0f);
  return t;
}

void cmd_simulate(const SimulateArgs& a) {
  const Simulation sim = simulate(a);
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  write_json_file(dir / "intrinsics.json", to_json(sim.K));
  write_poses_jsonl(dir / "poses.jsonl", sim.poses);
  for (std::size_t i = 0; i < sim.views.size(); ++i) {
    write_tensor(dir / frame_file("image", i), sim.views[i].image.to_tensor());
    write_tensor(dir / frame_file("depth", i), depth_tensor(sim.views[i].depth));
  }
}

// ---------------------------------------------------------------------------

struct RunArgs {
  std::string config, mode, input_dir, output_dir;
  bool no_gp = false;
  std::optional<double> sigma2;
};

struct LoadedInput {
  std::vector<FrameInput> frames;
  std::optional<Intrinsics> K;
};

LoadedInput load_input_dir(const fs::path& dir) {
  LoadedInput in;
  const auto poses = read_poses_jsonl(dir / "poses.jsonl");
  if (fs::exists(dir / "latents.gpmv")) {
    const Eigen::MatrixXd Y = load_latents((dir / "latents.gpmv").string(), poses.size());
    for (std::size_t i = 0; i < poses.size(); ++i)
      in.frames.push_back(FrameInput{poses[i], std::nullopt, Y.row(static_cast<Eigen::Index>(i)).transpose(), std::nullopt});
  } else {
    in.K = intrinsics_from_json(read_json_file(dir / "intrinsics.json"));
    for (std::size_t i = 0; i < poses.size(); ++i) {
      FrameInput f{poses[i], ImageTensor::from_tensor(read_tensor(dir / frame_file("image", i))), std::nullopt,
                   std::nullopt};
      if (fs::exists(dir / frame_file("depth", i)))
        f.ground_truth = DepthMap::from_tensor(read_tensor(dir / frame_file("depth", i)));
      in.frames.push_back(std::move(f));
    }
  }
  if (fs::exists(dir / "intrinsics.json") && !in.K)
    in.K = intrinsics_from_json(read_json_file(dir / "intrinsics.json"));
  return in;
}

void cmd_run(const RunArgs& a) {
  const json doc = read_json_file(fs::path(a.config));
  PipelineConfig cfg;
  apply_config_json(doc, cfg);
  if (!a.mode.empty()) apply_config_json(json{{"mode", a.mode}}, cfg);
  if (a.no_gp) cfg.no_gp = true;
  if (a.sigma2) cfg.kernel.sigma_sq = *a.sigma2;
  cfg.validate();

  std::string input_dir = a.input_dir.empty() ? doc.value("input_dir", std::string()) : a.input_dir;
  std::string output_dir = a.output_dir.empty() ? doc.value("output_dir", std::string()) : a.output_dir;
  if (output_dir.empty()) throw Error(ErrorCode::InvalidArgument, "run needs an output_dir (config or --out-dir)");

  LoadedInput in;
  if (!input_dir.empty()) {
    in = load_input_dir(fs::path(input_dir));
  } else if (doc.contains("simulate")) {
    const json& s = doc.at("simulate");
    SimulateArgs sa;
    sa.kind = s.value("kind", sa.kind);
    sa.n = s.value("n", sa.n);
    sa.seed = s.value("seed", sa.seed);
    sa.width = s.value("width", sa.width);
    sa.height = s.value("height", sa.height);
    sa.focal = s.value("focal", sa.focal);
    sa.spacing = s.value("spacing", sa.spacing);
    sa.spacing_max = s.value("spacing_max", sa.spacing_max);
    sa.scene_depth = s.value("scene_depth", sa.scene_depth);
    sa.texture_scale = s.value("texture_scale", sa.texture_scale);
    Simulation sim = simulate(sa);
    in.K = sim.K;
    for (std::size_t i = 0; i < sim.poses.size(); ++i)
      in.frames.push_back(FrameInput{sim.poses[i], std::move(sim.views[i].image), std::nullopt,
                                     std::move(sim.views[i].depth)});
  } else {
    throw Error(ErrorCode::InvalidArgument, "config needs either input_dir or a simulate block");
  }

  std::optional<std::pair<int, int>> out_size;
  if (doc.contains("output_size")) out_size = std::pair{doc.at("output_size")[0].get<int>(), doc.at("output_size")[1].get<int>()};

  const SequenceResult result = run_sequence(cfg, in.frames, in.K, out_size);

  const fs::path out(output_dir);
  fs::create_directories(out);
  const auto n = static_cast<Eigen::Index>(result.frames.size());
  const Eigen::Index m = cfg.latent_dims.size();
  Eigen::MatrixXd latents(n, m), fused(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    latents.row(i) = result.frames[static_cast<std::size_t>(i)].latent.transpose();
    fused.row(i) = result.frames[static_cast<std::size_t>(i)].fused_latent.transpose();
  }
  write_tensor(out / "latents.gpmv", tensor_from_matrix(latents));
  write_tensor(out / "fused_latents.gpmv", tensor_from_matrix(fused));

  if (n > 0 && result.frames.front().disparity) {
    const auto& first = *result.frames.front().disparity;
    Tensor disp{{static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(first.rows()),
                 static_cast<std::uint32_t>(first.cols())},
                {}};
    for (const FrameRecord& r : result.frames)
      for (Eigen::Index y = 0; y < r.disparity->rows(); ++y)
        for (Eigen::Index x = 0; x < r.disparity->cols(); ++x) disp.data.push_back(static_cast<float>((*r.disparity)(y, x)));
    write_tensor(out / "disparity.gpmv", disp);
  }

  json report{{"config", to_json(cfg)}, {"frames", json::array()}};
  for (std::size_t i = 0; i < result.frames.size(); ++i) {
    const FrameRecord& r = result.frames[i];
    json f{{"index", i}, {"neighbor", r.neighbor ? json(*r.neighbor) : json(nullptr)}};
    if (r.metrics) f["metrics"] = to_json(*r.metrics);
    report["frames"].push_back(f);
  }
  if (result.overall) report["overall"] = to_json(*result.overall);
  write_json_file(out / "report.json", report);
  if (result.overall) std::cout << to_json(*result.overall).dump(2) << '\n';
}

int fail(std::string_view code, const std::string& message, int exit_code = 1) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << '\n';
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-space GP fusion for multi-view stereo"};
  app.require_subcommand(1);

  CostvolArgs cv;
  auto* costvol = app.add_subcommand("costvol", "Plane-sweep cost volume from a reference and a neighbour image");
  costvol->add_option("--ref", cv.ref, "Reference image tensor (C,H,W)")->required();
  costvol->add_option("--nbr", cv.nbr, "Neighbour image tensor (C,H,W)")->required();
  costvol->add_option("--poses", cv.poses, "JSONL with the reference pose then the neighbour pose")->required();
  costvol->add_option("--K", cv.K, "Intrinsics fx,fy,cx,cy")->required();
  costvol->add_option("--out", cv.out, "Output cost volume tensor (D,H,W)")->required();
  costvol->add_option("--d-min", cv.d_min, "Nearest plane depth (m)");
  costvol->add_option("--d-max", cv.d_max, "Farthest plane depth (m)");
  costvol->add_option("--planes", cv.planes, "Number of depth planes");
  costvol->add_option("--planes-out", cv.planes_out, "Optional rank-1 tensor of plane depths");

  FuseArgs fb;
  auto* fuse_batch = app.add_subcommand("fuse-batch", "Batch GP posterior mean over all frames");
  FuseArgs fo;
  auto* fuse_online = app.add_subcommand("fuse-online", "Online (filtering) GP fusion, one frame at a time");
  for (auto [sub, args] : {std::pair{fuse_batch, &fb}, std::pair{fuse_online, &fo}}) {
    sub->add_option("--latents", args->latents, "Latent tensor (N,M)")->required();
    sub->add_option("--poses", args->poses, "Pose JSONL, one line per frame")->required();
    sub->add_option("--out", args->out, "Fused latent tensor (N,M)")->required();
    sub->add_option("--gamma2", args->gamma2, "Kernel magnitude");
    sub->add_option("--ell", args->ell, "Kernel length-scale");
    sub->add_option("--sigma2", args->sigma2, "Observation noise variance");
  }
  fuse_batch->add_option("--kernel", fb.kernel, "matern32 | exponential | td");
  fuse_batch->add_option("--max-frames", fb.max_frames, "Largest N accepted");
  fuse_batch->add_option("--var-out", fb.var_out, "Optional posterior variance tensor (N,1)");
  fuse_online->add_option("--resume", fo.resume, "State snapshot to continue from");
  fuse_online->add_option("--save-state", fo.save_state, "Write the final state snapshot here");

  MetricsArgs ma;
  auto* metrics = app.add_subcommand("metrics", "Depth error metrics as JSON");
  metrics->add_option("--pred", ma.pred, "Predicted depth tensor (H,W)")->required();
  metrics->add_option("--gt", ma.gt, "Ground-truth depth tensor (H,W)")->required();
  metrics->add_option("--mask", ma.mask, "Optional validity mask (H,W), nonzero = valid");

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Synthetic posed images of a textured plane");
  sim->add_option("--kind", sa.kind, "collinear | arc | random")->check(CLI::IsMember({"collinear", "arc", "random"}));
  sim->add_option("--n", sa.n, "Number of frames")->required();
  sim->add_option("--seed", sa.seed, "Random seed");
  sim->add_option("--out-dir", sa.out_dir, "Output directory")->required();
  sim->add_option("--width", sa.width, "Image width");
  sim->add_option("--height", sa.height, "Image height");
  sim->add_option("--focal", sa.focal, "Focal length in pixels (default: image width)");
  sim->add_option("--spacing", sa.spacing, "Collinear step length (m)");
  sim->add_option("--spacing-max", sa.spacing_max, "Draw collinear steps uniformly up to this length");
  sim->add_option("--scene-depth", sa.scene_depth, "Distance to the textured plane (m)");
  sim->add_option("--texture-scale", sa.texture_scale, "Texture cell size on the plane (m)");

  RunArgs ra;
  double sigma2_override = 0.0;
  auto* run = app.add_subcommand("run", "End-to-end pipeline from a JSON config");
  run->add_option("--config", ra.config, "Pipeline config JSON")->required();
  run->add_option("--mode", ra.mode, "batch | online (overrides config)");
  run->add_option("--input-dir", ra.input_dir, "Overrides config input_dir");
  run->add_option("--out-dir", ra.output_dir, "Overrides config output_dir");
  run->add_flag("--no-gp", ra.no_gp, "Pass encoder outputs straight to the decoder");
  auto* sigma_opt = run->add_option("--sigma2", sigma2_override, "Overrides kernel sigma2");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("Usage", e.what(), e.get_exit_code() == 0 ? 2 : e.get_exit_code());
  }

  try {
    if (costvol->parsed()) cmd_costvol(cv);
    else if (fuse_batch->parsed()) cmd_fuse_batch(fb);
    else if (fuse_online->parsed()) cmd_fuse_online(fo, *fuse_online);
    else if (metrics->parsed()) cmd_metrics(ma);
    else if (sim->parsed()) cmd_simulate(sa);
    else if (run->parsed()) {
      if (sigma_opt->count() > 0) ra.sigma2 = sigma2_override;
      cmd_run(ra);
    }
  } catch (const Error& e) {
    return fail(to_string(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail("Format", e.what());
  } catch (const std::exception& e) {
    return fail("Internal", e.what());
  }
  return 0;
}
