// pressim: command-line pipeline for synthetic ground-pressure data.
// Subcommands mirror the pipeline stages: gen -> simulate -> train -> synth
// -> eval/report, plus a built-in selftest.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "pressim/checkpoint.hpp"
#include "pressim/config.hpp"
#include "pressim/dataset.hpp"
#include "pressim/metrics.hpp"
#include "pressim/motion.hpp"
#include "pressim/pipeline.hpp"
#include "pressim/pose.hpp"
#include "pressim/selftest.hpp"
#include "pressim/seqfile.hpp"
#include "pressim/sim.hpp"

namespace fs = std::filesystem;
using namespace pressim;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string precision = "f32";
  std::optional<std::uint64_t> seed;
};

Config effective_config(const CommonOpts& common) {
  Config cfg;
  if (!common.config_path.empty()) cfg = load_config(common.config_path);
  return cfg;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoFailure("cannot open for writing: " + path);
  f << text;
  if (!f) throw IoFailure("write failed: " + path);
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenOpts {
  std::string out;
  std::string skeleton = "coco17";
  std::optional<std::string> tmpl;
  std::optional<double> duration, fps, noise, mass, height;
  std::optional<std::string> subject_id;
};

int run_gen(const CommonOpts& common, const GenOpts& opts) {
  Config cfg = effective_config(common);
  if (opts.tmpl) cfg.motion_template = *opts.tmpl;
  if (opts.duration) cfg.motion_duration_s = *opts.duration;
  if (opts.fps) cfg.motion_fps = *opts.fps;
  if (opts.noise) cfg.motion_noise_m = *opts.noise;
  if (opts.mass) cfg.subject_mass_kg = *opts.mass;
  if (opts.height) cfg.subject_height_cm = *opts.height;
  if (opts.subject_id) cfg.subject_id = *opts.subject_id;

  SkeletonKind kind;
  if (opts.skeleton == "coco17")
    kind = SkeletonKind::Coco17;
  else if (opts.skeleton == "body25")
    kind = SkeletonKind::Body25;
  else
    throw InvalidSpec("--skeleton must be coco17 or body25");

  const SubjectProfile subject = cfg.subject();
  const MotionSpec spec = cfg.motion(common.seed.value_or(0));
  const Skeleton skeleton = build_skeleton(kind);
  const PoseSequence seq = generate_motion(spec, skeleton, subject);
  write_sequence(opts.out, to_sequence_file(seq));
  std::printf("wrote %zu %s frames (%s, %.1fs @ %.1f fps) to %s\n", seq.size(),
              opts.skeleton.c_str(), cfg.motion_template.c_str(),
              cfg.motion_duration_s, cfg.motion_fps, opts.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateOpts {
  std::string pose_path;
  std::string deform_out;
  std::string pressure_out;
  int every = 1;
  std::string pgm_dir;
  std::optional<double> mass, height, k, d_max;
};

int run_simulate(const CommonOpts& common, const SimulateOpts& opts) {
  Config cfg = effective_config(common);
  if (opts.mass) cfg.subject_mass_kg = *opts.mass;
  if (opts.height) cfg.subject_height_cm = *opts.height;
  if (opts.k) cfg.plane_k = *opts.k;
  if (opts.d_max) cfg.plane_d_max_mm = *opts.d_max;
  if (opts.every < 1) throw InvalidSpec("--every must be >= 1");

  const PoseSequence poses = to_pose_sequence(read_sequence(opts.pose_path));
  const SubjectProfile subject = cfg.subject();
  const PlaneModel plane = cfg.plane();
  const SimulatedSequence sim = simulate_sequence(poses, subject, plane);

  SequenceFile deform_file, pressure_file;
  deform_file.kind = SequenceKind::Deform;
  pressure_file.kind = SequenceKind::Pressure;
  for (std::size_t i = 0; i < sim.timestamps.size();
       i += static_cast<std::size_t>(opts.every)) {
    deform_file.timestamps.push_back(sim.timestamps[i]);
    deform_file.deform_frames.push_back(sim.deformation[i]);
    pressure_file.timestamps.push_back(sim.timestamps[i]);
    pressure_file.pressure_frames.push_back(sim.pressure[i]);
  }
  write_sequence(opts.deform_out, deform_file);
  write_sequence(opts.pressure_out, pressure_file);

  if (!opts.pgm_dir.empty()) {
    fs::create_directories(opts.pgm_dir);
    char name[64];
    for (std::size_t i = 0; i < deform_file.deform_frames.size(); ++i) {
      std::snprintf(name, sizeof(name), "frame_%05zu.pgm", i);
      write_pgm((fs::path(opts.pgm_dir) / name).string(),
                deform_file.deform_frames[i]);
    }
  }
  std::printf("simulated %zu frames -> %zu kept (every %d): %s, %s\n",
              sim.timestamps.size(), deform_file.timestamps.size(), opts.every,
              opts.deform_out.c_str(), opts.pressure_out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOpts {
  std::vector<std::string> pose_paths, deform_paths, pressure_paths;
  std::string out_dir;
  std::string models = "all";  // all | pressim | baseline
  std::optional<double> lr;
  std::optional<int> batch, epochs_tpn, epochs_tdn, epochs_psn,
      epochs_baseline, finetune;
};

WindowedDataset load_windows(const Config& cfg, const TrainOpts& opts) {
  if (opts.pose_paths.size() != opts.deform_paths.size() ||
      opts.pose_paths.size() != opts.pressure_paths.size())
    throw InvalidSpec("--pose/--deform/--pressure must be given in triples");
  if (opts.pose_paths.empty())
    throw InvalidSpec("at least one --pose/--deform/--pressure triple needed");
  std::vector<AlignedDataset> aligned;
  const SubjectProfile subject = cfg.subject();
  for (std::size_t i = 0; i < opts.pose_paths.size(); ++i) {
    const PoseSequence poses =
        to_pose_sequence(read_sequence(opts.pose_paths[i]));
    const SequenceFile deform = read_sequence(opts.deform_paths[i]);
    if (deform.kind != SequenceKind::Deform)
      throw KindMismatch("not a deformation file: " + opts.deform_paths[i]);
    const SequenceFile pressure = read_sequence(opts.pressure_paths[i]);
    if (pressure.kind != SequenceKind::Pressure)
      throw KindMismatch("not a pressure file: " + opts.pressure_paths[i]);
    aligned.push_back(align_streams(poses, deform.deform_frames,
                                    deform.timestamps, pressure.pressure_frames,
                                    pressure.timestamps, subject,
                                    cfg.align_tolerance_s));
  }
  return make_windows(std::move(aligned), cfg.window_width);
}

template <typename T>
int run_train_t(const CommonOpts& common, const TrainOpts& opts) {
  Config cfg = effective_config(common);
  if (opts.lr) cfg.lr = *opts.lr;
  if (opts.batch) cfg.batch_size = *opts.batch;
  if (opts.epochs_tpn) cfg.epochs_tpn = *opts.epochs_tpn;
  if (opts.epochs_tdn) cfg.epochs_tdn = *opts.epochs_tdn;
  if (opts.epochs_psn) cfg.epochs_psn = *opts.epochs_psn;
  if (opts.epochs_baseline) cfg.epochs_baseline = *opts.epochs_baseline;
  if (opts.finetune) cfg.finetune_epochs = *opts.finetune;
  if (common.seed) cfg.train_seed = *common.seed;

  const WindowedDataset ds = load_windows(cfg, opts);
  const DatasetSplit split =
      split_windows(ds, cfg.split_train, cfg.split_val, cfg.split_test,
                    cfg.split_seed, cfg.guard_gap);
  std::printf("windows: %zu (train %zu / val %zu / test %zu)\n", ds.size(),
              split.train.size(), split.validation.size(), split.test.size());

  nn::Hyperparams hp = cfg.hyperparams();
  fs::create_directories(opts.out_dir);
  const std::uint64_t model_seed = derive_seed(cfg.train_seed, "models");

  if (opts.models == "all" || opts.models == "pressim") {
    pipeline::TrainBudgets budgets;
    budgets.tpn = cfg.epochs_tpn;
    budgets.tdn = cfg.epochs_tdn;
    budgets.psn = cfg.epochs_psn;
    budgets.finetune = cfg.finetune_epochs;
    auto stack = pipeline::train_pressim_stack<T>(ds, split.train,
                                                  split.validation, hp,
                                                  budgets, model_seed);
    nn::save_checkpoint((fs::path(opts.out_dir) / "tpn.ckpt").string(),
                        stack.tpn, &stack.tpn_state);
    nn::save_checkpoint((fs::path(opts.out_dir) / "tdn.ckpt").string(),
                        stack.tdn, &stack.tdn_state);
    nn::save_checkpoint((fs::path(opts.out_dir) / "psn.ckpt").string(),
                        stack.psn, &stack.psn_state);
    write_text_file((fs::path(opts.out_dir) / "tpn_history.csv").string(),
                    pipeline::history_csv(stack.tpn_history));
    write_text_file((fs::path(opts.out_dir) / "tdn_history.csv").string(),
                    pipeline::history_csv(stack.tdn_history));
    write_text_file((fs::path(opts.out_dir) / "psn_history.csv").string(),
                    pipeline::history_csv(stack.psn_history));
    std::printf("pressim stack trained: tpn %zu, tdn %zu, psn %zu epochs\n",
                stack.tpn_history.epochs.size(),
                stack.tdn_history.epochs.size(),
                stack.psn_history.epochs.size());
  }
  if (opts.models == "all" || opts.models == "baseline") {
    auto baseline = nn::build_model<T>(nn::NetworkKind::Baseline,
                                       derive_seed(model_seed, "baseline"));
    pipeline::PoseBatchSource<T> train_src(ds, split.train);
    pipeline::PoseBatchSource<T> val_src(ds, split.validation);
    nn::Hyperparams hp_base = hp;
    hp_base.epochs = cfg.epochs_baseline;
    hp_base.seed = derive_seed(cfg.train_seed, "train-baseline");
    nn::TrainState<T> state;
    const auto history =
        nn::train(baseline, train_src, hp_base,
                  split.validation.empty() ? nullptr : &val_src, &state);
    nn::save_checkpoint((fs::path(opts.out_dir) / "baseline.ckpt").string(),
                        baseline, &state);
    write_text_file((fs::path(opts.out_dir) / "baseline_history.csv").string(),
                    pipeline::history_csv(history));
    std::printf("baseline trained: %zu epochs\n", history.epochs.size());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthOpts {
  std::string pose_path, deform_path, out;
  std::string tpn, tdn, psn, baseline;
  std::optional<double> zero_floor;
};

template <typename T>
int run_synth_t(const CommonOpts& common, const SynthOpts& opts) {
  Config cfg = effective_config(common);
  if (opts.zero_floor) cfg.zero_floor_mmhg = *opts.zero_floor;

  const PoseSequence poses = to_pose_sequence(read_sequence(opts.pose_path));
  const SequenceFile deform = read_sequence(opts.deform_path);
  if (deform.kind != SequenceKind::Deform)
    throw KindMismatch("not a deformation file: " + opts.deform_path);
  const SubjectProfile subject = cfg.subject();

  pipeline::SynthResult result;
  if (!opts.baseline.empty()) {
    auto loaded =
        nn::load_checkpoint<T>(opts.baseline, nn::NetworkKind::Baseline);
    result = pipeline::synthesize_baseline(loaded.net, poses,
                                           deform.deform_frames,
                                           deform.timestamps, subject,
                                           cfg.align_tolerance_s,
                                           cfg.batch_size, cfg.zero_floor_mmhg);
  } else {
    if (opts.tpn.empty() || opts.tdn.empty() || opts.psn.empty())
      throw InvalidSpec("synth needs --tpn, --tdn and --psn (or --baseline)");
    auto tpn = nn::load_checkpoint<T>(opts.tpn, nn::NetworkKind::TPN);
    auto tdn = nn::load_checkpoint<T>(opts.tdn, nn::NetworkKind::TDN);
    auto psn = nn::load_checkpoint<T>(opts.psn, nn::NetworkKind::PSN);
    result = pipeline::synthesize_from_streams(
        tpn.net, tdn.net, psn.net, poses, deform.deform_frames,
        deform.timestamps, subject, cfg.align_tolerance_s, cfg.batch_size,
        cfg.zero_floor_mmhg);
  }

  SequenceFile out;
  out.kind = SequenceKind::Pressure;
  out.timestamps = result.timestamps;
  out.pressure_frames = result.frames;
  write_sequence(opts.out, out);
  std::printf("synthesized %zu pressure frames to %s\n", result.frames.size(),
              opts.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// eval / report
// ---------------------------------------------------------------------------

struct EvalOpts {
  std::vector<std::string> models;  // name=path
  std::string gt_path;
  std::string out_csv, out_txt;
};

int run_eval(const CommonOpts&, const EvalOpts& opts) {
  const SequenceFile gt = read_sequence(opts.gt_path);
  if (gt.kind != SequenceKind::Pressure)
    throw KindMismatch("ground truth is not a pressure file: " + opts.gt_path);

  MetricReport rep;
  rep.dataset_id = fs::path(opts.gt_path).filename().string();
  for (const std::string& spec : opts.models) {
    const auto eq = spec.find('=');
    const std::string name = eq == std::string::npos ? "model"
                                                     : spec.substr(0, eq);
    const std::string path = eq == std::string::npos ? spec
                                                     : spec.substr(eq + 1);
    const SequenceFile pred = read_sequence(path);
    if (pred.kind != SequenceKind::Pressure)
      throw KindMismatch("prediction is not a pressure file: " + path);
    auto [p, g] = pipeline::join_by_timestamp(pred.pressure_frames,
                                              pred.timestamps,
                                              gt.pressure_frames,
                                              gt.timestamps);
    rep.rows.push_back(evaluate_model(name, p, g));
  }
  const std::string text = report_text(rep);
  std::fputs(text.c_str(), stdout);
  if (!opts.out_csv.empty()) write_text_file(opts.out_csv, report_csv(rep));
  if (!opts.out_txt.empty()) write_text_file(opts.out_txt, text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pressim: ground pressure map synthesis pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  CommonOpts common;
  app.add_option("--config", common.config_path, "configuration file");
  app.add_option("--precision", common.precision, "f32 or f64")
      ->check(CLI::IsMember({"f32", "f64"}));
  std::uint64_t seed_value = 0;
  auto* seed_flag =
      app.add_option("--seed", seed_value, "master seed override");

  GenOpts gen;
  auto* cmd_gen = app.add_subcommand("gen", "generate a synthetic pose sequence");
  cmd_gen->add_option("--out", gen.out, "output pose file")->required();
  cmd_gen->add_option("--skeleton", gen.skeleton, "coco17 or body25")
      ->check(CLI::IsMember({"coco17", "body25"}));
  std::string gen_template;
  double gen_duration = 0, gen_fps = 0, gen_noise = -1, gen_mass = 0,
         gen_height = 0;
  std::string gen_subject;
  auto* o_tmpl = cmd_gen->add_option("--template", gen_template,
                                     "stand_sway|squat_cycle|plank|bridge|"
                                     "supine|sit_to_stand");
  auto* o_dur = cmd_gen->add_option("--duration", gen_duration, "seconds");
  auto* o_fps = cmd_gen->add_option("--fps", gen_fps, "frames per second");
  auto* o_noise = cmd_gen->add_option("--noise", gen_noise,
                                      "noise amplitude, meters");
  auto* o_mass = cmd_gen->add_option("--mass", gen_mass, "subject mass, kg");
  auto* o_height =
      cmd_gen->add_option("--height", gen_height, "subject height, cm");
  auto* o_subj = cmd_gen->add_option("--subject-id", gen_subject, "subject id");

  SimulateOpts sim;
  auto* cmd_sim = app.add_subcommand(
      "simulate", "settle a pose sequence into deformation + pressure");
  cmd_sim->add_option("--pose", sim.pose_path, "input pose file")->required();
  cmd_sim->add_option("--deform-out", sim.deform_out, "output deformation file")
      ->required();
  cmd_sim->add_option("--pressure-out", sim.pressure_out,
                      "output reference pressure file")
      ->required();
  cmd_sim->add_option("--every", sim.every, "keep every Nth frame");
  cmd_sim->add_option("--pgm-dir", sim.pgm_dir,
                      "dump per-frame deformation PGMs here");
  double sim_mass = 0, sim_height = 0, sim_k = 0, sim_dmax = 0;
  auto* s_mass = cmd_sim->add_option("--mass", sim_mass, "subject mass, kg");
  auto* s_height =
      cmd_sim->add_option("--height", sim_height, "subject height, cm");
  auto* s_k = cmd_sim->add_option("--k", sim_k, "plane stiffness, N/m");
  auto* s_dmax =
      cmd_sim->add_option("--dmax", sim_dmax, "render threshold, mm");

  TrainOpts train;
  auto* cmd_train = app.add_subcommand("train", "train the model stack");
  cmd_train->add_option("--pose", train.pose_paths, "pose file (repeatable)")
      ->required();
  cmd_train
      ->add_option("--deform", train.deform_paths,
                   "deformation file (repeatable)")
      ->required();
  cmd_train
      ->add_option("--pressure", train.pressure_paths,
                   "pressure file (repeatable)")
      ->required();
  cmd_train->add_option("--out-dir", train.out_dir, "checkpoint directory")
      ->required();
  cmd_train->add_option("--models", train.models, "all|pressim|baseline")
      ->check(CLI::IsMember({"all", "pressim", "baseline"}));
  double train_lr = 0;
  int train_batch = 0, e_tpn = -1, e_tdn = -1, e_psn = -1, e_base = -1,
      e_ft = -1;
  auto* t_lr = cmd_train->add_option("--lr", train_lr, "learning rate");
  auto* t_batch = cmd_train->add_option("--batch", train_batch, "batch size");
  auto* t_etpn = cmd_train->add_option("--epochs-tpn", e_tpn, "epochs");
  auto* t_etdn = cmd_train->add_option("--epochs-tdn", e_tdn, "epochs");
  auto* t_epsn = cmd_train->add_option("--epochs-psn", e_psn, "epochs");
  auto* t_ebase =
      cmd_train->add_option("--epochs-baseline", e_base, "epochs");
  auto* t_ft = cmd_train->add_option("--finetune", e_ft,
                                     "joint fine-tune epochs after the stack");

  SynthOpts synth;
  auto* cmd_synth =
      app.add_subcommand("synth", "synthesize pressure maps from checkpoints");
  cmd_synth->add_option("--pose", synth.pose_path, "input pose file")
      ->required();
  cmd_synth->add_option("--deform", synth.deform_path, "input deformation file")
      ->required();
  cmd_synth->add_option("--out", synth.out, "output pressure file")->required();
  cmd_synth->add_option("--tpn", synth.tpn, "pose network checkpoint");
  cmd_synth->add_option("--tdn", synth.tdn, "deformation network checkpoint");
  cmd_synth->add_option("--psn", synth.psn, "fusion network checkpoint");
  cmd_synth->add_option("--baseline", synth.baseline,
                        "baseline checkpoint (instead of the stack)");
  double synth_floor = -1;
  auto* y_floor = cmd_synth->add_option("--zero-floor", synth_floor,
                                        "mmHg below which outputs snap to 0");

  EvalOpts eval_opts;
  auto* cmd_eval = app.add_subcommand("eval", "score one synthesized file");
  std::string eval_pred, eval_name = "model";
  cmd_eval->add_option("--pred", eval_pred, "synthesized pressure file")
      ->required();
  cmd_eval->add_option("--gt", eval_opts.gt_path, "ground-truth pressure file")
      ->required();
  cmd_eval->add_option("--name", eval_name, "model name in the report");
  cmd_eval->add_option("--out-csv", eval_opts.out_csv, "CSV output path");

  EvalOpts report_opts;
  auto* cmd_report =
      app.add_subcommand("report", "comparative table over several models");
  cmd_report
      ->add_option("--model", report_opts.models,
                   "name=path of a synthesized pressure file (repeatable)")
      ->required();
  cmd_report
      ->add_option("--gt", report_opts.gt_path, "ground-truth pressure file")
      ->required();
  cmd_report->add_option("--out-csv", report_opts.out_csv, "CSV output path");
  cmd_report->add_option("--out-txt", report_opts.out_txt,
                         "plain-text output path");

  auto* cmd_selftest =
      app.add_subcommand("selftest", "run built-in consistency checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (seed_flag->count()) common.seed = seed_value;
    if (cmd_gen->parsed()) {
      if (o_tmpl->count()) gen.tmpl = gen_template;
      if (o_dur->count()) gen.duration = gen_duration;
      if (o_fps->count()) gen.fps = gen_fps;
      if (o_noise->count()) gen.noise = gen_noise;
      if (o_mass->count()) gen.mass = gen_mass;
      if (o_height->count()) gen.height = gen_height;
      if (o_subj->count()) gen.subject_id = gen_subject;
      return run_gen(common, gen);
    }
    if (cmd_sim->parsed()) {
      if (s_mass->count()) sim.mass = sim_mass;
      if (s_height->count()) sim.height = sim_height;
      if (s_k->count()) sim.k = sim_k;
      if (s_dmax->count()) sim.d_max = sim_dmax;
      return run_simulate(common, sim);
    }
    if (cmd_train->parsed()) {
      if (t_lr->count()) train.lr = train_lr;
      if (t_batch->count()) train.batch = train_batch;
      if (t_etpn->count()) train.epochs_tpn = e_tpn;
      if (t_etdn->count()) train.epochs_tdn = e_tdn;
      if (t_epsn->count()) train.epochs_psn = e_psn;
      if (t_ebase->count()) train.epochs_baseline = e_base;
      if (t_ft->count()) train.finetune = e_ft;
      return common.precision == "f64" ? run_train_t<double>(common, train)
                                       : run_train_t<float>(common, train);
    }
    if (cmd_synth->parsed()) {
      if (y_floor->count()) synth.zero_floor = synth_floor;
      return common.precision == "f64" ? run_synth_t<double>(common, synth)
                                       : run_synth_t<float>(common, synth);
    }
    if (cmd_eval->parsed()) {
      eval_opts.models = {eval_name + "=" + eval_pred};
      return run_eval(common, eval_opts);
    }
    if (cmd_report->parsed()) return run_eval(common, report_opts);
    if (cmd_selftest->parsed()) {
      const int failures = selftest::run_all();
      if (failures) {
        std::fprintf(stderr, "selftest: %d check(s) failed\n", failures);
        return 3;
      }
      std::printf("selftest: all checks passed\n");
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 3;
  }
  return 1;
}
