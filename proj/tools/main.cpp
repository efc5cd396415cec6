#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <tmask/config.hpp>
#include <tmask/harness.hpp>
#include <tmask/io.hpp>
#include <tmask/tensor_io.hpp>
#include <tmask/transforms.hpp>

#include "check.hpp"

namespace fs = std::filesystem;
using namespace tmask;

namespace {

StructuredTensor apply_op(const std::string& op, const StructuredTensor& in, int lambda,
                          const std::string& interp, int window) {
  const TransformConfig cfg{lambda, 0.0, parse_interpolation(interp)};
  if (op == "align2nat") return align2nat(in);
  if (op == "nat2align") return nat2align(in);
  if (op == "up_bilinear_vu") return up_bilinear_vu(in, lambda, cfg.interpolation);
  if (op == "up_align2nat") return up_align2nat(in, cfg);
  if (op == "subsample_hw") return subsample_hw(in, lambda);
  if (op == "swap_align2nat") return swap_align2nat(in, cfg);
  if (op == "instancefcn_decode") return instancefcn_decode(in, window, window);
  throw CLI::ValidationError("--op", "unknown op " + op);
}

Detector load_model(const ExperimentConfig& cfg, const fs::path& checkpoint) {
  Detector model(cfg.model, cfg.train.seed);
  auto params = model.params();
  nn::load_checkpoint(checkpoint, params);
  return model;
}

void print_ap(const ApResult& ap) {
  std::cout << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < ap.thresholds.size(); ++i) {
    std::cout << "AP@" << std::setprecision(2) << ap.thresholds[i] << " = " << std::setprecision(4)
              << ap.ap[i] << '\n';
  }
  for (const auto& [cat, v] : ap.per_category) {
    std::cout << "  " << to_string(static_cast<ShapeClass>(cat)) << ':';
    for (double x : v) std::cout << ' ' << x;
    std::cout << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  tmask::retain_heap_memory();
  CLI::App app{"Structured 4D mask tensors: transforms, toy training and evaluation"};
  app.require_subcommand(1);

  // check ---------------------------------------------------------------
  auto* check = app.add_subcommand("check", "Oracle checks");
  check->require_subcommand(1);
  auto* check_tr = check->add_subcommand("transforms", "Run every transform against its oracle");
  std::uint64_t check_seed = 1;
  int check_trials = 200;
  check_tr->add_option("--seed", check_seed, "Random seed");
  check_tr->add_option("--trials", check_trials, "Random tensors per op")->check(CLI::PositiveNumber);

  auto* check_fx = check->add_subcommand("fixture", "Apply an op to a tensor dump and compare");
  std::string fx_op, fx_in, fx_expected, fx_write, fx_interp = "bilinear";
  int fx_lambda = 1, fx_window = 1;
  check_fx->add_option("--op", fx_op, "Transform name")->required();
  check_fx->add_option("--input", fx_in, "Input tensor dump")->required()->check(CLI::ExistingFile);
  check_fx->add_option("--expected", fx_expected, "Expected output dump")->check(CLI::ExistingFile);
  check_fx->add_option("--write", fx_write, "Write the op output to this path");
  check_fx->add_option("--lambda", fx_lambda, "Upscaling / subsampling factor");
  check_fx->add_option("--interpolation", fx_interp, "bilinear or nearest");
  check_fx->add_option("--window", fx_window, "Output window size for instancefcn_decode");

  // bench ---------------------------------------------------------------
  auto* bench = app.add_subcommand("bench", "Timing");
  bench->require_subcommand(1);
  auto* bench_swap = bench->add_subcommand("swap", "Fused vs composed swap_align2nat, CSV");
  std::vector<int> lambdas{2, 4, 8};
  int bench_repeats = 3, bench_v = 15, bench_h = 64;
  bool skip_naive = false;
  bench_swap->add_option("--lambdas", lambdas, "Factors to time")->delimiter(',');
  bench_swap->add_option("--repeats", bench_repeats, "Best-of repeats")->check(CLI::PositiveNumber);
  bench_swap->add_option("--vu", bench_v, "Input V = U");
  bench_swap->add_option("--hw", bench_h, "Input H = W");
  bench_swap->add_flag("--skip-naive", skip_naive, "Time only the fused kernel");

  // train / eval / ablate / infer / calibrate ----------------------------
  std::string config_path, checkpoint_path;
  auto* train_cmd = app.add_subcommand("train", "Train a detector on synthetic scenes");
  std::string loss_csv;
  train_cmd->add_option("--config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", checkpoint_path, "Checkpoint path")->required();
  train_cmd->add_option("--loss-csv", loss_csv, "Write the per-epoch loss curve");

  auto* eval_cmd = app.add_subcommand("eval", "Synthetic mask AP on the test split");
  eval_cmd->add_option("--config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint")->required()->check(CLI::ExistingFile);

  auto* ablate_cmd = app.add_subcommand("ablate", "Train and evaluate a grid of configs");
  std::string grid_path, ablate_out;
  ablate_cmd->add_option("--grid", grid_path, "Grid JSON")->required()->check(CLI::ExistingFile);
  ablate_cmd->add_option("--out", ablate_out, "CSV output (stdout when omitted)");

  auto* infer_cmd = app.add_subcommand("infer", "Detect instances in one synthetic scene");
  std::string render_path, json_path, calib_path, scene_json_path;
  std::uint64_t scene_seed = 0;
  double display_thresh = Calibration::kDisplayThreshold;
  infer_cmd->add_option("--config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--scene-seed", scene_seed, "Seed of the generated scene");
  infer_cmd->add_option("--render", render_path, "PGM render of pasted masks");
  infer_cmd->add_option("--json", json_path, "Detections JSON");
  infer_cmd->add_option("--scene-json", scene_json_path, "Ground-truth scene JSON");
  infer_cmd->add_option("--calibration", calib_path, "Calibration JSON")->check(CLI::ExistingFile);
  infer_cmd->add_option("--display-threshold", display_thresh, "Minimum (calibrated) score rendered");

  auto* calib_cmd = app.add_subcommand("calibrate", "Fit per-category score calibration on the val split");
  std::string calib_out;
  calib_cmd->add_option("--config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);
  calib_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint")->required()->check(CLI::ExistingFile);
  calib_cmd->add_option("--out", calib_out, "Calibration JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (check_tr->parsed()) {
      const auto rows = cli::check_transforms(check_seed, check_trials);
      cli::print_check_table(std::cout, rows);
      for (const auto& r : rows) {
        if (r.failures) return 1;
      }
      return 0;
    }
    if (check_fx->parsed()) {
      const StructuredTensor out = apply_op(fx_op, load_tensor(fx_in), fx_lambda, fx_interp, fx_window);
      if (!fx_write.empty()) save_tensor(fx_write, out);
      if (!fx_expected.empty()) {
        const StructuredTensor want = load_tensor(fx_expected);
        const bool same = out.shape() == want.shape() && out.repr() == want.repr() &&
                          out.units() == want.units() &&
                          std::equal(out.data().begin(), out.data().end(), want.data().begin());
        std::cout << fx_op << ": " << (same ? "PASS" : "FAIL") << '\n';
        return same ? 0 : 1;
      }
      std::cout << fx_op << ": output " << to_string(out.shape()) << '\n';
      return 0;
    }
    if (bench_swap->parsed()) {
      std::cout << "lambda,elements,fused_ns,naive_ns\n";
      for (int l : lambdas) {
        const auto t = cli::time_swap(bench_v, bench_h, l, bench_repeats, 1, !skip_naive);
        std::cout << t.lambda << ',' << t.elements << ',' << std::fixed << std::setprecision(0)
                  << t.fused_ns << ',' << t.naive_ns << '\n';
      }
      return 0;
    }
    if (train_cmd->parsed()) {
      const ExperimentConfig cfg = load_experiment(config_path);
      const Splits splits = make_splits(cfg.data);
      Detector model(cfg.model, cfg.train.seed);
      const TrainResult r = train(model, splits.train, cfg.train, [](int e, double loss) {
        std::cerr << "epoch " << e << " loss " << loss << '\n';
      });
      auto params = model.params();
      nn::save_checkpoint(checkpoint_path, params, cfg.train.seed);
      if (!loss_csv.empty()) {
        std::ofstream os(loss_csv);
        os << "epoch,loss\n";
        for (std::size_t i = 0; i < r.epoch_loss.size(); ++i) os << i << ',' << r.epoch_loss[i] << '\n';
      }
      std::cout << "trained " << cfg.train.epochs << " epochs in " << r.seconds << " s\n";
      return 0;
    }
    if (eval_cmd->parsed()) {
      const ExperimentConfig cfg = load_experiment(config_path);
      const Detector model = load_model(cfg, checkpoint_path);
      print_ap(evaluate(model, make_splits(cfg.data).test, cfg.eval));
      return 0;
    }
    if (ablate_cmd->parsed()) {
      const AblationGrid grid = load_grid(grid_path);
      if (ablate_out.empty()) {
        run_ablation(grid.configs, grid.seeds, &std::cout, &std::cerr);
      } else {
        std::ofstream os(ablate_out);
        if (!os) throw std::runtime_error("cannot open " + ablate_out);
        run_ablation(grid.configs, grid.seeds, &os, &std::cerr);
      }
      return 0;
    }
    if (infer_cmd->parsed()) {
      const ExperimentConfig cfg = load_experiment(config_path);
      const Detector model = load_model(cfg, checkpoint_path);
      const Scene scene = generate_scene(cfg.data.scene, scene_seed);
      std::vector<Detection> dets = predict(model, scene, cfg.eval);
      if (!calib_path.empty()) calibration_from_json(read_text(calib_path)).apply(dets);
      if (!json_path.empty()) {
        write_text(json_path, detections_to_json(dets, scene.image.height, scene.image.width));
      }
      if (!scene_json_path.empty()) write_text(scene_json_path, scene_to_json(scene));
      if (!render_path.empty()) {
        write_pgm(render_path, scene.image.height, scene.image.width,
                  render_detections(scene, dets, display_thresh));
      }
      for (const Detection& d : dets) {
        const double s = d.calibrated >= 0.0 ? d.calibrated : d.score;
        if (s < display_thresh) continue;
        std::cout << to_string(static_cast<ShapeClass>(d.category)) << " score " << d.score;
        if (d.calibrated >= 0.0) std::cout << " calibrated " << d.calibrated;
        std::cout << " box [" << d.box.y0 << ", " << d.box.x0 << ", " << d.box.y1 << ", "
                  << d.box.x1 << "]\n";
      }
      return 0;
    }
    if (calib_cmd->parsed()) {
      const ExperimentConfig cfg = load_experiment(config_path);
      const Detector model = load_model(cfg, checkpoint_path);
      const Splits splits = make_splits(cfg.data);
      const auto dets = predict_all(model, splits.val, cfg.eval);
      write_text(calib_out, calibration_to_json(calibrate(dets, ground_truth(splits.val))));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
