#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "tmask/inference.hpp"
#include "tmask/losses.hpp"
#include "tmask/model.hpp"
#include "tmask/synth.hpp"

namespace tmask {

struct TrainConfig {
  int epochs = 20;
  int batch_size = 4;
  double lr = 0.01;
  double momentum = 0.9;
  /// Epoch at which the learning rate drops tenfold; negative disables it.
  int lr_drop_epoch = -1;
  /// Global gradient-norm clip; zero disables it.
  double clip_norm = 0.0;
  LossWeights weights;
  FocalOptions focal;
  MaskLossOptions mask;
  AssignmentRule assignment{CentralityUnit::Coarser, true};
  /// Train each image under a random grid symmetry per epoch (mirrors,
  /// plus transposes for square images).
  bool augment = false;
  std::uint64_t seed = 1;
};

struct EvalConfig {
  DecodeOptions decode;
  double nms_iou = 0.5;
  /// Regressed boxes when the model has a box head, mask boxes otherwise.
  bool mask_bb_nms = false;
  double mask_thresh = 0.5;
  int max_detections = 100;
};

struct DataConfig {
  SceneConfig scene;
  int train_images = 128;
  int val_images = 32;
  int test_images = 64;
  std::uint64_t seed = 7;
};

struct ExperimentConfig {
  std::string name = "default";
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  DataConfig data;
};

struct Splits {
  std::vector<Scene> train;
  std::vector<Scene> val;
  std::vector<Scene> test;
};

Splits make_splits(const DataConfig& cfg);

struct TrainResult {
  std::vector<double> epoch_loss;
  double seconds = 0.0;
};

using EpochCallback = std::function<void(int epoch, double loss)>;

/// Trains `model` in place. Deterministic for a given model seed, data and
/// config.
TrainResult train(Detector& model, const std::vector<Scene>& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Decoded, pasted and suppressed detections for one image.
std::vector<Detection> predict(const Detector& model, const Scene& scene, const EvalConfig& cfg);
std::vector<std::vector<Detection>> predict_all(const Detector& model,
                                                const std::vector<Scene>& scenes,
                                                const EvalConfig& cfg);

std::vector<std::vector<GroundTruthInstance>> ground_truth(const std::vector<Scene>& scenes);

/// AP at mask IoU 0.5 and 0.75.
ApResult evaluate(const Detector& model, const std::vector<Scene>& scenes, const EvalConfig& cfg);

struct ExperimentResult {
  std::string name;
  std::uint64_t seed = 0;
  double ap50 = 0.0;
  double ap75 = 0.0;
  double final_loss = 0.0;
  double train_seconds = 0.0;
  std::vector<double> epoch_loss;
};

/// Trains and evaluates one config with the model and training seeds set
/// to `seed`. Data come from cfg.data and do not depend on `seed`.
ExperimentResult run_experiment(const ExperimentConfig& cfg, std::uint64_t seed,
                                const Splits& splits);

/// Keeps freed training buffers in the heap instead of returning them to
/// the OS after every step. Training allocates and frees the same large
/// buffers each step; without this the page-fault cost roughly doubles the
/// step time under glibc. No-op on other C libraries.
void retain_heap_memory();

std::string ablation_csv_header();
std::string ablation_csv_row(const ExperimentConfig& cfg, const ExperimentResult& r);

/// Runs every config for every seed on one shared dataset per distinct data
/// config, writing one CSV row per run as it completes.
std::vector<ExperimentResult> run_ablation(const std::vector<ExperimentConfig>& grid,
                                           const std::vector<std::uint64_t>& seeds,
                                           std::ostream* csv = nullptr,
                                           std::ostream* log = nullptr);

}  // namespace tmask
