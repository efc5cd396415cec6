#include "tmask/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace tmask {

void retain_heap_memory() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

Splits make_splits(const DataConfig& cfg) {
  SplitMix64 rng(cfg.seed);
  const std::uint64_t s_train = rng.next();
  const std::uint64_t s_val = rng.next();
  const std::uint64_t s_test = rng.next();
  return {generate_dataset(cfg.scene, s_train, cfg.train_images),
          generate_dataset(cfg.scene, s_val, cfg.val_images),
          generate_dataset(cfg.scene, s_test, cfg.test_images)};
}

namespace {

void scale(std::vector<FeatureMap>& maps, double w) {
  for (auto& m : maps) {
    for (double& v : m.data) v *= w;
  }
}

void scale(std::vector<StructuredTensor>& ts, double w) {
  for (auto& t : ts) {
    for (double& v : t.data()) v *= w;
  }
}

double grad_norm(const std::vector<nn::Param*>& params) {
  double s = 0.0;
  for (const nn::Param* p : params) {
    for (double g : p->grad) s += g * g;
  }
  return std::sqrt(s);
}

}  // namespace

TrainResult train(Detector& model, const std::vector<Scene>& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  if (cfg.batch_size < 1) throw PreconditionError("batch_size must be positive");
  if (cfg.epochs < 0) throw PreconditionError("epochs must be non-negative");
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult result;
  if (data.empty()) return result;

  const int h = data.front().image.height;
  const int w = data.front().image.width;
  const std::vector<WindowSpec> windows = enumerate_windows(model.level_grids(h, w));
  std::vector<std::vector<Assignment>> assignments;
  assignments.reserve(data.size());
  for (const Scene& s : data) {
    if (s.image.height != h || s.image.width != w) throw ShapeError("training images differ in size");
    assignments.push_back(assign(windows, s.instances, cfg.assignment));
  }
  const int symmetries = cfg.augment ? (h == w ? 8 : 4) : 1;
  const bool use_box = model.config().use_box;
  const int num_classes = model.config().num_classes;

  std::vector<nn::Param*> params = model.params();
  nn::zero_grads(params);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(cfg.seed ^ 0x5eedULL);
  Detector::Cache cache;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.next() % i]);
    }
    const double lr = cfg.lr_drop_epoch >= 0 && epoch >= cfg.lr_drop_epoch ? 0.1 * cfg.lr : cfg.lr;
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      // Augmented views are built per batch; the identity view reuses the
      // precomputed labels.
      std::vector<Scene> views;
      std::vector<std::vector<Assignment>> view_asg;
      std::vector<const Scene*> scenes;
      std::vector<const std::vector<Assignment>*> labels;
      views.reserve(end - start);
      view_asg.reserve(end - start);
      for (std::size_t j = start; j < end; ++j) {
        const int k = symmetries > 1 ? static_cast<int>(rng.next() % symmetries) : 0;
        if (k == 0) {
          scenes.push_back(&data[order[j]]);
          labels.push_back(&assignments[order[j]]);
          continue;
        }
        views.push_back(dihedral(data[order[j]], k));
        view_asg.push_back(assign(windows, views.back().instances, cfg.assignment));
        scenes.push_back(&views.back());
        labels.push_back(&view_asg.back());
      }
      std::size_t pos = 0;
      for (const auto* a : labels) pos += count_positives(*a);
      const double npos = static_cast<double>(pos);
      double batch_loss = 0.0;
      for (std::size_t j = 0; j < scenes.size(); ++j) {
        const auto& asg = *labels[j];
        Predictions p = model.forward(scenes[j]->image, &cache);
        PredictionGrads g;
        MaskLossResult ml = mask_loss(p.masks, asg, cfg.mask, npos);
        MapLossResult cl = focal_cls_loss(p.cls, asg, num_classes, cfg.focal, std::max(1.0, npos));
        double box = 0.0;
        if (use_box && cfg.weights.box != 0.0) {
          MapLossResult bl = box_l1_loss(p.box, asg, npos);
          box = bl.loss;
          scale(bl.grad, cfg.weights.box);
          g.box = std::move(bl.grad);
        }
        batch_loss += total_loss(ml.loss, cl.loss, box, cfg.weights);
        scale(ml.grad, cfg.weights.mask);
        scale(cl.grad, cfg.weights.cls);
        g.masks = std::move(ml.grad);
        g.cls = std::move(cl.grad);
        model.backward(cache, g);
      }
      if (cfg.clip_norm > 0.0) {
        const double n = grad_norm(params);
        if (n > cfg.clip_norm) {
          const double f = cfg.clip_norm / n;
          for (nn::Param* q : params) {
            for (double& v : q->grad) v *= f;
          }
        }
      }
      nn::sgd_step(params, lr, cfg.momentum);
      nn::zero_grads(params);
      epoch_loss += batch_loss;
      ++batches;
    }
    epoch_loss /= std::max(1, batches);
    if (!std::isfinite(epoch_loss)) throw std::runtime_error("training diverged");
    result.epoch_loss.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

std::vector<Detection> predict(const Detector& model, const Scene& scene, const EvalConfig& cfg) {
  const int h = scene.image.height;
  const int w = scene.image.width;
  const std::vector<WindowSpec> windows = enumerate_windows(model.level_grids(h, w));
  const Predictions p = model.forward(scene.image);
  std::vector<Detection> dets =
      decode(windows, p.cls, p.masks, p.box, model.config().num_classes, cfg.decode);
  const bool mask_bb = cfg.mask_bb_nms || !model.config().use_box;
  for (Detection& d : dets) {
    d.binary_mask = paste_mask(d, h, w, cfg.mask_thresh);
    if (!model.config().use_box) d.box = tight_box(d.binary_mask);
  }
  dets = nms(std::move(dets), cfg.nms_iou, mask_bb ? NmsMode::MaskBB : NmsMode::RegressedBox);
  if (cfg.max_detections >= 0 && dets.size() > static_cast<std::size_t>(cfg.max_detections)) {
    dets.resize(cfg.max_detections);
  }
  return dets;
}

std::vector<std::vector<Detection>> predict_all(const Detector& model,
                                                const std::vector<Scene>& scenes,
                                                const EvalConfig& cfg) {
  std::vector<std::vector<Detection>> out;
  out.reserve(scenes.size());
  for (const Scene& s : scenes) out.push_back(predict(model, s, cfg));
  return out;
}

std::vector<std::vector<GroundTruthInstance>> ground_truth(const std::vector<Scene>& scenes) {
  std::vector<std::vector<GroundTruthInstance>> out;
  out.reserve(scenes.size());
  for (const Scene& s : scenes) out.push_back(s.instances);
  return out;
}

ApResult evaluate(const Detector& model, const std::vector<Scene>& scenes, const EvalConfig& cfg) {
  const auto dets = predict_all(model, scenes, cfg);
  const auto gts = ground_truth(scenes);
  const double thresholds[] = {0.5, 0.75};
  return eval_ap(dets, gts, thresholds);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::uint64_t seed,
                                const Splits& splits) {
  Detector model(cfg.model, seed);
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  const TrainResult tr = train(model, splits.train, tc);
  const ApResult ap = evaluate(model, splits.test, cfg.eval);
  ExperimentResult r;
  r.name = cfg.name;
  r.seed = seed;
  r.ap50 = ap.ap.at(0);
  r.ap75 = ap.ap.at(1);
  r.final_loss = tr.epoch_loss.empty() ? 0.0 : tr.epoch_loss.back();
  r.train_seconds = tr.seconds;
  r.epoch_loss = tr.epoch_loss;
  return r;
}

std::string ablation_csv_header() {
  return "name,head,lambda,interpolation,window_sizes,use_box,seed,ap50,ap75,final_loss,train_seconds";
}

std::string ablation_csv_row(const ExperimentConfig& cfg, const ExperimentResult& r) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << r.name << ',' << to_string(cfg.model.head.kind) << ',' << cfg.model.head.lambda << ','
     << to_string(cfg.model.head.interpolation) << ',';
  for (std::size_t i = 0; i < cfg.model.head.window_sizes.size(); ++i) {
    os << (i ? "x" : "") << cfg.model.head.window_sizes[i];
  }
  os << ',' << (cfg.model.use_box ? 1 : 0) << ',' << r.seed << ',' << r.ap50 << ',' << r.ap75
     << ',' << r.final_loss << ',';
  os.precision(2);
  os << r.train_seconds;
  return os.str();
}

namespace {

std::string data_key(const DataConfig& d) {
  std::ostringstream os;
  os.precision(17);
  const SceneConfig& s = d.scene;
  os << d.seed << '/' << d.train_images << '/' << d.val_images << '/' << d.test_images << '/'
     << s.height << '/' << s.width << '/' << s.min_instances << '/' << s.max_instances << '/'
     << s.min_size << '/' << s.max_size << '/' << s.min_aspect << '/' << s.max_aspect << '/'
     << s.noise_std << '/' << s.supersample << '/' << s.min_visible_pixels;
  return os.str();
}

}  // namespace

std::vector<ExperimentResult> run_ablation(const std::vector<ExperimentConfig>& grid,
                                           const std::vector<std::uint64_t>& seeds,
                                           std::ostream* csv, std::ostream* log) {
  std::map<std::string, Splits> data;
  std::vector<ExperimentResult> out;
  if (csv) *csv << ablation_csv_header() << '\n' << std::flush;
  for (const ExperimentConfig& cfg : grid) {
    const std::string key = data_key(cfg.data);
    auto it = data.find(key);
    if (it == data.end()) it = data.emplace(key, make_splits(cfg.data)).first;
    for (std::uint64_t seed : seeds) {
      ExperimentResult r = run_experiment(cfg, seed, it->second);
      if (csv) *csv << ablation_csv_row(cfg, r) << '\n' << std::flush;
      if (log) {
        *log << cfg.name << " seed " << seed << ": AP50 " << r.ap50 << " AP75 " << r.ap75
             << " (" << r.train_seconds << " s)\n"
             << std::flush;
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace tmask
