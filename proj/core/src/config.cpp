#include "tmask/config.hpp"

#include <json.hpp>

#include <set>
#include <stdexcept>

#include "tmask/io.hpp"

namespace tmask {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.contains(k)) throw std::invalid_argument(where + ": unknown key '" + k + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json to_json(const SceneConfig& s) {
  return {{"height", s.height},         {"width", s.width},
          {"min_instances", s.min_instances}, {"max_instances", s.max_instances},
          {"min_size", s.min_size},     {"max_size", s.max_size},
          {"min_aspect", s.min_aspect}, {"max_aspect", s.max_aspect},
          {"noise_std", s.noise_std},   {"supersample", s.supersample},
          {"min_visible_pixels", s.min_visible_pixels}};
}

void from_json_scene(const json& j, SceneConfig& s) {
  check_keys(j, {"height", "width", "min_instances", "max_instances", "min_size", "max_size",
                 "min_aspect", "max_aspect", "noise_std", "supersample", "min_visible_pixels"},
             "data.scene");
  read(j, "height", s.height);
  read(j, "width", s.width);
  read(j, "min_instances", s.min_instances);
  read(j, "max_instances", s.max_instances);
  read(j, "min_size", s.min_size);
  read(j, "max_size", s.max_size);
  read(j, "min_aspect", s.min_aspect);
  read(j, "max_aspect", s.max_aspect);
  read(j, "noise_std", s.noise_std);
  read(j, "supersample", s.supersample);
  read(j, "min_visible_pixels", s.min_visible_pixels);
}

const char* to_string(FocalVariant v) { return v == FocalVariant::Star ? "star" : "standard"; }

FocalVariant parse_focal_variant(const std::string& s) {
  if (s == "standard") return FocalVariant::Standard;
  if (s == "star") return FocalVariant::Star;
  throw std::invalid_argument("unknown focal variant: " + s);
}

const char* to_string(CentralityUnit u) { return u == CentralityUnit::VU ? "vu" : "coarser"; }

CentralityUnit parse_centrality(const std::string& s) {
  if (s == "vu") return CentralityUnit::VU;
  if (s == "coarser") return CentralityUnit::Coarser;
  throw std::invalid_argument("unknown centrality unit: " + s);
}

json to_json(const ExperimentConfig& c) {
  const ModelConfig& m = c.model;
  const TrainConfig& t = c.train;
  const EvalConfig& e = c.eval;
  json j;
  j["name"] = c.name;
  j["model"] = {{"head", to_string(m.head.kind)},
                {"lambda", m.head.lambda},
                {"interpolation", to_string(m.head.interpolation)},
                {"window_sizes", m.head.window_sizes},
                {"fill", m.head.fill},
                {"channels", m.channels},
                {"levels", m.levels},
                {"mask_depth", m.mask_depth},
                {"cls_depth", m.cls_depth},
                {"box_depth", m.box_depth},
                {"num_classes", m.num_classes},
                {"use_box", m.use_box}};
  j["train"] = {{"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"lr", t.lr},
                {"momentum", t.momentum},
                {"lr_drop_epoch", t.lr_drop_epoch},
                {"clip_norm", t.clip_norm},
                {"loss_weights", {{"mask", t.weights.mask}, {"cls", t.weights.cls}, {"box", t.weights.box}}},
                {"focal", {{"gamma", t.focal.gamma}, {"alpha", t.focal.alpha},
                           {"variant", to_string(t.focal.variant)}, {"beta", t.focal.beta}}},
                {"foreground_weight", t.mask.foreground_weight},
                {"centrality", to_string(t.assignment.centrality)},
                {"fallback", t.assignment.fallback},
                {"augment", t.augment},
                {"seed", t.seed}};
  j["eval"] = {{"score_thresh", e.decode.score_thresh},
               {"topk", e.decode.topk},
               {"nms_iou", e.nms_iou},
               {"mask_bb_nms", e.mask_bb_nms},
               {"mask_thresh", e.mask_thresh},
               {"max_detections", e.max_detections}};
  j["data"] = {{"scene", to_json(c.data.scene)},
               {"train_images", c.data.train_images},
               {"val_images", c.data.val_images},
               {"test_images", c.data.test_images},
               {"seed", c.data.seed}};
  return j;
}

ExperimentConfig from_json(const json& j) {
  ExperimentConfig c;
  check_keys(j, {"name", "model", "train", "eval", "data"}, "config");
  read(j, "name", c.name);
  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, {"head", "lambda", "interpolation", "window_sizes", "fill", "channels", "levels",
                   "mask_depth", "cls_depth", "box_depth", "num_classes", "use_box"},
               "model");
    if (m.contains("head")) c.model.head.kind = parse_head_kind(m.at("head").get<std::string>());
    read(m, "lambda", c.model.head.lambda);
    if (m.contains("interpolation")) {
      c.model.head.interpolation = parse_interpolation(m.at("interpolation").get<std::string>());
    }
    read(m, "window_sizes", c.model.head.window_sizes);
    read(m, "fill", c.model.head.fill);
    read(m, "channels", c.model.channels);
    read(m, "levels", c.model.levels);
    read(m, "mask_depth", c.model.mask_depth);
    read(m, "cls_depth", c.model.cls_depth);
    read(m, "box_depth", c.model.box_depth);
    read(m, "num_classes", c.model.num_classes);
    read(m, "use_box", c.model.use_box);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, {"epochs", "batch_size", "lr", "momentum", "lr_drop_epoch", "clip_norm",
                   "loss_weights", "focal", "foreground_weight", "centrality", "fallback", "augment",
                   "seed"},
               "train");
    read(t, "epochs", c.train.epochs);
    read(t, "batch_size", c.train.batch_size);
    read(t, "lr", c.train.lr);
    read(t, "momentum", c.train.momentum);
    read(t, "lr_drop_epoch", c.train.lr_drop_epoch);
    read(t, "clip_norm", c.train.clip_norm);
    if (t.contains("loss_weights")) {
      const json& w = t.at("loss_weights");
      check_keys(w, {"mask", "cls", "box"}, "train.loss_weights");
      read(w, "mask", c.train.weights.mask);
      read(w, "cls", c.train.weights.cls);
      read(w, "box", c.train.weights.box);
    }
    if (t.contains("focal")) {
      const json& f = t.at("focal");
      check_keys(f, {"gamma", "alpha", "variant", "beta"}, "train.focal");
      read(f, "gamma", c.train.focal.gamma);
      read(f, "alpha", c.train.focal.alpha);
      read(f, "beta", c.train.focal.beta);
      if (f.contains("variant")) c.train.focal.variant = parse_focal_variant(f.at("variant").get<std::string>());
    }
    read(t, "foreground_weight", c.train.mask.foreground_weight);
    if (t.contains("centrality")) {
      c.train.assignment.centrality = parse_centrality(t.at("centrality").get<std::string>());
    }
    read(t, "fallback", c.train.assignment.fallback);
    read(t, "augment", c.train.augment);
    read(t, "seed", c.train.seed);
  }
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    check_keys(e, {"score_thresh", "topk", "nms_iou", "mask_bb_nms", "mask_thresh", "max_detections"},
               "eval");
    read(e, "score_thresh", c.eval.decode.score_thresh);
    read(e, "topk", c.eval.decode.topk);
    read(e, "nms_iou", c.eval.nms_iou);
    read(e, "mask_bb_nms", c.eval.mask_bb_nms);
    read(e, "mask_thresh", c.eval.mask_thresh);
    read(e, "max_detections", c.eval.max_detections);
  }
  if (j.contains("data")) {
    const json& d = j.at("data");
    check_keys(d, {"scene", "train_images", "val_images", "test_images", "seed"}, "data");
    if (d.contains("scene")) from_json_scene(d.at("scene"), c.data.scene);
    read(d, "train_images", c.data.train_images);
    read(d, "val_images", c.data.val_images);
    read(d, "test_images", c.data.test_images);
    read(d, "seed", c.data.seed);
  }
  c.model.validate();
  return c;
}

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

ExperimentConfig parse_experiment(const std::string& text) {
  try {
    return from_json(parse(text));
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad config: ") + e.what());
  }
}

std::string experiment_to_json(const ExperimentConfig& cfg, int indent) {
  return to_json(cfg).dump(indent);
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  return parse_experiment(read_text(path));
}

AblationGrid parse_grid(const std::string& text) {
  const json j = parse(text);
  try {
    check_keys(j, {"base", "seeds", "variants"}, "grid");
    const json base = j.contains("base") ? j.at("base") : json::object();
    AblationGrid g;
    g.seeds = j.contains("seeds") ? j.at("seeds").get<std::vector<std::uint64_t>>()
                                  : std::vector<std::uint64_t>{1};
    if (!j.contains("variants")) {
      g.configs.push_back(from_json(base));
      return g;
    }
    for (const json& v : j.at("variants")) {
      json merged = base;
      merged.merge_patch(v);
      g.configs.push_back(from_json(merged));
    }
    return g;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad grid: ") + e.what());
  }
}

AblationGrid load_grid(const std::filesystem::path& path) { return parse_grid(read_text(path)); }

}  // namespace tmask
