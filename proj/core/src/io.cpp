#include "tmask/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tmask/rle.hpp"

namespace tmask {

using nlohmann::json;

namespace {

json rle_json(const BinaryMask& m) {
  const Rle r = rle_encode(m);
  return {{"size", {r.height, r.width}}, {"counts", r.counts}};
}

json box_json(const Box& b) { return {b.y0, b.x0, b.y1, b.x1}; }

}  // namespace

std::string scene_to_json(const Scene& scene) {
  json j;
  j["height"] = scene.image.height;
  j["width"] = scene.image.width;
  j["instances"] = json::array();
  for (const auto& g : scene.instances) {
    j["instances"].push_back(
        {{"category", g.category}, {"bbox", box_json(g.bbox)}, {"mask", rle_json(g.mask)}});
  }
  return j.dump();
}

std::vector<GroundTruthInstance> instances_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    std::vector<GroundTruthInstance> out;
    for (const json& inst : j.at("instances")) {
      Rle r;
      const auto size = inst.at("mask").at("size").get<std::vector<int>>();
      if (size.size() != 2) throw std::invalid_argument("mask size needs two entries");
      r.height = size[0];
      r.width = size[1];
      r.counts = inst.at("mask").at("counts").get<std::vector<std::uint32_t>>();
      out.push_back(GroundTruthInstance::from_mask(rle_decode(r), inst.at("category").get<int>()));
    }
    return out;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad scene JSON: ") + e.what());
  }
}

std::string detections_to_json(const std::vector<Detection>& dets, int height, int width) {
  json j;
  j["height"] = height;
  j["width"] = width;
  j["detections"] = json::array();
  for (const Detection& d : dets) {
    j["detections"].push_back({{"category", d.category},
                               {"score", d.score},
                               {"calibrated", d.calibrated},
                               {"box", box_json(d.box)},
                               {"level", d.window.level},
                               {"y", d.window.y},
                               {"x", d.window.x},
                               {"window", d.window.v},
                               {"mask", rle_json(d.binary_mask)}});
  }
  return j.dump();
}

void write_pgm(const std::filesystem::path& path, int height, int width,
               const std::vector<unsigned char>& pixels) {
  if (pixels.size() != static_cast<std::size_t>(height) * width) {
    throw std::invalid_argument("write_pgm: pixel count mismatch");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << "P5\n" << width << ' ' << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

std::vector<unsigned char> render_detections(const Scene& scene, const std::vector<Detection>& dets,
                                             double min_score) {
  const int h = scene.image.height;
  const int w = scene.image.width;
  std::vector<double> g(static_cast<std::size_t>(h) * w, 0.0);
  for (int c = 0; c < std::min(3, scene.image.channels); ++c) {
    const auto ch = scene.image.channel(c);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += ch[i] / 3.0;
  }
  for (double& v : g) v = 0.4 * std::clamp(v, 0.0, 1.0);
  int rank = 0;
  for (const Detection& d : dets) {
    const double s = d.calibrated >= 0.0 ? d.calibrated : d.score;
    if (s < min_score || d.binary_mask.height != h || d.binary_mask.width != w) continue;
    const double level = 1.0 - 0.1 * (rank++ % 5);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (d.binary_mask.data[i]) g[i] = std::max(g[i], level);
    }
  }
  std::vector<unsigned char> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    out[i] = static_cast<unsigned char>(std::clamp(g[i], 0.0, 1.0) * 255.0 + 0.5);
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << text;
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace tmask

namespace tmask {

std::string calibration_to_json(const Calibration& cal) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [cat, curve] : cal.curves()) {
    j[std::to_string(cat)] = {{"scores", curve.scores}, {"precision", curve.precision}};
  }
  return nlohmann::json{{"categories", j}}.dump(2);
}

Calibration calibration_from_json(const std::string& text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    Calibration cal;
    for (const auto& [key, v] : j.at("categories").items()) {
      Calibration::Curve c;
      c.scores = v.at("scores").get<std::vector<double>>();
      c.precision = v.at("precision").get<std::vector<double>>();
      if (c.scores.size() != c.precision.size()) {
        throw std::invalid_argument("calibration curve lengths differ");
      }
      cal.curves()[std::stoi(key)] = std::move(c);
    }
    return cal;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad calibration JSON: ") + e.what());
  }
}

}  // namespace tmask
