#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tmask/inference.hpp"
#include "tmask/synth.hpp"

namespace tmask {

/// {"height", "width", "instances": [{"category", "bbox": [y0,x0,y1,x1],
///  "mask": {"size": [h,w], "counts": [...]}}]}
std::string scene_to_json(const Scene& scene);
/// Ground truth only; the image is not stored.
std::vector<GroundTruthInstance> instances_from_json(const std::string& text);

/// {"height", "width", "detections": [{"category", "score", "calibrated",
///  "box", "level", "y", "x", "window", "mask"}]}
std::string detections_to_json(const std::vector<Detection>& dets, int height, int width);

/// Binary 8-bit PGM (P5).
void write_pgm(const std::filesystem::path& path, int height, int width,
               const std::vector<unsigned char>& pixels);

/// Grayscale render: image luminance dimmed, detections' masks overlaid
/// with brightness by rank.
std::vector<unsigned char> render_detections(const Scene& scene,
                                             const std::vector<Detection>& dets,
                                             double min_score);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace tmask

namespace tmask {

std::string calibration_to_json(const Calibration& cal);
Calibration calibration_from_json(const std::string& text);

}  // namespace tmask
