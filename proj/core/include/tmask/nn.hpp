#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tmask/random.hpp"
#include "tmask/tensor.hpp"

namespace tmask::nn {

/// A trainable array with its gradient accumulator and momentum buffer.
struct Param {
  std::string name;
  std::vector<double> value;
  std::vector<double> grad;
  std::vector<double> velocity;

  Param() = default;
  Param(std::string n, std::size_t size);
  void zero_grad();
};

/// k x k convolution, stride 1, zero padding k/2. Weight layout is
/// (out, in, k, k).
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, int in_channels, int out_channels, int kernel);

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int kernel() const { return k_; }

  /// He-normal weights with fan-in scaling, constant bias.
  void init(SplitMix64& rng, double bias = 0.0, double gain = 2.0);
  /// Zero-mean normal weights with a fixed standard deviation.
  void init_normal(SplitMix64& rng, double stddev, double bias = 0.0);

  FeatureMap forward(const FeatureMap& x) const;
  /// Accumulates into weight().grad / bias().grad and returns dL/dx.
  FeatureMap backward(const FeatureMap& x, const FeatureMap& grad_y);

  Param& weight() { return weight_; }
  Param& bias() { return bias_; }
  const Param& weight() const { return weight_; }
  const Param& bias() const { return bias_; }

  void collect(std::vector<Param*>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  int in_ = 0;
  int out_ = 0;
  int k_ = 1;
  Param weight_;
  Param bias_;
};

FeatureMap relu(const FeatureMap& x);
/// Gradient through ReLU given its output.
FeatureMap relu_backward(const FeatureMap& y, const FeatureMap& grad_y);

/// 2x2 average pooling with stride 2. Odd trailing rows/cols are dropped.
FeatureMap avg_pool2(const FeatureMap& x);
FeatureMap avg_pool2_backward(const FeatureMap& grad_y, const FeatureMap& x);

double sigmoid(double z);

/// v <- momentum * v + g; w <- w - lr * v.
void sgd_step(std::span<Param* const> params, double lr, double momentum);

void zero_grads(std::span<Param* const> params);

// Checkpoints: "TMCK" magic, u32 version, u64 seed, u32 count, then per
// param: u32 name length, name, u64 length, f64 values, f64 velocity.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path,
                     std::span<Param* const> params, std::uint64_t seed);
/// Loads values into params matched by name and order. Returns the seed.
std::uint64_t load_checkpoint(const std::filesystem::path& path,
                              std::span<Param* const> params);

}  // namespace tmask::nn
