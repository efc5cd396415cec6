#pragma once

#include "tmask/tensor.hpp"

namespace tmask {

enum class Interpolation { Bilinear, NearestNeighbor };

const char* to_string(Interpolation i);
Interpolation parse_interpolation(const std::string& name);

struct TransformConfig {
  int lambda = 1;
  /// Value produced by reads that fall outside the source HW grid.
  double fill = 0.0;
  Interpolation interpolation = Interpolation::Bilinear;
};

// Representation changes ------------------------------------------------------

/// F(v,u,y,x) = F^(v, u, y + a*v, x + a*u) for an aligned input whose unit
/// ratio a is a positive integer. Units are unchanged.
StructuredTensor align2nat(const StructuredTensor& aligned, double fill = 0.0);
StructuredTensor align2nat_backward(const StructuredTensor& grad_out,
                                    const TensorMeta& input);

/// F^(v,u,y,x) = F(v, u, y - a*v, x - a*u). Same integer restriction on a.
StructuredTensor nat2align(const StructuredTensor& natural, double fill = 0.0);
StructuredTensor nat2align_backward(const StructuredTensor& grad_out,
                                    const TensorMeta& input);

/// Unit-aware align2nat. The output covers the same image extent as the
/// input (V = V^ * s^vu / s_vu, H = H^ * s^hw / s_hw) and reads
///   F^(rv*v, rv*u, rh*y + rc*v, rh*x + rc*u)
/// with rv = s_vu/s^vu, rh = s_hw/s^hw, rc = s_vu/s^hw. Every read
/// coordinate must be an integer; this is checked before any work is done.
StructuredTensor align2nat_general(const StructuredTensor& aligned,
                                   const Units& target, double fill = 0.0);
StructuredTensor align2nat_general_backward(const StructuredTensor& grad_out,
                                            const TensorMeta& input);

// Resolution changes ---------------------------------------------------------

/// Upsamples the VU axes by lambda. Output coordinate v reads the continuous
/// source coordinate v/lambda, clamped to the source range. The VU unit is
/// divided by lambda; HW and the representation tag are untouched.
StructuredTensor up_bilinear_vu(const StructuredTensor& t, int lambda,
                                Interpolation interp = Interpolation::Bilinear);
StructuredTensor up_bilinear_vu_backward(const StructuredTensor& grad_out,
                                         const TensorMeta& input, int lambda,
                                         Interpolation interp = Interpolation::Bilinear);

/// align2nat(up_bilinear_vu(t, lambda)). After upsampling the unit ratio
/// must be a positive integer (1 when s^vu = lambda * s^hw).
StructuredTensor up_align2nat(const StructuredTensor& aligned,
                              const TransformConfig& cfg);
StructuredTensor up_align2nat_backward(const StructuredTensor& grad_out,
                                       const TensorMeta& input,
                                       const TransformConfig& cfg);

/// Keeps the phase-0 HW samples (factor*j, factor*i); s_hw *= factor.
StructuredTensor subsample_hw(const StructuredTensor& t, int factor);
StructuredTensor subsample_hw_backward(const StructuredTensor& grad_out,
                                       const TensorMeta& input, int factor);

/// subsample_hw(up_align2nat(t, lambda), lambda) computed directly, one
/// pass over the (lambda*V, lambda*U, H/lambda, W/lambda) output. Results
/// are bit-identical to the composition.
StructuredTensor swap_align2nat(const StructuredTensor& aligned,
                                const TransformConfig& cfg);
StructuredTensor swap_align2nat_backward(const StructuredTensor& grad_out,
                                         const TensorMeta& input,
                                         const TransformConfig& cfg);

// Score-map decoding ---------------------------------------------------------

/// Nearest-neighbor resampling of the VU axes from (K_v,K_u) to (V,U) using
/// bin = round(K/V * v) (round half up). Returns an aligned tensor whose
/// units are (s_hw, s_hw).
StructuredTensor resample_vu_nearest(const StructuredTensor& g, int v, int u);
StructuredTensor resample_vu_nearest_backward(const StructuredTensor& grad_out,
                                              const TensorMeta& input);

/// Decodes a (K,K,H,W) bin score map into natural (V,U,H,W) masks:
/// nearest-neighbor VU resampling followed by align2nat with unit ratio 1.
StructuredTensor instancefcn_decode(const StructuredTensor& g, int v, int u,
                                    double fill = 0.0);
StructuredTensor instancefcn_decode_backward(const StructuredTensor& grad_out,
                                             const TensorMeta& input);

/// Bin index round(k * c / n) with ties rounded up, clamped to the centered
/// range of length k. Integer arithmetic only.
int nearest_bin(int c, int k, int n);

}  // namespace tmask
