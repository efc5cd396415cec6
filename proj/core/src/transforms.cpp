#include "tmask/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kernels.hpp"

namespace tmask {

using detail::blend;
using detail::floor_div;
using detail::Tap;

const char* to_string(Interpolation i) {
  return i == Interpolation::Bilinear ? "bilinear" : "nearest";
}

Interpolation parse_interpolation(const std::string& name) {
  if (name == "bilinear") return Interpolation::Bilinear;
  if (name == "nearest" || name == "nn") return Interpolation::NearestNeighbor;
  throw std::invalid_argument("unknown interpolation: " + name);
}

int nearest_bin(int c, int k, int n) {
  const int b = floor_div(2 * k * c + n, 2 * n);
  return std::clamp(b, centered_min(k), centered_max(k));
}

namespace detail {

std::vector<Tap> make_vu_taps(int out_len, int in_len, int lambda,
                              Interpolation interp) {
  std::vector<Tap> taps;
  taps.reserve(out_len);
  const int lo = centered_min(in_len);
  const int hi = centered_max(in_len);
  for (int c = centered_min(out_len); c <= centered_max(out_len); ++c) {
    Tap t;
    if (interp == Interpolation::NearestNeighbor) {
      t.i0 = t.i1 = nearest_bin(c, in_len, out_len) - lo;
    } else {
      const double s = std::clamp(static_cast<double>(c) / lambda,
                                  static_cast<double>(lo),
                                  static_cast<double>(hi));
      const int f = static_cast<int>(std::floor(s));
      t.i0 = f - lo;
      t.i1 = std::min(f + 1, hi) - lo;
      t.w = s - f;
    }
    taps.push_back(t);
  }
  return taps;
}

}  // namespace detail

namespace {

void require_repr(const StructuredTensor& t, Repr want, const char* op) {
  if (t.repr() != want) {
    throw PreconditionError(std::string(op) + " expects a " + to_string(want) +
                            " tensor, got " + to_string(t.repr()));
  }
}

int require_integer_alpha(const Units& units, const char* op) {
  const auto a = units.integer_alpha();
  if (!a) {
    std::ostringstream os;
    os << op << " requires a positive integer unit ratio, got "
       << units.alpha();
    throw PreconditionError(os.str());
  }
  return *a;
}

void require_grad_shape(const StructuredTensor& g, const Shape4& expected,
                        const char* op) {
  if (g.shape() != expected) {
    throw ShapeError(std::string(op) + ": gradient shape " +
                     to_string(g.shape()) + " does not match output shape " +
                     to_string(expected));
  }
}

// out(v,u,y,x) = in(v,u,y + a*v, x + a*u), `fill` outside the HW grid.
void shift_hw(const StructuredTensor& in, StructuredTensor& out, int a,
              double fill) {
  const Shape4& s = in.shape();
  const int v0 = centered_min(s.v);
  const int u0 = centered_min(s.u);
  for (int iv = 0; iv < s.v; ++iv) {
    const int dy = a * (iv + v0);
    for (int iu = 0; iu < s.u; ++iu) {
      const int dx = a * (iu + u0);
      const auto src = in.plane(iv, iu);
      auto dst = out.plane(iv, iu);
      const int x_lo = std::clamp(-dx, 0, s.w);
      const int x_hi = std::clamp(s.w - dx, 0, s.w);
      for (int y = 0; y < s.h; ++y) {
        double* row = dst.data() + static_cast<std::size_t>(y) * s.w;
        const int sy = y + dy;
        if (sy < 0 || sy >= s.h || x_lo >= x_hi) {
          std::fill(row, row + s.w, fill);
          continue;
        }
        const double* srow = src.data() + static_cast<std::size_t>(sy) * s.w;
        std::fill(row, row + x_lo, fill);
        for (int x = x_lo; x < x_hi; ++x) row[x] = srow[x + dx];
        std::fill(row + x_hi, row + s.w, fill);
      }
    }
  }
}

}  // namespace

// align2nat / nat2align ------------------------------------------------------

StructuredTensor align2nat(const StructuredTensor& aligned, double fill) {
  require_repr(aligned, Repr::Aligned, "align2nat");
  const int a = require_integer_alpha(aligned.units(), "align2nat");
  StructuredTensor out(aligned.shape(), Repr::Natural, aligned.units());
  shift_hw(aligned, out, a, fill);
  return out;
}

StructuredTensor align2nat_backward(const StructuredTensor& grad_out,
                                    const TensorMeta& input) {
  require_grad_shape(grad_out, input.shape, "align2nat_backward");
  const int a = require_integer_alpha(input.units, "align2nat_backward");
  StructuredTensor grad(input);
  shift_hw(grad_out, grad, -a, 0.0);
  return grad;
}

StructuredTensor nat2align(const StructuredTensor& natural, double fill) {
  require_repr(natural, Repr::Natural, "nat2align");
  const int a = require_integer_alpha(natural.units(), "nat2align");
  StructuredTensor out(natural.shape(), Repr::Aligned, natural.units());
  shift_hw(natural, out, -a, fill);
  return out;
}

StructuredTensor nat2align_backward(const StructuredTensor& grad_out,
                                    const TensorMeta& input) {
  require_grad_shape(grad_out, input.shape, "nat2align_backward");
  const int a = require_integer_alpha(input.units, "nat2align_backward");
  StructuredTensor grad(input);
  shift_hw(grad_out, grad, a, 0.0);
  return grad;
}

// Generalized align2nat -------------------------------------------------------

namespace {

int exact_ratio_count(double count, const char* what) {
  const double r = std::round(count);
  if (r < 1.0 || std::abs(count - r) > 1e-9 * std::max(1.0, count)) {
    std::ostringstream os;
    os << "align2nat_general: " << what << " extent " << count
       << " is not a positive integer";
    throw PreconditionError(os.str());
  }
  return static_cast<int>(r);
}

int exact_coordinate(double c) {
  const double r = std::round(c);
  if (std::abs(c - r) > 1e-9 * std::max(1.0, std::abs(c))) {
    std::ostringstream os;
    os << "align2nat_general: source coordinate " << c << " is not an integer";
    throw PreconditionError(os.str());
  }
  return static_cast<int>(r);
}

struct GeneralMap {
  Shape4 out_shape;
  std::vector<int> src_v;  // per output iv, centered source v
  std::vector<int> src_u;
  std::vector<int> src_y;  // [iv * H + y], grid source y
  std::vector<int> src_x;  // [iu * W + x]
};

GeneralMap general_map(const TensorMeta& in, const Units& target) {
  const Units& src = in.units;
  const double rv = target.sigma_vu() / src.sigma_vu();
  const double rh = target.sigma_hw() / src.sigma_hw();
  const double rc = target.sigma_vu() / src.sigma_hw();
  GeneralMap m;
  m.out_shape.v = exact_ratio_count(in.shape.v / rv, "V");
  m.out_shape.u = exact_ratio_count(in.shape.u / rv, "U");
  m.out_shape.h = exact_ratio_count(in.shape.h / rh, "H");
  m.out_shape.w = exact_ratio_count(in.shape.w / rh, "W");
  const Shape4& o = m.out_shape;
  for (int v : centered_coords(o.v)) m.src_v.push_back(exact_coordinate(rv * v));
  for (int u : centered_coords(o.u)) m.src_u.push_back(exact_coordinate(rv * u));
  for (int v : centered_coords(o.v)) {
    for (int y = 0; y < o.h; ++y) m.src_y.push_back(exact_coordinate(rh * y + rc * v));
  }
  for (int u : centered_coords(o.u)) {
    for (int x = 0; x < o.w; ++x) m.src_x.push_back(exact_coordinate(rh * x + rc * u));
  }
  return m;
}

}  // namespace

StructuredTensor align2nat_general(const StructuredTensor& aligned,
                                   const Units& target, double fill) {
  require_repr(aligned, Repr::Aligned, "align2nat_general");
  const GeneralMap m = general_map(aligned.meta(), target);
  const Shape4& in = aligned.shape();
  const Shape4& o = m.out_shape;
  StructuredTensor out(o, Repr::Natural, target, fill);
  for (int iv = 0; iv < o.v; ++iv) {
    const int sv = m.src_v[iv];
    if (!centered_contains(in.v, sv)) continue;
    for (int iu = 0; iu < o.u; ++iu) {
      const int su = m.src_u[iu];
      if (!centered_contains(in.u, su)) continue;
      const auto src =
          aligned.plane(sv - centered_min(in.v), su - centered_min(in.u));
      auto dst = out.plane(iv, iu);
      for (int y = 0; y < o.h; ++y) {
        const int sy = m.src_y[iv * o.h + y];
        if (sy < 0 || sy >= in.h) continue;
        for (int x = 0; x < o.w; ++x) {
          const int sx = m.src_x[iu * o.w + x];
          if (sx < 0 || sx >= in.w) continue;
          dst[static_cast<std::size_t>(y) * o.w + x] =
              src[static_cast<std::size_t>(sy) * in.w + sx];
        }
      }
    }
  }
  return out;
}

StructuredTensor align2nat_general_backward(const StructuredTensor& grad_out,
                                            const TensorMeta& input) {
  const GeneralMap m = general_map(input, grad_out.units());
  require_grad_shape(grad_out, m.out_shape, "align2nat_general_backward");
  const Shape4& in = input.shape;
  const Shape4& o = m.out_shape;
  StructuredTensor grad(input);
  for (int iv = 0; iv < o.v; ++iv) {
    const int sv = m.src_v[iv];
    if (!centered_contains(in.v, sv)) continue;
    for (int iu = 0; iu < o.u; ++iu) {
      const int su = m.src_u[iu];
      if (!centered_contains(in.u, su)) continue;
      auto dst = grad.plane(sv - centered_min(in.v), su - centered_min(in.u));
      const auto src = grad_out.plane(iv, iu);
      for (int y = 0; y < o.h; ++y) {
        const int sy = m.src_y[iv * o.h + y];
        if (sy < 0 || sy >= in.h) continue;
        for (int x = 0; x < o.w; ++x) {
          const int sx = m.src_x[iu * o.w + x];
          if (sx < 0 || sx >= in.w) continue;
          dst[static_cast<std::size_t>(sy) * in.w + sx] +=
              src[static_cast<std::size_t>(y) * o.w + x];
        }
      }
    }
  }
  return grad;
}

// VU upsampling ---------------------------------------------------------------

namespace {

void require_lambda(int lambda, const char* op) {
  if (lambda < 1) {
    throw PreconditionError(std::string(op) + ": lambda must be >= 1");
  }
}

Shape4 upsampled_shape(const Shape4& s, int lambda) {
  return {s.v * lambda, s.u * lambda, s.h, s.w};
}

}  // namespace

StructuredTensor up_bilinear_vu(const StructuredTensor& t, int lambda,
                                Interpolation interp) {
  require_lambda(lambda, "up_bilinear_vu");
  const Shape4& s = t.shape();
  const Shape4 o = upsampled_shape(s, lambda);
  const Units units(t.units().sigma_vu() / lambda, t.units().sigma_hw());
  StructuredTensor out(o, t.repr(), units);
  const auto tv = detail::make_vu_taps(o.v, s.v, lambda, interp);
  const auto tu = detail::make_vu_taps(o.u, s.u, lambda, interp);
  const std::size_t n = s.plane();
  for (int ov = 0; ov < o.v; ++ov) {
    const Tap& a = tv[ov];
    for (int ou = 0; ou < o.u; ++ou) {
      const Tap& b = tu[ou];
      const double* p00 = t.plane(a.i0, b.i0).data();
      const double* p01 = t.plane(a.i0, b.i1).data();
      const double* p10 = t.plane(a.i1, b.i0).data();
      const double* p11 = t.plane(a.i1, b.i1).data();
      double* dst = out.plane(ov, ou).data();
      for (std::size_t k = 0; k < n; ++k) {
        dst[k] = blend(p00[k], p01[k], p10[k], p11[k], a.w, b.w);
      }
    }
  }
  return out;
}

StructuredTensor up_bilinear_vu_backward(const StructuredTensor& grad_out,
                                         const TensorMeta& input, int lambda,
                                         Interpolation interp) {
  require_lambda(lambda, "up_bilinear_vu_backward");
  const Shape4& s = input.shape;
  const Shape4 o = upsampled_shape(s, lambda);
  require_grad_shape(grad_out, o, "up_bilinear_vu_backward");
  StructuredTensor grad(input);
  const auto tv = detail::make_vu_taps(o.v, s.v, lambda, interp);
  const auto tu = detail::make_vu_taps(o.u, s.u, lambda, interp);
  const std::size_t n = s.plane();
  for (int ov = 0; ov < o.v; ++ov) {
    const Tap& a = tv[ov];
    for (int ou = 0; ou < o.u; ++ou) {
      const Tap& b = tu[ou];
      const double c00 = (1.0 - a.w) * (1.0 - b.w);
      const double c01 = (1.0 - a.w) * b.w;
      const double c10 = a.w * (1.0 - b.w);
      const double c11 = a.w * b.w;
      const double* g = grad_out.plane(ov, ou).data();
      double* q00 = grad.plane(a.i0, b.i0).data();
      double* q01 = grad.plane(a.i0, b.i1).data();
      double* q10 = grad.plane(a.i1, b.i0).data();
      double* q11 = grad.plane(a.i1, b.i1).data();
      for (std::size_t k = 0; k < n; ++k) {
        q00[k] += c00 * g[k];
        q01[k] += c01 * g[k];
        q10[k] += c10 * g[k];
        q11[k] += c11 * g[k];
      }
    }
  }
  return grad;
}

StructuredTensor up_align2nat(const StructuredTensor& aligned,
                              const TransformConfig& cfg) {
  require_repr(aligned, Repr::Aligned, "up_align2nat");
  return align2nat(up_bilinear_vu(aligned, cfg.lambda, cfg.interpolation),
                   cfg.fill);
}

StructuredTensor up_align2nat_backward(const StructuredTensor& grad_out,
                                       const TensorMeta& input,
                                       const TransformConfig& cfg) {
  require_lambda(cfg.lambda, "up_align2nat_backward");
  TensorMeta up = input;
  up.shape = upsampled_shape(input.shape, cfg.lambda);
  up.units = Units(input.units.sigma_vu() / cfg.lambda, input.units.sigma_hw());
  return up_bilinear_vu_backward(align2nat_backward(grad_out, up), input,
                                 cfg.lambda, cfg.interpolation);
}

// HW subsampling --------------------------------------------------------------

namespace {

void require_divisible(const Shape4& s, int factor, const char* op) {
  if (factor < 1) throw PreconditionError(std::string(op) + ": factor must be >= 1");
  if (s.h % factor != 0 || s.w % factor != 0) {
    std::ostringstream os;
    os << op << ": HW extent of " << to_string(s) << " is not divisible by "
       << factor;
    throw ShapeError(os.str());
  }
}

}  // namespace

StructuredTensor subsample_hw(const StructuredTensor& t, int factor) {
  const Shape4& s = t.shape();
  require_divisible(s, factor, "subsample_hw");
  const Shape4 o{s.v, s.u, s.h / factor, s.w / factor};
  StructuredTensor out(o, t.repr(),
                       Units(t.units().sigma_vu(), t.units().sigma_hw() * factor));
  for (int iv = 0; iv < s.v; ++iv) {
    for (int iu = 0; iu < s.u; ++iu) {
      const auto src = t.plane(iv, iu);
      auto dst = out.plane(iv, iu);
      for (int j = 0; j < o.h; ++j) {
        for (int i = 0; i < o.w; ++i) {
          dst[static_cast<std::size_t>(j) * o.w + i] =
              src[static_cast<std::size_t>(j) * factor * s.w + i * factor];
        }
      }
    }
  }
  return out;
}

StructuredTensor subsample_hw_backward(const StructuredTensor& grad_out,
                                       const TensorMeta& input, int factor) {
  const Shape4& s = input.shape;
  require_divisible(s, factor, "subsample_hw_backward");
  const Shape4 o{s.v, s.u, s.h / factor, s.w / factor};
  require_grad_shape(grad_out, o, "subsample_hw_backward");
  StructuredTensor grad(input);
  for (int iv = 0; iv < s.v; ++iv) {
    for (int iu = 0; iu < s.u; ++iu) {
      const auto src = grad_out.plane(iv, iu);
      auto dst = grad.plane(iv, iu);
      for (int j = 0; j < o.h; ++j) {
        for (int i = 0; i < o.w; ++i) {
          dst[static_cast<std::size_t>(j) * factor * s.w + i * factor] =
              src[static_cast<std::size_t>(j) * o.w + i];
        }
      }
    }
  }
  return grad;
}

// Fused swap ------------------------------------------------------------------

namespace {

struct SwapPlan {
  Shape4 out;
  Units units;
  int shift = 1;  // unit ratio after upsampling
};

SwapPlan plan_swap(const TensorMeta& in, const TransformConfig& cfg,
                   const char* op) {
  require_lambda(cfg.lambda, op);
  require_divisible(in.shape, cfg.lambda, op);
  const Units up(in.units.sigma_vu() / cfg.lambda, in.units.sigma_hw());
  SwapPlan p;
  p.shift = require_integer_alpha(up, op);
  p.out = {in.shape.v * cfg.lambda, in.shape.u * cfg.lambda,
           in.shape.h / cfg.lambda, in.shape.w / cfg.lambda};
  p.units = Units(up.sigma_vu(), in.units.sigma_hw() * cfg.lambda);
  return p;
}

}  // namespace

StructuredTensor swap_align2nat(const StructuredTensor& aligned,
                                const TransformConfig& cfg) {
  require_repr(aligned, Repr::Aligned, "swap_align2nat");
  const SwapPlan p = plan_swap(aligned.meta(), cfg, "swap_align2nat");
  const Shape4& s = aligned.shape();
  const Shape4& o = p.out;
  const int lambda = cfg.lambda;
  StructuredTensor out(o, Repr::Natural, p.units);
  const auto tv = detail::make_vu_taps(o.v, s.v, lambda, cfg.interpolation);
  const auto tu = detail::make_vu_taps(o.u, s.u, lambda, cfg.interpolation);
  const int v0 = centered_min(o.v);
  const int u0 = centered_min(o.u);
  for (int ov = 0; ov < o.v; ++ov) {
    const Tap& a = tv[ov];
    const int dy = p.shift * (ov + v0);
    for (int ou = 0; ou < o.u; ++ou) {
      const Tap& b = tu[ou];
      const int dx = p.shift * (ou + u0);
      const double* p00 = aligned.plane(a.i0, b.i0).data();
      const double* p01 = aligned.plane(a.i0, b.i1).data();
      const double* p10 = aligned.plane(a.i1, b.i0).data();
      const double* p11 = aligned.plane(a.i1, b.i1).data();
      double* dst = out.plane(ov, ou).data();
      for (int j = 0; j < o.h; ++j) {
        double* row = dst + static_cast<std::size_t>(j) * o.w;
        const int y = lambda * j + dy;
        if (y < 0 || y >= s.h) {
          std::fill(row, row + o.w, cfg.fill);
          continue;
        }
        const std::size_t base = static_cast<std::size_t>(y) * s.w;
        for (int i = 0; i < o.w; ++i) {
          const int x = lambda * i + dx;
          if (x < 0 || x >= s.w) {
            row[i] = cfg.fill;
            continue;
          }
          const std::size_t k = base + x;
          row[i] = blend(p00[k], p01[k], p10[k], p11[k], a.w, b.w);
        }
      }
    }
  }
  return out;
}

StructuredTensor swap_align2nat_backward(const StructuredTensor& grad_out,
                                         const TensorMeta& input,
                                         const TransformConfig& cfg) {
  const SwapPlan p = plan_swap(input, cfg, "swap_align2nat_backward");
  require_grad_shape(grad_out, p.out, "swap_align2nat_backward");
  const Shape4& s = input.shape;
  const Shape4& o = p.out;
  const int lambda = cfg.lambda;
  StructuredTensor grad(input);
  const auto tv = detail::make_vu_taps(o.v, s.v, lambda, cfg.interpolation);
  const auto tu = detail::make_vu_taps(o.u, s.u, lambda, cfg.interpolation);
  const int v0 = centered_min(o.v);
  const int u0 = centered_min(o.u);
  for (int ov = 0; ov < o.v; ++ov) {
    const Tap& a = tv[ov];
    const int dy = p.shift * (ov + v0);
    for (int ou = 0; ou < o.u; ++ou) {
      const Tap& b = tu[ou];
      const int dx = p.shift * (ou + u0);
      const double c00 = (1.0 - a.w) * (1.0 - b.w);
      const double c01 = (1.0 - a.w) * b.w;
      const double c10 = a.w * (1.0 - b.w);
      const double c11 = a.w * b.w;
      double* q00 = grad.plane(a.i0, b.i0).data();
      double* q01 = grad.plane(a.i0, b.i1).data();
      double* q10 = grad.plane(a.i1, b.i0).data();
      double* q11 = grad.plane(a.i1, b.i1).data();
      const double* g = grad_out.plane(ov, ou).data();
      for (int j = 0; j < o.h; ++j) {
        const int y = lambda * j + dy;
        if (y < 0 || y >= s.h) continue;
        const std::size_t base = static_cast<std::size_t>(y) * s.w;
        for (int i = 0; i < o.w; ++i) {
          const int x = lambda * i + dx;
          if (x < 0 || x >= s.w) continue;
          const double gv = g[static_cast<std::size_t>(j) * o.w + i];
          const std::size_t k = base + x;
          q00[k] += c00 * gv;
          q01[k] += c01 * gv;
          q10[k] += c10 * gv;
          q11[k] += c11 * gv;
        }
      }
    }
  }
  return grad;
}

// InstanceFCN decoding --------------------------------------------------------

StructuredTensor resample_vu_nearest(const StructuredTensor& g, int v, int u) {
  const Shape4& s = g.shape();
  if (v < 1 || u < 1) throw ShapeError("resample_vu_nearest: empty output");
  const Shape4 o{v, u, s.h, s.w};
  const double hw = g.units().sigma_hw();
  StructuredTensor out(o, Repr::Aligned, Units(hw, hw));
  const int gv0 = centered_min(s.v);
  const int gu0 = centered_min(s.u);
  for (int iv = 0; iv < v; ++iv) {
    const int bv = nearest_bin(iv + centered_min(v), s.v, v) - gv0;
    for (int iu = 0; iu < u; ++iu) {
      const int bu = nearest_bin(iu + centered_min(u), s.u, u) - gu0;
      const auto src = g.plane(bv, bu);
      std::copy(src.begin(), src.end(), out.plane(iv, iu).begin());
    }
  }
  return out;
}

StructuredTensor resample_vu_nearest_backward(const StructuredTensor& grad_out,
                                              const TensorMeta& input) {
  const Shape4& s = input.shape;
  const Shape4& o = grad_out.shape();
  if (o.h != s.h || o.w != s.w) {
    throw ShapeError("resample_vu_nearest_backward: HW extent mismatch");
  }
  StructuredTensor grad(input);
  const int gv0 = centered_min(s.v);
  const int gu0 = centered_min(s.u);
  for (int iv = 0; iv < o.v; ++iv) {
    const int bv = nearest_bin(iv + centered_min(o.v), s.v, o.v) - gv0;
    for (int iu = 0; iu < o.u; ++iu) {
      const int bu = nearest_bin(iu + centered_min(o.u), s.u, o.u) - gu0;
      const auto src = grad_out.plane(iv, iu);
      auto dst = grad.plane(bv, bu);
      for (std::size_t k = 0; k < src.size(); ++k) dst[k] += src[k];
    }
  }
  return grad;
}

StructuredTensor instancefcn_decode(const StructuredTensor& g, int v, int u,
                                    double fill) {
  if (g.shape().v > v || g.shape().u > u) {
    throw PreconditionError("instancefcn_decode: more bins than mask samples");
  }
  return align2nat(resample_vu_nearest(g, v, u), fill);
}

StructuredTensor instancefcn_decode_backward(const StructuredTensor& grad_out,
                                             const TensorMeta& input) {
  const double hw = input.units.sigma_hw();
  TensorMeta mid{grad_out.shape(), Repr::Aligned, Units(hw, hw)};
  return resample_vu_nearest_backward(align2nat_backward(grad_out, mid), input);
}

}  // namespace tmask
