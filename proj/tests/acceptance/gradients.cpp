#include <algorithm>
#include <functional>
#include <map>
#include <sstream>

#include <oracle.hpp>
#include <tmask/bipyramid.hpp>
#include <tmask/heads.hpp>
#include <tmask/losses.hpp>
#include <tmask/model.hpp>
#include <tmask/transforms.hpp>

#include "acceptance.hpp"

namespace tmask::acceptance {

namespace {

constexpr int kInstances = 20;
constexpr double kTolerance = 1e-4;

using TensorOp = std::function<StructuredTensor(const StructuredTensor&)>;

struct Tally {
  int count = 0;
  double worst = 0.0;
};

class Suite {
 public:
  void add(const std::string& op, double err) {
    Tally& t = tallies_[op];
    ++t.count;
    t.worst = std::max(t.worst, err);
  }

  bool pass() const {
    for (const auto& [op, t] : tallies_) {
      if (t.count < kInstances || !(t.worst < kTolerance)) return false;
    }
    return !tallies_.empty();
  }

  std::string summary() const {
    std::ostringstream os;
    os.precision(2);
    double worst = 0.0;
    std::string worst_op;
    for (const auto& [op, t] : tallies_) {
      if (t.worst >= worst) {
        worst = t.worst;
        worst_op = op;
      }
    }
    os << tallies_.size() << " ops x " << kInstances << " instances, worst rel err " << worst << " ("
       << worst_op << ")";
    for (const auto& [op, t] : tallies_) {
      if (!(t.worst < kTolerance)) os << "; FAIL " << op << " " << t.worst;
    }
    return os.str();
  }

 private:
  std::map<std::string, Tally> tallies_;
};

// Gradient of <op(x), w> against central differences.
double check_tensor_op(SplitMix64& rng, const StructuredTensor& x, const TensorOp& fwd,
                       const TensorOp& bwd) {
  const auto y = fwd(x);
  const auto w = oracle::random_tensor(rng, y.shape(), y.repr(), y.units());
  const auto loss = [&](std::span<const double> p) {
    StructuredTensor t = x;
    std::copy(p.begin(), p.end(), t.data().begin());
    return oracle::dot(fwd(t).data(), w.data());
  };
  const auto g = bwd(w);
  return oracle::gradcheck(loss, {x.data().begin(), x.data().end()}, g.data());
}

void transforms(Suite& suite, int i) {
  SplitMix64 rng(4000 + i);
  const int a = 1 + i % 2;
  const auto al = oracle::random_tensor(rng, {3, 4, 6, 6}, Repr::Aligned, Units(a, 1));
  const auto na = oracle::random_tensor(rng, {3, 4, 6, 6}, Repr::Natural, Units(a, 1));
  suite.add("align2nat", check_tensor_op(rng, al, [](auto& t) { return align2nat(t, 0.3); },
                                         [&](auto& g) { return align2nat_backward(g, al.meta()); }));
  suite.add("nat2align", check_tensor_op(rng, na, [](auto& t) { return nat2align(t, 0.3); },
                                         [&](auto& g) { return nat2align_backward(g, na.meta()); }));
  const auto gen = oracle::random_tensor(rng, {4, 4, 8, 8}, Repr::Aligned, Units(1, 2));
  suite.add("align2nat_general",
            check_tensor_op(rng, gen, [](auto& t) { return align2nat_general(t, Units(2, 4)); },
                            [&](auto& g) { return align2nat_general_backward(g, gen.meta()); }));
  for (Interpolation interp : {Interpolation::Bilinear, Interpolation::NearestNeighbor}) {
    const std::string tag = interp == Interpolation::Bilinear ? " bilinear" : " nearest";
    const int lambda = 2 + i % 2;
    suite.add("up_bilinear_vu" + tag,
              check_tensor_op(rng, al, [&](auto& t) { return up_bilinear_vu(t, lambda, interp); },
                              [&](auto& g) { return up_bilinear_vu_backward(g, al.meta(), lambda, interp); }));
    const auto sw = oracle::random_tensor(rng, {3, 3, 8, 8}, Repr::Aligned, Units(2, 1));
    const TransformConfig cfg{2, 0.0, interp};
    suite.add("up_align2nat" + tag,
              check_tensor_op(rng, sw, [&](auto& t) { return up_align2nat(t, cfg); },
                              [&](auto& g) { return up_align2nat_backward(g, sw.meta(), cfg); }));
    suite.add("swap_align2nat" + tag,
              check_tensor_op(rng, sw, [&](auto& t) { return swap_align2nat(t, cfg); },
                              [&](auto& g) { return swap_align2nat_backward(g, sw.meta(), cfg); }));
  }
  suite.add("subsample_hw", check_tensor_op(rng, al, [](auto& t) { return subsample_hw(t, 2); },
                                            [&](auto& g) { return subsample_hw_backward(g, al.meta(), 2); }));
  const auto bins = oracle::random_tensor(rng, {3, 3, 6, 6}, Repr::Aligned, Units(1, 1));
  suite.add("resample_vu_nearest",
            check_tensor_op(rng, bins, [](auto& t) { return resample_vu_nearest(t, 7, 7); },
                            [&](auto& g) { return resample_vu_nearest_backward(g, bins.meta()); }));
  suite.add("instancefcn_decode",
            check_tensor_op(rng, bins, [](auto& t) { return instancefcn_decode(t, 9, 9); },
                            [&](auto& g) { return instancefcn_decode_backward(g, bins.meta()); }));
}

void bipyramid(Suite& suite, int i) {
  SplitMix64 rng(4100 + i);
  // Three levels stacked into one flat vector.
  std::vector<StructuredTensor> in;
  std::vector<TensorMeta> metas;
  for (int k = 0; k < 3; ++k) {
    in.push_back(oracle::random_tensor(rng, {2, 3, 8, 8}, Repr::Aligned, Units(1 << k, 1)));
    metas.push_back(in.back().meta());
  }
  const auto interp = i % 2 ? Interpolation::NearestNeighbor : Interpolation::Bilinear;
  const auto out = build_bipyramid(in, interp);
  std::vector<StructuredTensor> w;
  for (const auto& o : out) w.push_back(oracle::random_tensor(rng, o.shape(), o.repr(), o.units()));
  std::vector<double> x;
  for (const auto& t : in) x.insert(x.end(), t.data().begin(), t.data().end());
  const auto loss = [&](std::span<const double> p) {
    auto levels = in;
    std::size_t o = 0;
    for (auto& t : levels) {
      std::copy(p.begin() + o, p.begin() + o + t.data().size(), t.data().begin());
      o += t.data().size();
    }
    const auto r = build_bipyramid(levels, interp);
    double s = 0;
    for (std::size_t k = 0; k < r.size(); ++k) s += oracle::dot(r[k].data(), w[k].data());
    return s;
  };
  std::vector<double> analytic;
  for (const auto& g : build_bipyramid_backward(w, metas, interp))
    analytic.insert(analytic.end(), g.data().begin(), g.data().end());
  suite.add("build_bipyramid", oracle::gradcheck(loss, x, analytic));

  const auto fm = oracle::random_map(rng, 2, 3, 5, 4.0);
  const int f = 2 << (i % 2);
  const auto up = upsample_hw_bilinear(fm, f);
  const auto wu = oracle::random_map(rng, up.channels, up.height, up.width);
  const auto up_loss = [&](std::span<const double> p) {
    FeatureMap m = fm;
    std::copy(p.begin(), p.end(), m.data.begin());
    return oracle::dot(upsample_hw_bilinear(m, f).data, wu.data);
  };
  suite.add("upsample_hw_bilinear",
            oracle::gradcheck(up_loss, fm.data, upsample_hw_bilinear_backward(wu, fm, f).data));

  // FPN-to-finest conversion: inputs and the shared 3x3 conv.
  const int C = 2;
  auto finest = oracle::random_map(rng, C, 4, 4);
  std::vector<FeatureMap> maps{oracle::random_map(rng, C, 4, 4), oracle::random_map(rng, C, 2, 2)};
  nn::Conv2d conv("fpn", C, C, 3);
  conv.init(rng, 0.05);
  const std::vector<FeatureMap> wf{oracle::random_map(rng, C, 4, 4), oracle::random_map(rng, C, 4, 4)};
  std::vector<double> xf;
  for (const auto* v : {&finest.data, &maps[0].data, &maps[1].data, &conv.weight().value, &conv.bias().value})
    xf.insert(xf.end(), v->begin(), v->end());
  const auto fpn_loss = [&](std::span<const double> p) {
    FeatureMap fin = finest;
    auto m = maps;
    nn::Conv2d cv = conv;
    std::size_t o = 0;
    for (auto* v : {&fin.data, &m[0].data, &m[1].data, &cv.weight().value, &cv.bias().value}) {
      std::copy(p.begin() + o, p.begin() + o + v->size(), v->begin());
      o += v->size();
    }
    const auto out = convert_fpn_maps(m, fin, cv);
    return oracle::dot(out[0].data, wf[0].data) + oracle::dot(out[1].data, wf[1].data);
  };
  FpnConversionCache cache;
  convert_fpn_maps(maps, finest, conv, &cache);
  auto g = convert_fpn_maps_backward(wf, maps, finest, conv, cache);
  std::vector<double> gf;
  for (const auto* v : {&g.finest.data, &g.maps[0].data, &g.maps[1].data, &conv.weight().grad, &conv.bias().grad})
    gf.insert(gf.end(), v->begin(), v->end());
  suite.add("convert_fpn_maps", oracle::gradcheck(fpn_loss, xf, gf));
}

void layers(Suite& suite, int i) {
  SplitMix64 rng(4200 + i);
  for (int k : {1, 3}) {
    nn::Conv2d conv("c", 3, 2, k);
    conv.init(rng, 0.1);
    const auto x = oracle::random_map(rng, 3, 4, 5);
    const auto w = oracle::random_map(rng, 2, 4, 5);
    std::vector<double> flat(x.data);
    flat.insert(flat.end(), conv.weight().value.begin(), conv.weight().value.end());
    flat.insert(flat.end(), conv.bias().value.begin(), conv.bias().value.end());
    const auto loss = [&](std::span<const double> p) {
      FeatureMap m = x;
      nn::Conv2d c = conv;
      std::copy(p.begin(), p.begin() + m.size(), m.data.begin());
      std::copy(p.begin() + m.size(), p.begin() + m.size() + c.weight().value.size(),
                c.weight().value.begin());
      std::copy(p.end() - c.bias().value.size(), p.end(), c.bias().value.begin());
      return oracle::dot(c.forward(m).data, w.data);
    };
    const auto gx = conv.backward(x, w);
    std::vector<double> analytic(gx.data);
    analytic.insert(analytic.end(), conv.weight().grad.begin(), conv.weight().grad.end());
    analytic.insert(analytic.end(), conv.bias().grad.begin(), conv.bias().grad.end());
    suite.add("conv2d " + std::to_string(k) + "x" + std::to_string(k), oracle::gradcheck(loss, flat, analytic));
  }
  const auto x = oracle::random_map(rng, 2, 4, 6);
  const auto wr = oracle::random_map(rng, 2, 4, 6);
  const auto relu_loss = [&](std::span<const double> p) {
    FeatureMap m = x;
    std::copy(p.begin(), p.end(), m.data.begin());
    return oracle::dot(nn::relu(m).data, wr.data);
  };
  suite.add("relu", oracle::gradcheck(relu_loss, x.data, nn::relu_backward(nn::relu(x), wr).data));
  const auto wp = oracle::random_map(rng, 2, 2, 3);
  const auto pool_loss = [&](std::span<const double> p) {
    FeatureMap m = x;
    std::copy(p.begin(), p.end(), m.data.begin());
    return oracle::dot(nn::avg_pool2(m).data, wp.data);
  };
  suite.add("avg_pool2", oracle::gradcheck(pool_loss, x.data, nn::avg_pool2_backward(wp, x).data));
}

HeadSpec head_spec(HeadKind kind, int v, int lambda, Interpolation interp) {
  HeadSpec s;
  s.kind = kind;
  s.window_sizes = {v};
  s.lambda = lambda;
  s.interpolation = interp;
  return s;
}

void mask_heads(Suite& suite, int i) {
  for (HeadKind kind : {HeadKind::SimpleNatural, HeadKind::SimpleAligned, HeadKind::UpscaleNatural,
                        HeadKind::UpscaleAligned, HeadKind::Bipyramid}) {
    SplitMix64 rng(4300 + i);
    const bool up = kind == HeadKind::UpscaleAligned || kind == HeadKind::UpscaleNatural;
    const auto interp = i % 2 ? Interpolation::NearestNeighbor : Interpolation::Bilinear;
    MaskHead head(head_spec(kind, up ? 6 : 3, up ? 2 : 1, interp), 3);
    head.init(rng);
    const int level = kind == HeadKind::Bipyramid ? i % 3 : 0;
    const auto fm = oracle::random_map(rng, 3, 4, 4, 2.0);
    const auto out = head.forward(fm, 0, level);
    const auto w = oracle::random_tensor(rng, out.shape(), out.repr(), out.units());
    nn::Conv2d& proj = head.projection(0);
    const std::size_t nw = proj.weight().value.size();
    std::vector<double> x(fm.data);
    x.insert(x.end(), proj.weight().value.begin(), proj.weight().value.end());
    x.insert(x.end(), proj.bias().value.begin(), proj.bias().value.end());
    const auto loss = [&](std::span<const double> p) {
      FeatureMap f = fm;
      MaskHead h = head;
      std::copy(p.begin(), p.begin() + f.size(), f.data.begin());
      std::copy(p.begin() + f.size(), p.begin() + f.size() + nw, h.projection(0).weight().value.begin());
      std::copy(p.begin() + f.size() + nw, p.end(), h.projection(0).bias().value.begin());
      return oracle::dot(h.forward(f, 0, level).data(), w.data());
    };
    const auto gx = head.backward(fm, 0, level, w);
    std::vector<double> analytic(gx.data);
    analytic.insert(analytic.end(), proj.weight().grad.begin(), proj.weight().grad.end());
    analytic.insert(analytic.end(), proj.bias().grad.begin(), proj.bias().grad.end());
    suite.add(std::string("mask head ") + to_string(kind), oracle::gradcheck(loss, x, analytic));
  }
}

void towers(Suite& suite, int i) {
  SplitMix64 rng(4400 + i);
  for (bool cls : {true, false}) {
    ConvTower tower = cls ? make_cls_head(3, 2, 2, 2) : make_box_head(3, 2, 2);
    tower.init(rng, cls ? -1.0 : 0.0);
    const auto fm = oracle::random_map(rng, 3, 4, 4);
    ConvTower::Cache cache;
    const auto out = tower.forward(fm, &cache);
    const auto w = oracle::random_map(rng, out.channels, out.height, out.width);
    std::vector<nn::Param*> params;
    tower.collect(params);
    nn::zero_grads(params);
    const auto gx = tower.backward(cache, w);
    std::vector<double> flat(fm.data), analytic(gx.data);
    for (auto* p : params) {
      flat.insert(flat.end(), p->value.begin(), p->value.end());
      analytic.insert(analytic.end(), p->grad.begin(), p->grad.end());
    }
    const auto loss = [&](std::span<const double> x) {
      FeatureMap m = fm;
      std::copy(x.begin(), x.begin() + m.size(), m.data.begin());
      ConvTower t = tower;
      std::vector<nn::Param*> tp;
      t.collect(tp);
      std::size_t o = m.size();
      for (auto* p : tp) {
        std::copy(x.begin() + o, x.begin() + o + p->value.size(), p->value.begin());
        o += p->value.size();
      }
      return oracle::dot(t.forward(m).data, w.data);
    };
    suite.add(cls ? "cls stack" : "box stack", oracle::gradcheck_sampled(loss, flat, analytic, rng, 80));
  }
}

void detectors(Suite& suite, int i) {
  for (HeadKind kind : {HeadKind::SimpleNatural, HeadKind::UpscaleAligned, HeadKind::Bipyramid}) {
    ModelConfig cfg;
    const bool up = kind == HeadKind::UpscaleAligned;
    cfg.head = head_spec(kind, up ? 4 : 3, up ? 2 : 1, Interpolation::Bilinear);
    cfg.channels = 3;
    cfg.levels = 2;
    cfg.mask_depth = cfg.cls_depth = cfg.box_depth = 1;
    cfg.num_classes = 2;
    cfg.use_box = kind != HeadKind::SimpleNatural || i % 2 == 0;
    Detector det(cfg, 300 + i);
    SplitMix64 rng(3000 + i);
    const auto image = oracle::random_map(rng, 3, 8, 8);
    const auto base = det.forward(image);
    PredictionGrads w;
    for (const auto& m : base.cls) w.cls.push_back(oracle::random_map(rng, m.channels, m.height, m.width));
    for (const auto& m : base.box) w.box.push_back(oracle::random_map(rng, m.channels, m.height, m.width));
    for (const auto& t : base.masks) w.masks.push_back(oracle::random_tensor(rng, t.shape(), t.repr(), t.units()));
    const auto objective = [&](const Predictions& p) {
      double s = 0;
      for (std::size_t k = 0; k < p.cls.size(); ++k) s += oracle::dot(p.cls[k].data, w.cls[k].data);
      for (std::size_t k = 0; k < p.box.size(); ++k) s += oracle::dot(p.box[k].data, w.box[k].data);
      for (std::size_t k = 0; k < p.masks.size(); ++k) s += oracle::dot(p.masks[k].data(), w.masks[k].data());
      return s;
    };
    Detector::Cache cache;
    det.forward(image, &cache);
    auto params = det.params();
    nn::zero_grads(params);
    const auto gimg = det.backward(cache, w);
    const auto image_loss = [&](std::span<const double> p) {
      FeatureMap im = image;
      std::copy(p.begin(), p.end(), im.data.begin());
      return objective(det.forward(im));
    };
    std::vector<double> flat, analytic;
    for (auto* p : params) {
      flat.insert(flat.end(), p->value.begin(), p->value.end());
      analytic.insert(analytic.end(), p->grad.begin(), p->grad.end());
    }
    const auto param_loss = [&](std::span<const double> x) {
      std::size_t o = 0;
      std::vector<std::vector<double>> saved;
      for (auto* p : params) {
        saved.push_back(p->value);
        std::copy(x.begin() + o, x.begin() + o + p->value.size(), p->value.begin());
        o += p->value.size();
      }
      const double v = objective(det.forward(image));
      for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = saved[k];
      return v;
    };
    const double err = std::max(oracle::gradcheck(image_loss, image.data, gimg.data),
                                oracle::gradcheck_sampled(param_loss, flat, analytic, rng, 60));
    suite.add(std::string("detector ") + to_string(kind), err);
  }
}

void losses(Suite& suite, int i) {
  SplitMix64 rng(4500 + i);
  const int classes = 3;
  const std::vector<LevelGrid> grids{{0, 4, 4, Units(1, 1), 0.5, {3, 2}}, {1, 2, 2, Units(2, 2), 1.0, {3, 2}}};
  std::vector<Assignment> asg;
  for (const auto& w : enumerate_windows(grids)) {
    Assignment a;
    a.window = w;
    if (rng.uniform() < 0.3) {
      a.positive = true;
      a.category = rng.uniform_int(0, classes - 1);
      for (int k = 0; k < w.v * w.u; ++k) a.target_mask.push_back(rng.uniform() < 0.5 ? rng.uniform() : 1.0);
      for (double& d : a.target_box) d = rng.uniform(-1, 1);
    }
    asg.push_back(a);
  }
  std::vector<StructuredTensor> masks;
  std::vector<FeatureMap> cls, box;
  for (const auto& g : grids) {
    for (int v : g.window_sizes)
      masks.push_back(oracle::random_tensor(rng, {v, v, g.height, g.width}, Repr::Natural, g.units, -3, 3));
    cls.push_back(oracle::random_map(rng, 2 * classes, g.height, g.width, g.units.sigma_hw(), -3, 3));
    box.push_back(oracle::random_map(rng, 8, g.height, g.width, g.units.sigma_hw()));
  }

  std::vector<double> xm;
  for (const auto& t : masks) xm.insert(xm.end(), t.data().begin(), t.data().end());
  std::vector<double> gm;
  for (const auto& t : mask_loss(masks, asg).grad) gm.insert(gm.end(), t.data().begin(), t.data().end());
  const auto mask_fn = [&](std::span<const double> p) {
    auto m = masks;
    std::size_t o = 0;
    for (auto& t : m) {
      std::copy(p.begin() + o, p.begin() + o + t.data().size(), t.data().begin());
      o += t.data().size();
    }
    return mask_loss(m, asg).loss;
  };
  suite.add("mask loss", oracle::gradcheck(mask_fn, xm, gm));

  const auto flat = [](const std::vector<FeatureMap>& maps) {
    std::vector<double> out;
    for (const auto& m : maps) out.insert(out.end(), m.data.begin(), m.data.end());
    return out;
  };
  const auto unflat = [](std::span<const double> p, std::vector<FeatureMap> maps) {
    std::size_t o = 0;
    for (auto& m : maps) {
      std::copy(p.begin() + o, p.begin() + o + m.data.size(), m.data.begin());
      o += m.data.size();
    }
    return maps;
  };
  for (FocalVariant variant : {FocalVariant::Standard, FocalVariant::Star}) {
    const FocalOptions opt{3.0, 0.3, variant, 1.0};
    const auto fn = [&](std::span<const double> p) {
      return focal_cls_loss(unflat(p, cls), asg, classes, opt).loss;
    };
    suite.add(variant == FocalVariant::Star ? "focal loss star" : "focal loss",
              oracle::gradcheck(fn, flat(cls), flat(focal_cls_loss(cls, asg, classes, opt).grad)));
  }
  const auto box_fn = [&](std::span<const double> p) { return box_l1_loss(unflat(p, box), asg).loss; };
  suite.add("box l1 loss", oracle::gradcheck(box_fn, flat(box), flat(box_l1_loss(box, asg).grad)));
}

}  // namespace

Outcome gradient_suite() {
  Suite suite;
  for (int i = 0; i < kInstances; ++i) {
    transforms(suite, i);
    bipyramid(suite, i);
    layers(suite, i);
    mask_heads(suite, i);
    towers(suite, i);
    detectors(suite, i);
    losses(suite, i);
  }
  return {suite.pass(), suite.summary()};
}

}  // namespace tmask::acceptance
