#include "wscd/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "binary_io.hpp"
#include "wscd/rng.hpp"

namespace wscd {

void validate(const ModelConfig& cfg) {
  if (cfg.encoder_channels < 1 || cfg.feature_channels < 1 ||
      cfg.encoder_channels > 64 || cfg.feature_channels > 64) {
    throw std::invalid_argument("model channel counts must lie in [1, 64]");
  }
}

namespace {

constexpr int kImageChannels = 3;
constexpr int kMaxChannels = 64;

std::size_t conv_weight_size(int cout, int cin) {
  return static_cast<std::size_t>(cout) * 9 * static_cast<std::size_t>(cin);
}

// The canonical weight layout is [oc][ky][kx][ic] (checkpoints, traversal).
// The hot loops instead run on a [ky][kx][ic][oc] copy so the innermost loop
// accumulates independent per-oc lanes, which auto-vectorizes without any
// reassociation flags; the transpose cost is a few hundred doubles per call.
std::vector<double> transpose_taps(const std::vector<double>& w, int cin, int cout) {
  std::vector<double> t(w.size());
  for (int oc = 0; oc < cout; ++oc) {
    for (int tap = 0; tap < 9; ++tap) {
      for (int ic = 0; ic < cin; ++ic) {
        t[(static_cast<std::size_t>(tap) * cin + ic) * cout + oc] =
            w[(static_cast<std::size_t>(oc) * 9 + tap) * cin + ic];
      }
    }
  }
  return t;
}

// 3x3 convolution, stride 1, zero padding; wt in [ky][kx][ic][oc] layout.
// Template arguments pin the channel counts at compile time for the common
// configurations so the lane loops fully unroll; 0 means runtime-sized.
template <int CIN = 0, int COUT = 0>
void conv3x3_impl(Dim2 d, int cin_rt, int cout_rt, const double* __restrict in,
                  const double* __restrict wt, const double* __restrict b,
                  double* __restrict out) {
  const int cin = CIN > 0 ? CIN : cin_rt;
  const int cout = COUT > 0 ? COUT : cout_rt;
  constexpr int kAcc = COUT > 0 ? COUT : kMaxChannels;
  const int h = d.height;
  const int wd = d.width;
  for (int y = 0; y < h; ++y) {
    const int ky0 = y > 0 ? 0 : 1;
    const int ky1 = y < h - 1 ? 2 : 1;
    for (int x = 0; x < wd; ++x) {
      const int kx0 = x > 0 ? 0 : 1;
      const int kx1 = x < wd - 1 ? 2 : 1;
      double acc[kAcc];
      for (int oc = 0; oc < cout; ++oc) acc[oc] = b[oc];
      for (int ky = ky0; ky <= ky1; ++ky) {
        for (int kx = kx0; kx <= kx1; ++kx) {
          const double* __restrict px =
              in + (static_cast<std::size_t>(y + ky - 1) * wd + (x + kx - 1)) * cin;
          const double* __restrict w0 =
              wt + static_cast<std::size_t>(ky * 3 + kx) * cin * cout;
          for (int ic = 0; ic < cin; ++ic) {
            const double v = px[ic];
            const double* __restrict wrow = w0 + static_cast<std::size_t>(ic) * cout;
            for (int oc = 0; oc < cout; ++oc) acc[oc] += wrow[oc] * v;
          }
        }
      }
      double* __restrict o = out + (static_cast<std::size_t>(y) * wd + x) * cout;
      for (int oc = 0; oc < cout; ++oc) o[oc] = acc[oc];
    }
  }
}

void conv3x3(Dim2 d, int cin, int cout, const double* in, const double* wt,
             const double* b, double* out) {
  if (cin == 3 && cout == 8) conv3x3_impl<3, 8>(d, cin, cout, in, wt, b, out);
  else if (cin == 8 && cout == 8) conv3x3_impl<8, 8>(d, cin, cout, in, wt, b, out);
  else if (cin == 3 && cout == 16) conv3x3_impl<3, 16>(d, cin, cout, in, wt, b, out);
  else if (cin == 16 && cout == 16) conv3x3_impl<16, 16>(d, cin, cout, in, wt, b, out);
  else conv3x3_impl<>(d, cin, cout, in, wt, b, out);
}

// Accumulates bias gradients, weight gradients into a [ky][kx][ic][oc]
// scratch (transposed back by the caller), and, when din is non-null, the
// input gradient using the canonical weights.
template <int CIN = 0, int COUT = 0>
void conv3x3_backward_impl(Dim2 d, int cin_rt, int cout_rt, const double* __restrict in,
                           const double* __restrict w, const double* __restrict dout,
                           double* __restrict dw_t, double* __restrict db,
                           double* __restrict din) {
  const int cin = CIN > 0 ? CIN : cin_rt;
  const int cout = COUT > 0 ? COUT : cout_rt;
  const int h = d.height;
  const int wd = d.width;
  for (int y = 0; y < h; ++y) {
    const int ky0 = y > 0 ? 0 : 1;
    const int ky1 = y < h - 1 ? 2 : 1;
    for (int x = 0; x < wd; ++x) {
      const int kx0 = x > 0 ? 0 : 1;
      const int kx1 = x < wd - 1 ? 2 : 1;
      const double* go = dout + (static_cast<std::size_t>(y) * wd + x) * cout;
      for (int oc = 0; oc < cout; ++oc) db[oc] += go[oc];
      for (int ky = ky0; ky <= ky1; ++ky) {
        for (int kx = kx0; kx <= kx1; ++kx) {
          const std::size_t base_in =
              (static_cast<std::size_t>(y + ky - 1) * wd + (x + kx - 1)) * cin;
          const double* __restrict px = in + base_in;
          const std::size_t tap = static_cast<std::size_t>(ky * 3 + kx);
          double* __restrict d0 = dw_t + tap * cin * cout;
          for (int ic = 0; ic < cin; ++ic) {
            const double v = px[ic];
            double* __restrict drow = d0 + static_cast<std::size_t>(ic) * cout;
            for (int oc = 0; oc < cout; ++oc) drow[oc] += go[oc] * v;
          }
          if (din != nullptr) {
            double* __restrict dpx = din + base_in;
            for (int oc = 0; oc < cout; ++oc) {
              const double g = go[oc];
              const double* __restrict wrow = w + (static_cast<std::size_t>(oc) * 9 + tap) * cin;
              for (int ic = 0; ic < cin; ++ic) dpx[ic] += wrow[ic] * g;
            }
          }
        }
      }
    }
  }
}

void conv3x3_backward(Dim2 d, int cin, int cout, const double* in, const double* w,
                      const double* dout, double* dw_t, double* db, double* din) {
  if (cin == 3 && cout == 8) {
    conv3x3_backward_impl<3, 8>(d, cin, cout, in, w, dout, dw_t, db, din);
  } else if (cin == 8 && cout == 8) {
    conv3x3_backward_impl<8, 8>(d, cin, cout, in, w, dout, dw_t, db, din);
  } else if (cin == 3 && cout == 16) {
    conv3x3_backward_impl<3, 16>(d, cin, cout, in, w, dout, dw_t, db, din);
  } else if (cin == 16 && cout == 16) {
    conv3x3_backward_impl<16, 16>(d, cin, cout, in, w, dout, dw_t, db, din);
  } else {
    conv3x3_backward_impl<>(d, cin, cout, in, w, dout, dw_t, db, din);
  }
}

void add_transposed_back(const std::vector<double>& dw_t, int cin, int cout,
                         std::vector<double>& dw) {
  for (int oc = 0; oc < cout; ++oc) {
    for (int tap = 0; tap < 9; ++tap) {
      for (int ic = 0; ic < cin; ++ic) {
        dw[(static_cast<std::size_t>(oc) * 9 + tap) * cin + ic] +=
            dw_t[(static_cast<std::size_t>(tap) * cin + ic) * cout + oc];
      }
    }
  }
}

void relu(const std::vector<double>& pre, std::vector<double>& act) {
  act.resize(pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i) act[i] = pre[i] > 0.0 ? pre[i] : 0.0;
}

// Transposed weight copies shared by both temporal branches of one call.
struct ConvScratch {
  std::vector<double> conv1_wt, conv2_wt;
};

ConvScratch make_scratch(const ModelParams& p) {
  const int c = p.cfg.encoder_channels;
  return ConvScratch{transpose_taps(p.conv1_w, kImageChannels, c),
                     transpose_taps(p.conv2_w, c, c)};
}

EncoderTrace encode(const ModelParams& p, const ConvScratch& scratch, const FeatureMap& x) {
  const Dim2 d = x.dims();
  const int c = p.cfg.encoder_channels;
  EncoderTrace t;
  t.conv1_pre.assign(d.pixel_count() * static_cast<std::size_t>(c), 0.0);
  conv3x3(d, kImageChannels, c, x.values().data(), scratch.conv1_wt.data(),
          p.conv1_b.data(), t.conv1_pre.data());
  relu(t.conv1_pre, t.conv1_act);
  t.conv2_pre.assign(t.conv1_pre.size(), 0.0);
  conv3x3(d, c, c, t.conv1_act.data(), scratch.conv2_wt.data(), p.conv2_b.data(),
          t.conv2_pre.data());
  relu(t.conv2_pre, t.conv2_act);
  return t;
}

void encoder_backward(const ModelParams& p, const FeatureMap& x, const EncoderTrace& t,
                      const std::vector<double>& dact, ModelParams& g,
                      std::vector<double>& dw1_t, std::vector<double>& dw2_t) {
  const Dim2 d = x.dims();
  const int c = p.cfg.encoder_channels;
  std::vector<double> dz2(dact.size());
  for (std::size_t i = 0; i < dact.size(); ++i) {
    dz2[i] = t.conv2_pre[i] > 0.0 ? dact[i] : 0.0;
  }
  std::vector<double> da1(dact.size(), 0.0);
  conv3x3_backward(d, c, c, t.conv1_act.data(), p.conv2_w.data(), dz2.data(),
                   dw2_t.data(), g.conv2_b.data(), da1.data());
  std::vector<double> dz1(da1.size());
  for (std::size_t i = 0; i < da1.size(); ++i) {
    dz1[i] = t.conv1_pre[i] > 0.0 ? da1[i] : 0.0;
  }
  conv3x3_backward(d, kImageChannels, c, x.values().data(), p.conv1_w.data(), dz1.data(),
                   dw1_t.data(), g.conv1_b.data(), nullptr);
}

void require_shapes(const ModelParams& p) {
  validate(p.cfg);
  const auto c = p.cfg.encoder_channels;
  const auto d = p.cfg.feature_channels;
  const bool ok = p.conv1_w.size() == conv_weight_size(c, kImageChannels) &&
                  p.conv1_b.size() == static_cast<std::size_t>(c) &&
                  p.conv2_w.size() == conv_weight_size(c, c) &&
                  p.conv2_b.size() == static_cast<std::size_t>(c) &&
                  p.head_w.size() == static_cast<std::size_t>(d) * c &&
                  p.head_b.size() == static_cast<std::size_t>(d) &&
                  p.cls_w.size() == static_cast<std::size_t>(d);
  if (!ok) throw std::invalid_argument("model parameter shapes do not match config");
}

struct LayerSpec {
  const char* name;
  std::vector<int> shape;
};

std::vector<LayerSpec> layer_specs(const ModelConfig& cfg) {
  const int c = cfg.encoder_channels;
  const int d = cfg.feature_channels;
  return {
      {"conv1_weight", {c, 3, 3, kImageChannels}},
      {"conv1_bias", {c}},
      {"conv2_weight", {c, 3, 3, c}},
      {"conv2_bias", {c}},
      {"head_weight", {d, c}},
      {"head_bias", {d}},
      {"classifier_weight", {d}},
      {"classifier_bias", {1}},
  };
}

template <typename Params, typename Fn>
void visit_vectors(Params& p, Fn&& fn) {
  fn(p.conv1_w);
  fn(p.conv1_b);
  fn(p.conv2_w);
  fn(p.conv2_b);
  fn(p.head_w);
  fn(p.head_b);
  fn(p.cls_w);
}

ModelParams zero_params(const ModelConfig& cfg) {
  validate(cfg);
  const int c = cfg.encoder_channels;
  const int d = cfg.feature_channels;
  ModelParams p;
  p.cfg = cfg;
  p.conv1_w.assign(conv_weight_size(c, kImageChannels), 0.0);
  p.conv1_b.assign(static_cast<std::size_t>(c), 0.0);
  p.conv2_w.assign(conv_weight_size(c, c), 0.0);
  p.conv2_b.assign(static_cast<std::size_t>(c), 0.0);
  p.head_w.assign(static_cast<std::size_t>(d) * c, 0.0);
  p.head_b.assign(static_cast<std::size_t>(d), 0.0);
  p.cls_w.assign(static_cast<std::size_t>(d), 0.0);
  p.cls_b = 0.0;
  return p;
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  const int c = cfg.encoder_channels;
  const int d = cfg.feature_channels;
  Rng rng(seed);
  ModelParams p;
  p.cfg = cfg;
  auto fill = [&rng](std::vector<double>& v, std::size_t n, double sd) {
    v.resize(n);
    for (auto& x : v) x = rng.normal(0.0, sd);
  };
  fill(p.conv1_w, conv_weight_size(c, kImageChannels), std::sqrt(2.0 / (9.0 * kImageChannels)));
  p.conv1_b.assign(static_cast<std::size_t>(c), 0.0);
  fill(p.conv2_w, conv_weight_size(c, c), std::sqrt(2.0 / (9.0 * c)));
  p.conv2_b.assign(static_cast<std::size_t>(c), 0.0);
  fill(p.head_w, static_cast<std::size_t>(d) * c, std::sqrt(1.0 / c));
  p.head_b.assign(static_cast<std::size_t>(d), 0.0);
  fill(p.cls_w, static_cast<std::size_t>(d), std::sqrt(1.0 / d));
  p.cls_b = 0.0;
  return p;
}

ModelParams zeros_like(const ModelParams& params) {
  return zero_params(params.cfg);
}

ClassifierWeights classifier_weights(const ModelParams& params) {
  return ClassifierWeights{params.cls_w};
}

std::size_t param_count(const ModelConfig& cfg) {
  std::size_t n = 0;
  for (const auto& spec : layer_specs(cfg)) {
    std::size_t s = 1;
    for (int dim : spec.shape) s *= static_cast<std::size_t>(dim);
    n += s;
  }
  return n;
}

std::vector<double> flatten_params(const ModelParams& params) {
  require_shapes(params);
  std::vector<double> flat;
  flat.reserve(param_count(params.cfg));
  visit_vectors(params, [&flat](const std::vector<double>& v) {
    flat.insert(flat.end(), v.begin(), v.end());
  });
  flat.push_back(params.cls_b);
  return flat;
}

ModelParams params_from_flat(const ModelConfig& cfg, std::span<const double> flat) {
  validate(cfg);
  if (flat.size() != param_count(cfg)) {
    throw std::invalid_argument("flat parameter vector has wrong length");
  }
  ModelParams p = zero_params(cfg);
  std::size_t offset = 0;
  visit_vectors(p, [&](std::vector<double>& v) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(offset),
              flat.begin() + static_cast<std::ptrdiff_t>(offset + v.size()), v.begin());
    offset += v.size();
  });
  p.cls_b = flat[offset];
  return p;
}

ForwardPass forward(const ModelParams& params, const SceneSample& s) {
  require_shapes(params);
  const Dim2 d = s.x_t1.dims();
  if (!(d == s.x_t2.dims())) {
    throw std::invalid_argument("forward: bi-temporal image dimensions differ");
  }
  if (s.x_t1.channels() != kImageChannels || s.x_t2.channels() != kImageChannels) {
    throw std::invalid_argument("forward: images must have 3 channels");
  }
  if (d.height < 3 || d.width < 3) {
    throw std::invalid_argument("forward: images below the 3x3 kernel support");
  }
  const int c = params.cfg.encoder_channels;
  const int fd = params.cfg.feature_channels;
  const std::size_t hw = d.pixel_count();

  const ConvScratch scratch = make_scratch(params);
  EncoderTrace t1 = encode(params, scratch, s.x_t1);
  EncoderTrace t2 = encode(params, scratch, s.x_t2);

  std::vector<double> diff(hw * static_cast<std::size_t>(c));
  for (std::size_t i = 0; i < diff.size(); ++i) {
    diff[i] = std::abs(t1.conv2_act[i] - t2.conv2_act[i]);
  }

  // Head weights transposed to [ic][od] for the same lane-parallel reason as
  // the convolutions.
  std::vector<double> head_wt(params.head_w.size());
  for (int od = 0; od < fd; ++od) {
    for (int ic = 0; ic < c; ++ic) {
      head_wt[static_cast<std::size_t>(ic) * fd + od] =
          params.head_w[static_cast<std::size_t>(od) * c + ic];
    }
  }
  std::vector<double> feat(hw * static_cast<std::size_t>(fd));
  for (std::size_t i = 0; i < hw; ++i) {
    const double* in = diff.data() + i * static_cast<std::size_t>(c);
    double* out = feat.data() + i * static_cast<std::size_t>(fd);
    for (int od = 0; od < fd; ++od) out[od] = params.head_b[static_cast<std::size_t>(od)];
    for (int ic = 0; ic < c; ++ic) {
      const double v = in[ic];
      const double* wrow = head_wt.data() + static_cast<std::size_t>(ic) * fd;
      for (int od = 0; od < fd; ++od) out[od] += wrow[od] * v;
    }
  }

  std::vector<double> pooled(static_cast<std::size_t>(fd), 0.0);
  for (std::size_t i = 0; i < hw; ++i) {
    const double* f = feat.data() + i * static_cast<std::size_t>(fd);
    for (int od = 0; od < fd; ++od) pooled[static_cast<std::size_t>(od)] += f[od];
  }
  const double inv_hw = 1.0 / static_cast<double>(hw);
  for (auto& v : pooled) v *= inv_hw;

  double logit = params.cls_b;
  for (int od = 0; od < fd; ++od) {
    logit += pooled[static_cast<std::size_t>(od)] * params.cls_w[static_cast<std::size_t>(od)];
  }

  return ForwardPass{FeatureMap(d, fd, std::move(feat)), logit,
                     std::move(t1), std::move(t2), std::move(diff), std::move(pooled)};
}

BceResult classification_loss(double logit, int y_cls) {
  if (y_cls != 0 && y_cls != 1) {
    throw std::invalid_argument("scene label must be 0 or 1");
  }
  const double z = logit;
  const double y = static_cast<double>(y_cls);
  const double loss = (z > 0.0 ? z : 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return BceResult{loss, sig - y};
}

ModelParams backward(const ModelParams& params, const SceneSample& s,
                     const ForwardPass& fp, double dlogit,
                     std::span<const double> dfeatures) {
  require_shapes(params);
  const Dim2 d = s.x_t1.dims();
  const int c = params.cfg.encoder_channels;
  const int fd = params.cfg.feature_channels;
  const std::size_t hw = d.pixel_count();
  if (!dfeatures.empty() && dfeatures.size() != hw * static_cast<std::size_t>(fd)) {
    throw std::invalid_argument("backward: dfeatures size does not match the feature map");
  }
  if (fp.diff.size() != hw * static_cast<std::size_t>(c)) {
    throw std::invalid_argument("backward: forward pass does not match the sample");
  }

  ModelParams g = zeros_like(params);

  for (int od = 0; od < fd; ++od) {
    g.cls_w[static_cast<std::size_t>(od)] = dlogit * fp.pooled[static_cast<std::size_t>(od)];
  }
  g.cls_b = dlogit;

  // Feature gradient: external injection plus the pooled classifier path.
  const double inv_hw = 1.0 / static_cast<double>(hw);
  std::vector<double> dfeat(hw * static_cast<std::size_t>(fd));
  for (std::size_t i = 0; i < hw; ++i) {
    double* out = dfeat.data() + i * static_cast<std::size_t>(fd);
    const double* ext =
        dfeatures.empty() ? nullptr : dfeatures.data() + i * static_cast<std::size_t>(fd);
    for (int od = 0; od < fd; ++od) {
      out[od] = (ext != nullptr ? ext[od] : 0.0) +
                dlogit * params.cls_w[static_cast<std::size_t>(od)] * inv_hw;
    }
  }

  std::vector<double> ddiff(hw * static_cast<std::size_t>(c), 0.0);
  for (std::size_t i = 0; i < hw; ++i) {
    const double* df = dfeat.data() + i * static_cast<std::size_t>(fd);
    const double* in = fp.diff.data() + i * static_cast<std::size_t>(c);
    double* dd = ddiff.data() + i * static_cast<std::size_t>(c);
    for (int od = 0; od < fd; ++od) {
      const double go = df[od];
      g.head_b[static_cast<std::size_t>(od)] += go;
      double* dwo = g.head_w.data() + static_cast<std::size_t>(od) * c;
      const double* wo = params.head_w.data() + static_cast<std::size_t>(od) * c;
      for (int ic = 0; ic < c; ++ic) {
        dwo[ic] += go * in[ic];
        dd[ic] += go * wo[ic];
      }
    }
  }

  std::vector<double> de1(ddiff.size());
  std::vector<double> de2(ddiff.size());
  for (std::size_t i = 0; i < ddiff.size(); ++i) {
    const double a = fp.t1.conv2_act[i];
    const double b = fp.t2.conv2_act[i];
    const double sgn = a > b ? 1.0 : (a < b ? -1.0 : 0.0);
    de1[i] = sgn * ddiff[i];
    de2[i] = -sgn * ddiff[i];
  }
  std::vector<double> dw1_t(g.conv1_w.size(), 0.0);
  std::vector<double> dw2_t(g.conv2_w.size(), 0.0);
  encoder_backward(params, s.x_t1, fp.t1, de1, g, dw1_t, dw2_t);
  encoder_backward(params, s.x_t2, fp.t2, de2, g, dw1_t, dw2_t);
  add_transposed_back(dw1_t, kImageChannels, c, g.conv1_w);
  add_transposed_back(dw2_t, c, c, g.conv2_w);
  return g;
}

void sgd_step(ModelParams& params, const ModelParams& grads, double lr) {
  require_shapes(params);
  if (!(lr > 0.0)) {
    throw std::invalid_argument("learning rate must be positive");
  }
  if (!(params.cfg.encoder_channels == grads.cfg.encoder_channels &&
        params.cfg.feature_channels == grads.cfg.feature_channels)) {
    throw std::invalid_argument("sgd_step: gradient config mismatch");
  }
  bool finite = std::isfinite(grads.cls_b);
  visit_vectors(grads, [&finite](const std::vector<double>& v) {
    for (double x : v) finite = finite && std::isfinite(x);
  });
  if (!finite) {
    throw std::runtime_error("sgd_step: non-finite gradient");
  }

  auto update = [lr](std::vector<double>& p, const std::vector<double>& g) {
    if (p.size() != g.size()) throw std::invalid_argument("sgd_step: shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
  };
  update(params.conv1_w, grads.conv1_w);
  update(params.conv1_b, grads.conv1_b);
  update(params.conv2_w, grads.conv2_w);
  update(params.conv2_b, grads.conv2_b);
  update(params.head_w, grads.head_w);
  update(params.head_b, grads.head_b);
  update(params.cls_w, grads.cls_w);
  params.cls_b -= lr * grads.cls_b;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  require_shapes(params);
  {
    std::ofstream manifest(path.string() + ".manifest");
    if (!manifest) {
      throw std::runtime_error("cannot write manifest for " + path.string());
    }
    for (const auto& spec : layer_specs(params.cfg)) {
      manifest << spec.name;
      for (int dim : spec.shape) manifest << ' ' << dim;
      manifest << '\n';
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  for (double v : flatten_params(params)) detail::put_f64_le(out, v);
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  validate(expected);
  std::ifstream manifest(path.string() + ".manifest");
  if (!manifest) {
    throw std::runtime_error("missing checkpoint manifest " + path.string() + ".manifest");
  }
  const auto specs = layer_specs(expected);
  std::string line;
  std::size_t idx = 0;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    if (idx >= specs.size()) {
      throw std::runtime_error("checkpoint manifest has extra layers");
    }
    std::istringstream ls(line);
    std::string name;
    ls >> name;
    std::vector<int> shape;
    int dim = 0;
    while (ls >> dim) shape.push_back(dim);
    if (name != specs[idx].name || shape != specs[idx].shape) {
      throw std::runtime_error("checkpoint layer '" + name +
                               "' does not match the expected model shape");
    }
    ++idx;
  }
  if (idx != specs.size()) {
    throw std::runtime_error("checkpoint manifest is missing layers");
  }

  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  std::vector<double> flat(param_count(expected));
  for (auto& v : flat) {
    v = detail::get_f64_le(in);
    if (!std::isfinite(v)) {
      throw std::runtime_error("checkpoint contains a non-finite parameter");
    }
  }
  char extra = 0;
  if (in.read(&extra, 1); in.gcount() != 0) {
    throw std::runtime_error("checkpoint has trailing bytes");
  }
  return params_from_flat(expected, flat);
}

}  // namespace wscd
