#include "pmvc/ops.hpp"

#include <cmath>
#include <cstring>

#include "pmvc/error.hpp"
#include "pmvc/kernels.hpp"

namespace pmvc::nn {
namespace {

const kern::Table& K() { return kern::active(); }

int ceil_div(int a, int b) { return (a + b - 1) / b; }

struct ConvGeom {
  int ih, iw, ic;      // input (large side for deconv)
  int kh, kw, oc;      // kernel spatial, output channels
  int stride, dilation;
  int oh, ow;          // output spatial
  int pad_top, pad_left;
  int cols_k() const { return kh * kw * ic; }
  int cols_m() const { return oh * ow; }
};

ConvGeom make_geom(int ih, int iw, int ic, int kh, int kw, int oc, int stride,
                   int dilation) {
  ConvGeom g{ih, iw, ic, kh, kw, oc, stride, dilation, 0, 0, 0, 0};
  g.oh = ceil_div(ih, stride);
  g.ow = ceil_div(iw, stride);
  const int eff_kh = (kh - 1) * dilation + 1;
  const int eff_kw = (kw - 1) * dilation + 1;
  const int pad_h = std::max((g.oh - 1) * stride + eff_kh - ih, 0);
  const int pad_w = std::max((g.ow - 1) * stride + eff_kw - iw, 0);
  g.pad_top = pad_h / 2;
  g.pad_left = pad_w / 2;
  return g;
}

Tensor im2col(const Tensor& x, const ConvGeom& g) {
  Tensor cols({g.cols_m(), g.cols_k()});
  std::memset(cols.data(), 0, cols.size() * sizeof(float));
  const int ic = g.ic, kw = g.kw;
  const float* src = x.data();
  float* dst = cols.data();
  const std::size_t row_elems = static_cast<std::size_t>(g.iw) * ic;
  for (int oy = 0; oy < g.oh; ++oy) {
    const int iy0 = oy * g.stride - g.pad_top;
    for (int ox = 0; ox < g.ow; ++ox) {
      const int ix0 = ox * g.stride - g.pad_left;
      float* crow = dst + (static_cast<std::size_t>(oy) * g.ow + ox) * g.cols_k();
      for (int ky = 0; ky < g.kh; ++ky) {
        const int iy = iy0 + ky * g.dilation;
        if (iy < 0 || iy >= g.ih) continue;
        float* seg = crow + static_cast<std::size_t>(ky) * kw * ic;
        const float* srow = src + static_cast<std::size_t>(iy) * row_elems;
        if (g.dilation == 1 && ix0 >= 0 && ix0 + kw <= g.iw) {
          std::memcpy(seg, srow + static_cast<std::size_t>(ix0) * ic,
                      static_cast<std::size_t>(kw) * ic * sizeof(float));
        } else {
          for (int kx = 0; kx < kw; ++kx) {
            const int ix = ix0 + kx * g.dilation;
            if (ix < 0 || ix >= g.iw) continue;
            std::memcpy(seg + static_cast<std::size_t>(kx) * ic,
                        srow + static_cast<std::size_t>(ix) * ic,
                        static_cast<std::size_t>(ic) * sizeof(float));
          }
        }
      }
    }
  }
  return cols;
}

// Scatter-add of cols back onto the input geometry.
Tensor col2im(const Tensor& cols, const ConvGeom& g) {
  Tensor out({g.ih, g.iw, g.ic});
  const int ic = g.ic, kw = g.kw;
  float* dst = out.data();
  const float* src = cols.data();
  const std::size_t row_elems = static_cast<std::size_t>(g.iw) * ic;
  for (int oy = 0; oy < g.oh; ++oy) {
    const int iy0 = oy * g.stride - g.pad_top;
    for (int ox = 0; ox < g.ow; ++ox) {
      const int ix0 = ox * g.stride - g.pad_left;
      const float* crow = src + (static_cast<std::size_t>(oy) * g.ow + ox) * g.cols_k();
      for (int ky = 0; ky < g.kh; ++ky) {
        const int iy = iy0 + ky * g.dilation;
        if (iy < 0 || iy >= g.ih) continue;
        const float* seg = crow + static_cast<std::size_t>(ky) * kw * ic;
        float* drow = dst + static_cast<std::size_t>(iy) * row_elems;
        if (g.dilation == 1 && ix0 >= 0 && ix0 + kw <= g.iw) {
          float* d = drow + static_cast<std::size_t>(ix0) * ic;
          K().vadd(d, seg, d, static_cast<std::size_t>(kw) * ic);
        } else {
          for (int kx = 0; kx < kw; ++kx) {
            const int ix = ix0 + kx * g.dilation;
            if (ix < 0 || ix >= g.iw) continue;
            float* d = drow + static_cast<std::size_t>(ix) * ic;
            K().vadd(d, seg + static_cast<std::size_t>(kx) * ic, d,
                     static_cast<std::size_t>(ic));
          }
        }
      }
    }
  }
  return out;
}

void add_bias_rows(Tensor& t, const Tensor& bias) {
  const int c = t.dim(t.rank() - 1);
  require(bias.rank() == 1 && bias.dim(0) == c, ErrorKind::kDimension,
          "bias length must match output channels");
  const std::size_t rows = t.size() / static_cast<std::size_t>(c);
  for (std::size_t r = 0; r < rows; ++r)
    K().vadd(t.data() + r * c, bias.data(), t.data() + r * c,
             static_cast<std::size_t>(c));
}

Tensor bias_grad(const Tensor& g) {
  const int c = g.dim(g.rank() - 1);
  Tensor db({c});
  const std::size_t rows = g.size() / static_cast<std::size_t>(c);
  for (std::size_t r = 0; r < rows; ++r)
    K().vadd(db.data(), g.data() + r * c, db.data(), static_cast<std::size_t>(c));
  return db;
}

Tensor transposed(const Tensor& a) {
  Tensor t({a.dim(1), a.dim(0)});
  kern::transpose(a.dim(0), a.dim(1), a.data(), t.data());
  return t;
}

}  // namespace

TValue conv2d_raw(Tape& T, const TValue& x, const TValue& w, const TValue* bias,
                  int stride, int dilation) {
  require(x.t.rank() == 3 && w.t.rank() == 4, ErrorKind::kDimension,
          "conv2d expects rank-3 input and rank-4 weights");
  require(w.t.dim(2) == x.t.dim(2), ErrorKind::kDimension,
          "conv2d input channels mismatch: " + x.t.shape_str() + " vs " +
              w.t.shape_str());
  const ConvGeom g = make_geom(x.t.dim(0), x.t.dim(1), x.t.dim(2), w.t.dim(0),
                               w.t.dim(1), w.t.dim(3), stride, dilation);
  Tensor cols = im2col(x.t, g);
  Tensor out({g.oh, g.ow, g.oc});
  K().gemm(g.cols_m(), g.oc, g.cols_k(), cols.data(), g.cols_k(), w.t.data(),
           g.oc, out.data(), g.oc, false);
  if (bias) add_bias_rows(out, bias->t);

  const bool needs = T.needs(x) || T.needs(w) || (bias && T.needs(*bias));
  if (!T.recording() || !needs) return T.emit(std::move(out), false, nullptr);

  const int xid = x.id, wid = w.id, bid = bias ? bias->id : -1;
  Tensor xw = w.t;
  return T.emit(std::move(out), true,
                [g, cols, xw, xid, wid, bid](Tape& t, const Tensor& go) {
                  if (bid >= 0 && t.needs(bid)) t.accum(bid, bias_grad(go));
                  if (t.needs(wid)) {
                    Tensor colsT = transposed(cols);
                    Tensor dw({g.kh, g.kw, g.ic, g.oc});
                    K().gemm(g.cols_k(), g.oc, g.cols_m(), colsT.data(),
                             g.cols_m(), go.data(), g.oc, dw.data(), g.oc, false);
                    t.accum(wid, dw);
                  }
                  if (t.needs(xid)) {
                    Tensor wT({g.oc, g.cols_k()});
                    kern::transpose(g.cols_k(), g.oc, xw.data(), wT.data());
                    Tensor dcols({g.cols_m(), g.cols_k()});
                    K().gemm(g.cols_m(), g.cols_k(), g.oc, go.data(), g.oc,
                             wT.data(), g.cols_k(), dcols.data(), g.cols_k(),
                             false);
                    t.accum(xid, col2im(dcols, g));
                  }
                });
}

TValue deconv2d_raw(Tape& T, const TValue& x, const TValue& w, const TValue* bias,
                    int stride) {
  require(x.t.rank() == 3 && w.t.rank() == 4, ErrorKind::kDimension,
          "deconv2d expects rank-3 input and rank-4 weights");
  require(w.t.dim(3) == x.t.dim(2), ErrorKind::kDimension,
          "deconv2d input channels mismatch");
  const int cs = x.t.dim(2);            // small-side channels
  const int cl = w.t.dim(2);            // large-side channels
  const ConvGeom g = make_geom(x.t.dim(0) * stride, x.t.dim(1) * stride, cl,
                               w.t.dim(0), w.t.dim(1), cs, stride, 1);
  require(g.oh == x.t.dim(0) && g.ow == x.t.dim(1), ErrorKind::kContract,
          "deconv2d geometry mismatch");

  // w flat is [K x cs] for the adjoint conv (large -> small).
  Tensor wT({cs, g.cols_k()});
  kern::transpose(g.cols_k(), cs, w.t.data(), wT.data());
  Tensor tmp({g.cols_m(), g.cols_k()});
  K().gemm(g.cols_m(), g.cols_k(), cs, x.t.data(), cs, wT.data(), g.cols_k(),
           tmp.data(), g.cols_k(), false);
  Tensor out = col2im(tmp, g);
  if (bias) add_bias_rows(out, bias->t);

  const bool needs = T.needs(x) || T.needs(w) || (bias && T.needs(*bias));
  if (!T.recording() || !needs) return T.emit(std::move(out), false, nullptr);

  const int xid = x.id, wid = w.id, bid = bias ? bias->id : -1;
  Tensor xt = x.t, wt = w.t;
  return T.emit(std::move(out), true,
                [g, cs, xt, wt, xid, wid, bid](Tape& t, const Tensor& go) {
                  if (bid >= 0 && t.needs(bid)) t.accum(bid, bias_grad(go));
                  Tensor cols_g = im2col(go, g);
                  if (t.needs(wid)) {
                    Tensor colsT = transposed(cols_g);
                    Tensor dw(wt.shape());
                    K().gemm(g.cols_k(), cs, g.cols_m(), colsT.data(), g.cols_m(),
                             xt.data(), cs, dw.data(), cs, false);
                    t.accum(wid, dw);
                  }
                  if (t.needs(xid)) {
                    Tensor dx({g.oh, g.ow, cs});
                    K().gemm(g.cols_m(), cs, g.cols_k(), cols_g.data(),
                             g.cols_k(), wt.data(), cs, dx.data(), cs, false);
                    t.accum(xid, dx);
                  }
                });
}

TValue batchnorm(Tape& T, const TValue& x, const TValue& gamma, const TValue& beta,
                 Tensor& running_mean, Tensor& running_var, BnMode mode,
                 float momentum, float eps) {
  require(x.t.rank() == 3, ErrorKind::kDimension, "batchnorm expects rank-3 input");
  const int c = x.t.dim(2);
  require(gamma.t.size() == static_cast<std::size_t>(c) &&
              beta.t.size() == static_cast<std::size_t>(c) &&
              running_mean.size() == static_cast<std::size_t>(c) &&
              running_var.size() == static_cast<std::size_t>(c),
          ErrorKind::kDimension, "batchnorm parameter length mismatch");
  const std::size_t rows = x.t.size() / static_cast<std::size_t>(c);
  const double n = static_cast<double>(rows);

  std::vector<float> mean(static_cast<std::size_t>(c)), inv_std(static_cast<std::size_t>(c));
  if (mode == BnMode::kTrain) {
    std::vector<double> sum(static_cast<std::size_t>(c), 0.0),
        sumsq(static_cast<std::size_t>(c), 0.0);
    const float* p = x.t.data();
    for (std::size_t r = 0; r < rows; ++r, p += c)
      for (int j = 0; j < c; ++j) {
        sum[static_cast<std::size_t>(j)] += p[j];
        sumsq[static_cast<std::size_t>(j)] += static_cast<double>(p[j]) * p[j];
      }
    for (int j = 0; j < c; ++j) {
      const double mu = sum[static_cast<std::size_t>(j)] / n;
      const double var = std::max(sumsq[static_cast<std::size_t>(j)] / n - mu * mu, 0.0);
      mean[static_cast<std::size_t>(j)] = static_cast<float>(mu);
      inv_std[static_cast<std::size_t>(j)] =
          static_cast<float>(1.0 / std::sqrt(var + eps));
      running_mean.data()[j] = momentum * running_mean.data()[j] +
                               (1.0f - momentum) * static_cast<float>(mu);
      running_var.data()[j] = momentum * running_var.data()[j] +
                              (1.0f - momentum) * static_cast<float>(var);
    }
  } else {
    for (int j = 0; j < c; ++j) {
      mean[static_cast<std::size_t>(j)] = running_mean.data()[j];
      inv_std[static_cast<std::size_t>(j)] = static_cast<float>(
          1.0 / std::sqrt(static_cast<double>(running_var.data()[j]) + eps));
    }
  }

  Tensor xhat(x.t.shape());
  Tensor out(x.t.shape());
  {
    const float* p = x.t.data();
    float* ph = xhat.data();
    float* po = out.data();
    for (std::size_t r = 0; r < rows; ++r, p += c, ph += c, po += c)
      for (int j = 0; j < c; ++j) {
        const float h = (p[j] - mean[static_cast<std::size_t>(j)]) *
                        inv_std[static_cast<std::size_t>(j)];
        ph[j] = h;
        po[j] = gamma.t.data()[j] * h + beta.t.data()[j];
      }
  }

  const bool needs = T.needs(x) || T.needs(gamma) || T.needs(beta);
  if (!T.recording() || !needs) return T.emit(std::move(out), false, nullptr);

  const int xid = x.id, gid = gamma.id, bid = beta.id;
  Tensor gam = gamma.t;
  const bool train = mode == BnMode::kTrain;
  return T.emit(
      std::move(out), true,
      [xhat, gam, inv_std, xid, gid, bid, c, rows, n, train](Tape& t,
                                                             const Tensor& go) {
        if (t.needs(bid)) t.accum(bid, bias_grad(go));
        if (t.needs(gid)) {
          Tensor dg({c});
          const float* pg = go.data();
          const float* ph = xhat.data();
          for (std::size_t r = 0; r < rows; ++r, pg += c, ph += c)
            for (int j = 0; j < c; ++j) dg.data()[j] += pg[j] * ph[j];
          t.accum(gid, dg);
        }
        if (!t.needs(xid)) return;
        Tensor dx(xhat.shape());
        if (!train) {
          const float* pg = go.data();
          float* pd = dx.data();
          for (std::size_t r = 0; r < rows; ++r, pg += c, pd += c)
            for (int j = 0; j < c; ++j)
              pd[j] = pg[j] * gam.data()[j] * inv_std[static_cast<std::size_t>(j)];
          t.accum(xid, dx);
          return;
        }
        std::vector<double> s1(static_cast<std::size_t>(c), 0.0),
            s2(static_cast<std::size_t>(c), 0.0);
        {
          const float* pg = go.data();
          const float* ph = xhat.data();
          for (std::size_t r = 0; r < rows; ++r, pg += c, ph += c)
            for (int j = 0; j < c; ++j) {
              const double dxh = static_cast<double>(pg[j]) * gam.data()[j];
              s1[static_cast<std::size_t>(j)] += dxh;
              s2[static_cast<std::size_t>(j)] += dxh * ph[j];
            }
        }
        const float* pg = go.data();
        const float* ph = xhat.data();
        float* pd = dx.data();
        for (std::size_t r = 0; r < rows; ++r, pg += c, ph += c, pd += c)
          for (int j = 0; j < c; ++j) {
            const double dxh = static_cast<double>(pg[j]) * gam.data()[j];
            pd[j] = static_cast<float>(
                inv_std[static_cast<std::size_t>(j)] *
                (dxh - s1[static_cast<std::size_t>(j)] / n -
                 ph[j] * s2[static_cast<std::size_t>(j)] / n));
          }
        t.accum(xid, dx);
      });
}

TValue relu(Tape& T, const TValue& x) {
  Tensor out(x.t.shape());
  K().relu(x.t.data(), out.data(), x.t.size());
  if (!T.recording() || !T.needs(x)) return T.emit(std::move(out), false, nullptr);
  const int xid = x.id;
  Tensor xt = x.t;
  return T.emit(std::move(out), true, [xt, xid](Tape& t, const Tensor& go) {
    Tensor dx(xt.shape());
    K().relu_bwd(xt.data(), go.data(), dx.data(), xt.size());
    t.accum(xid, dx);
  });
}

TValue tanh_op(Tape& T, const TValue& x) {
  Tensor out(x.t.shape());
  for (std::size_t i = 0; i < x.t.size(); ++i)
    out.data()[i] = std::tanh(x.t.data()[i]);
  if (!T.recording() || !T.needs(x)) return T.emit(std::move(out), false, nullptr);
  const int xid = x.id;
  Tensor y = out;
  return T.emit(std::move(out), true, [y, xid](Tape& t, const Tensor& go) {
    Tensor dx(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i)
      dx.data()[i] = go.data()[i] * (1.0f - y.data()[i] * y.data()[i]);
    t.accum(xid, dx);
  });
}

TValue sigmoid_op(Tape& T, const TValue& x) {
  Tensor out(x.t.shape());
  for (std::size_t i = 0; i < x.t.size(); ++i)
    out.data()[i] = 1.0f / (1.0f + std::exp(-x.t.data()[i]));
  if (!T.recording() || !T.needs(x)) return T.emit(std::move(out), false, nullptr);
  const int xid = x.id;
  Tensor y = out;
  return T.emit(std::move(out), true, [y, xid](Tape& t, const Tensor& go) {
    Tensor dx(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i)
      dx.data()[i] = go.data()[i] * y.data()[i] * (1.0f - y.data()[i]);
    t.accum(xid, dx);
  });
}

TValue activate(Tape& T, const TValue& x, Act act) {
  switch (act) {
    case Act::kNone: return x;
    case Act::kRelu: return relu(T, x);
    case Act::kTanh: return tanh_op(T, x);
    case Act::kSigmoid: return sigmoid_op(T, x);
  }
  fail(ErrorKind::kContract, "unreachable activation");
}

TValue add(Tape& T, const TValue& a, const TValue& b) {
  require(a.t.same_shape(b.t), ErrorKind::kDimension, "add shape mismatch");
  Tensor out(a.t.shape());
  K().vadd(a.t.data(), b.t.data(), out.data(), out.size());
  const bool needs = T.needs(a) || T.needs(b);
  if (!T.recording() || !needs) return T.emit(std::move(out), false, nullptr);
  const int aid = a.id, bid = b.id;
  return T.emit(std::move(out), true, [aid, bid](Tape& t, const Tensor& go) {
    t.accum(aid, go);
    t.accum(bid, go);
  });
}

TValue sub(Tape& T, const TValue& a, const TValue& b) {
  require(a.t.same_shape(b.t), ErrorKind::kDimension, "sub shape mismatch");
  Tensor out(a.t.shape());
  K().vsub(a.t.data(), b.t.data(), out.data(), out.size());
  const bool needs = T.needs(a) || T.needs(b);
  if (!T.recording() || !needs) return T.emit(std::move(out), false, nullptr);
  const int aid = a.id, bid = b.id;
  return T.emit(std::move(out), true, [aid, bid](Tape& t, const Tensor& go) {
    t.accum(aid, go);
    if (t.needs(bid)) {
      Tensor neg(go.shape());
      K().vscale(-1.0f, go.data(), neg.data(), go.size());
      t.accum(bid, neg);
    }
  });
}

TValue mul(Tape& T, const TValue& a, const TValue& b) {
  require(a.t.same_shape(b.t), ErrorKind::kDimension, "mul shape mismatch");
  Tensor out(a.t.shape());
  K().vmul(a.t.data(), b.t.data(), out.data(), out.size());
  const bool needs = T.needs(a) || T.needs(b);
  if (!T.recording() || !needs) return T.emit(std::move(out), false, nullptr);
  const int aid = a.id, bid = b.id;
  Tensor at = a.t, bt = b.t;
  return T.emit(std::move(out), true, [at, bt, aid, bid](Tape& t, const Tensor& go) {
    if (t.needs(aid)) {
      Tensor da(go.shape());
      K().vmul(go.data(), bt.data(), da.data(), go.size());
      t.accum(aid, da);
    }
    if (t.needs(bid)) {
      Tensor db(go.shape());
      K().vmul(go.data(), at.data(), db.data(), go.size());
      t.accum(bid, db);
    }
  });
}

TValue scale(Tape& T, const TValue& x, float s) {
  Tensor out(x.t.shape());
  K().vscale(s, x.t.data(), out.data(), out.size());
  if (!T.recording() || !T.needs(x)) return T.emit(std::move(out), false, nullptr);
  const int xid = x.id;
  return T.emit(std::move(out), true, [xid, s](Tape& t, const Tensor& go) {
    Tensor dx(go.shape());
    K().vscale(s, go.data(), dx.data(), go.size());
    t.accum(xid, dx);
  });
}

TValue concat_ch(Tape& T, const std::vector<TValue>& parts) {
  require(!parts.empty(), ErrorKind::kDimension, "concat of zero tensors");
  const int h = parts[0].t.dim(0), w = parts[0].t.dim(1);
  int total_c = 0;
  for (const TValue& p : parts) {
    require(p.t.rank() == 3 && p.t.dim(0) == h && p.t.dim(1) == w,
            ErrorKind::kDimension, "concat spatial mismatch");
    total_c += p.t.dim(2);
  }
  Tensor out({h, w, total_c});
  const std::size_t pixels = static_cast<std::size_t>(h) * w;
  std::size_t base = 0;
  for (const TValue& p : parts) {
    const int c = p.t.dim(2);
    for (std::size_t px = 0; px < pixels; ++px)
      std::memcpy(out.data() + px * total_c + base,
                  p.t.data() + px * static_cast<std::size_t>(c),
                  static_cast<std::size_t>(c) * sizeof(float));
    base += static_cast<std::size_t>(c);
  }

  bool needs = false;
  for (const TValue& p : parts) needs = needs || T.needs(p);
  if (!T.recording() || !needs) return T.emit(std::move(out), false, nullptr);

  std::vector<int> ids;
  std::vector<int> chans;
  for (const TValue& p : parts) {
    ids.push_back(p.id);
    chans.push_back(p.t.dim(2));
  }
  return T.emit(std::move(out), true,
                [ids, chans, h, w, total_c](Tape& t, const Tensor& go) {
                  const std::size_t pixels = static_cast<std::size_t>(h) * w;
                  std::size_t base = 0;
                  for (std::size_t k = 0; k < ids.size(); ++k) {
                    const int c = chans[k];
                    if (t.needs(ids[k])) {
                      Tensor dp({h, w, c});
                      for (std::size_t px = 0; px < pixels; ++px)
                        std::memcpy(dp.data() + px * static_cast<std::size_t>(c),
                                    go.data() + px * total_c + base,
                                    static_cast<std::size_t>(c) * sizeof(float));
                      t.accum(ids[k], dp);
                    }
                    base += static_cast<std::size_t>(c);
                  }
                });
}

TValue slice_ch(Tape& T, const TValue& x, int c0, int c1) {
  require(x.t.rank() == 3 && c0 >= 0 && c1 > c0 && c1 <= x.t.dim(2),
          ErrorKind::kDimension, "bad channel slice");
  const int h = x.t.dim(0), w = x.t.dim(1), c = x.t.dim(2), oc = c1 - c0;
  Tensor out({h, w, oc});
  const std::size_t pixels = static_cast<std::size_t>(h) * w;
  for (std::size_t px = 0; px < pixels; ++px)
    std::memcpy(out.data() + px * static_cast<std::size_t>(oc),
                x.t.data() + px * static_cast<std::size_t>(c) + c0,
                static_cast<std::size_t>(oc) * sizeof(float));
  if (!T.recording() || !T.needs(x)) return T.emit(std::move(out), false, nullptr);
  const int xid = x.id;
  return T.emit(std::move(out), true,
                [xid, h, w, c, c0, oc](Tape& t, const Tensor& go) {
                  Tensor dx({h, w, c});
                  const std::size_t pixels = static_cast<std::size_t>(h) * w;
                  for (std::size_t px = 0; px < pixels; ++px)
                    std::memcpy(dx.data() + px * static_cast<std::size_t>(c) + c0,
                                go.data() + px * static_cast<std::size_t>(oc),
                                static_cast<std::size_t>(oc) * sizeof(float));
                  t.accum(xid, dx);
                });
}

TValue crop(Tape& T, const TValue& x, int y0, int x0, int h, int w) {
  require(x.t.rank() == 3 && y0 >= 0 && x0 >= 0 && y0 + h <= x.t.dim(0) &&
              x0 + w <= x.t.dim(1),
          ErrorKind::kDimension, "crop out of bounds");
  const int c = x.t.dim(2);
  Tensor out({h, w, c});
  for (int y = 0; y < h; ++y)
    std::memcpy(out.data() + static_cast<std::size_t>(y) * w * c,
                x.t.data() +
                    ((static_cast<std::size_t>(y0 + y) * x.t.dim(1)) + x0) * c,
                static_cast<std::size_t>(w) * c * sizeof(float));
  if (!T.recording() || !T.needs(x)) return T.emit(std::move(out), false, nullptr);
  const int xid = x.id;
  const int ih = x.t.dim(0), iw = x.t.dim(1);
  return T.emit(std::move(out), true,
                [xid, ih, iw, c, y0, x0, h, w](Tape& t, const Tensor& go) {
                  Tensor dx({ih, iw, c});
                  for (int y = 0; y < h; ++y)
                    std::memcpy(dx.data() +
                                    ((static_cast<std::size_t>(y0 + y) * iw) + x0) * c,
                                go.data() + static_cast<std::size_t>(y) * w * c,
                                static_cast<std::size_t>(w) * c * sizeof(float));
                  t.accum(xid, dx);
                });
}

TValue avg_pool(Tape& T, const TValue& x, int size, int stride) {
  require(x.t.rank() == 3 && size >= 1 && stride >= 1, ErrorKind::kDimension,
          "bad pooling arguments");
  const int ih = x.t.dim(0), iw = x.t.dim(1), c = x.t.dim(2);
  const int oh = ceil_div(ih, stride), ow = ceil_div(iw, stride);
  const int pad_h = std::max((oh - 1) * stride + size - ih, 0);
  const int pad_w = std::max((ow - 1) * stride + size - iw, 0);
  const int pt = pad_h / 2, pl = pad_w / 2;

  Tensor out({oh, ow, c});
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox) {
      const int y0 = std::max(oy * stride - pt, 0);
      const int y1 = std::min(oy * stride - pt + size, ih);
      const int x0 = std::max(ox * stride - pl, 0);
      const int x1 = std::min(ox * stride - pl + size, iw);
      const float inv = 1.0f / static_cast<float>((y1 - y0) * (x1 - x0));
      float* po = out.data() + (static_cast<std::size_t>(oy) * ow + ox) * c;
      for (int y = y0; y < y1; ++y)
        for (int xx = x0; xx < x1; ++xx) {
          const float* pi = x.t.data() + (static_cast<std::size_t>(y) * iw + xx) * c;
          for (int j = 0; j < c; ++j) po[j] += pi[j];
        }
      for (int j = 0; j < c; ++j) po[j] *= inv;
    }

  if (!T.recording() || !T.needs(x)) return T.emit(std::move(out), false, nullptr);
  const int xid = x.id;
  return T.emit(
      std::move(out), true,
      [xid, ih, iw, c, oh, ow, size, stride, pt, pl](Tape& t, const Tensor& go) {
        Tensor dx({ih, iw, c});
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox) {
            const int y0 = std::max(oy * stride - pt, 0);
            const int y1 = std::min(oy * stride - pt + size, ih);
            const int x0 = std::max(ox * stride - pl, 0);
            const int x1 = std::min(ox * stride - pl + size, iw);
            const float inv = 1.0f / static_cast<float>((y1 - y0) * (x1 - x0));
            const float* pg = go.data() + (static_cast<std::size_t>(oy) * ow + ox) * c;
            for (int y = y0; y < y1; ++y)
              for (int xx = x0; xx < x1; ++xx) {
                float* pd = dx.data() + (static_cast<std::size_t>(y) * iw + xx) * c;
                for (int j = 0; j < c; ++j) pd[j] += pg[j] * inv;
              }
          }
        t.accum(xid, dx);
      });
}

TValue mse(Tape& T, const TValue& a, const TValue& b) {
  require(a.t.same_shape(b.t), ErrorKind::kDimension, "mse shape mismatch");
  Tensor diff(a.t.shape());
  K().vsub(a.t.data(), b.t.data(), diff.data(), diff.size());
  const double n = static_cast<double>(diff.size());
  const double value = K().reduce_sumsq(diff.data(), diff.size()) / n;
  require(std::isfinite(value), ErrorKind::kContract, "non-finite loss value");
  Tensor out = Tensor::full({1}, static_cast<float>(value));
  const bool needs = T.needs(a) || T.needs(b);
  if (!T.recording() || !needs) return T.emit(std::move(out), false, nullptr);
  const int aid = a.id, bid = b.id;
  return T.emit(std::move(out), true, [diff, aid, bid, n](Tape& t, const Tensor& go) {
    const float s = static_cast<float>(2.0 / n) * go.data()[0];
    if (t.needs(aid)) {
      Tensor da(diff.shape());
      K().vscale(s, diff.data(), da.data(), diff.size());
      t.accum(aid, da);
    }
    if (t.needs(bid)) {
      Tensor db(diff.shape());
      K().vscale(-s, diff.data(), db.data(), diff.size());
      t.accum(bid, db);
    }
  });
}

TValue binarize(Tape& T, const TValue& x, bool stochastic, Rng* rng) {
  Tensor out(x.t.shape());
  const float* p = x.t.data();
  for (std::size_t i = 0; i < x.t.size(); ++i) {
    require(p[i] >= -1.0f - 1e-6f && p[i] <= 1.0f + 1e-6f, ErrorKind::kContract,
            "binarizer input outside [-1, 1]");
    if (stochastic) {
      require(rng != nullptr, ErrorKind::kContract, "stochastic binarize needs rng");
      out.data()[i] = rng->uniform() < (1.0 + p[i]) / 2.0 ? 1.0f : -1.0f;
    } else {
      out.data()[i] = p[i] >= 0.0f ? 1.0f : -1.0f;
    }
  }
  if (!T.recording() || !T.needs(x)) return T.emit(std::move(out), false, nullptr);
  const int xid = x.id;
  return T.emit(std::move(out), true,
                [xid](Tape& t, const Tensor& go) { t.accum(xid, go); });
}

LstmState conv_lstm_step(Tape& T, const TValue& x, const LstmState& prev,
                         const TValue& w, const TValue& b) {
  const int hidden = prev.h.t.dim(2);
  require(w.t.rank() == 4 && w.t.dim(3) == 4 * hidden, ErrorKind::kDimension,
          "conv lstm weight must produce 4*hidden gate channels");
  TValue xh = concat_ch(T, {x, prev.h});
  TValue gates = conv2d_raw(T, xh, w, &b, 1, 1);
  TValue i = sigmoid_op(T, slice_ch(T, gates, 0, hidden));
  TValue f = sigmoid_op(T, slice_ch(T, gates, hidden, 2 * hidden));
  TValue o = sigmoid_op(T, slice_ch(T, gates, 2 * hidden, 3 * hidden));
  TValue g = tanh_op(T, slice_ch(T, gates, 3 * hidden, 4 * hidden));
  TValue c = add(T, mul(T, f, prev.c), mul(T, i, g));
  TValue h = mul(T, o, tanh_op(T, c));
  return {h, c};
}

LstmState lstm_zero_state(Tape& T, int h, int w, int hidden) {
  return {T.leaf(Tensor({h, w, hidden})), T.leaf(Tensor({h, w, hidden}))};
}

Tensor clamp_unit(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    out.data()[i] = std::min(1.0f, std::max(-1.0f, x.data()[i]));
  return out;
}

double mse_value(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), ErrorKind::kDimension, "mse shape mismatch");
  Tensor diff(a.shape());
  kern::active().vsub(a.data(), b.data(), diff.data(), diff.size());
  return kern::active().reduce_sumsq(diff.data(), diff.size()) /
         static_cast<double>(diff.size());
}

}  // namespace pmvc::nn
