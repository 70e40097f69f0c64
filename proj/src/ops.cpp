#include "sscgan/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <memory>

namespace sscgan::nn {

namespace {

template <class T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

struct ConvDims {
  int n = 0, ci = 0, co = 0, k = 0;
  int in[3] = {0, 0, 0};
  int out[3] = {0, 0, 0};
  ConvGeometry g;
  std::size_t in_spatial = 0, out_spatial = 0, rows = 0;
  bool pointwise = false;
};

template <class T>
void im2col(const T* x, const ConvDims& d, T* col) {
  const int k = d.k, s = d.g.stride, p = d.g.padding, dil = d.g.dilation;
  const int X = d.in[0], Y = d.in[1], Z = d.in[2];
  const int OX = d.out[0], OY = d.out[1], OZ = d.out[2];
  T* dst = col;
  for (int c = 0; c < d.ci; ++c) {
    const T* xc = x + c * d.in_spatial;
    for (int kx = 0; kx < k; ++kx) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kz = 0; kz < k; ++kz) {
          for (int ox = 0; ox < OX; ++ox) {
            const int ix = ox * s - p + kx * dil;
            if (ix < 0 || ix >= X) {
              std::fill(dst, dst + static_cast<std::size_t>(OY) * OZ, T(0));
              dst += static_cast<std::size_t>(OY) * OZ;
              continue;
            }
            for (int oy = 0; oy < OY; ++oy) {
              const int iy = oy * s - p + ky * dil;
              if (iy < 0 || iy >= Y) {
                std::fill(dst, dst + OZ, T(0));
                dst += OZ;
                continue;
              }
              const T* src = xc + (static_cast<std::size_t>(ix) * Y + iy) * Z;
              for (int oz = 0; oz < OZ; ++oz) {
                const int iz = oz * s - p + kz * dil;
                dst[oz] = (iz >= 0 && iz < Z) ? src[iz] : T(0);
              }
              dst += OZ;
            }
          }
        }
      }
    }
  }
}

template <class T>
void col2im(const T* col, const ConvDims& d, T* x) {
  const int k = d.k, s = d.g.stride, p = d.g.padding, dil = d.g.dilation;
  const int X = d.in[0], Y = d.in[1], Z = d.in[2];
  const int OX = d.out[0], OY = d.out[1], OZ = d.out[2];
  const T* src = col;
  for (int c = 0; c < d.ci; ++c) {
    T* xc = x + c * d.in_spatial;
    for (int kx = 0; kx < k; ++kx) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kz = 0; kz < k; ++kz) {
          for (int ox = 0; ox < OX; ++ox) {
            const int ix = ox * s - p + kx * dil;
            if (ix < 0 || ix >= X) {
              src += static_cast<std::size_t>(OY) * OZ;
              continue;
            }
            for (int oy = 0; oy < OY; ++oy) {
              const int iy = oy * s - p + ky * dil;
              if (iy < 0 || iy >= Y) {
                src += OZ;
                continue;
              }
              T* dst = xc + (static_cast<std::size_t>(ix) * Y + iy) * Z;
              for (int oz = 0; oz < OZ; ++oz) {
                const int iz = oz * s - p + kz * dil;
                if (iz >= 0 && iz < Z) dst[iz] += src[oz];
              }
              src += OZ;
            }
          }
        }
      }
    }
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace

template <class T>
Var conv3d(Tape<T>& tape, Var x, Var weight, Var bias, ConvGeometry geom) {
  const Tensor<T>& xv = tape.value(x);
  const Tensor<T>& wv = tape.value(weight);
  const Tensor<T>& bv = tape.value(bias);
  require(xv.rank() == 5, "conv3d input must be [N,C,X,Y,Z], got " + shape_str(xv.shape()));
  require(wv.rank() == 5 && wv.dim(2) == wv.dim(3) && wv.dim(3) == wv.dim(4),
          "conv3d weight must be [Co,Ci,k,k,k], got " + shape_str(wv.shape()));
  require(wv.dim(1) == xv.dim(1), "conv3d channel mismatch: input " + shape_str(xv.shape()) +
                                      " weight " + shape_str(wv.shape()));
  require(bv.size() == static_cast<std::size_t>(wv.dim(0)), "conv3d bias size mismatch");

  ConvDims d;
  d.n = xv.dim(0);
  d.ci = xv.dim(1);
  d.co = wv.dim(0);
  d.k = wv.dim(2);
  d.g = geom;
  for (int a = 0; a < 3; ++a) {
    d.in[a] = xv.dim(2 + a);
    d.out[a] = conv_output_size(d.in[a], d.k, geom);
    require(d.out[a] >= 1, "conv3d output would be empty for input " + shape_str(xv.shape()));
  }
  d.in_spatial = static_cast<std::size_t>(d.in[0]) * d.in[1] * d.in[2];
  d.out_spatial = static_cast<std::size_t>(d.out[0]) * d.out[1] * d.out[2];
  d.rows = static_cast<std::size_t>(d.ci) * d.k * d.k * d.k;
  d.pointwise = d.k == 1 && geom.stride == 1 && geom.padding == 0;

  const Eigen::Index P = static_cast<Eigen::Index>(d.out_spatial);
  const Eigen::Index K = static_cast<Eigen::Index>(d.rows);
  Tensor<T> out({d.n, d.co, d.out[0], d.out[1], d.out[2]});
  Eigen::Map<const MatRM<T>> W(wv.data(), d.co, K);
  Eigen::Map<const VecX<T>> B(bv.data(), d.co);
  AlignedVector<T> col(d.pointwise ? 0 : d.rows * d.out_spatial);
  for (int n = 0; n < d.n; ++n) {
    const T* xn = xv.data() + static_cast<std::size_t>(n) * d.ci * d.in_spatial;
    if (!d.pointwise) im2col(xn, d, col.data());
    Eigen::Map<const MatRM<T>> C(d.pointwise ? xn : col.data(), K, P);
    Eigen::Map<MatRM<T>> Yn(out.data() + static_cast<std::size_t>(n) * d.co * d.out_spatial, d.co, P);
    Yn.noalias() = W * C;
    Yn.colwise() += B;
  }

  return tape.record(std::move(out), {x, weight, bias}, [x, weight, bias, d](Tape<T>& t, const Tensor<T>& g) {
    const bool need_x = t.requires_grad(x), need_w = t.requires_grad(weight), need_b = t.requires_grad(bias);
    const Tensor<T>& xv = t.value(x);
    const Tensor<T>& wv = t.value(weight);
    const Eigen::Index P = static_cast<Eigen::Index>(d.out_spatial);
    const Eigen::Index K = static_cast<Eigen::Index>(d.rows);
    Eigen::Map<const MatRM<T>> W(wv.data(), d.co, K);
    T* gx = need_x ? t.grad(x).data() : nullptr;
    T* gw = need_w ? t.grad(weight).data() : nullptr;
    T* gb = need_b ? t.grad(bias).data() : nullptr;
    AlignedVector<T> col((need_w && !d.pointwise) ? d.rows * d.out_spatial : 0);
    AlignedVector<T> dcol((need_x && !d.pointwise) ? d.rows * d.out_spatial : 0);
    for (int n = 0; n < d.n; ++n) {
      Eigen::Map<const MatRM<T>> G(g.data() + static_cast<std::size_t>(n) * d.co * d.out_spatial, d.co, P);
      const T* xn = xv.data() + static_cast<std::size_t>(n) * d.ci * d.in_spatial;
      if (gb) {
        for (int c = 0; c < d.co; ++c) {
          T sum = T(0);
          for (Eigen::Index p = 0; p < P; ++p) sum += G(c, p);
          gb[c] += sum;
        }
      }
      if (gw) {
        if (!d.pointwise) im2col(xn, d, col.data());
        Eigen::Map<const MatRM<T>> C(d.pointwise ? xn : col.data(), K, P);
        Eigen::Map<MatRM<T>> GW(gw, d.co, K);
        GW.noalias() += G * C.transpose();
      }
      if (gx) {
        T* gxn = gx + static_cast<std::size_t>(n) * d.ci * d.in_spatial;
        if (d.pointwise) {
          Eigen::Map<MatRM<T>> GX(gxn, K, P);
          GX.noalias() += W.transpose() * G;
        } else {
          Eigen::Map<MatRM<T>> DC(dcol.data(), K, P);
          DC.noalias() = W.transpose() * G;
          col2im(dcol.data(), d, gxn);
        }
      }
    }
  });
}

template <class T>
Var relu(Tape<T>& tape, Var x) {
  Tensor<T> out = tape.value(x);
  for (T& v : out.storage()) v = v > T(0) ? v : T(0);
  return tape.record(std::move(out), {x}, [x](Tape<T>& t, const Tensor<T>& g) {
    const Tensor<T>& xv = t.value(x);
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > T(0)) gx[i] += g[i];
  });
}

template <class T>
Var leaky_relu(Tape<T>& tape, Var x, T slope) {
  Tensor<T> out = tape.value(x);
  for (T& v : out.storage()) v = v > T(0) ? v : slope * v;
  return tape.record(std::move(out), {x}, [x, slope](Tape<T>& t, const Tensor<T>& g) {
    const Tensor<T>& xv = t.value(x);
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += xv[i] > T(0) ? g[i] : slope * g[i];
  });
}

template <class T>
Var sigmoid(Tape<T>& tape, Var x) {
  Tensor<T> out = tape.value(x);
  for (T& v : out.storage()) v = T(1) / (T(1) + std::exp(-v));
  const Var self{static_cast<int>(tape.size())};
  return tape.record(std::move(out), {x}, [x, self](Tape<T>& t, const Tensor<T>& g) {
    const Tensor<T>& yv = t.value(self);
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * yv[i] * (T(1) - yv[i]);
  });
}

template <class T>
Var add(Tape<T>& tape, Var a, Var b) {
  const Tensor<T>& av = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  require(av.shape() == bv.shape(), "add shape mismatch " + shape_str(av.shape()) + " vs " + shape_str(bv.shape()));
  Tensor<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape<T>& t, const Tensor<T>& g) {
    for (Var v : {a, b}) {
      if (!t.requires_grad(v)) continue;
      Tensor<T>& gv = t.grad(v);
      for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
    }
  });
}

template <class T>
Var scale(Tape<T>& tape, Var x, T factor) {
  Tensor<T> out = tape.value(x);
  for (T& v : out.storage()) v *= factor;
  return tape.record(std::move(out), {x}, [x, factor](Tape<T>& t, const Tensor<T>& g) {
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
  });
}

template <class T>
Var concat_channels(Tape<T>& tape, const std::vector<Var>& parts) {
  require(!parts.empty(), "concat of zero tensors");
  Shape shape = tape.value(parts[0]).shape();
  require(shape.size() >= 2, "concat needs rank >= 2");
  const int n = shape[0];
  const std::size_t spatial = shape_size(shape) / (static_cast<std::size_t>(n) * shape[1]);
  int total = 0;
  for (Var p : parts) {
    const Shape& s = tape.value(p).shape();
    require(s.size() == shape.size() && s[0] == n &&
                shape_size(s) / (static_cast<std::size_t>(n) * s[1]) == spatial,
            "concat shape mismatch " + shape_str(s) + " vs " + shape_str(shape));
    total += s[1];
  }
  Shape out_shape = shape;
  out_shape[1] = total;
  Tensor<T> out(out_shape);
  std::vector<int> widths;
  for (int b = 0; b < n; ++b) {
    T* dst = out.data() + static_cast<std::size_t>(b) * total * spatial;
    for (Var p : parts) {
      const Tensor<T>& v = tape.value(p);
      const std::size_t chunk = static_cast<std::size_t>(v.dim(1)) * spatial;
      std::copy(v.data() + b * chunk, v.data() + (b + 1) * chunk, dst);
      dst += chunk;
    }
  }
  for (Var p : parts) widths.push_back(tape.value(p).dim(1));
  return tape.record_many(std::move(out), parts, [parts, widths, n, total, spatial](Tape<T>& t, const Tensor<T>& g) {
    std::size_t offset = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const std::size_t chunk = static_cast<std::size_t>(widths[i]) * spatial;
      if (t.requires_grad(parts[i])) {
        Tensor<T>& gp = t.grad(parts[i]);
        for (int b = 0; b < n; ++b) {
          const T* src = g.data() + static_cast<std::size_t>(b) * total * spatial + offset;
          T* dst = gp.data() + b * chunk;
          for (std::size_t e = 0; e < chunk; ++e) dst[e] += src[e];
        }
      }
      offset += chunk;
    }
  });
}

template <class T>
Var normalize(Tape<T>& tape, Var x, Var gamma, Var beta, NormMode mode, T eps) {
  const Tensor<T>& xv = tape.value(x);
  require(xv.rank() >= 3, "normalize expects [N,C,...]");
  const int n = xv.dim(0), c = xv.dim(1);
  const std::size_t spatial = xv.size() / (static_cast<std::size_t>(n) * c);
  require(tape.value(gamma).size() == static_cast<std::size_t>(c) &&
              tape.value(beta).size() == static_cast<std::size_t>(c),
          "normalize affine parameters must have one entry per channel");
  const Tensor<T>& gv = tape.value(gamma);
  const Tensor<T>& bv = tape.value(beta);

  // A group is the set of (n, c) segments sharing statistics.
  const int groups_per_channel = mode == NormMode::kInstance ? n : 1;
  const int segs_per_group = mode == NormMode::kInstance ? 1 : n;
  auto xhat = std::make_shared<std::vector<T>>(xv.size());
  auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(c) * groups_per_channel);
  Tensor<T> out(xv.shape());
  for (int ch = 0; ch < c; ++ch) {
    for (int gi = 0; gi < groups_per_channel; ++gi) {
      double sum = 0.0, sq = 0.0;
      for (int s = 0; s < segs_per_group; ++s) {
        const int b = mode == NormMode::kInstance ? gi : s;
        const T* src = xv.data() + (static_cast<std::size_t>(b) * c + ch) * spatial;
        for (std::size_t e = 0; e < spatial; ++e) sum += src[e];
      }
      const double count = static_cast<double>(spatial) * segs_per_group;
      const double mean = sum / count;
      for (int s = 0; s < segs_per_group; ++s) {
        const int b = mode == NormMode::kInstance ? gi : s;
        const T* src = xv.data() + (static_cast<std::size_t>(b) * c + ch) * spatial;
        for (std::size_t e = 0; e < spatial; ++e) sq += (src[e] - mean) * (src[e] - mean);
      }
      const double is = 1.0 / std::sqrt(sq / count + static_cast<double>(eps));
      (*inv_std)[static_cast<std::size_t>(ch) * groups_per_channel + gi] = static_cast<T>(is);
      for (int s = 0; s < segs_per_group; ++s) {
        const int b = mode == NormMode::kInstance ? gi : s;
        const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * spatial;
        for (std::size_t e = 0; e < spatial; ++e) {
          const T h = static_cast<T>((xv[off + e] - mean) * is);
          (*xhat)[off + e] = h;
          out[off + e] = gv[ch] * h + bv[ch];
        }
      }
    }
  }
  return tape.record(std::move(out), {x, gamma, beta},
                     [=](Tape<T>& t, const Tensor<T>& g) {
                       const bool need_x = t.requires_grad(x);
                       const Tensor<T>& gam = t.value(gamma);
                       T* gx = need_x ? t.grad(x).data() : nullptr;
                       T* ggam = t.requires_grad(gamma) ? t.grad(gamma).data() : nullptr;
                       T* gbet = t.requires_grad(beta) ? t.grad(beta).data() : nullptr;
                       for (int ch = 0; ch < c; ++ch) {
                         for (int gi = 0; gi < groups_per_channel; ++gi) {
                           double sum_dy = 0.0, sum_dy_h = 0.0;
                           for (int s = 0; s < segs_per_group; ++s) {
                             const int b = mode == NormMode::kInstance ? gi : s;
                             const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * spatial;
                             for (std::size_t e = 0; e < spatial; ++e) {
                               sum_dy += g[off + e];
                               sum_dy_h += g[off + e] * (*xhat)[off + e];
                             }
                           }
                           if (ggam) ggam[ch] += static_cast<T>(sum_dy_h);
                           if (gbet) gbet[ch] += static_cast<T>(sum_dy);
                           if (!gx) continue;
                           const double count = static_cast<double>(spatial) * segs_per_group;
                           const double k = gam[ch] * (*inv_std)[static_cast<std::size_t>(ch) * groups_per_channel + gi];
                           const double mdy = sum_dy / count, mdyh = sum_dy_h / count;
                           for (int s = 0; s < segs_per_group; ++s) {
                             const int b = mode == NormMode::kInstance ? gi : s;
                             const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * spatial;
                             for (std::size_t e = 0; e < spatial; ++e) {
                               gx[off + e] += static_cast<T>(k * (g[off + e] - mdy - (*xhat)[off + e] * mdyh));
                             }
                           }
                         }
                       }
                     });
}

template <class T>
Var softmax_channels(Tape<T>& tape, Var x) {
  const Tensor<T>& xv = tape.value(x);
  require(xv.rank() >= 2, "softmax expects [N,C,...]");
  const int n = xv.dim(0), c = xv.dim(1);
  const std::size_t spatial = xv.size() / (static_cast<std::size_t>(n) * c);
  Tensor<T> out(xv.shape());
  std::vector<T> mx(spatial), sum(spatial);
  for (int b = 0; b < n; ++b) {
    const T* src = xv.data() + static_cast<std::size_t>(b) * c * spatial;
    T* dst = out.data() + static_cast<std::size_t>(b) * c * spatial;
    std::copy(src, src + spatial, mx.begin());
    for (int ch = 1; ch < c; ++ch)
      for (std::size_t e = 0; e < spatial; ++e) mx[e] = std::max(mx[e], src[ch * spatial + e]);
    std::fill(sum.begin(), sum.end(), T(0));
    for (int ch = 0; ch < c; ++ch)
      for (std::size_t e = 0; e < spatial; ++e) {
        const T v = std::exp(src[ch * spatial + e] - mx[e]);
        dst[ch * spatial + e] = v;
        sum[e] += v;
      }
    for (int ch = 0; ch < c; ++ch)
      for (std::size_t e = 0; e < spatial; ++e) dst[ch * spatial + e] /= sum[e];
  }
  const Var self{static_cast<int>(tape.size())};
  return tape.record(std::move(out), {x}, [x, self, n, c, spatial](Tape<T>& t, const Tensor<T>& g) {
    const Tensor<T>& p = t.value(self);
    Tensor<T>& gx = t.grad(x);
    std::vector<T> dot(spatial);
    for (int b = 0; b < n; ++b) {
      const std::size_t base = static_cast<std::size_t>(b) * c * spatial;
      std::fill(dot.begin(), dot.end(), T(0));
      for (int ch = 0; ch < c; ++ch)
        for (std::size_t e = 0; e < spatial; ++e) dot[e] += g[base + ch * spatial + e] * p[base + ch * spatial + e];
      for (int ch = 0; ch < c; ++ch)
        for (std::size_t e = 0; e < spatial; ++e) {
          const std::size_t i = base + ch * spatial + e;
          gx[i] += p[i] * (g[i] - dot[e]);
        }
    }
  });
}

template <class T>
Var linear(Tape<T>& tape, Var x, Var weight, Var bias) {
  const Tensor<T>& xv = tape.value(x);
  const Tensor<T>& wv = tape.value(weight);
  const Tensor<T>& bv = tape.value(bias);
  require(xv.rank() == 2 && wv.rank() == 2 && wv.dim(1) == xv.dim(1) &&
              bv.size() == static_cast<std::size_t>(wv.dim(0)),
          "linear shape mismatch: x " + shape_str(xv.shape()) + " w " + shape_str(wv.shape()));
  const int n = xv.dim(0), f = xv.dim(1), o = wv.dim(0);
  Tensor<T> out({n, o});
  Eigen::Map<const MatRM<T>> X(xv.data(), n, f);
  Eigen::Map<const MatRM<T>> W(wv.data(), o, f);
  Eigen::Map<const VecX<T>> B(bv.data(), o);
  Eigen::Map<MatRM<T>> Y(out.data(), n, o);
  Y.noalias() = X * W.transpose();
  Y.rowwise() += B.transpose();
  return tape.record(std::move(out), {x, weight, bias}, [x, weight, bias, n, f, o](Tape<T>& t, const Tensor<T>& g) {
    Eigen::Map<const MatRM<T>> G(g.data(), n, o);
    if (t.requires_grad(x)) {
      Eigen::Map<const MatRM<T>> W(t.value(weight).data(), o, f);
      Eigen::Map<MatRM<T>> GX(t.grad(x).data(), n, f);
      GX.noalias() += G * W;
    }
    if (t.requires_grad(weight)) {
      Eigen::Map<const MatRM<T>> X(t.value(x).data(), n, f);
      Eigen::Map<MatRM<T>> GW(t.grad(weight).data(), o, f);
      GW.noalias() += G.transpose() * X;
    }
    if (t.requires_grad(bias)) {
      T* gb = t.grad(bias).data();
      for (int j = 0; j < o; ++j) {
        T sum = T(0);
        for (int i = 0; i < n; ++i) sum += G(i, j);
        gb[j] += sum;
      }
    }
  });
}

template <class T>
Var reshape(Tape<T>& tape, Var x, Shape shape) {
  Tensor<T> out = tape.value(x);
  out.reshape(std::move(shape));
  return tape.record(std::move(out), {x}, [x](Tape<T>& t, const Tensor<T>& g) {
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

template <class T>
Var upsample_linear_axis(Tape<T>& tape, Var x, int axis, int factor) {
  const Tensor<T>& xv = tape.value(x);
  require(axis >= 0 && axis < xv.rank() && factor >= 1, "invalid upsample axis or factor");
  const Shape& shape = xv.shape();
  std::size_t outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= shape[a];
  for (int a = axis + 1; a < xv.rank(); ++a) inner *= shape[a];
  const int len = shape[axis];
  const int out_len = len * factor;

  struct Tap {
    int i0, i1;
    T w0, w1;
  };
  auto taps = std::make_shared<std::vector<Tap>>(out_len);
  for (int o = 0; o < out_len; ++o) {
    double src = (o + 0.5) / factor - 0.5;
    if (src < 0.0) src = 0.0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > len - 1) i0 = len - 1;
    const int i1 = std::min(i0 + 1, len - 1);
    const double w1 = i1 == i0 ? 0.0 : src - i0;
    (*taps)[o] = Tap{i0, i1, static_cast<T>(1.0 - w1), static_cast<T>(w1)};
  }
  Shape out_shape = shape;
  out_shape[axis] = out_len;
  Tensor<T> out(out_shape);
  for (std::size_t a = 0; a < outer; ++a) {
    const T* src = xv.data() + a * len * inner;
    T* dst = out.data() + a * out_len * inner;
    for (int o = 0; o < out_len; ++o) {
      const Tap& tp = (*taps)[o];
      const T* s0 = src + tp.i0 * inner;
      const T* s1 = src + tp.i1 * inner;
      T* d = dst + o * inner;
      for (std::size_t e = 0; e < inner; ++e) d[e] = tp.w0 * s0[e] + tp.w1 * s1[e];
    }
  }
  return tape.record(std::move(out), {x}, [x, taps, outer, inner, len, out_len](Tape<T>& t, const Tensor<T>& g) {
    Tensor<T>& gx = t.grad(x);
    for (std::size_t a = 0; a < outer; ++a) {
      T* dst = gx.data() + a * len * inner;
      const T* src = g.data() + a * out_len * inner;
      for (int o = 0; o < out_len; ++o) {
        const Tap& tp = (*taps)[o];
        T* d0 = dst + tp.i0 * inner;
        T* d1 = dst + tp.i1 * inner;
        const T* s = src + o * inner;
        for (std::size_t e = 0; e < inner; ++e) {
          d0[e] += tp.w0 * s[e];
          d1[e] += tp.w1 * s[e];
        }
      }
    }
  });
}

template <class T>
Var upsample_trilinear(Tape<T>& tape, Var x, int factor) {
  require(tape.value(x).rank() == 5, "trilinear upsampling expects [N,C,X,Y,Z]");
  Var y = upsample_linear_axis(tape, x, 2, factor);
  y = upsample_linear_axis(tape, y, 3, factor);
  return upsample_linear_axis(tape, y, 4, factor);
}

template <class T>
Var mce_sum(Tape<T>& tape, Var prob, const Tensor<T>& target, T clamp) {
  const Tensor<T>& pv = tape.value(prob);
  require(pv.shape() == target.shape(), "mce shape mismatch " + shape_str(pv.shape()) + " vs " +
                                            shape_str(target.shape()));
  double sum = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (target[i] != T(0)) sum -= target[i] * std::log(static_cast<double>(std::max(pv[i], clamp)));
  }
  Tensor<T> out({1}, static_cast<T>(sum));
  return tape.record(std::move(out), {prob}, [prob, target, clamp](Tape<T>& t, const Tensor<T>& g) {
    const Tensor<T>& pv = t.value(prob);
    Tensor<T>& gp = t.grad(prob);
    const T go = g[0];
    for (std::size_t i = 0; i < pv.size(); ++i) {
      if (target[i] != T(0) && pv[i] > clamp) gp[i] -= go * target[i] / pv[i];
    }
  });
}

template <class T>
Var bce_mean(Tape<T>& tape, Var pred, T target, T clamp) {
  const Tensor<T>& pv = tape.value(pred);
  require(!pv.empty(), "bce of an empty tensor");
  const double z = target;
  const double lo = clamp, hi = 1.0 - static_cast<double>(clamp);
  double sum = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double p = std::clamp(static_cast<double>(pv[i]), lo, hi);
    sum -= z * std::log(p) + (1.0 - z) * std::log(1.0 - p);
  }
  const double m = static_cast<double>(pv.size());
  Tensor<T> out({1}, static_cast<T>(sum / m));
  return tape.record(std::move(out), {pred}, [pred, z, lo, hi, m](Tape<T>& t, const Tensor<T>& g) {
    const Tensor<T>& pv = t.value(pred);
    Tensor<T>& gp = t.grad(pred);
    const double go = g[0] / m;
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double p = pv[i];
      if (p > lo && p < hi) gp[i] += static_cast<T>(go * (-z / p + (1.0 - z) / (1.0 - p)));
    }
  });
}

template <class T>
Var mean_all(Tape<T>& tape, Var x) {
  const Tensor<T>& xv = tape.value(x);
  require(!xv.empty(), "mean of an empty tensor");
  double sum = 0.0;
  for (T v : xv.values()) sum += v;
  const double m = static_cast<double>(xv.size());
  Tensor<T> out({1}, static_cast<T>(sum / m));
  return tape.record(std::move(out), {x}, [x, m](Tape<T>& t, const Tensor<T>& g) {
    Tensor<T>& gx = t.grad(x);
    const T go = static_cast<T>(g[0] / m);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go;
  });
}

#define SSCGAN_INSTANTIATE_OPS(T)                                                       \
  template Var conv3d<T>(Tape<T>&, Var, Var, Var, ConvGeometry);                        \
  template Var relu<T>(Tape<T>&, Var);                                                  \
  template Var leaky_relu<T>(Tape<T>&, Var, T);                                         \
  template Var sigmoid<T>(Tape<T>&, Var);                                               \
  template Var add<T>(Tape<T>&, Var, Var);                                              \
  template Var scale<T>(Tape<T>&, Var, T);                                              \
  template Var concat_channels<T>(Tape<T>&, const std::vector<Var>&);                   \
  template Var normalize<T>(Tape<T>&, Var, Var, Var, NormMode, T);                      \
  template Var softmax_channels<T>(Tape<T>&, Var);                                      \
  template Var linear<T>(Tape<T>&, Var, Var, Var);                                      \
  template Var reshape<T>(Tape<T>&, Var, Shape);                                        \
  template Var upsample_linear_axis<T>(Tape<T>&, Var, int, int);                        \
  template Var upsample_trilinear<T>(Tape<T>&, Var, int);                               \
  template Var mce_sum<T>(Tape<T>&, Var, const Tensor<T>&, T);                          \
  template Var bce_mean<T>(Tape<T>&, Var, T, T);                                        \
  template Var mean_all<T>(Tape<T>&, Var);

SSCGAN_INSTANTIATE_OPS(float)
SSCGAN_INSTANTIATE_OPS(double)

}  // namespace sscgan::nn
