#include "sonarssl/layers.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace sonarssl {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ColMat = Eigen::MatrixXd;
constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.9;

void require_4d(const Tensor& x, const char* what) {
  if (x.rank() != 4) throw InputError(std::string(what) + ": expected a (B,C,H,W) tensor");
}

struct ConvDims {
  std::size_t b, c, h, w, oh, ow, kk;
};

ConvDims conv_dims(const ConvSpec& spec, const Tensor& x, const char* what) {
  require_4d(x, what);
  ConvDims d{};
  d.b = x.dim(0);
  d.c = x.dim(1);
  d.h = x.dim(2);
  d.w = x.dim(3);
  if (d.c != spec.in_ch) throw InputError(std::string(what) + ": channel count mismatch");
  if (spec.stride == 0 || spec.kernel == 0)
    throw ConfigError(std::string(what) + ": kernel and stride must be positive");
  if (d.h + 2 * spec.pad < spec.kernel || d.w + 2 * spec.pad < spec.kernel)
    throw InputError(std::string(what) + ": input smaller than kernel");
  d.oh = (d.h + 2 * spec.pad - spec.kernel) / spec.stride + 1;
  d.ow = (d.w + 2 * spec.pad - spec.kernel) / spec.stride + 1;
  d.kk = spec.in_ch * spec.kernel * spec.kernel;
  return d;
}

// Gathers the receptive field of every output position into one column.
void im2col(const ConvSpec& spec, const ConvDims& d, const Tensor& x, std::vector<double>& cols) {
  const std::size_t n = d.b * d.oh * d.ow;
  cols.assign(d.kk * n, 0.0);
  std::size_t j = 0;
  for (std::size_t b = 0; b < d.b; ++b) {
    const double* xb = x.data.data() + b * d.c * d.h * d.w;
    for (std::size_t oh = 0; oh < d.oh; ++oh) {
      for (std::size_t ow = 0; ow < d.ow; ++ow, ++j) {
        double* col = cols.data() + j * d.kk;
        std::size_t r = 0;
        for (std::size_t c = 0; c < d.c; ++c) {
          for (std::size_t kh = 0; kh < spec.kernel; ++kh) {
            const std::int64_t ir = static_cast<std::int64_t>(oh * spec.stride + kh) -
                                    static_cast<std::int64_t>(spec.pad);
            for (std::size_t kw = 0; kw < spec.kernel; ++kw, ++r) {
              const std::int64_t ic = static_cast<std::int64_t>(ow * spec.stride + kw) -
                                      static_cast<std::int64_t>(spec.pad);
              if (ir < 0 || ic < 0 || ir >= static_cast<std::int64_t>(d.h) ||
                  ic >= static_cast<std::int64_t>(d.w))
                continue;
              col[r] = xb[(c * d.h + static_cast<std::size_t>(ir)) * d.w +
                          static_cast<std::size_t>(ic)];
            }
          }
        }
      }
    }
  }
}

// Scatter-adds column gradients back onto the input raster.
void col2im(const ConvSpec& spec, const ConvDims& d, const ColMat& dcols, Tensor& dx) {
  std::size_t j = 0;
  for (std::size_t b = 0; b < d.b; ++b) {
    double* xb = dx.data.data() + b * d.c * d.h * d.w;
    for (std::size_t oh = 0; oh < d.oh; ++oh) {
      for (std::size_t ow = 0; ow < d.ow; ++ow, ++j) {
        std::size_t r = 0;
        for (std::size_t c = 0; c < d.c; ++c) {
          for (std::size_t kh = 0; kh < spec.kernel; ++kh) {
            const std::int64_t ir = static_cast<std::int64_t>(oh * spec.stride + kh) -
                                    static_cast<std::int64_t>(spec.pad);
            for (std::size_t kw = 0; kw < spec.kernel; ++kw, ++r) {
              const std::int64_t ic = static_cast<std::int64_t>(ow * spec.stride + kw) -
                                      static_cast<std::int64_t>(spec.pad);
              if (ir < 0 || ic < 0 || ir >= static_cast<std::int64_t>(d.h) ||
                  ic >= static_cast<std::int64_t>(d.w))
                continue;
              xb[(c * d.h + static_cast<std::size_t>(ir)) * d.w + static_cast<std::size_t>(ic)] +=
                  dcols(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j));
            }
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d_forward(const ParamSet& params, const std::string& name, const ConvSpec& spec,
                      const Tensor& x, ConvCache* cache) {
  const ConvDims d = conv_dims(spec, x, "conv2d");
  const Tensor& weight = params.at(name + ".weight");
  const Tensor& bias = params.at(name + ".bias");
  if (weight.shape != std::vector<std::size_t>{spec.out_ch, spec.in_ch, spec.kernel, spec.kernel})
    throw InputError("conv2d: weight shape mismatch for " + name);

  std::vector<double> local_cols;
  std::vector<double>& cols = cache ? cache->cols : local_cols;
  im2col(spec, d, x, cols);
  if (cache) {
    cache->in_shape = x.shape;
    cache->out_h = d.oh;
    cache->out_w = d.ow;
  }

  const std::size_t n = d.b * d.oh * d.ow;
  Eigen::Map<const RowMat> w(weight.data.data(), static_cast<Eigen::Index>(spec.out_ch),
                             static_cast<Eigen::Index>(d.kk));
  Eigen::Map<const ColMat> m(cols.data(), static_cast<Eigen::Index>(d.kk),
                             static_cast<Eigen::Index>(n));
  ColMat y_mat = w * m;  // out_ch x n

  Tensor y({d.b, spec.out_ch, d.oh, d.ow});
  std::size_t j = 0;
  for (std::size_t b = 0; b < d.b; ++b)
    for (std::size_t oh = 0; oh < d.oh; ++oh)
      for (std::size_t ow = 0; ow < d.ow; ++ow, ++j)
        for (std::size_t o = 0; o < spec.out_ch; ++o)
          y.data[((b * spec.out_ch + o) * d.oh + oh) * d.ow + ow] =
              y_mat(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(j)) + bias.data[o];
  return y;
}

Tensor conv2d_backward(const ParamSet& params, const std::string& name, const ConvSpec& spec,
                       const ConvCache& cache, const Tensor& dy, Grads& grads) {
  Tensor x_shape_only;
  x_shape_only.shape = cache.in_shape;
  ConvDims d{};
  d.b = cache.in_shape[0];
  d.c = cache.in_shape[1];
  d.h = cache.in_shape[2];
  d.w = cache.in_shape[3];
  d.oh = cache.out_h;
  d.ow = cache.out_w;
  d.kk = spec.in_ch * spec.kernel * spec.kernel;
  if (dy.shape != std::vector<std::size_t>{d.b, spec.out_ch, d.oh, d.ow})
    throw InputError("conv2d backward: upstream gradient shape mismatch");

  const std::size_t n = d.b * d.oh * d.ow;
  ColMat dy_mat(static_cast<Eigen::Index>(spec.out_ch), static_cast<Eigen::Index>(n));
  std::size_t j = 0;
  for (std::size_t b = 0; b < d.b; ++b)
    for (std::size_t oh = 0; oh < d.oh; ++oh)
      for (std::size_t ow = 0; ow < d.ow; ++ow, ++j)
        for (std::size_t o = 0; o < spec.out_ch; ++o)
          dy_mat(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(j)) =
              dy.data[((b * spec.out_ch + o) * d.oh + oh) * d.ow + ow];

  Eigen::Map<const ColMat> m(cache.cols.data(), static_cast<Eigen::Index>(d.kk),
                             static_cast<Eigen::Index>(n));
  ColMat dw_mat = dy_mat * m.transpose();  // out_ch x kk

  Tensor dw({spec.out_ch, spec.in_ch, spec.kernel, spec.kernel});
  for (std::size_t o = 0; o < spec.out_ch; ++o)
    for (std::size_t r = 0; r < d.kk; ++r)
      dw.data[o * d.kk + r] = dw_mat(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(r));
  grads.accumulate(name + ".weight", dw);

  Tensor db({spec.out_ch});
  for (std::size_t o = 0; o < spec.out_ch; ++o)
    db.data[o] = dy_mat.row(static_cast<Eigen::Index>(o)).sum();
  grads.accumulate(name + ".bias", db);

  const Tensor& weight = params.at(name + ".weight");
  Eigen::Map<const RowMat> w(weight.data.data(), static_cast<Eigen::Index>(spec.out_ch),
                             static_cast<Eigen::Index>(d.kk));
  ColMat dcols = w.transpose() * dy_mat;  // kk x n

  Tensor dx(cache.in_shape);
  col2im(spec, d, dcols, dx);
  return dx;
}

Tensor bn_forward(const ParamSet& params, const std::string& name, const Tensor& x, BnMode mode,
                  BnCache* cache) {
  require_4d(x, "batchnorm");
  const std::size_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Tensor& gamma = params.at(name + ".gamma");
  const Tensor& beta = params.at(name + ".beta");
  if (gamma.numel() != c) throw InputError("batchnorm: channel mismatch for " + name);
  const std::size_t plane = h * w;
  const auto m = static_cast<double>(b * plane);

  std::vector<double> mean(c), var(c);
  if (mode == BnMode::eval) {
    const Tensor& rm = params.at(name + ".running_mean");
    const Tensor& rv = params.at(name + ".running_var");
    mean.assign(rm.data.begin(), rm.data.end());
    var.assign(rv.data.begin(), rv.data.end());
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (std::size_t bi = 0; bi < b; ++bi) {
        const double* p = x.data.data() + (bi * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      }
      mean[ch] = acc / m;
      double vacc = 0.0;
      for (std::size_t bi = 0; bi < b; ++bi) {
        const double* p = x.data.data() + (bi * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double dv = p[i] - mean[ch];
          vacc += dv * dv;
        }
      }
      var[ch] = vacc / m;  // population variance
    }
  }

  std::vector<double> inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) inv_std[ch] = 1.0 / std::sqrt(var[ch] + kBnEps);

  Tensor y(x.shape);
  std::vector<double> x_hat(x.numel());
  for (std::size_t bi = 0; bi < b; ++bi) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* p = x.data.data() + (bi * c + ch) * plane;
      double* ph = x_hat.data() + (bi * c + ch) * plane;
      double* py = y.data.data() + (bi * c + ch) * plane;
      const double g = gamma.data[ch], bt = beta.data[ch], is = inv_std[ch], mu = mean[ch];
      for (std::size_t i = 0; i < plane; ++i) {
        ph[i] = (p[i] - mu) * is;
        py[i] = g * ph[i] + bt;
      }
    }
  }

  if (cache) {
    cache->mode = mode;
    cache->in_shape = x.shape;
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
    if (mode == BnMode::train) {
      cache->batch_mean = std::move(mean);
      cache->batch_var = std::move(var);
    } else {
      cache->batch_mean.clear();
      cache->batch_var.clear();
    }
  }
  return y;
}

Tensor bn_backward(const ParamSet& params, const std::string& name, const BnCache& cache,
                   const Tensor& dy, Grads& grads) {
  const std::size_t b = cache.in_shape[0], c = cache.in_shape[1];
  const std::size_t plane = cache.in_shape[2] * cache.in_shape[3];
  if (dy.shape != cache.in_shape) throw InputError("batchnorm backward: shape mismatch");
  const Tensor& gamma = params.at(name + ".gamma");
  const auto m = static_cast<double>(b * plane);

  Tensor dgamma({c}), dbeta({c});
  for (std::size_t bi = 0; bi < b; ++bi) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* pdy = dy.data.data() + (bi * c + ch) * plane;
      const double* ph = cache.x_hat.data() + (bi * c + ch) * plane;
      double sg = 0.0, sb = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        sg += pdy[i] * ph[i];
        sb += pdy[i];
      }
      dgamma.data[ch] += sg;
      dbeta.data[ch] += sb;
    }
  }

  Tensor dx(cache.in_shape);
  if (cache.mode == BnMode::eval) {
    for (std::size_t bi = 0; bi < b; ++bi)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* pdy = dy.data.data() + (bi * c + ch) * plane;
        double* pdx = dx.data.data() + (bi * c + ch) * plane;
        const double k = gamma.data[ch] * cache.inv_std[ch];
        for (std::size_t i = 0; i < plane; ++i) pdx[i] = pdy[i] * k;
      }
  } else {
    for (std::size_t bi = 0; bi < b; ++bi)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* pdy = dy.data.data() + (bi * c + ch) * plane;
        const double* ph = cache.x_hat.data() + (bi * c + ch) * plane;
        double* pdx = dx.data.data() + (bi * c + ch) * plane;
        const double k = gamma.data[ch] * cache.inv_std[ch] / m;
        const double dg = dgamma.data[ch], db = dbeta.data[ch];
        for (std::size_t i = 0; i < plane; ++i)
          pdx[i] = k * (m * pdy[i] - db - ph[i] * dg);
      }
  }

  grads.accumulate(name + ".gamma", dgamma);
  grads.accumulate(name + ".beta", dbeta);
  return dx;
}

void bn_commit(ParamSet& params, const std::string& name, const BnCache& cache) {
  if (cache.mode != BnMode::train)
    throw InputError("batchnorm: commit requires a train-mode cache");
  Tensor& rm = params.at(name + ".running_mean");
  Tensor& rv = params.at(name + ".running_var");
  for (std::size_t ch = 0; ch < rm.numel(); ++ch) {
    rm.data[ch] = kBnMomentum * rm.data[ch] + (1.0 - kBnMomentum) * cache.batch_mean[ch];
    rv.data[ch] = kBnMomentum * rv.data[ch] + (1.0 - kBnMomentum) * cache.batch_var[ch];
  }
}

Tensor relu_forward(const Tensor& x, ReluCache* cache) {
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.numel(); ++i) y.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
  if (cache) cache->out = y.data;
  return y;
}

Tensor relu_backward(const ReluCache& cache, const Tensor& dy) {
  if (dy.numel() != cache.out.size()) throw InputError("relu backward: shape mismatch");
  Tensor dx(dy.shape);
  for (std::size_t i = 0; i < dy.numel(); ++i)
    dx.data[i] = cache.out[i] > 0.0 ? dy.data[i] : 0.0;
  return dx;
}

Tensor gap_forward(const Tensor& x, GapCache* cache) {
  require_4d(x, "global average pool");
  const std::size_t b = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor y({b, c});
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* p = x.data.data() + (bi * c + ch) * plane;
      double acc = 0.0;
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      y.data[bi * c + ch] = acc / static_cast<double>(plane);
    }
  if (cache) cache->in_shape = x.shape;
  return y;
}

Tensor gap_backward(const GapCache& cache, const Tensor& dy) {
  const std::size_t b = cache.in_shape[0], c = cache.in_shape[1];
  const std::size_t plane = cache.in_shape[2] * cache.in_shape[3];
  if (dy.shape != std::vector<std::size_t>{b, c})
    throw InputError("global average pool backward: shape mismatch");
  Tensor dx(cache.in_shape);
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double g = dy.data[bi * c + ch] / static_cast<double>(plane);
      double* p = dx.data.data() + (bi * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] = g;
    }
  return dx;
}

Tensor linear_forward(const ParamSet& params, const std::string& name, const Tensor& x,
                      LinearCache* cache) {
  if (x.rank() != 2) throw InputError("linear: expected a (B,I) tensor");
  const Tensor& weight = params.at(name + ".weight");
  const Tensor& bias = params.at(name + ".bias");
  const std::size_t b = x.dim(0), in = x.dim(1), out = weight.dim(0);
  if (weight.shape != std::vector<std::size_t>{out, in})
    throw InputError("linear: weight shape mismatch for " + name);

  Eigen::Map<const RowMat> xm(x.data.data(), static_cast<Eigen::Index>(b),
                              static_cast<Eigen::Index>(in));
  Eigen::Map<const RowMat> wm(weight.data.data(), static_cast<Eigen::Index>(out),
                              static_cast<Eigen::Index>(in));
  Tensor y({b, out});
  Eigen::Map<RowMat> ym(y.data.data(), static_cast<Eigen::Index>(b),
                        static_cast<Eigen::Index>(out));
  ym = xm * wm.transpose();
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t o = 0; o < out; ++o) y.data[bi * out + o] += bias.data[o];

  if (cache) {
    cache->in_shape = x.shape;
    cache->input = x.data;
  }
  return y;
}

Tensor linear_backward(const ParamSet& params, const std::string& name, const LinearCache& cache,
                       const Tensor& dy, Grads& grads) {
  const Tensor& weight = params.at(name + ".weight");
  const std::size_t b = cache.in_shape[0], in = cache.in_shape[1], out = weight.dim(0);
  if (dy.shape != std::vector<std::size_t>{b, out})
    throw InputError("linear backward: shape mismatch");

  Eigen::Map<const RowMat> xm(cache.input.data(), static_cast<Eigen::Index>(b),
                              static_cast<Eigen::Index>(in));
  Eigen::Map<const RowMat> dym(dy.data.data(), static_cast<Eigen::Index>(b),
                               static_cast<Eigen::Index>(out));
  Eigen::Map<const RowMat> wm(weight.data.data(), static_cast<Eigen::Index>(out),
                              static_cast<Eigen::Index>(in));

  Tensor dw({out, in});
  Eigen::Map<RowMat> dwm(dw.data.data(), static_cast<Eigen::Index>(out),
                         static_cast<Eigen::Index>(in));
  dwm = dym.transpose() * xm;
  grads.accumulate(name + ".weight", dw);

  Tensor db({out});
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t o = 0; o < out; ++o) db.data[o] += dy.data[bi * out + o];
  grads.accumulate(name + ".bias", db);

  Tensor dx({b, in});
  Eigen::Map<RowMat> dxm(dx.data.data(), static_cast<Eigen::Index>(b),
                         static_cast<Eigen::Index>(in));
  dxm = dym * wm;
  return dx;
}

}  // namespace sonarssl
