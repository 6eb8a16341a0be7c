#include "dgrd/nn.hpp"

#include <algorithm>
#include <cmath>

#include "dgrd/kernels.hpp"

namespace dgrd {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

void check_shapes(const MlpParams& p, const Mat& x) {
  if (x.cols != p.input_width()) {
    throw ContractError("input width " + std::to_string(x.cols) + " does not match network input " +
                        std::to_string(p.input_width()));
  }
}

}  // namespace

MlpParams make_mlp(std::vector<int> sizes, bool layer_norm, Rng& rng) {
  if (sizes.size() < 2) throw ContractError("an MLP needs at least input and output sizes");
  for (int s : sizes) {
    if (s < 1) throw ContractError("layer sizes must be positive");
  }
  MlpParams p;
  p.sizes = std::move(sizes);
  p.layer_norm = layer_norm;
  const int layers = p.linear_layers();
  p.w.resize(static_cast<size_t>(layers));
  p.b.resize(static_cast<size_t>(layers));
  for (int l = 0; l < layers; ++l) {
    const int fan_in = p.sizes[static_cast<size_t>(l)];
    const int fan_out = p.sizes[static_cast<size_t>(l) + 1];
    Mat& w = p.w[static_cast<size_t>(l)];
    w.resize(fan_in, fan_out);
    const double lim = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& x : w.v) x = (2.0 * rng.uniform01() - 1.0) * lim;
    p.b[static_cast<size_t>(l)].assign(static_cast<size_t>(fan_out), 0.0);
  }
  if (layer_norm) {
    const int hidden = p.hidden_layers();
    p.ln_gain.resize(static_cast<size_t>(hidden));
    p.ln_offset.resize(static_cast<size_t>(hidden));
    for (int l = 0; l < hidden; ++l) {
      const size_t width = static_cast<size_t>(p.sizes[static_cast<size_t>(l) + 1]);
      p.ln_gain[static_cast<size_t>(l)].assign(width, 1.0);
      p.ln_offset[static_cast<size_t>(l)].assign(width, 0.0);
    }
  }
  return p;
}

std::vector<std::vector<double>*> tensor_list(MlpParams& p) {
  std::vector<std::vector<double>*> out;
  for (int l = 0; l < p.linear_layers(); ++l) {
    out.push_back(&p.w[static_cast<size_t>(l)].v);
    out.push_back(&p.b[static_cast<size_t>(l)]);
    if (p.layer_norm && l < p.hidden_layers()) {
      out.push_back(&p.ln_gain[static_cast<size_t>(l)]);
      out.push_back(&p.ln_offset[static_cast<size_t>(l)]);
    }
  }
  return out;
}

std::vector<const std::vector<double>*> tensor_list(const MlpParams& p) {
  std::vector<const std::vector<double>*> out;
  for (const auto* t : tensor_list(const_cast<MlpParams&>(p))) out.push_back(t);
  return out;
}

bool all_finite(const MlpParams& p) {
  for (const auto* t : tensor_list(p)) {
    for (double x : *t) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
  return cdf + x * pdf;
}

namespace {

// Linear layer l applied to x, result into out (and cache when given).
void forward_layer(const MlpParams& p, int l, const Mat& x, Mat& out, LayerCache* cache) {
  const Mat& w = p.w[static_cast<size_t>(l)];
  const std::vector<double>& b = p.b[static_cast<size_t>(l)];
  const int batch = x.rows;
  const int width = w.cols;
  const bool hidden = l < p.hidden_layers();

  Mat z(batch, width);
  kernels::matmul(x.v.data(), w.v.data(), z.v.data(), batch, x.cols, width);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < batch; ++i) {
    double* zr = z.row(i);
    for (int j = 0; j < width; ++j) zr[j] += b[static_cast<size_t>(j)];
  }

  if (!hidden) {
    // backward never reads the final layer's own cache fields
    out = std::move(z);
    return;
  }

  Mat act_in(batch, width);
  Mat xhat;
  std::vector<double> rstd;
  if (p.layer_norm) {
    xhat.resize(batch, width);
    rstd.assign(static_cast<size_t>(batch), 0.0);
    const std::vector<double>& gain = p.ln_gain[static_cast<size_t>(l)];
    const std::vector<double>& offset = p.ln_offset[static_cast<size_t>(l)];
#pragma omp parallel for schedule(static)
    for (int i = 0; i < batch; ++i) {
      const double* zr = z.row(i);
      double mean = 0.0;
      for (int j = 0; j < width; ++j) mean += zr[j];
      mean /= width;
      double var = 0.0;
      for (int j = 0; j < width; ++j) {
        const double d = zr[j] - mean;
        var += d * d;
      }
      var /= width;
      const double r = 1.0 / std::sqrt(var + kLayerNormEpsilon);
      rstd[static_cast<size_t>(i)] = r;
      double* xr = xhat.row(i);
      double* ar = act_in.row(i);
      for (int j = 0; j < width; ++j) {
        xr[j] = (zr[j] - mean) * r;
        ar[j] = gain[static_cast<size_t>(j)] * xr[j] + offset[static_cast<size_t>(j)];
      }
    }
  } else {
    act_in = z;
  }

  Mat activated(batch, width);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < batch; ++i) {
    const double* ar = act_in.row(i);
    double* or_ = activated.row(i);
    for (int j = 0; j < width; ++j) or_[j] = gelu(ar[j]);
  }

  if (cache) {
    cache->z = std::move(z);
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
    cache->act_in = std::move(act_in);
    cache->out = activated;
  }
  out = std::move(activated);
}

}  // namespace

Mat mlp_forward(const MlpParams& p, const Mat& x) {
  check_shapes(p, x);
  Mat cur = x;
  for (int l = 0; l < p.linear_layers(); ++l) {
    Mat next;
    forward_layer(p, l, cur, next, nullptr);
    cur = std::move(next);
  }
  return cur;
}

Mat mlp_forward(const MlpParams& p, const Mat& x, ForwardCache& cache) {
  check_shapes(p, x);
  cache.input = x;
  cache.layers.assign(static_cast<size_t>(p.linear_layers()), LayerCache{});
  const Mat* cur = &cache.input;
  Mat out;
  for (int l = 0; l < p.linear_layers(); ++l) {
    LayerCache& lc = cache.layers[static_cast<size_t>(l)];
    forward_layer(p, l, *cur, out, &lc);
    cur = &lc.out;
  }
  return out;
}

MlpGrads make_grads_like(const MlpParams& p) {
  MlpGrads g;
  g.shape.sizes = p.sizes;
  g.shape.layer_norm = p.layer_norm;
  g.shape.w.resize(p.w.size());
  for (size_t i = 0; i < p.w.size(); ++i) g.shape.w[i].resize(p.w[i].rows, p.w[i].cols);
  g.shape.b.resize(p.b.size());
  for (size_t i = 0; i < p.b.size(); ++i) g.shape.b[i].assign(p.b[i].size(), 0.0);
  g.shape.ln_gain.resize(p.ln_gain.size());
  for (size_t i = 0; i < p.ln_gain.size(); ++i) g.shape.ln_gain[i].assign(p.ln_gain[i].size(), 0.0);
  g.shape.ln_offset.resize(p.ln_offset.size());
  for (size_t i = 0; i < p.ln_offset.size(); ++i) {
    g.shape.ln_offset[i].assign(p.ln_offset[i].size(), 0.0);
  }
  return g;
}

void zero_grads(MlpGrads& g) {
  for (auto* t : tensor_list(g.shape)) std::fill(t->begin(), t->end(), 0.0);
  std::fill(g.input.v.begin(), g.input.v.end(), 0.0);
}

void mlp_backward(const MlpParams& p, const ForwardCache& cache, const Mat& dout, MlpGrads& grads) {
  if (cache.layers.size() != static_cast<size_t>(p.linear_layers())) {
    throw ContractError("forward cache does not match network depth");
  }
  const int batch = cache.input.rows;
  if (dout.rows != batch || dout.cols != p.output_width()) {
    throw ContractError("output gradient shape mismatch");
  }

  Mat delta = dout;  // gradient wrt current layer output
  for (int l = p.linear_layers() - 1; l >= 0; --l) {
    const LayerCache& lc = cache.layers[static_cast<size_t>(l)];
    const Mat& input = l == 0 ? cache.input : cache.layers[static_cast<size_t>(l) - 1].out;
    const bool hidden = l < p.hidden_layers();
    const int width = p.sizes[static_cast<size_t>(l) + 1];

    Mat dz;
    if (!hidden) {
      dz = std::move(delta);
    } else {
      // through GELU
      Mat du(batch, width);
#pragma omp parallel for schedule(static)
      for (int i = 0; i < batch; ++i) {
        const double* ar = lc.act_in.row(i);
        const double* dr = delta.row(i);
        double* ur = du.row(i);
        for (int j = 0; j < width; ++j) ur[j] = dr[j] * gelu_grad(ar[j]);
      }

      if (p.layer_norm) {
        const std::vector<double>& gain = p.ln_gain[static_cast<size_t>(l)];
        std::vector<double>& dgain = grads.shape.ln_gain[static_cast<size_t>(l)];
        std::vector<double>& doffset = grads.shape.ln_offset[static_cast<size_t>(l)];
        for (int i = 0; i < batch; ++i) {
          const double* ur = du.row(i);
          const double* xr = lc.xhat.row(i);
          for (int j = 0; j < width; ++j) {
            dgain[static_cast<size_t>(j)] += ur[j] * xr[j];
            doffset[static_cast<size_t>(j)] += ur[j];
          }
        }
        dz.resize(batch, width);
#pragma omp parallel for schedule(static)
        for (int i = 0; i < batch; ++i) {
          const double* ur = du.row(i);
          const double* xr = lc.xhat.row(i);
          double* zr = dz.row(i);
          double m1 = 0.0;  // mean of dxhat
          double m2 = 0.0;  // mean of dxhat .* xhat
          for (int j = 0; j < width; ++j) {
            const double dxhat = ur[j] * gain[static_cast<size_t>(j)];
            m1 += dxhat;
            m2 += dxhat * xr[j];
          }
          m1 /= width;
          m2 /= width;
          const double r = lc.rstd[static_cast<size_t>(i)];
          for (int j = 0; j < width; ++j) {
            const double dxhat = ur[j] * gain[static_cast<size_t>(j)];
            zr[j] = r * (dxhat - m1 - xr[j] * m2);
          }
        }
      } else {
        dz = std::move(du);
      }
    }

    // dW = input^T dz, db = column sums, dX = dz W^T
    Mat dw(input.cols, width);
    kernels::matmul_at(input.v.data(), dz.v.data(), dw.v.data(), batch, input.cols, width);
    std::vector<double>& wgrad = grads.shape.w[static_cast<size_t>(l)].v;
    for (size_t i = 0; i < wgrad.size(); ++i) wgrad[i] += dw.v[i];

    std::vector<double>& bgrad = grads.shape.b[static_cast<size_t>(l)];
    for (int i = 0; i < batch; ++i) {
      const double* zr = dz.row(i);
      for (int j = 0; j < width; ++j) bgrad[static_cast<size_t>(j)] += zr[j];
    }

    const Mat& w = p.w[static_cast<size_t>(l)];
    Mat dx(batch, input.cols);
    kernels::matmul_bt(dz.v.data(), w.v.data(), dx.v.data(), batch, width, input.cols);
    if (l == 0) {
      grads.input = std::move(dx);
    } else {
      delta = std::move(dx);
    }
  }
}

AdamState make_adam(const MlpParams& p, double lr) {
  AdamState s;
  s.lr = lr;
  s.m = make_grads_like(p).shape;
  s.v = make_grads_like(p).shape;
  return s;
}

void adam_step(MlpParams& p, const MlpGrads& grads, AdamState& state) {
  const auto gts = tensor_list(grads.shape);
  for (const auto* t : gts) {
    for (double x : *t) {
      if (!std::isfinite(x)) {
        throw NumericFault("non-finite gradient in adam_step (step " +
                           std::to_string(state.step) + ")");
      }
    }
  }

  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  const auto pts = tensor_list(p);
  const auto mts = tensor_list(state.m);
  const auto vts = tensor_list(state.v);
  for (size_t ti = 0; ti < pts.size(); ++ti) {
    std::vector<double>& pv = *pts[ti];
    std::vector<double>& mv = *mts[ti];
    std::vector<double>& vv = *vts[ti];
    const std::vector<double>& gv = *gts[ti];
    const int64_t n = static_cast<int64_t>(pv.size());
#pragma omp parallel for schedule(static) if (n > 4096)
    for (int64_t i = 0; i < n; ++i) {
      const double g = gv[static_cast<size_t>(i)];
      const double m = state.beta1 * mv[static_cast<size_t>(i)] + (1.0 - state.beta1) * g;
      const double v = state.beta2 * vv[static_cast<size_t>(i)] + (1.0 - state.beta2) * g * g;
      mv[static_cast<size_t>(i)] = m;
      vv[static_cast<size_t>(i)] = v;
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      pv[static_cast<size_t>(i)] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

TargetCopy make_target(const MlpParams& p, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw ContractError("tau must lie in (0, 1]");
  return TargetCopy{p, tau};
}

void ema_update(TargetCopy& target, const MlpParams& source) {
  const auto sts = tensor_list(source);
  const auto tts = tensor_list(target.shadow);
  if (sts.size() != tts.size()) throw ContractError("target copy shapes do not match source");
  const double tau = target.tau;
  for (size_t ti = 0; ti < sts.size(); ++ti) {
    std::vector<double>& tv = *tts[ti];
    const std::vector<double>& sv = *sts[ti];
    if (tv.size() != sv.size()) throw ContractError("target copy tensor size mismatch");
    for (size_t i = 0; i < tv.size(); ++i) tv[i] = (1.0 - tau) * tv[i] + tau * sv[i];
  }
}

double expectile_weight(double u, double kappa) { return u < 0.0 ? 1.0 - kappa : kappa; }

double expectile_loss(const std::vector<double>& residual, double kappa,
                      std::vector<double>* grad_out) {
  if (!(kappa > 0.0 && kappa < 1.0)) throw ContractError("kappa must lie in (0, 1)");
  if (residual.empty()) throw ContractError("expectile loss needs a nonempty batch");
  const double inv_n = 1.0 / static_cast<double>(residual.size());
  if (grad_out) grad_out->assign(residual.size(), 0.0);
  double loss = 0.0;
  for (size_t i = 0; i < residual.size(); ++i) {
    const double u = residual[i];
    const double w = expectile_weight(u, kappa);
    loss += w * u * u;
    if (grad_out) (*grad_out)[i] = 2.0 * w * u * inv_n;
  }
  return loss * inv_n;
}

void write_mlp_block(io::Writer& w, const MlpParams& p) {
  w.u8(p.layer_norm ? 1 : 0);
  w.u32(static_cast<uint32_t>(p.sizes.size()));
  for (int s : p.sizes) w.u32(static_cast<uint32_t>(s));
  for (const auto* t : tensor_list(p)) w.f64_array(t->data(), t->size());
}

MlpParams read_mlp_block(io::Reader& r) {
  MlpParams p;
  p.layer_norm = r.u8() != 0;
  const uint32_t n_sizes = r.u32();
  if (n_sizes < 2 || n_sizes > 64) {
    throw IoError(IoErrorKind::kTruncated, "implausible layer count in checkpoint");
  }
  p.sizes.resize(n_sizes);
  for (auto& s : p.sizes) s = static_cast<int>(r.u32());

  Rng dummy(0);
  MlpParams shaped = make_mlp(p.sizes, p.layer_norm, dummy);
  for (auto* t : tensor_list(shaped)) r.f64_array(t->data(), t->size());
  return shaped;
}

void save_mlp_checkpoint(const std::string& path, const MlpParams& p) {
  io::Writer w;
  w.u32(kCheckpointVersion);
  w.u32(static_cast<uint32_t>(CheckpointKind::kMlp));
  write_mlp_block(w, p);
  io::write_file(path, kCheckpointMagic, w);
}

MlpParams load_mlp_checkpoint(const std::string& path) {
  const std::vector<uint8_t> payload = io::read_file(path, kCheckpointMagic);
  io::Reader r(payload.data(), payload.size());
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw IoError(IoErrorKind::kVersionMismatch, "checkpoint version unsupported");
  }
  const uint32_t kind = r.u32();
  if (kind != static_cast<uint32_t>(CheckpointKind::kMlp)) {
    throw IoError(IoErrorKind::kSpecMismatch, "checkpoint is not a bare network");
  }
  MlpParams p = read_mlp_block(r);
  if (r.remaining() != 0) throw IoError(IoErrorKind::kTruncated, "trailing bytes in " + path);
  return p;
}

}  // namespace dgrd
