#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dgrd/errors.hpp"
#include "dgrd/io.hpp"
#include "dgrd/rng.hpp"

namespace dgrd {

// Row-major dense matrix of doubles. All nn-kit arithmetic is 64-bit.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}

  double* row(int i) { return v.data() + static_cast<size_t>(i) * cols; }
  const double* row(int i) const { return v.data() + static_cast<size_t>(i) * cols; }
  double& at(int i, int j) { return v[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const { return v[static_cast<size_t>(i) * cols + j]; }
  void resize(int r, int c) {
    rows = r;
    cols = c;
    v.assign(static_cast<size_t>(r) * c, 0.0);
  }
};

// Dense network: per hidden layer linear -> layer norm (optional) -> GELU;
// final layer linear. Weights are [in x out] so a batch forward is one
// row-major matmul per layer.
struct MlpParams {
  std::vector<int> sizes;  // input, hidden..., output
  bool layer_norm = false;
  std::vector<Mat> w;
  std::vector<std::vector<double>> b;
  std::vector<std::vector<double>> ln_gain;    // hidden layers only
  std::vector<std::vector<double>> ln_offset;  // hidden layers only

  int input_width() const { return sizes.front(); }
  int output_width() const { return sizes.back(); }
  int linear_layers() const { return static_cast<int>(sizes.size()) - 1; }
  int hidden_layers() const { return static_cast<int>(sizes.size()) - 2; }
};

// Fan-scaled uniform init, range +-sqrt(6/(fan_in+fan_out)); zero biases,
// unit gains.
MlpParams make_mlp(std::vector<int> sizes, bool layer_norm, Rng& rng);

// Tensors in a fixed traversal order (per layer: W, b, then gain, offset on
// hidden layers). The same order defines the checkpoint layout and the
// Adam moment pairing.
std::vector<std::vector<double>*> tensor_list(MlpParams& p);
std::vector<const std::vector<double>*> tensor_list(const MlpParams& p);

bool all_finite(const MlpParams& p);

struct LayerCache {
  Mat xhat;                  // normalized activations (layer_norm only)
  std::vector<double> rstd;  // per-row 1/sqrt(var+eps) (layer_norm only)
  Mat act_in;                // GELU input
  Mat act_cdf;               // Phi(act_in), reused by the backward pass
  Mat out;                   // layer output
};

struct ForwardCache {
  Mat input;
  std::vector<LayerCache> layers;
};

constexpr double kLayerNormEpsilon = 1e-5;

double gelu(double x);
double gelu_grad(double x);

Mat mlp_forward(const MlpParams& p, const Mat& x);
Mat mlp_forward(const MlpParams& p, const Mat& x, ForwardCache& cache);

// Gradients shaped like the parameters, plus the gradient wrt the input
// batch. `shape` mirrors MlpParams so tensor_list applies to it too.
struct MlpGrads {
  MlpParams shape;  // tensors hold gradient values
  Mat input;
};

MlpGrads make_grads_like(const MlpParams& p);
void zero_grads(MlpGrads& g);

// Exact reverse-mode gradients of mlp_forward for the cached batch.
// Accumulates into `grads` (callers zero it between steps).
void mlp_backward(const MlpParams& p, const ForwardCache& cache, const Mat& dout, MlpGrads& grads);

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t step = 0;
  MlpParams m;  // first moments, parameter-shaped
  MlpParams v;  // second moments
};

AdamState make_adam(const MlpParams& p, double lr);

// Standard bias-corrected Adam update. Non-finite gradients raise
// NumericFault before any parameter is touched.
void adam_step(MlpParams& p, const MlpGrads& grads, AdamState& state);

struct TargetCopy {
  MlpParams shadow;
  double tau = 0.005;
};

TargetCopy make_target(const MlpParams& p, double tau);
void ema_update(TargetCopy& target, const MlpParams& source);

// Asymmetric squared loss |kappa - 1{u<0}| * u^2, averaged over the batch.
// The u == 0 weight is kappa (the u > 0 branch limit).
double expectile_weight(double u, double kappa);
double expectile_loss(const std::vector<double>& residual, double kappa,
                      std::vector<double>* grad_out = nullptr);

// Checkpoint block primitives shared by every "DGRD-CK\0" file kind.
void write_mlp_block(io::Writer& w, const MlpParams& p);
MlpParams read_mlp_block(io::Reader& r);

// Bare single-network checkpoint (kind 1).
void save_mlp_checkpoint(const std::string& path, const MlpParams& p);
MlpParams load_mlp_checkpoint(const std::string& path);

constexpr char kCheckpointMagic[8] = {'D', 'G', 'R', 'D', '-', 'C', 'K', '\0'};
constexpr uint32_t kCheckpointVersion = 1;
enum class CheckpointKind : uint32_t { kMlp = 1, kGoalEncoder = 2, kDqn = 3 };

}  // namespace dgrd
