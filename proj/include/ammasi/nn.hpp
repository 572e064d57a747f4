#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ammasi/rng.hpp"

namespace ammasi::nn {

/// Dense row-major matrix of doubles. Ops validate shapes and keep entries
/// finite.
struct Tensor2 {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  Tensor2() = default;
  Tensor2(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }
};

double elu(double z);
double elu_grad(double z);

/// Two stacked fully connected layers: first ELU, second linear.
struct Fc2Params {
  Tensor2 w1;               // in x hidden
  std::vector<double> b1;   // hidden
  Tensor2 w2;               // hidden x out
  std::vector<double> b2;   // out

  std::size_t in_width() const { return w1.rows; }
  std::size_t hidden_width() const { return w1.cols; }
  std::size_t out_width() const { return w2.cols; }

  /// Glorot-uniform weights, zero biases.
  static Fc2Params init(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng);
  static Fc2Params zeros(std::size_t in, std::size_t hidden, std::size_t out);
};

struct Fc2Cache {
  Tensor2 x;   // input
  Tensor2 z1;  // pre-activation of layer 1
  Tensor2 h;   // elu(z1)
};

/// out = elu(x.w1 + b1).w2 + b2. Throws std::invalid_argument on shape
/// mismatch.
Tensor2 fc2_forward(const Tensor2& x, const Fc2Params& p, Fc2Cache* cache = nullptr);

/// Accumulates parameter gradients into `grads` (same shapes as p); writes
/// the input gradient to dx when given.
void fc2_backward(const Tensor2& dy, const Fc2Cache& cache, const Fc2Params& p,
                  Fc2Params& grads, Tensor2* dx = nullptr);

/// kBelow masks references with dist < sigma (the printed rule); kAbove masks
/// dist > sigma.
enum class MaskDirection { kBelow, kAbove };

/// Independent two-stack FCs per head for query/key/value.
struct HeadParams {
  Fc2Params query, key, value;
};

struct MhaParams {
  std::vector<HeadParams> heads;
  std::size_t head_dim = 0;  // d; heads.size() * head_dim = branch output width
};

struct MhaHeadCache {
  Fc2Cache q_cache, k_cache, v_cache;
  Tensor2 q, k, v;              // 1 x d, N x d, N x d
  std::vector<double> weights;  // softmax scores, exactly 0 where masked
};

struct MhaCache {
  std::vector<MhaHeadCache> heads;
  std::vector<char> masked;  // per reference, after the all-masked fallback
  bool all_masked_fallback = false;
};

/// Masked multi-head attention over N reference rows. Per head: logits are
/// <q, k_j> / sqrt(d) plus an additive -1e30 where masked; max-subtracted
/// softmax underflows masked weights to exactly 0. If every reference is
/// masked, the mask is dropped for this query and the fallback flag raised.
/// Returns the 1 x (K*d) concatenation of head outputs.
Tensor2 masked_mha(const Tensor2& query_feat, const Tensor2& ref_feats,
                   std::span<const double> dists, double sigma, const MhaParams& p,
                   MaskDirection direction, MhaCache* cache = nullptr,
                   bool* all_masked_warn = nullptr);

/// Backward pass for masked_mha. Accumulates into `grads`; optionally emits
/// gradients w.r.t. the query row and the reference rows.
void masked_mha_backward(const Tensor2& dout, const MhaCache& cache, const MhaParams& p,
                         MhaParams& grads, Tensor2* d_query = nullptr,
                         Tensor2* d_refs = nullptr);

struct AdamState {
  std::vector<double> m, v;
};

/// Standard bias-corrected Adam update in place. t is the 1-based step count;
/// lr must be positive.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, std::int64_t t, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

/// Central-difference check of an analytic gradient. Returns the max relative
/// error |a - n| / max(1e-8, |a| + |n|) over coordinates; coordinates where
/// the two values agree to within `atol` count as exact, so zero-gradient
/// coordinates are not dominated by difference-quotient rounding noise.
/// Throws if f is non-finite at any probe.
double grad_check(const std::function<double(std::span<const double>)>& f,
                  std::span<const double> analytic_grad, std::vector<double> params,
                  double h = 1e-5, double atol = 1e-8);

}  // namespace ammasi::nn
