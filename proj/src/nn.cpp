#include "ammasi/nn.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ammasi::nn {

namespace {

constexpr double kMaskPenalty = -1e30;

void check(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void ensure_finite(const Tensor2& t, const char* what) {
  for (double v : t.data)
    if (!std::isfinite(v)) throw std::runtime_error(std::string(what) + ": non-finite entry");
}

// y (r x c) += x (r x k) . w (k x c)
void matmul_acc(const Tensor2& x, const Tensor2& w, Tensor2& y) {
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double* xi = x.data.data() + i * x.cols;
    double* yi = y.data.data() + i * y.cols;
    for (std::size_t k = 0; k < x.cols; ++k) {
      const double xv = xi[k];
      if (xv == 0.0) continue;
      const double* wk = w.data.data() + k * w.cols;
      for (std::size_t j = 0; j < w.cols; ++j) yi[j] += xv * wk[j];
    }
  }
}

// w_grad (k x c) += x^T (k x r) . dy (r x c)
void matmul_xt_acc(const Tensor2& x, const Tensor2& dy, Tensor2& w_grad) {
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double* xi = x.data.data() + i * x.cols;
    const double* di = dy.data.data() + i * dy.cols;
    for (std::size_t k = 0; k < x.cols; ++k) {
      const double xv = xi[k];
      if (xv == 0.0) continue;
      double* gk = w_grad.data.data() + k * w_grad.cols;
      for (std::size_t j = 0; j < dy.cols; ++j) gk[j] += xv * di[j];
    }
  }
}

// dx (r x k) += dy (r x c) . w^T (c x k)
void matmul_wt_acc(const Tensor2& dy, const Tensor2& w, Tensor2& dx) {
  for (std::size_t i = 0; i < dy.rows; ++i) {
    const double* di = dy.data.data() + i * dy.cols;
    double* xi = dx.data.data() + i * dx.cols;
    for (std::size_t j = 0; j < dy.cols; ++j) {
      const double dv = di[j];
      if (dv == 0.0) continue;
      const double* wj = w.data.data();
      for (std::size_t k = 0; k < w.rows; ++k) xi[k] += dv * wj[k * w.cols + j];
    }
  }
}

}  // namespace

double elu(double z) { return z > 0.0 ? z : std::expm1(z); }
double elu_grad(double z) { return z > 0.0 ? 1.0 : std::exp(z); }

Fc2Params Fc2Params::init(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng) {
  check(in >= 1 && hidden >= 1 && out >= 1, "Fc2Params: widths must be >= 1");
  Fc2Params p;
  p.w1 = Tensor2(in, hidden);
  p.b1.assign(hidden, 0.0);
  p.w2 = Tensor2(hidden, out);
  p.b2.assign(out, 0.0);
  const double lim1 = std::sqrt(6.0 / static_cast<double>(in + hidden));
  for (double& v : p.w1.data) v = rng.uniform(-lim1, lim1);
  const double lim2 = std::sqrt(6.0 / static_cast<double>(hidden + out));
  for (double& v : p.w2.data) v = rng.uniform(-lim2, lim2);
  return p;
}

Fc2Params Fc2Params::zeros(std::size_t in, std::size_t hidden, std::size_t out) {
  Fc2Params p;
  p.w1 = Tensor2(in, hidden);
  p.b1.assign(hidden, 0.0);
  p.w2 = Tensor2(hidden, out);
  p.b2.assign(out, 0.0);
  return p;
}

Tensor2 fc2_forward(const Tensor2& x, const Fc2Params& p, Fc2Cache* cache) {
  check(x.cols == p.w1.rows, "fc2_forward: input width " + std::to_string(x.cols) +
                                 " != w1 rows " + std::to_string(p.w1.rows));
  check(p.w1.cols == p.w2.rows, "fc2_forward: w1/w2 width mismatch");

  Tensor2 z1(x.rows, p.w1.cols);
  for (std::size_t i = 0; i < z1.rows; ++i)
    for (std::size_t j = 0; j < z1.cols; ++j) z1.at(i, j) = p.b1[j];
  matmul_acc(x, p.w1, z1);

  Tensor2 h(z1.rows, z1.cols);
  for (std::size_t i = 0; i < z1.data.size(); ++i) h.data[i] = elu(z1.data[i]);

  Tensor2 y(x.rows, p.w2.cols);
  for (std::size_t i = 0; i < y.rows; ++i)
    for (std::size_t j = 0; j < y.cols; ++j) y.at(i, j) = p.b2[j];
  matmul_acc(h, p.w2, y);
  ensure_finite(y, "fc2_forward");

  if (cache) {
    cache->x = x;
    cache->z1 = std::move(z1);
    cache->h = std::move(h);
  }
  return y;
}

void fc2_backward(const Tensor2& dy, const Fc2Cache& cache, const Fc2Params& p,
                  Fc2Params& grads, Tensor2* dx) {
  check(dy.rows == cache.x.rows && dy.cols == p.w2.cols, "fc2_backward: dy shape mismatch");

  // second layer
  matmul_xt_acc(cache.h, dy, grads.w2);
  for (std::size_t i = 0; i < dy.rows; ++i)
    for (std::size_t j = 0; j < dy.cols; ++j) grads.b2[j] += dy.at(i, j);

  Tensor2 dh(cache.h.rows, cache.h.cols);
  matmul_wt_acc(dy, p.w2, dh);

  // through ELU
  Tensor2 dz1(dh.rows, dh.cols);
  for (std::size_t i = 0; i < dh.data.size(); ++i)
    dz1.data[i] = dh.data[i] * elu_grad(cache.z1.data[i]);

  // first layer
  matmul_xt_acc(cache.x, dz1, grads.w1);
  for (std::size_t i = 0; i < dz1.rows; ++i)
    for (std::size_t j = 0; j < dz1.cols; ++j) grads.b1[j] += dz1.at(i, j);

  if (dx) {
    if (dx->rows != cache.x.rows || dx->cols != cache.x.cols)
      *dx = Tensor2(cache.x.rows, cache.x.cols);
    matmul_wt_acc(dz1, p.w1, *dx);
  }
}

Tensor2 masked_mha(const Tensor2& query_feat, const Tensor2& ref_feats,
                   std::span<const double> dists, double sigma, const MhaParams& p,
                   MaskDirection direction, MhaCache* cache, bool* all_masked_warn) {
  const std::size_t n_refs = ref_feats.rows;
  check(n_refs >= 1, "masked_mha: no reference rows");
  check(sigma > 0.0, "masked_mha: sigma must be positive");
  check(dists.size() == n_refs, "masked_mha: dists length mismatch");
  check(query_feat.rows == 1, "masked_mha: query must be a single row");
  check(!p.heads.empty() && p.head_dim >= 1, "masked_mha: empty head config");

  std::vector<char> masked(n_refs, 0);
  std::size_t n_masked = 0;
  for (std::size_t j = 0; j < n_refs; ++j) {
    const bool hit = direction == MaskDirection::kBelow ? dists[j] < sigma
                                                        : dists[j] > sigma;
    masked[j] = hit ? 1 : 0;
    n_masked += hit ? 1 : 0;
  }
  bool fallback = false;
  if (n_masked == n_refs) {
    // All references masked: attend over everything rather than emit NaN.
    std::fill(masked.begin(), masked.end(), 0);
    fallback = true;
  }
  if (all_masked_warn) *all_masked_warn = fallback;

  const std::size_t d = p.head_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Tensor2 out(1, p.heads.size() * d);

  if (cache) {
    cache->heads.assign(p.heads.size(), MhaHeadCache{});
    cache->masked = masked;
    cache->all_masked_fallback = fallback;
  }

  for (std::size_t hidx = 0; hidx < p.heads.size(); ++hidx) {
    const HeadParams& head = p.heads[hidx];
    check(head.query.out_width() == d && head.key.out_width() == d &&
              head.value.out_width() == d,
          "masked_mha: head output width != head_dim");
    MhaHeadCache local;
    MhaHeadCache* hc = cache ? &cache->heads[hidx] : &local;

    hc->q = fc2_forward(query_feat, head.query, cache ? &hc->q_cache : nullptr);
    hc->k = fc2_forward(ref_feats, head.key, cache ? &hc->k_cache : nullptr);
    hc->v = fc2_forward(ref_feats, head.value, cache ? &hc->v_cache : nullptr);

    std::vector<double> logits(n_refs);
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n_refs; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += hc->q.at(0, c) * hc->k.at(j, c);
      logits[j] = dot * scale + (masked[j] ? kMaskPenalty : 0.0);
      max_logit = std::max(max_logit, logits[j]);
    }
    std::vector<double>& w = hc->weights;
    w.assign(n_refs, 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < n_refs; ++j) {
      w[j] = std::exp(logits[j] - max_logit);  // masked entries underflow to 0
      total += w[j];
    }
    double* out_row = out.data.data() + hidx * d;
    for (std::size_t j = 0; j < n_refs; ++j) {
      w[j] /= total;
      if (w[j] == 0.0) continue;
      const double* vj = hc->v.data.data() + j * d;
      for (std::size_t c = 0; c < d; ++c) out_row[c] += w[j] * vj[c];
    }
  }
  ensure_finite(out, "masked_mha");
  return out;
}

void masked_mha_backward(const Tensor2& dout, const MhaCache& cache, const MhaParams& p,
                         MhaParams& grads, Tensor2* d_query, Tensor2* d_refs) {
  check(cache.heads.size() == p.heads.size(), "masked_mha_backward: cache mismatch");
  check(dout.rows == 1 && dout.cols == p.heads.size() * p.head_dim,
        "masked_mha_backward: dout shape mismatch");
  const std::size_t d = p.head_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  for (std::size_t hidx = 0; hidx < p.heads.size(); ++hidx) {
    const MhaHeadCache& hc = cache.heads[hidx];
    const std::size_t n_refs = hc.weights.size();
    const double* dout_row = dout.data.data() + hidx * d;

    // d weights and softmax backward; masked weights are exactly 0, so their
    // logits and k/v rows receive exactly zero gradient.
    std::vector<double> dw(n_refs, 0.0);
    double mixed = 0.0;
    for (std::size_t j = 0; j < n_refs; ++j) {
      if (hc.weights[j] == 0.0) continue;
      const double* vj = hc.v.data.data() + j * d;
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += dout_row[c] * vj[c];
      dw[j] = acc;
      mixed += hc.weights[j] * acc;
    }

    Tensor2 dq(1, d);
    Tensor2 dk(n_refs, d);
    Tensor2 dv(n_refs, d);
    for (std::size_t j = 0; j < n_refs; ++j) {
      const double wj = hc.weights[j];
      if (wj == 0.0) continue;
      const double dlogit = wj * (dw[j] - mixed) * scale;
      for (std::size_t c = 0; c < d; ++c) {
        dq.at(0, c) += dlogit * hc.k.at(j, c);
        dk.at(j, c) = dlogit * hc.q.at(0, c);
        dv.at(j, c) = wj * dout_row[c];
      }
    }

    fc2_backward(dq, hc.q_cache, p.heads[hidx].query, grads.heads[hidx].query, d_query);
    fc2_backward(dk, hc.k_cache, p.heads[hidx].key, grads.heads[hidx].key, d_refs);
    fc2_backward(dv, hc.v_cache, p.heads[hidx].value, grads.heads[hidx].value, d_refs);
  }
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, std::int64_t t, double beta1, double beta2, double eps) {
  check(lr > 0.0, "adam_step: lr must be positive");
  check(t >= 1, "adam_step: t must be >= 1");
  check(params.size() == grads.size(), "adam_step: param/grad size mismatch");
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

double grad_check(const std::function<double(std::span<const double>)>& f,
                  std::span<const double> analytic_grad, std::vector<double> params,
                  double h, double atol) {
  check(analytic_grad.size() == params.size(), "grad_check: gradient size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double fp = f(params);
    params[i] = keep - h;
    const double fm = f(params);
    params[i] = keep;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("grad_check: non-finite function value");
    const double numeric = (fp - fm) / (2.0 * h);
    const double analytic = analytic_grad[i];
    if (std::fabs(analytic - numeric) <= atol) continue;
    const double rel = std::fabs(analytic - numeric) /
                       std::max(1e-8, std::fabs(analytic) + std::fabs(numeric));
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace ammasi::nn
