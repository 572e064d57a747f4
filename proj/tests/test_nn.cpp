#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include <limits>

#include "ammasi/nn.hpp"
#include "ammasi/rng.hpp"
#include "doctest.h"

using namespace ammasi;
using nn::Fc2Params;
using nn::MaskDirection;
using nn::MhaParams;
using nn::Tensor2;

namespace {

Tensor2 random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor2 t(r, c);
  for (double& v : t.data) v = rng.normal(0.0, scale);
  return t;
}

// Flat parameter views for finite-difference checks.
std::vector<double> flatten(const Fc2Params& p) {
  std::vector<double> flat(p.w1.data);
  flat.insert(flat.end(), p.b1.begin(), p.b1.end());
  flat.insert(flat.end(), p.w2.data.begin(), p.w2.data.end());
  flat.insert(flat.end(), p.b2.begin(), p.b2.end());
  return flat;
}

void unflatten(std::span<const double> flat, Fc2Params& p) {
  std::size_t pos = 0;
  for (auto* vec : {&p.w1.data, &p.b1, &p.w2.data, &p.b2}) {
    std::copy(flat.begin() + pos, flat.begin() + pos + vec->size(), vec->begin());
    pos += vec->size();
  }
}

std::vector<double> flatten(const MhaParams& p) {
  std::vector<double> flat;
  for (const auto& h : p.heads)
    for (const auto* fc : {&h.query, &h.key, &h.value}) {
      const auto part = flatten(*fc);
      flat.insert(flat.end(), part.begin(), part.end());
    }
  return flat;
}

void unflatten(std::span<const double> flat, MhaParams& p) {
  std::size_t pos = 0;
  for (auto& h : p.heads)
    for (auto* fc : {&h.query, &h.key, &h.value}) {
      const std::size_t n = flatten(*fc).size();
      Fc2Params tmp = *fc;
      unflatten(flat.subspan(pos, n), tmp);
      *fc = tmp;
      pos += n;
    }
}

MhaParams make_mha(std::size_t q_in, std::size_t kv_in, std::size_t heads,
                   std::size_t d, Rng& rng) {
  MhaParams p;
  p.head_dim = d;
  for (std::size_t h = 0; h < heads; ++h) {
    nn::HeadParams head;
    head.query = Fc2Params::init(q_in, d, d, rng);
    head.key = Fc2Params::init(kv_in, d, d, rng);
    head.value = Fc2Params::init(kv_in, d, d, rng);
    p.heads.push_back(std::move(head));
  }
  return p;
}

}  // namespace

TEST_CASE("two-stack FC forward") {
  SUBCASE("all-zero parameters give zero output") {
    const Fc2Params p = Fc2Params::zeros(3, 4, 2);
    Tensor2 x(2, 3);
    x.data = {1, -2, 3, 0.5, 0, -1};
    const Tensor2 y = nn::fc2_forward(x, p);
    for (double v : y.data) CHECK(v == 0.0);
  }

  SUBCASE("identity weights pass non-negative inputs through") {
    Fc2Params p = Fc2Params::zeros(3, 3, 3);
    for (int i = 0; i < 3; ++i) {
      p.w1.at(i, i) = 1.0;
      p.w2.at(i, i) = 1.0;
    }
    Tensor2 x(1, 3);
    x.data = {0.0, 2.5, 7.0};
    const Tensor2 y = nn::fc2_forward(x, p);
    for (int j = 0; j < 3; ++j) CHECK(y.at(0, j) == x.at(0, j));
  }

  SUBCASE("shape mismatch is rejected") {
    const Fc2Params p = Fc2Params::zeros(3, 4, 2);
    CHECK_THROWS_AS(nn::fc2_forward(Tensor2(1, 5), p), std::invalid_argument);
  }

  SUBCASE("gradients match central differences") {
    Rng rng(42);
    Fc2Params p = Fc2Params::init(4, 6, 3, rng);
    const Tensor2 x = random_tensor(5, 4, rng);
    const Tensor2 proj = random_tensor(5, 3, rng);  // random scalar projection

    nn::Fc2Cache cache;
    nn::fc2_forward(x, p, &cache);
    Fc2Params grads = Fc2Params::zeros(4, 6, 3);
    nn::fc2_backward(proj, cache, p, grads);

    const auto f = [&](std::span<const double> flat) {
      Fc2Params probe = p;
      unflatten(flat, probe);
      const Tensor2 y = nn::fc2_forward(x, probe);
      double s = 0;
      for (std::size_t i = 0; i < y.data.size(); ++i) s += proj.data[i] * y.data[i];
      return s;
    };
    const double err = nn::grad_check(f, flatten(grads), flatten(p));
    CHECK(err < 1e-4);
  }

  SUBCASE("input gradients match central differences") {
    Rng rng(43);
    const Fc2Params p = Fc2Params::init(3, 5, 2, rng);
    Tensor2 x = random_tensor(2, 3, rng);
    const Tensor2 proj = random_tensor(2, 2, rng);

    nn::Fc2Cache cache;
    nn::fc2_forward(x, p, &cache);
    Fc2Params sink = Fc2Params::zeros(3, 5, 2);
    Tensor2 dx;
    nn::fc2_backward(proj, cache, p, sink, &dx);

    const auto f = [&](std::span<const double> flat) {
      Tensor2 probe = x;
      probe.data.assign(flat.begin(), flat.end());
      const Tensor2 y = nn::fc2_forward(probe, p);
      double s = 0;
      for (std::size_t i = 0; i < y.data.size(); ++i) s += proj.data[i] * y.data[i];
      return s;
    };
    CHECK(nn::grad_check(f, dx.data, x.data) < 1e-4);
  }
}

TEST_CASE("ELU is C1 at zero") {
  CHECK(nn::elu(0.0) == 0.0);
  CHECK(std::fabs(nn::elu(1e-9) - nn::elu(-1e-9)) < 3e-9);
  CHECK(nn::elu_grad(0.0) == 1.0);
  CHECK(std::fabs(nn::elu_grad(1e-9) - nn::elu_grad(-1e-9)) < 3e-9);
}

TEST_CASE("masked multi-head attention") {
  Rng rng(1234);
  const std::size_t n = 6, q_in = 5, kv_in = 6, d = 4;

  SUBCASE("single unmasked reference receives full weight") {
    MhaParams p = make_mha(q_in, kv_in, 2, d, rng);
    const Tensor2 query = random_tensor(1, q_in, rng);
    const Tensor2 refs = random_tensor(n, kv_in, rng);
    // direction below masks dist < sigma; only ref 3 sits above the threshold
    std::vector<double> dists(n, 0.1);
    dists[3] = 5.0;

    nn::MhaCache cache;
    const Tensor2 out = nn::masked_mha(query, refs, dists, 1.0, p,
                                       MaskDirection::kBelow, &cache);
    for (std::size_t h = 0; h < p.heads.size(); ++h) {
      CHECK(cache.heads[h].weights[3] == 1.0);
      for (std::size_t j = 0; j < n; ++j)
        if (j != 3) CHECK(cache.heads[h].weights[j] == 0.0);
      Tensor2 ref_row(1, kv_in);
      std::copy(refs.row(3).begin(), refs.row(3).end(), ref_row.data.begin());
      const Tensor2 v = nn::fc2_forward(ref_row, p.heads[h].value);
      for (std::size_t c = 0; c < d; ++c) CHECK(out.at(0, h * d + c) == v.at(0, c));
    }
  }

  SUBCASE("identical references give uniform scores") {
    MhaParams p = make_mha(q_in, kv_in, 1, d, rng);
    const Tensor2 query = random_tensor(1, q_in, rng);
    Tensor2 refs(n, kv_in);
    const Tensor2 one_row = random_tensor(1, kv_in, rng);
    for (std::size_t j = 0; j < n; ++j)
      std::copy(one_row.data.begin(), one_row.data.end(), refs.row(j).begin());
    const std::vector<double> dists(n, 2.0);

    nn::MhaCache cache;
    const Tensor2 out = nn::masked_mha(query, refs, dists, 1.0, p,
                                       MaskDirection::kBelow, &cache);
    for (std::size_t j = 0; j < n; ++j)
      CHECK(cache.heads[0].weights[j] == doctest::Approx(1.0 / n).epsilon(1e-12));
    const Tensor2 v = nn::fc2_forward(one_row, p.heads[0].value);
    for (std::size_t c = 0; c < d; ++c)
      CHECK(out.at(0, c) == doctest::Approx(v.at(0, c)).epsilon(1e-12));
  }

  SUBCASE("brute-force softmax oracle over survivors") {
    MhaParams p = make_mha(q_in, kv_in, 3, d, rng);
    const Tensor2 query = random_tensor(1, q_in, rng);
    const Tensor2 refs = random_tensor(n, kv_in, rng);
    std::vector<double> dists{0.5, 0.01, 0.9, 0.02, 1.4, 0.7};  // two below sigma
    const double sigma = 0.1;

    const Tensor2 out =
        nn::masked_mha(query, refs, dists, sigma, p, MaskDirection::kBelow);

    for (std::size_t h = 0; h < p.heads.size(); ++h) {
      const Tensor2 q = nn::fc2_forward(query, p.heads[h].query);
      const Tensor2 k = nn::fc2_forward(refs, p.heads[h].key);
      const Tensor2 v = nn::fc2_forward(refs, p.heads[h].value);
      double z = 0.0;
      std::vector<double> w(n, 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        if (dists[j] < sigma) continue;
        double dot = 0;
        for (std::size_t c = 0; c < d; ++c) dot += q.at(0, c) * k.at(j, c);
        w[j] = std::exp(dot / std::sqrt(static_cast<double>(d)));
        z += w[j];
      }
      for (std::size_t c = 0; c < d; ++c) {
        double expect = 0;
        for (std::size_t j = 0; j < n; ++j) expect += w[j] / z * v.at(j, c);
        CHECK(out.at(0, h * d + c) == doctest::Approx(expect).epsilon(1e-10));
      }
    }
  }

  SUBCASE("unmasked weights sum to one") {
    MhaParams p = make_mha(q_in, kv_in, 2, d, rng);
    const Tensor2 query = random_tensor(1, q_in, rng);
    const Tensor2 refs = random_tensor(n, kv_in, rng);
    std::vector<double> dists{0.5, 0.01, 0.9, 0.02, 1.4, 0.7};
    nn::MhaCache cache;
    nn::masked_mha(query, refs, dists, 0.1, p, MaskDirection::kBelow, &cache);
    for (const auto& head : cache.heads) {
      double sum = 0;
      for (double w : head.weights) sum += w;
      CHECK(std::fabs(sum - 1.0) < 1e-9);
    }
  }

  SUBCASE("perturbing a masked reference leaves the output bit-identical") {
    MhaParams p = make_mha(q_in, kv_in, 2, d, rng);
    const Tensor2 query = random_tensor(1, q_in, rng);
    Tensor2 refs = random_tensor(n, kv_in, rng);
    std::vector<double> dists{0.5, 0.01, 0.9, 0.02, 1.4, 0.7};

    const Tensor2 base = nn::masked_mha(query, refs, dists, 0.1, p, MaskDirection::kBelow);
    for (std::size_t c = 0; c < kv_in; ++c) refs.at(1, c) = rng.normal(0.0, 100.0);
    const Tensor2 perturbed =
        nn::masked_mha(query, refs, dists, 0.1, p, MaskDirection::kBelow);
    CHECK(base.data == perturbed.data);
  }

  SUBCASE("mask direction above masks the far references") {
    MhaParams p = make_mha(q_in, kv_in, 1, d, rng);
    const Tensor2 query = random_tensor(1, q_in, rng);
    const Tensor2 refs = random_tensor(n, kv_in, rng);
    std::vector<double> dists{0.5, 0.01, 0.9, 0.02, 1.4, 0.7};
    nn::MhaCache cache;
    nn::masked_mha(query, refs, dists, 0.6, p, MaskDirection::kAbove, &cache);
    CHECK(cache.heads[0].weights[0] > 0.0);
    CHECK(cache.heads[0].weights[2] == 0.0);
    CHECK(cache.heads[0].weights[4] == 0.0);
  }

  SUBCASE("all-masked instances fall back to full attention with a warning") {
    MhaParams p = make_mha(q_in, kv_in, 1, d, rng);
    const Tensor2 query = random_tensor(1, q_in, rng);
    const Tensor2 refs = random_tensor(n, kv_in, rng);
    const std::vector<double> dists(n, 0.001);
    bool warned = false;
    nn::MhaCache cache;
    nn::masked_mha(query, refs, dists, 1.0, p, MaskDirection::kBelow, &cache, &warned);
    CHECK(warned);
    double sum = 0;
    for (double w : cache.heads[0].weights) {
      CHECK(w > 0.0);
      sum += w;
    }
    CHECK(std::fabs(sum - 1.0) < 1e-9);
  }

  SUBCASE("permuting references with their distances is a no-op") {
    MhaParams p = make_mha(q_in, kv_in, 2, d, rng);
    const Tensor2 query = random_tensor(1, q_in, rng);
    const Tensor2 refs = random_tensor(n, kv_in, rng);
    std::vector<double> dists{0.5, 0.01, 0.9, 0.02, 1.4, 0.7};
    const Tensor2 base = nn::masked_mha(query, refs, dists, 0.1, p, MaskDirection::kBelow);

    const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
    Tensor2 refs_p(n, kv_in);
    std::vector<double> dists_p(n);
    for (std::size_t j = 0; j < n; ++j) {
      std::copy(refs.row(perm[j]).begin(), refs.row(perm[j]).end(), refs_p.row(j).begin());
      dists_p[j] = dists[perm[j]];
    }
    const Tensor2 out = nn::masked_mha(query, refs_p, dists_p, 0.1, p, MaskDirection::kBelow);
    for (std::size_t c = 0; c < out.data.size(); ++c)
      CHECK(std::fabs(out.data[c] - base.data[c]) < 1e-12);
  }

  SUBCASE("parameter and input gradients match finite differences") {
    MhaParams p = make_mha(q_in, kv_in, 2, d, rng);
    const Tensor2 query = random_tensor(1, q_in, rng);
    const Tensor2 refs = random_tensor(n, kv_in, rng);
    std::vector<double> dists{0.5, 0.01, 0.9, 0.02, 1.4, 0.7};
    const double sigma = 0.1;
    const Tensor2 proj = random_tensor(1, 2 * d, rng);

    nn::MhaCache cache;
    nn::masked_mha(query, refs, dists, sigma, p, MaskDirection::kBelow, &cache);
    MhaParams grads = make_mha(q_in, kv_in, 2, d, rng);
    unflatten(std::vector<double>(flatten(grads).size(), 0.0), grads);
    Tensor2 d_query, d_refs;
    nn::masked_mha_backward(proj, cache, p, grads, &d_query, &d_refs);

    const auto f = [&](std::span<const double> flat) {
      MhaParams probe = p;
      unflatten(flat, probe);
      const Tensor2 y = nn::masked_mha(query, refs, dists, sigma, probe,
                                       MaskDirection::kBelow);
      double s = 0;
      for (std::size_t i = 0; i < y.data.size(); ++i) s += proj.data[i] * y.data[i];
      return s;
    };
    CHECK(nn::grad_check(f, flatten(grads), flatten(p)) < 1e-4);

    const auto f_refs = [&](std::span<const double> flat) {
      Tensor2 probe = refs;
      probe.data.assign(flat.begin(), flat.end());
      const Tensor2 y =
          nn::masked_mha(query, probe, dists, sigma, p, MaskDirection::kBelow);
      double s = 0;
      for (std::size_t i = 0; i < y.data.size(); ++i) s += proj.data[i] * y.data[i];
      return s;
    };
    CHECK(nn::grad_check(f_refs, d_refs.data, refs.data) < 1e-4);
  }

  SUBCASE("errors") {
    MhaParams p = make_mha(q_in, kv_in, 1, d, rng);
    const Tensor2 query = random_tensor(1, q_in, rng);
    const Tensor2 refs = random_tensor(n, kv_in, rng);
    const std::vector<double> dists(n, 1.0);
    CHECK_THROWS_AS(nn::masked_mha(query, Tensor2(0, kv_in), {}, 1.0, p,
                                   MaskDirection::kBelow),
                    std::invalid_argument);
    CHECK_THROWS_AS(nn::masked_mha(query, refs, dists, 0.0, p, MaskDirection::kBelow),
                    std::invalid_argument);
    CHECK_THROWS_AS(nn::masked_mha(query, refs, dists, -1.0, p, MaskDirection::kBelow),
                    std::invalid_argument);
  }
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    std::vector<double> params{1.0, -2.0, 3.0};
    const std::vector<double> grads(3, 0.0);
    nn::AdamState state;
    nn::adam_step(params, grads, state, 0.01, 1);
    CHECK(params == std::vector<double>{1.0, -2.0, 3.0});
  }

  SUBCASE("first-step magnitude is lr * |g| / (|g| + eps)") {
    for (double g : {0.5, -3.0, 1e-6}) {
      std::vector<double> params{0.0};
      const std::vector<double> grads{g};
      nn::AdamState state;
      nn::adam_step(params, grads, state, 0.1, 1);
      const double expect = 0.1 * std::fabs(g) / (std::fabs(g) + 1e-8);
      CHECK(std::fabs(params[0]) == doctest::Approx(expect).epsilon(1e-12));
      CHECK(params[0] * g < 0.0);  // moves against the gradient
    }
  }

  SUBCASE("three steps on x^2 match the hand-unrolled sequence") {
    // f(x) = x^2, grad 2x, x0 = 1, lr = 0.1, default betas and eps.
    const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double m = 0, v = 0, x_expected = 1.0;
    std::vector<double> x{1.0};
    nn::AdamState state;
    for (int t = 1; t <= 3; ++t) {
      const double g = 2.0 * x_expected;
      m = b1 * m + (1 - b1) * g;
      v = b2 * v + (1 - b2) * g * g;
      const double mh = m / (1 - std::pow(b1, t));
      const double vh = v / (1 - std::pow(b2, t));
      x_expected -= lr * mh / (std::sqrt(vh) + eps);

      const std::vector<double> grads{2.0 * x[0]};
      nn::adam_step(x, grads, state, lr, t);
      CHECK(x[0] == doctest::Approx(x_expected).epsilon(1e-12));
    }
  }

  SUBCASE("invalid arguments") {
    std::vector<double> params{1.0};
    const std::vector<double> grads{1.0};
    nn::AdamState state;
    CHECK_THROWS_AS(nn::adam_step(params, grads, state, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(nn::adam_step(params, grads, state, -0.1, 1), std::invalid_argument);
    CHECK_THROWS_AS(nn::adam_step(params, grads, state, 0.1, 0), std::invalid_argument);
  }
}

TEST_CASE("gradient checker") {
  SUBCASE("sum of squares has near-zero error") {
    const std::vector<double> params{0.3, -1.2, 2.0};
    const std::vector<double> analytic{0.6, -2.4, 4.0};
    const auto f = [](std::span<const double> p) {
      double s = 0;
      for (double v : p) s += v * v;
      return s;
    };
    CHECK(nn::grad_check(f, analytic, params) < 1e-8);
  }

  SUBCASE("a wrong analytic gradient is flagged") {
    const std::vector<double> params{0.3, -1.2, 2.0};
    const std::vector<double> wrong{0.6, -2.4, 5.0};
    const auto f = [](std::span<const double> p) {
      double s = 0;
      for (double v : p) s += v * v;
      return s;
    };
    CHECK(nn::grad_check(f, wrong, params) > 1e-2);
  }

  SUBCASE("non-finite functions are rejected") {
    const std::vector<double> params{1.0};
    const std::vector<double> analytic{1.0};
    const auto f = [](std::span<const double>) {
      return std::numeric_limits<double>::quiet_NaN();
    };
    CHECK_THROWS_AS(nn::grad_check(f, analytic, params), std::runtime_error);
  }
}
