#include <doctest.h>
#include <string>

#include "specref/autodiff.hpp"
#include "specref/datagen.hpp"
#include "specref/residual.hpp"
#include "specref/train.hpp"
#include "specref/rng.hpp"

using namespace specref;

namespace {

ad::CTensor random_tensor(std::vector<int> shape, uint64_t seed,
                          double scale = 1.0, bool complex_vals = true) {
  ad::CTensor t(std::move(shape));
  Philox gen(seed, 77);
  for (size_t i = 0; i < t.size(); ++i) {
    auto [a, b] = gen.gaussian_pair_at(i);
    t.v[i] = complex_vals ? cplx{scale * a, scale * b} : cplx{scale * a, 0.0};
  }
  return t;
}

std::shared_ptr<const CVec> unit_weights(size_t n) {
  return std::make_shared<CVec>(n, cplx{1.0, 0.0});
}

}  // namespace

TEST_CASE("quadratic loss has gradient 2*theta") {
  ad::CTensor theta = random_tensor({8}, 1);
  ad::Tape t;
  int leaf = t.leaf(theta);
  int loss = t.sum_sq_weighted(leaf, unit_weights(8), 1.0);
  t.backward(loss);
  const auto& g = t.adj(leaf);
  for (size_t i = 0; i < 8; ++i) {
    CHECK(g.v[i].real() == doctest::Approx(2.0 * theta.v[i].real()).epsilon(1e-14));
    CHECK(g.v[i].imag() == doctest::Approx(2.0 * theta.v[i].imag()).epsilon(1e-14));
  }
}

TEST_CASE("round-trip loss ||ifft(fft(f))||^2 has gradient 2f") {
  int n = 16;
  ad::CTensor f = random_tensor({n, n}, 2, 1.0, false);
  ad::Tape t;
  int leaf = t.leaf(f);
  int rt = t.ifft2(t.fft2(leaf, n), n);
  int loss = t.sum_sq_weighted(rt, unit_weights(size_t(n) * n), 1.0);
  t.backward(loss);
  const auto& g = t.adj(leaf);
  for (size_t i = 0; i < f.size(); ++i)
    CHECK(std::abs(g.v[i] - 2.0 * f.v[i]) < 1e-12);
}

TEST_CASE("adjoint identity <F x, y> = <x, F^H y>") {
  int n = 16;
  ad::CTensor x = random_tensor({n, n}, 3);
  ad::CTensor y = random_tensor({n, n}, 4);
  // <F x, y> via forward transform of x.
  ad::Tape t;
  int lx = t.leaf(x);
  int fx = t.fft2(lx, n);
  cplx ip1{0.0, 0.0};
  for (size_t i = 0; i < x.size(); ++i)
    ip1 += t.val(fx).v[i] * std::conj(y.v[i]);
  // <x, F^H y> with F^H = n^2 * inverse.
  CVec fy(y.v.size());
  fft::fft2_unnorm(y.v.data(), fy.data(), n, 1, false);
  cplx ip2{0.0, 0.0};
  for (size_t i = 0; i < x.size(); ++i) ip2 += x.v[i] * std::conj(fy[i]);
  CHECK(std::abs(ip1 - ip2) <= 1e-12 * std::abs(ip1));
}

TEST_CASE("every primitive passes grad_check in isolation") {
  int n = 8;
  size_t plane = size_t(n) * n;
  auto w = unit_weights(plane);
  auto sym = std::make_shared<CVec>(plane);
  Philox gen(9, 9);
  for (size_t i = 0; i < plane; ++i) {
    auto [a, b] = gen.gaussian_pair_at(i);
    (*sym)[i] = cplx{a, b};
  }
  GridPtr g = make_grid(8, 1.0);

  struct Case {
    const char* name;
    ad::TapedFn fn;
    std::vector<ad::CTensor> params;
    double eps = 1e-4;
  };
  std::vector<Case> cases;

  cases.push_back({"add/scale/axpy",
                   [&](ad::Tape& t, const std::vector<int>& ids) {
                     int s = t.axpy(t.add(ids[0], ids[1]), -0.7, ids[1]);
                     return t.sum_sq_weighted(t.scale(s, 1.3), w, 1.0);
                   },
                   {random_tensor({n, n}, 10), random_tensor({n, n}, 11)}});
  cases.push_back({"mul",
                   [&](ad::Tape& t, const std::vector<int>& ids) {
                     return t.sum_sq_weighted(t.mul(ids[0], ids[1]), w, 1.0);
                   },
                   {random_tensor({n, n}, 12, 0.5),
                    random_tensor({n, n}, 13, 0.5)}});
  cases.push_back({"diag",
                   [&](ad::Tape& t, const std::vector<int>& ids) {
                     return t.sum_sq_weighted(t.diag(ids[0], sym.get()), w, 1.0);
                   },
                   {random_tensor({n, n}, 14)}});
  cases.push_back({"fft2/ifft2",
                   [&](ad::Tape& t, const std::vector<int>& ids) {
                     return t.sum_sq_weighted(t.ifft2(t.fft2(ids[0], n), n), w,
                                              0.5);
                   },
                   {random_tensor({n, n}, 15)}});
  cases.push_back({"fft_t/ifft_t",
                   [&](ad::Tape& t, const std::vector<int>& ids) {
                     return t.sum_sq_weighted(t.ifft_t(t.fft_t(ids[0])), w, 1.0);
                   },
                   {random_tensor({2, 5, n, n}, 16)}});
  cases.push_back({"re_project+gelu",
                   [&](ad::Tape& t, const std::vector<int>& ids) {
                     return t.sum_sq_weighted(t.gelu(t.re_project(ids[0])), w,
                                              1.0);
                   },
                   {random_tensor({n, n}, 17)},
                   1e-5});  // smaller step: the third derivative is sizable
  cases.push_back({"leray2",
                   [&](ad::Tape& t, const std::vector<int>& ids) {
                     return t.sum_sq_weighted(t.leray2(ids[0], g.get()), w, 1.0);
                   },
                   {random_tensor({2, n, n}, 18)}});
  cases.push_back({"slice/join",
                   [&](ad::Tape& t, const std::vector<int>& ids) {
                     int a = t.slice_plane(ids[0], 0);
                     int b = t.slice_plane(ids[0], 1);
                     return t.sum_sq_weighted(t.join2(t.mul(a, b), a), w, 1.0);
                   },
                   {random_tensor({2, n, n}, 19, 0.5)}});
  cases.push_back({"spectral_mix",
                   [&](ad::Tape& t, const std::vector<int>& ids) {
                     return t.sum_sq_weighted(
                         t.spectral_mix(ids[0], ids[1], 2, 3), w, 1.0);
                   },
                   {random_tensor({3, 5, n, n}, 20, 0.5),
                    random_tensor({4, 2, 3, 3, 3, 3}, 21, 0.5)}});
  cases.push_back({"depthwise_mix",
                   [&](ad::Tape& t, const std::vector<int>& ids) {
                     return t.sum_sq_weighted(t.depthwise_mix(ids[0], ids[1], 3),
                                              w, 1.0);
                   },
                   {random_tensor({2, 4, n, n}, 22, 0.5),
                    random_tensor({2, 6, 6}, 23, 0.5)}});
  cases.push_back({"affine_channel",
                   [&](ad::Tape& t, const std::vector<int>& ids) {
                     return t.sum_sq_weighted(t.affine_channel(ids[0], ids[1]),
                                              w, 1.0);
                   },
                   {random_tensor({3, 4, n, n}, 24, 0.5, false),
                    random_tensor({4, 2}, 25, 0.5, false)}});
  {
    auto E = std::make_shared<CVec>(3 * 5);
    Philox pg(30, 1);
    for (size_t i = 0; i < E->size(); ++i) {
      auto [a, b] = pg.gaussian_pair_at(i);
      (*E)[i] = cplx{a, b};
    }
    cases.push_back({"time_matmul",
                     [&, E](ad::Tape& t, const std::vector<int>& ids) {
                       return t.sum_sq_weighted(t.time_matmul(ids[0], E, 3), w,
                                                1.0);
                     },
                     {random_tensor({2, 5, n, n}, 26, 0.5)}});
  }
  cases.push_back({"time_wrap_pad",
                   [&](ad::Tape& t, const std::vector<int>& ids) {
                     return t.sum_sq_weighted(t.time_wrap_pad(ids[0], 2), w, 1.0);
                   },
                   {random_tensor({1, 5, n, n}, 27)}});
  cases.push_back({"pad2/trunc2",
                   [&](ad::Tape& t, const std::vector<int>& ids) {
                     int up = t.pad2(ids[0], n, 2 * n);
                     return t.sum_sq_weighted(t.trunc2(up, 2 * n, n), w, 1.0);
                   },
                   {random_tensor({n, n}, 28)}});
  cases.push_back({"layer_norm",
                   [&](ad::Tape& t, const std::vector<int>& ids) {
                     int ln = t.layer_norm(ids[0], ids[1], ids[2], true);
                     return t.sum_sq_weighted(ln, w, 1.0);
                   },
                   {random_tensor({4, 3, n, n}, 29, 1.0, false),
                    random_tensor({4}, 30, 0.5, false),
                    random_tensor({4}, 31, 0.5, false)}});
  cases.push_back({"sqrt+svar",
                   [&](ad::Tape& t, const std::vector<int>& ids) {
                     int v = t.add_svar(t.scale_svar(ids[0], ids[1]), ids[2]);
                     return t.sqrt_scalar(t.sum_sq_weighted(v, w, 1.0));
                   },
                   {random_tensor({n, n}, 32, 1.0, false),
                    random_tensor({1}, 33, 1.0, false),
                    random_tensor({1}, 34, 1.0, false)}});

  for (auto& c : cases) {
    std::string cname = c.name;
    CAPTURE(cname);
    double err = ad::grad_check(c.fn, c.params, c.eps, 60, 5);
    CHECK_MESSAGE(err <= 1e-7, c.name, " rel err ", err);
  }
}

TEST_CASE("grad_check rejects eps = 0") {
  ad::TapedFn fn = [](ad::Tape& t, const std::vector<int>& ids) {
    return t.sum_sq_weighted(ids[0], std::make_shared<CVec>(1, cplx{1.0, 0.0}),
                             1.0);
  };
  CHECK_THROWS(ad::grad_check(fn, {random_tensor({1}, 40)}, 0.0, 4, 0));
}

TEST_CASE("backward is deterministic bit-for-bit") {
  int n = 16;
  ad::CTensor x = random_tensor({n, n}, 50);
  auto w = unit_weights(size_t(n) * n);
  auto run = [&]() {
    ad::Tape t;
    int leaf = t.leaf(x);
    int y = t.gelu(t.re_project(t.ifft2(leaf, n)));
    int loss = t.sum_sq_weighted(t.fft2(y, n), w, 1.0);
    t.backward(loss);
    return t.adj(leaf).v;
  };
  CVec g1 = run(), g2 = run();
  for (size_t i = 0; i < g1.size(); ++i) {
    CHECK(g1[i].real() == g2[i].real());
    CHECK(g1[i].imag() == g2[i].imag());
  }
}

TEST_CASE("gradient through the fine-tuning loss (project+b_gamma+residual)") {
  // The same path acceptance ties at 1e-6: gradients of eta^2 with respect to
  // the fine-tunable projection parameters. The loss is close to quadratic in
  // those parameters, so a large central-difference step is exact to high
  // order while staying clear of cancellation noise.
  StfnoConfig mc;
  mc.layers = 1;
  mc.d_v = 4;
  mc.d_t = 6;
  mc.tau_max = 2;
  mc.k_max = 4;
  mc.n_train = 16;
  StfnoModel model = make_model(mc);
  freeze_backbone(model);
  {
    Philox gen(42, 5);
    size_t i = 0;
    for (const auto& nm : trainable_names(model)) {
      auto& t = model.params.at(nm);
      for (auto& z : t.v) {
        auto [a, b] = gen.gaussian_pair_at(i++);
        z += 0.05 * cplx{a, b};
      }
    }
  }

  GridPtr g = make_grid(16, 1.0);
  int ell = 6;
  RVec input;
  for (int j = 0; j < ell; ++j) {
    SpectralField w = dealias(grf_sample(g, 2.5, 7.0, 100 + j));
    double nn = sobolev_norm(w, NormSpec(0.0));
    for (auto& z : w.coeffs) z /= nn;
    RVec p = inverse(w);
    input.insert(input.end(), p.begin(), p.end());
  }
  ad::CTensor latent = extract_latent(model, input, ell, g);
  size_t plane = g->size();
  RVec last(input.end() - plane, input.end());
  SpectralField u_last = transform(last, g);

  FinetuneConfig fc;
  fc.gamma = 2;
  fc.delta_t = 0.05;
  fc.nu = 1e-3;
  auto names = trainable_names(model);
  std::vector<ad::CTensor> params;
  for (const auto& nm : names) params.push_back(model.params.at(nm));
  ad::TapedFn fn = [&](ad::Tape& t, const std::vector<int>& ids) {
    return build_finetune_loss(t, model, ids, latent, u_last, 4, fc, g);
  };
  double err = ad::grad_check(fn, params, 1e-1, 40, 7);
  CHECK(err <= 1e-6);
}
