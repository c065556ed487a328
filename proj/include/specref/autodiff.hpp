#pragma once

#include <functional>
#include <memory>

#include "specref/ops.hpp"

namespace specref::ad {

// Complex tensor with a dense row-major layout. Real-valued quantities keep
// a zero imaginary part; a complex entry counts as two real degrees of
// freedom, and adjoints are packaged as dL/d(re) + i*dL/d(im) so that
// finite differences per real coordinate match the stored gradient exactly.
struct CTensor {
  std::vector<int> shape;
  CVec v;

  CTensor() = default;
  explicit CTensor(std::vector<int> s) : shape(std::move(s)) {
    v.assign(numel(shape), cplx{0.0, 0.0});
  }
  CTensor(std::vector<int> s, CVec data) : shape(std::move(s)), v(std::move(data)) {}

  static size_t numel(const std::vector<int>& s) {
    size_t n = 1;
    for (int d : s) n *= static_cast<size_t>(d);
    return n;
  }
  size_t size() const { return v.size(); }
};

enum class Op {
  leaf, constant,
  add, sub, scale, axpy, mul,
  diag, add_const,
  fft2, ifft2, fft_t, ifft_t,
  re_project, gelu,
  leray2, slice_plane, join2,
  spectral_mix, depthwise_mix, affine_channel,
  time_matmul, time_wrap_pad,
  pad2, trunc2,
  layer_norm,
  sum_sq_weighted, sqrt_scalar,
  scale_svar, add_svar,
};

struct Aux {
  int i0 = 0, i1 = 0, i2 = 0, i3 = 0;
  double d0 = 0.0;
  bool flag = false;
  const CVec* sym = nullptr;            // borrowed symbol (grid lifetime)
  std::shared_ptr<const CVec> owned;    // owned constants (weights, matrices)
  const Grid* grid = nullptr;
};

// Reverse-mode tape over the primitive set above. Forward values are
// computed eagerly at node creation; backward visits nodes in reverse id
// order exactly once (ids are topological by construction), accumulating
// adjoints additively, so two runs are bit-identical.
class Tape {
 public:
  int leaf(CTensor val);
  int constant(CTensor val);

  int add(int a, int b);
  int sub(int a, int b);
  int scale(int a, double c);
  int axpy(int a, double c, int b);  // a + c*b
  int mul(int a, int b);
  int diag(int a, const CVec* sym);
  int add_const(int a, const CVec* c);
  int add_const(int a, std::shared_ptr<const CVec> c);
  int fft2(int a, int n);
  int ifft2(int a, int n);
  int fft_t(int a);    // time axis at dim -3 of [..., T, X, Y]
  int ifft_t(int a);
  int re_project(int a);
  int gelu(int a);
  int leray2(int a, const Grid* g);
  int slice_plane(int a, int c);       // index along dim 0
  int join2(int a, int b);             // stack along new dim 0
  // v: [d_v, T, n, n] spectrum; R: [4, tmax, kmax, kmax, d_v, d_v].
  int spectral_mix(int v, int R, int tmax, int kmax);
  // v: [d_v, T, n, n] spectrum; D: [d_v, 2*kmax, 2*kmax] per-channel multiplier.
  int depthwise_mix(int v, int D, int kmax);
  // v: [C_in, ...]; W: [C_in + 1, C_out] real (last row is the bias).
  int affine_channel(int v, int W);
  // v: [..., T_in, n, n]; E row-major [T_out, T_in].
  int time_matmul(int v, std::shared_ptr<const CVec> E, int t_out);
  int time_wrap_pad(int v, int pad);
  int pad2(int a, int n, int m);
  int trunc2(int a, int m, int n);
  // v: [C, ...]; gain/bias: [C]. normalize=false applies the affine map only.
  int layer_norm(int v, int gain, int bias, bool normalize, double eps = 1e-6);
  // scale * sum_i w[i mod plane] * |v_i|^2 -> scalar; w real-valued.
  int sum_sq_weighted(int v, std::shared_ptr<const CVec> w, double scale);
  int sqrt_scalar(int a);
  int scale_svar(int v, int s);  // Re(s) * v
  int add_svar(int v, int s);    // v + Re(s) broadcast into the real part

  const CTensor& val(int id) const { return nodes_[id].val; }
  const CTensor& adj(int id) const { return nodes_[id].adj; }
  size_t size() const { return nodes_.size(); }

  // Keeps borrowed symbol storage (e.g. step factors) alive with the tape.
  void retain(std::shared_ptr<const void> keep) {
    retained_.push_back(std::move(keep));
  }

  // Populates adjoints of everything reachable from a real scalar loss.
  void backward(int loss_id);

 private:
  struct Node {
    Op op;
    int a = -1, b = -1, c = -1;
    CTensor val, adj;
    Aux aux;
  };
  std::vector<Node> nodes_;
  std::vector<std::shared_ptr<const void>> retained_;

  int push(Op op, int a, int b, int c, CTensor val, Aux aux);
  CTensor& adj_buf(int id);
};

// Tape-side execution context satisfying the solver's Ctx concept.
struct TapeCtx {
  Tape* tape;
  const Grid* grid;
  using F = int;

  F fft2(F v) { return tape->fft2(v, grid->n); }
  F ifft2_re(F v) { return tape->re_project(tape->ifft2(v, grid->n)); }
  F diag(F v, const CVec* sym) { return tape->diag(v, sym); }
  F mul(F a, F b) { return tape->mul(a, b); }
  F add(F a, F b) { return tape->add(a, b); }
  F sub(F a, F b) { return tape->sub(a, b); }
  F scale(F a, double c) { return tape->scale(a, c); }
  F axpy(F a, double c, F b) { return tape->axpy(a, c, b); }
  F add_const(F a, const CVec* c) { return tape->add_const(a, c); }
  F zero_dc(F v) { return tape->diag(v, &symbols(*grid).dc_zero); }
  F leray(F v) { return tape->leray2(v, grid); }
  F slice(F v, int c) { return tape->slice_plane(v, c); }
  F join(F a, F b) { return tape->join2(a, b); }
};

double gelu_value(double x);
double gelu_derivative(double x);

// Central-difference check of a taped scalar function. `fn` builds the loss
// from leaf ids on a fresh tape; `samples` random real coordinates of the
// parameter vector are probed. Returns the worst relative error.
using TapedFn = std::function<int(Tape&, const std::vector<int>&)>;
double grad_check(const TapedFn& fn, const std::vector<CTensor>& params,
                  double eps, int samples = 50, uint64_t seed = 0);

}  // namespace specref::ad
