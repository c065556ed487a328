#include "specref/autodiff.hpp"

#include <cmath>

#include "specref/fft.hpp"
#include "specref/rng.hpp"

namespace specref::ad {

namespace {

std::vector<int> same(const std::vector<int>& s) { return s; }

size_t trailing_plane(const std::vector<int>& shape, size_t sym_len) {
  size_t p = 1;
  for (auto it = shape.rbegin(); it != shape.rend(); ++it) {
    p *= static_cast<size_t>(*it);
    if (p == sym_len) return p;
  }
  throw std::logic_error("tape: symbol length does not match trailing dims");
}

int last_dim(const std::vector<int>& s) { return s.back(); }

// Time axis geometry for [..., T, X, Y] tensors.
struct TimeAxes {
  int T;
  size_t cols;   // X*Y
  size_t batch;  // product of leading dims
};
TimeAxes time_axes(const std::vector<int>& s) {
  if (s.size() < 3) throw std::logic_error("tape: time axis needs >= 3 dims");
  TimeAxes a;
  a.T = s[s.size() - 3];
  a.cols = static_cast<size_t>(s[s.size() - 2]) * s[s.size() - 1];
  a.batch = 1;
  for (size_t i = 0; i + 3 < s.size(); ++i) a.batch *= static_cast<size_t>(s[i]);
  return a;
}

// Adjoint of kern::pad2 (gathers with the forward weights).
CVec pad2_adjoint(const CVec& a_out, int n, int m, size_t planes) {
  CVec out(planes * size_t(n) * n, cplx{0.0, 0.0});
  double s = double(m) * m / (double(n) * n);
  int ny = n / 2;
  for (size_t p = 0; p < planes; ++p) {
    const cplx* ao = a_out.data() + p * size_t(m) * m;
    cplx* o = out.data() + p * size_t(n) * n;
    for (int i = 0; i < n; ++i) {
      int si = signed_freq(i, n);
      double wi = (std::abs(si) == ny && m > n) ? 0.5 : 1.0;
      for (int j = 0; j < n; ++j) {
        int sj = signed_freq(j, n);
        double wj = (std::abs(sj) == ny && m > n) ? 0.5 : 1.0;
        cplx acc{0.0, 0.0};
        for (int a = 0; a < ((std::abs(si) == ny && m > n) ? 2 : 1); ++a) {
          int fi = freq_bin(a == 0 ? si : -si, m);
          for (int b = 0; b < ((std::abs(sj) == ny && m > n) ? 2 : 1); ++b) {
            int fj = freq_bin(b == 0 ? sj : -sj, m);
            acc += ao[size_t(fi) * m + fj];
          }
        }
        o[size_t(i) * n + j] += acc * (s * wi * wj);
      }
    }
  }
  return out;
}

// Adjoint of kern::trunc2 (spreads into the folded source bins).
CVec trunc2_adjoint(const CVec& a_out, int m, int n, size_t planes) {
  CVec out(planes * size_t(m) * m, cplx{0.0, 0.0});
  double s = double(n) * n / (double(m) * m);
  int ny = n / 2;
  for (size_t p = 0; p < planes; ++p) {
    const cplx* ao = a_out.data() + p * size_t(n) * n;
    cplx* o = out.data() + p * size_t(m) * m;
    for (int i = 0; i < n; ++i) {
      int si = signed_freq(i, n);
      for (int j = 0; j < n; ++j) {
        int sj = signed_freq(j, n);
        cplx val = ao[size_t(i) * n + j] * s;
        for (int a = 0; a < ((si == -ny && m > n) ? 2 : 1); ++a) {
          int fi = freq_bin(a == 0 ? si : ny, m);
          for (int b = 0; b < ((sj == -ny && m > n) ? 2 : 1); ++b) {
            int fj = freq_bin(b == 0 ? sj : ny, m);
            o[size_t(fi) * m + fj] += val;
          }
        }
      }
    }
  }
  return out;
}

}  // namespace

double gelu_value(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
}

double gelu_derivative(double x) {
  double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
  double Phi = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
  return Phi + x * phi;
}

int Tape::push(Op op, int a, int b, int c, CTensor val, Aux aux) {
  int id = static_cast<int>(nodes_.size());
  if (a >= id || b >= id || c >= id)
    throw std::logic_error("tape: inputs must precede the node (acyclic by construction)");
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.c = c;
  n.val = std::move(val);
  n.aux = std::move(aux);
  nodes_.push_back(std::move(n));
  return id;
}

CTensor& Tape::adj_buf(int id) {
  Node& n = nodes_[id];
  if (n.adj.v.empty()) n.adj = CTensor(n.val.shape);
  return n.adj;
}

int Tape::leaf(CTensor val) { return push(Op::leaf, -1, -1, -1, std::move(val), {}); }
int Tape::constant(CTensor val) {
  return push(Op::constant, -1, -1, -1, std::move(val), {});
}

int Tape::add(int a, int b) {
  CTensor out(same(nodes_[a].val.shape));
  const auto &va = nodes_[a].val.v, &vb = nodes_[b].val.v;
  for (size_t i = 0; i < out.size(); ++i) out.v[i] = va[i] + vb[i];
  return push(Op::add, a, b, -1, std::move(out), {});
}

int Tape::sub(int a, int b) {
  CTensor out(same(nodes_[a].val.shape));
  const auto &va = nodes_[a].val.v, &vb = nodes_[b].val.v;
  for (size_t i = 0; i < out.size(); ++i) out.v[i] = va[i] - vb[i];
  return push(Op::sub, a, b, -1, std::move(out), {});
}

int Tape::scale(int a, double c) {
  CTensor out(same(nodes_[a].val.shape));
  const auto& va = nodes_[a].val.v;
  for (size_t i = 0; i < out.size(); ++i) out.v[i] = va[i] * c;
  Aux x;
  x.d0 = c;
  return push(Op::scale, a, -1, -1, std::move(out), std::move(x));
}

int Tape::axpy(int a, double c, int b) {
  CTensor out(same(nodes_[a].val.shape));
  const auto &va = nodes_[a].val.v, &vb = nodes_[b].val.v;
  for (size_t i = 0; i < out.size(); ++i) out.v[i] = va[i] + c * vb[i];
  Aux x;
  x.d0 = c;
  return push(Op::axpy, a, b, -1, std::move(out), std::move(x));
}

int Tape::mul(int a, int b) {
  CTensor out(same(nodes_[a].val.shape));
  const auto &va = nodes_[a].val.v, &vb = nodes_[b].val.v;
  for (size_t i = 0; i < out.size(); ++i) out.v[i] = va[i] * vb[i];
  return push(Op::mul, a, b, -1, std::move(out), {});
}

int Tape::diag(int a, const CVec* sym) {
  const auto& va = nodes_[a].val;
  size_t plane = trailing_plane(va.shape, sym->size());
  CTensor out(same(va.shape));
  for (size_t i = 0; i < out.size(); ++i) out.v[i] = va.v[i] * (*sym)[i % plane];
  Aux x;
  x.sym = sym;
  return push(Op::diag, a, -1, -1, std::move(out), std::move(x));
}

int Tape::add_const(int a, const CVec* c) {
  const auto& va = nodes_[a].val;
  size_t plane = trailing_plane(va.shape, c->size());
  CTensor out(same(va.shape));
  for (size_t i = 0; i < out.size(); ++i) out.v[i] = va.v[i] + (*c)[i % plane];
  Aux x;
  x.sym = c;
  return push(Op::add_const, a, -1, -1, std::move(out), std::move(x));
}

int Tape::add_const(int a, std::shared_ptr<const CVec> c) {
  const auto& va = nodes_[a].val;
  size_t plane = trailing_plane(va.shape, c->size());
  CTensor out(same(va.shape));
  for (size_t i = 0; i < out.size(); ++i) out.v[i] = va.v[i] + (*c)[i % plane];
  Aux x;
  x.sym = c.get();
  x.owned = std::move(c);
  return push(Op::add_const, a, -1, -1, std::move(out), std::move(x));
}

int Tape::fft2(int a, int n) {
  const auto& va = nodes_[a].val;
  int batch = static_cast<int>(va.size() / (size_t(n) * n));
  CTensor out(same(va.shape));
  fft::fft2(va.v.data(), out.v.data(), n, batch, true);
  Aux x;
  x.i0 = n;
  return push(Op::fft2, a, -1, -1, std::move(out), std::move(x));
}

int Tape::ifft2(int a, int n) {
  const auto& va = nodes_[a].val;
  int batch = static_cast<int>(va.size() / (size_t(n) * n));
  CTensor out(same(va.shape));
  fft::fft2(va.v.data(), out.v.data(), n, batch, false);
  Aux x;
  x.i0 = n;
  return push(Op::ifft2, a, -1, -1, std::move(out), std::move(x));
}

int Tape::fft_t(int a) {
  const auto& va = nodes_[a].val;
  TimeAxes ax = time_axes(va.shape);
  CTensor out(same(va.shape));
  size_t block = static_cast<size_t>(ax.T) * ax.cols;
  for (size_t b = 0; b < ax.batch; ++b)
    fft::fft_cols(va.v.data() + b * block, out.v.data() + b * block, ax.T,
                  static_cast<int>(ax.cols), true);
  return push(Op::fft_t, a, -1, -1, std::move(out), {});
}

int Tape::ifft_t(int a) {
  const auto& va = nodes_[a].val;
  TimeAxes ax = time_axes(va.shape);
  CTensor out(same(va.shape));
  size_t block = static_cast<size_t>(ax.T) * ax.cols;
  for (size_t b = 0; b < ax.batch; ++b)
    fft::fft_cols(va.v.data() + b * block, out.v.data() + b * block, ax.T,
                  static_cast<int>(ax.cols), false);
  return push(Op::ifft_t, a, -1, -1, std::move(out), {});
}

int Tape::re_project(int a) {
  const auto& va = nodes_[a].val;
  CTensor out(same(va.shape));
  for (size_t i = 0; i < out.size(); ++i) out.v[i] = cplx{va.v[i].real(), 0.0};
  return push(Op::re_project, a, -1, -1, std::move(out), {});
}

int Tape::gelu(int a) {
  const auto& va = nodes_[a].val;
  CTensor out(same(va.shape));
  for (size_t i = 0; i < out.size(); ++i)
    out.v[i] = cplx{gelu_value(va.v[i].real()), gelu_value(va.v[i].imag())};
  return push(Op::gelu, a, -1, -1, std::move(out), {});
}

int Tape::leray2(int a, const Grid* g) {
  const auto& va = nodes_[a].val;
  CTensor out(same(va.shape));
  out.v = kern::leray(va.v, *g);
  Aux x;
  x.grid = g;
  return push(Op::leray2, a, -1, -1, std::move(out), std::move(x));
}

int Tape::slice_plane(int a, int c) {
  const auto& va = nodes_[a].val;
  std::vector<int> shape(va.shape.begin() + 1, va.shape.end());
  size_t plane = CTensor::numel(shape);
  CTensor out(shape);
  std::copy(va.v.begin() + c * plane, va.v.begin() + (c + 1) * plane,
            out.v.begin());
  Aux x;
  x.i0 = c;
  return push(Op::slice_plane, a, -1, -1, std::move(out), std::move(x));
}

int Tape::join2(int a, int b) {
  const auto &va = nodes_[a].val, &vb = nodes_[b].val;
  std::vector<int> shape;
  shape.push_back(2);
  shape.insert(shape.end(), va.shape.begin(), va.shape.end());
  CTensor out(shape);
  std::copy(va.v.begin(), va.v.end(), out.v.begin());
  std::copy(vb.v.begin(), vb.v.end(), out.v.begin() + va.size());
  return push(Op::join2, a, b, -1, std::move(out), {});
}

int Tape::spectral_mix(int v, int R, int tmax, int kmax) {
  const auto& vv = nodes_[v].val;
  const auto& rv = nodes_[R].val;
  int dv = vv.shape[0], T = vv.shape[1], n = vv.shape[2];
  CTensor out(same(vv.shape));
  auto vat = [&](int c, int t, int i, int j) -> const cplx& {
    return vv.v[((size_t(c) * T + t) * n + i) * n + j];
  };
  auto oat = [&](int c, int t, int i, int j) -> cplx& {
    return out.v[((size_t(c) * T + t) * n + i) * n + j];
  };
  for (int corner = 0; corner < 4; ++corner) {
    int sx = corner >> 1, sy = corner & 1;
    for (int t = 0; t < tmax && t < T; ++t) {
      for (int a = 0; a < kmax; ++a) {
        int i = sx ? n - kmax + a : a;
        for (int b = 0; b < kmax; ++b) {
          int j = sy ? n - kmax + b : b;
          const cplx* rblock =
              rv.v.data() +
              ((((size_t(corner) * tmax + t) * kmax + a) * kmax + b) * dv) * dv;
          for (int co = 0; co < dv; ++co) {
            cplx acc{0.0, 0.0};
            for (int ci = 0; ci < dv; ++ci)
              acc += rblock[size_t(co) * dv + ci] * vat(ci, t, i, j);
            oat(co, t, i, j) = acc;
          }
        }
      }
    }
  }
  Aux x;
  x.i0 = tmax;
  x.i1 = kmax;
  return push(Op::spectral_mix, v, R, -1, std::move(out), std::move(x));
}

int Tape::depthwise_mix(int v, int D, int kmax) {
  const auto& vv = nodes_[v].val;
  const auto& dvv = nodes_[D].val;
  int dv = vv.shape[0], T = vv.shape[1], n = vv.shape[2];
  int kk = 2 * kmax;
  CTensor out(same(vv.shape));
  for (int c = 0; c < dv; ++c) {
    for (int t = 0; t < T; ++t) {
      for (int sa = 0; sa < kk; ++sa) {
        int a = sa < kmax ? sa : sa - kmax;
        int i = sa < kmax ? a : n - kmax + a;
        for (int sb = 0; sb < kk; ++sb) {
          int b = sb < kmax ? sb : sb - kmax;
          int j = sb < kmax ? b : n - kmax + b;
          size_t vi = ((size_t(c) * T + t) * n + i) * n + j;
          out.v[vi] = dvv.v[(size_t(c) * kk + sa) * kk + sb] * vv.v[vi];
        }
      }
    }
  }
  Aux x;
  x.i0 = kmax;
  return push(Op::depthwise_mix, v, D, -1, std::move(out), std::move(x));
}

int Tape::affine_channel(int v, int W) {
  const auto& vv = nodes_[v].val;
  const auto& wv = nodes_[W].val;
  int cin = vv.shape[0];
  int cout = wv.shape[1];
  if (wv.shape[0] != cin + 1)
    throw std::logic_error("affine_channel: W must be [C_in+1, C_out]");
  size_t rest = vv.size() / cin;
  std::vector<int> shape = vv.shape;
  shape[0] = cout;
  CTensor out(shape);
  for (int co = 0; co < cout; ++co) {
    double bias = wv.v[size_t(cin) * cout + co].real();
    for (size_t r = 0; r < rest; ++r) {
      cplx acc{bias, 0.0};
      for (int ci = 0; ci < cin; ++ci)
        acc += wv.v[size_t(ci) * cout + co].real() * vv.v[size_t(ci) * rest + r];
      out.v[size_t(co) * rest + r] = acc;
    }
  }
  return push(Op::affine_channel, v, W, -1, std::move(out), {});
}

int Tape::time_matmul(int v, std::shared_ptr<const CVec> E, int t_out) {
  const auto& vv = nodes_[v].val;
  TimeAxes ax = time_axes(vv.shape);
  std::vector<int> shape = vv.shape;
  shape[shape.size() - 3] = t_out;
  CTensor out(shape);
  size_t in_block = static_cast<size_t>(ax.T) * ax.cols;
  size_t out_block = static_cast<size_t>(t_out) * ax.cols;
  for (size_t bt = 0; bt < ax.batch; ++bt) {
    const cplx* vi = vv.v.data() + bt * in_block;
    cplx* vo = out.v.data() + bt * out_block;
    for (int to = 0; to < t_out; ++to) {
      for (size_t p = 0; p < ax.cols; ++p) {
        cplx acc{0.0, 0.0};
        for (int ti = 0; ti < ax.T; ++ti)
          acc += (*E)[size_t(to) * ax.T + ti] * vi[size_t(ti) * ax.cols + p];
        vo[size_t(to) * ax.cols + p] = acc;
      }
    }
  }
  Aux x;
  x.i0 = t_out;
  x.i1 = ax.T;
  x.owned = std::move(E);
  return push(Op::time_matmul, v, -1, -1, std::move(out), std::move(x));
}

int Tape::time_wrap_pad(int v, int pad) {
  const auto& vv = nodes_[v].val;
  TimeAxes ax = time_axes(vv.shape);
  std::vector<int> shape = vv.shape;
  shape[shape.size() - 3] = ax.T + pad;
  CTensor out(shape);
  size_t in_block = static_cast<size_t>(ax.T) * ax.cols;
  size_t out_block = static_cast<size_t>(ax.T + pad) * ax.cols;
  for (size_t bt = 0; bt < ax.batch; ++bt) {
    const cplx* vi = vv.v.data() + bt * in_block;
    cplx* vo = out.v.data() + bt * out_block;
    std::copy(vi, vi + in_block, vo);
    for (int i = 0; i < pad; ++i) {
      // Cosine-smoothed blend closing the periodic wrap; the smooth
      // junction keeps the interpolation ringing near the window ends low.
      double lam = 0.5 * (1.0 - std::cos(kPi * double(i + 1) / (pad + 1)));
      for (size_t p = 0; p < ax.cols; ++p)
        vo[size_t(ax.T + i) * ax.cols + p] =
            (1.0 - lam) * vi[size_t(ax.T - 1) * ax.cols + p] +
            lam * vi[p];
    }
  }
  Aux x;
  x.i0 = pad;
  return push(Op::time_wrap_pad, v, -1, -1, std::move(out), std::move(x));
}

int Tape::pad2(int a, int n, int m) {
  const auto& va = nodes_[a].val;
  size_t planes = va.size() / (size_t(n) * n);
  std::vector<int> shape = va.shape;
  shape[shape.size() - 2] = m;
  shape[shape.size() - 1] = m;
  CTensor out(shape, kern::pad2(va.v, n, m));
  Aux x;
  x.i0 = n;
  x.i1 = m;
  x.i2 = static_cast<int>(planes);
  return push(Op::pad2, a, -1, -1, std::move(out), std::move(x));
}

int Tape::trunc2(int a, int m, int n) {
  const auto& va = nodes_[a].val;
  size_t planes = va.size() / (size_t(m) * m);
  std::vector<int> shape = va.shape;
  shape[shape.size() - 2] = n;
  shape[shape.size() - 1] = n;
  CTensor out(shape, kern::trunc2(va.v, m, n));
  Aux x;
  x.i0 = m;
  x.i1 = n;
  x.i2 = static_cast<int>(planes);
  return push(Op::trunc2, a, -1, -1, std::move(out), std::move(x));
}

int Tape::layer_norm(int v, int gain, int bias, bool normalize, double eps) {
  const auto& vv = nodes_[v].val;
  const auto& gv = nodes_[gain].val;
  const auto& bv = nodes_[bias].val;
  int C = vv.shape[0];
  size_t P = vv.size() / C;
  CTensor out(same(vv.shape));
  for (size_t p = 0; p < P; ++p) {
    if (normalize) {
      double mu = 0.0;
      for (int c = 0; c < C; ++c) mu += vv.v[size_t(c) * P + p].real();
      mu /= C;
      double var = 0.0;
      for (int c = 0; c < C; ++c) {
        double d = vv.v[size_t(c) * P + p].real() - mu;
        var += d * d;
      }
      double sig = std::sqrt(var / C + eps);
      for (int c = 0; c < C; ++c) {
        double xh = (vv.v[size_t(c) * P + p].real() - mu) / sig;
        out.v[size_t(c) * P + p] =
            cplx{gv.v[c].real() * xh + bv.v[c].real(), 0.0};
      }
    } else {
      for (int c = 0; c < C; ++c)
        out.v[size_t(c) * P + p] =
            cplx{gv.v[c].real() * vv.v[size_t(c) * P + p].real() +
                     bv.v[c].real(),
                 0.0};
    }
  }
  Aux x;
  x.flag = normalize;
  x.d0 = eps;
  return push(Op::layer_norm, v, gain, bias, std::move(out), std::move(x));
}

int Tape::sum_sq_weighted(int v, std::shared_ptr<const CVec> w, double s) {
  const auto& vv = nodes_[v].val;
  size_t plane = trailing_plane(vv.shape, w->size());
  double acc = 0.0;
  for (size_t i = 0; i < vv.size(); ++i)
    acc += (*w)[i % plane].real() * std::norm(vv.v[i]);
  CTensor out({1});
  out.v[0] = cplx{s * acc, 0.0};
  Aux x;
  x.d0 = s;
  x.owned = std::move(w);
  return push(Op::sum_sq_weighted, v, -1, -1, std::move(out), std::move(x));
}

int Tape::sqrt_scalar(int a) {
  const auto& va = nodes_[a].val;
  CTensor out({1});
  out.v[0] = cplx{std::sqrt(std::max(0.0, va.v[0].real())), 0.0};
  return push(Op::sqrt_scalar, a, -1, -1, std::move(out), {});
}

int Tape::scale_svar(int v, int s) {
  const auto& vv = nodes_[v].val;
  double sr = nodes_[s].val.v[0].real();
  CTensor out(same(vv.shape));
  for (size_t i = 0; i < out.size(); ++i) out.v[i] = vv.v[i] * sr;
  return push(Op::scale_svar, v, s, -1, std::move(out), {});
}

int Tape::add_svar(int v, int s) {
  const auto& vv = nodes_[v].val;
  double sr = nodes_[s].val.v[0].real();
  CTensor out(same(vv.shape));
  for (size_t i = 0; i < out.size(); ++i)
    out.v[i] = vv.v[i] + cplx{sr, 0.0};
  return push(Op::add_svar, v, s, -1, std::move(out), {});
}

void Tape::backward(int loss_id) {
  const auto& lv = nodes_[loss_id].val;
  if (lv.size() != 1)
    throw std::invalid_argument("backward: loss must be a scalar");
  adj_buf(loss_id).v[0] = cplx{1.0, 0.0};

  for (int id = loss_id; id >= 0; --id) {
    Node& nd = nodes_[id];
    if (nd.adj.v.empty()) continue;  // not reachable from the loss
    const CVec& a = nd.adj.v;
    switch (nd.op) {
      case Op::leaf:
      case Op::constant:
        break;
      case Op::add: {
        CVec &aa = adj_buf(nd.a).v, &ab = adj_buf(nd.b).v;
        for (size_t i = 0; i < a.size(); ++i) {
          aa[i] += a[i];
          ab[i] += a[i];
        }
        break;
      }
      case Op::sub: {
        CVec &aa = adj_buf(nd.a).v, &ab = adj_buf(nd.b).v;
        for (size_t i = 0; i < a.size(); ++i) {
          aa[i] += a[i];
          ab[i] -= a[i];
        }
        break;
      }
      case Op::scale: {
        CVec& aa = adj_buf(nd.a).v;
        for (size_t i = 0; i < a.size(); ++i) aa[i] += a[i] * nd.aux.d0;
        break;
      }
      case Op::axpy: {
        CVec &aa = adj_buf(nd.a).v, &ab = adj_buf(nd.b).v;
        for (size_t i = 0; i < a.size(); ++i) {
          aa[i] += a[i];
          ab[i] += a[i] * nd.aux.d0;
        }
        break;
      }
      case Op::mul: {
        CVec &aa = adj_buf(nd.a).v, &ab = adj_buf(nd.b).v;
        const CVec &va = nodes_[nd.a].val.v, &vb = nodes_[nd.b].val.v;
        for (size_t i = 0; i < a.size(); ++i) {
          aa[i] += std::conj(vb[i]) * a[i];
          ab[i] += std::conj(va[i]) * a[i];
        }
        break;
      }
      case Op::diag: {
        CVec& aa = adj_buf(nd.a).v;
        size_t plane = nd.aux.sym->size();
        for (size_t i = 0; i < a.size(); ++i)
          aa[i] += std::conj((*nd.aux.sym)[i % plane]) * a[i];
        break;
      }
      case Op::add_const: {
        CVec& aa = adj_buf(nd.a).v;
        for (size_t i = 0; i < a.size(); ++i) aa[i] += a[i];
        break;
      }
      case Op::fft2: {
        // Adjoint of the unnormalized forward DFT is the unnormalized
        // backward DFT (conjugate transpose).
        int n = nd.aux.i0;
        int batch = static_cast<int>(a.size() / (size_t(n) * n));
        CVec tmp(a.size());
        fft::fft2_unnorm(a.data(), tmp.data(), n, batch, false);
        CVec& aa = adj_buf(nd.a).v;
        for (size_t i = 0; i < a.size(); ++i) aa[i] += tmp[i];
        break;
      }
      case Op::ifft2: {
        int n = nd.aux.i0;
        int batch = static_cast<int>(a.size() / (size_t(n) * n));
        double s = 1.0 / (double(n) * n);
        CVec tmp(a.size());
        fft::fft2_unnorm(a.data(), tmp.data(), n, batch, true);
        CVec& aa = adj_buf(nd.a).v;
        for (size_t i = 0; i < a.size(); ++i) aa[i] += tmp[i] * s;
        break;
      }
      case Op::fft_t: {
        TimeAxes ax = time_axes(nd.val.shape);
        size_t block = static_cast<size_t>(ax.T) * ax.cols;
        CVec tmp(a.size());
        for (size_t b = 0; b < ax.batch; ++b)
          fft::fft_cols_unnorm(a.data() + b * block, tmp.data() + b * block,
                               ax.T, static_cast<int>(ax.cols), false);
        CVec& aa = adj_buf(nd.a).v;
        for (size_t i = 0; i < a.size(); ++i) aa[i] += tmp[i];
        break;
      }
      case Op::ifft_t: {
        TimeAxes ax = time_axes(nd.val.shape);
        size_t block = static_cast<size_t>(ax.T) * ax.cols;
        double s = 1.0 / double(ax.T);
        CVec tmp(a.size());
        for (size_t b = 0; b < ax.batch; ++b)
          fft::fft_cols_unnorm(a.data() + b * block, tmp.data() + b * block,
                               ax.T, static_cast<int>(ax.cols), true);
        CVec& aa = adj_buf(nd.a).v;
        for (size_t i = 0; i < a.size(); ++i) aa[i] += tmp[i] * s;
        break;
      }
      case Op::re_project: {
        CVec& aa = adj_buf(nd.a).v;
        for (size_t i = 0; i < a.size(); ++i) aa[i] += cplx{a[i].real(), 0.0};
        break;
      }
      case Op::gelu: {
        CVec& aa = adj_buf(nd.a).v;
        const CVec& va = nodes_[nd.a].val.v;
        for (size_t i = 0; i < a.size(); ++i)
          aa[i] += cplx{gelu_derivative(va[i].real()) * a[i].real(),
                        gelu_derivative(va[i].imag()) * a[i].imag()};
        break;
      }
      case Op::leray2: {
        // The projector is real and symmetric per mode: self-adjoint.
        CVec tmp = kern::leray(a, *nd.aux.grid);
        CVec& aa = adj_buf(nd.a).v;
        for (size_t i = 0; i < a.size(); ++i) aa[i] += tmp[i];
        break;
      }
      case Op::slice_plane: {
        CVec& aa = adj_buf(nd.a).v;
        size_t plane = nd.val.size();
        size_t off = size_t(nd.aux.i0) * plane;
        for (size_t i = 0; i < plane; ++i) aa[off + i] += a[i];
        break;
      }
      case Op::join2: {
        CVec &aa = adj_buf(nd.a).v, &ab = adj_buf(nd.b).v;
        size_t plane = aa.size();
        for (size_t i = 0; i < plane; ++i) {
          aa[i] += a[i];
          ab[i] += a[plane + i];
        }
        break;
      }
      case Op::spectral_mix: {
        int tmax = nd.aux.i0, kmax = nd.aux.i1;
        const auto& vv = nodes_[nd.a].val;
        const auto& rv = nodes_[nd.b].val;
        CVec& av = adj_buf(nd.a).v;
        CVec& ar = adj_buf(nd.b).v;
        int dv = vv.shape[0], T = vv.shape[1], n = vv.shape[2];
        auto idx = [&](int c, int t, int i, int j) {
          return ((size_t(c) * T + t) * n + i) * n + j;
        };
        for (int corner = 0; corner < 4; ++corner) {
          int sx = corner >> 1, sy = corner & 1;
          for (int t = 0; t < tmax && t < T; ++t) {
            for (int p = 0; p < kmax; ++p) {
              int i = sx ? n - kmax + p : p;
              for (int q = 0; q < kmax; ++q) {
                int j = sy ? n - kmax + q : q;
                size_t rbase =
                    (((size_t(corner) * tmax + t) * kmax + p) * kmax + q) *
                    dv * dv;
                for (int co = 0; co < dv; ++co) {
                  cplx ao = a[idx(co, t, i, j)];
                  if (ao == cplx{0.0, 0.0}) continue;
                  for (int ci = 0; ci < dv; ++ci) {
                    av[idx(ci, t, i, j)] +=
                        std::conj(rv.v[rbase + size_t(co) * dv + ci]) * ao;
                    ar[rbase + size_t(co) * dv + ci] +=
                        std::conj(vv.v[idx(ci, t, i, j)]) * ao;
                  }
                }
              }
            }
          }
        }
        break;
      }
      case Op::depthwise_mix: {
        int kmax = nd.aux.i0;
        int kk = 2 * kmax;
        const auto& vv = nodes_[nd.a].val;
        const auto& dvv = nodes_[nd.b].val;
        CVec& av = adj_buf(nd.a).v;
        CVec& ad = adj_buf(nd.b).v;
        int dv = vv.shape[0], T = vv.shape[1], n = vv.shape[2];
        for (int c = 0; c < dv; ++c) {
          for (int t = 0; t < T; ++t) {
            for (int sa = 0; sa < kk; ++sa) {
              int p = sa < kmax ? sa : sa - kmax;
              int i = sa < kmax ? p : n - kmax + p;
              for (int sb = 0; sb < kk; ++sb) {
                int q = sb < kmax ? sb : sb - kmax;
                int j = sb < kmax ? q : n - kmax + q;
                size_t vi = ((size_t(c) * T + t) * n + i) * n + j;
                size_t di = (size_t(c) * kk + sa) * kk + sb;
                av[vi] += std::conj(dvv.v[di]) * a[vi];
                ad[di] += std::conj(vv.v[vi]) * a[vi];
              }
            }
          }
        }
        break;
      }
      case Op::affine_channel: {
        const auto& vv = nodes_[nd.a].val;
        const auto& wv = nodes_[nd.b].val;
        CVec& av = adj_buf(nd.a).v;
        CVec& aw = adj_buf(nd.b).v;
        int cin = vv.shape[0];
        int cout = nd.val.shape[0];
        size_t rest = vv.size() / cin;
        for (int co = 0; co < cout; ++co) {
          for (size_t r = 0; r < rest; ++r) {
            cplx ao = a[size_t(co) * rest + r];
            for (int ci = 0; ci < cin; ++ci) {
              av[size_t(ci) * rest + r] += wv.v[size_t(ci) * cout + co].real() * ao;
              aw[size_t(ci) * cout + co] +=
                  cplx{(std::conj(vv.v[size_t(ci) * rest + r]) * ao).real(), 0.0};
            }
            aw[size_t(cin) * cout + co] += cplx{ao.real(), 0.0};
          }
        }
        break;
      }
      case Op::time_matmul: {
        const auto& vv = nodes_[nd.a].val;
        TimeAxes ax = time_axes(vv.shape);
        int t_out = nd.aux.i0;
        const CVec& E = *nd.aux.owned;
        CVec& av = adj_buf(nd.a).v;
        size_t in_block = static_cast<size_t>(ax.T) * ax.cols;
        size_t out_block = static_cast<size_t>(t_out) * ax.cols;
        for (size_t bt = 0; bt < ax.batch; ++bt) {
          const cplx* ao = a.data() + bt * out_block;
          cplx* ai = av.data() + bt * in_block;
          for (int ti = 0; ti < ax.T; ++ti)
            for (size_t p = 0; p < ax.cols; ++p) {
              cplx acc{0.0, 0.0};
              for (int to = 0; to < t_out; ++to)
                acc += std::conj(E[size_t(to) * ax.T + ti]) *
                       ao[size_t(to) * ax.cols + p];
              ai[size_t(ti) * ax.cols + p] += acc;
            }
        }
        break;
      }
      case Op::time_wrap_pad: {
        const auto& vv = nodes_[nd.a].val;
        TimeAxes ax = time_axes(vv.shape);
        int pad = nd.aux.i0;
        CVec& av = adj_buf(nd.a).v;
        size_t in_block = static_cast<size_t>(ax.T) * ax.cols;
        size_t out_block = static_cast<size_t>(ax.T + pad) * ax.cols;
        for (size_t bt = 0; bt < ax.batch; ++bt) {
          const cplx* ao = a.data() + bt * out_block;
          cplx* ai = av.data() + bt * in_block;
          for (size_t i = 0; i < in_block; ++i) ai[i] += ao[i];
          for (int i = 0; i < pad; ++i) {
            double lam = 0.5 * (1.0 - std::cos(kPi * double(i + 1) / (pad + 1)));
            for (size_t p = 0; p < ax.cols; ++p) {
              cplx v = ao[size_t(ax.T + i) * ax.cols + p];
              ai[size_t(ax.T - 1) * ax.cols + p] += (1.0 - lam) * v;
              ai[p] += lam * v;
            }
          }
        }
        break;
      }
      case Op::pad2: {
        CVec tmp = pad2_adjoint(a, nd.aux.i0, nd.aux.i1, size_t(nd.aux.i2));
        CVec& aa = adj_buf(nd.a).v;
        for (size_t i = 0; i < tmp.size(); ++i) aa[i] += tmp[i];
        break;
      }
      case Op::trunc2: {
        CVec tmp = trunc2_adjoint(a, nd.aux.i0, nd.aux.i1, size_t(nd.aux.i2));
        CVec& aa = adj_buf(nd.a).v;
        for (size_t i = 0; i < tmp.size(); ++i) aa[i] += tmp[i];
        break;
      }
      case Op::layer_norm: {
        const auto& vv = nodes_[nd.a].val;
        const auto& gv = nodes_[nd.b].val;
        CVec& av = adj_buf(nd.a).v;
        CVec& ag = adj_buf(nd.b).v;
        CVec& ab = adj_buf(nd.c).v;
        int C = vv.shape[0];
        size_t P = vv.size() / C;
        double eps = nd.aux.d0;
        for (size_t p = 0; p < P; ++p) {
          if (nd.aux.flag) {
            double mu = 0.0;
            for (int c = 0; c < C; ++c) mu += vv.v[size_t(c) * P + p].real();
            mu /= C;
            double var = 0.0;
            for (int c = 0; c < C; ++c) {
              double d = vv.v[size_t(c) * P + p].real() - mu;
              var += d * d;
            }
            double sig = std::sqrt(var / C + eps);
            double mh = 0.0, mhx = 0.0;
            for (int c = 0; c < C; ++c) {
              double xh = (vv.v[size_t(c) * P + p].real() - mu) / sig;
              double h = gv.v[c].real() * a[size_t(c) * P + p].real();
              mh += h;
              mhx += h * xh;
            }
            mh /= C;
            mhx /= C;
            for (int c = 0; c < C; ++c) {
              double xh = (vv.v[size_t(c) * P + p].real() - mu) / sig;
              double h = gv.v[c].real() * a[size_t(c) * P + p].real();
              av[size_t(c) * P + p] += cplx{(h - mh - xh * mhx) / sig, 0.0};
              ag[c] += cplx{a[size_t(c) * P + p].real() * xh, 0.0};
              ab[c] += cplx{a[size_t(c) * P + p].real(), 0.0};
            }
          } else {
            for (int c = 0; c < C; ++c) {
              double ar = a[size_t(c) * P + p].real();
              av[size_t(c) * P + p] += cplx{gv.v[c].real() * ar, 0.0};
              ag[c] += cplx{ar * vv.v[size_t(c) * P + p].real(), 0.0};
              ab[c] += cplx{ar, 0.0};
            }
          }
        }
        break;
      }
      case Op::sum_sq_weighted: {
        const auto& vv = nodes_[nd.a].val;
        const CVec& w = *nd.aux.owned;
        size_t plane = w.size();
        double g = a[0].real() * nd.aux.d0 * 2.0;
        CVec& aa = adj_buf(nd.a).v;
        for (size_t i = 0; i < vv.size(); ++i)
          aa[i] += g * w[i % plane].real() * vv.v[i];
        break;
      }
      case Op::sqrt_scalar: {
        double y = nd.val.v[0].real();
        if (y > 0.0) adj_buf(nd.a).v[0] += cplx{a[0].real() / (2.0 * y), 0.0};
        break;
      }
      case Op::scale_svar: {
        const auto& vv = nodes_[nd.a].val;
        double sr = nodes_[nd.b].val.v[0].real();
        CVec& av = adj_buf(nd.a).v;
        cplx& as = adj_buf(nd.b).v[0];
        double acc = 0.0;
        for (size_t i = 0; i < a.size(); ++i) {
          av[i] += sr * a[i];
          acc += (std::conj(vv.v[i]) * a[i]).real();
        }
        as += cplx{acc, 0.0};
        break;
      }
      case Op::add_svar: {
        CVec& av = adj_buf(nd.a).v;
        cplx& as = adj_buf(nd.b).v[0];
        double acc = 0.0;
        for (size_t i = 0; i < a.size(); ++i) {
          av[i] += a[i];
          acc += a[i].real();
        }
        as += cplx{acc, 0.0};
        break;
      }
    }
  }
}

double grad_check(const TapedFn& fn, const std::vector<CTensor>& params,
                  double eps, int samples, uint64_t seed) {
  if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be > 0");

  auto eval = [&](const std::vector<CTensor>& p) {
    Tape t;
    std::vector<int> ids;
    ids.reserve(p.size());
    for (const auto& c : p) ids.push_back(t.leaf(c));
    int loss = fn(t, ids);
    return t.val(loss).v[0].real();
  };

  Tape t;
  std::vector<int> ids;
  ids.reserve(params.size());
  for (const auto& c : params) ids.push_back(t.leaf(c));
  int loss = fn(t, ids);
  t.backward(loss);

  // Scale floor: coordinates whose gradient is small against the largest
  // gradient coordinate are compared with an absolute tolerance at 1% of
  // that scale, so finite-difference cancellation noise on near-zero
  // coordinates does not masquerade as gradient error.
  double gmax = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    const auto& adj = t.adj(ids[pi]);
    for (const auto& z : adj.v)
      gmax = std::max({gmax, std::abs(z.real()), std::abs(z.imag())});
  }

  size_t total = 0;
  for (const auto& c : params) total += 2 * c.size();
  Rng rng(seed, 0x67C0DE);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    size_t coord = rng.u64() % total;
    size_t rem = coord;
    size_t pi = 0;
    while (rem >= 2 * params[pi].size()) rem -= 2 * params[pi++].size();
    size_t ei = rem / 2;
    bool imag = rem % 2;

    std::vector<CTensor> pp = params;
    cplx& z = pp[pi].v[ei];
    double step = eps * (1.0 + std::abs(z));
    cplx delta = imag ? cplx{0.0, step} : cplx{step, 0.0};
    z += delta;
    double fp = eval(pp);
    z -= 2.0 * delta;
    double fm = eval(pp);
    double fd = (fp - fm) / (2.0 * step);
    const auto& adj = t.adj(ids[pi]);
    double g = adj.v.empty() ? 0.0
                             : (imag ? adj.v[ei].imag() : adj.v[ei].real());
    double denom = std::max({std::abs(fd), std::abs(g), 1e-2 * gmax, 1e-300});
    worst = std::max(worst, std::abs(fd - g) / denom);
  }
  return worst;
}

}  // namespace specref::ad
