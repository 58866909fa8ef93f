#include <algorithm>
#include <cmath>

#include "tpt/autodiff.hpp"
#include "tpt/errors.hpp"
#include "tpt/kernels.hpp"

namespace tpt::ad {

namespace {

Tape& common_tape(const Tensor& a, const Tensor& b) {
  Tape& t = a.tape();
  if (&b.tape() != &t) throw ContractError("operands live on different tapes");
  return t;
}

// Flat index maps from an output of broadcast shape back to each operand.
struct Broadcast {
  Shape out;
  std::vector<std::size_t> ia;
  std::vector<std::size_t> ib;
  bool same = false;
};

Broadcast broadcast(const Shape& sa, const Shape& sb, const char* op) {
  Broadcast bc;
  if (sa == sb) {
    bc.out = sa;
    bc.same = true;
    return bc;
  }
  const std::size_t r = std::max(sa.size(), sb.size());
  Shape pa(r, 1), pb(r, 1);
  std::copy(sa.begin(), sa.end(), pa.begin() + static_cast<std::ptrdiff_t>(r - sa.size()));
  std::copy(sb.begin(), sb.end(), pb.begin() + static_cast<std::ptrdiff_t>(r - sb.size()));
  bc.out.resize(r);
  for (std::size_t d = 0; d < r; ++d) {
    if (pa[d] != pb[d] && pa[d] != 1 && pb[d] != 1) {
      throw DimensionError(std::string(op) + ": shapes " + shape_str(sa) + " and " +
                           shape_str(sb) + " do not broadcast");
    }
    bc.out[d] = std::max(pa[d], pb[d]);
  }
  // Strides with zeros on broadcast axes.
  std::vector<std::size_t> stra(r, 0), strb(r, 0);
  std::size_t acc_a = 1, acc_b = 1;
  for (std::size_t d = r; d-- > 0;) {
    stra[d] = pa[d] == 1 ? 0 : acc_a;
    strb[d] = pb[d] == 1 ? 0 : acc_b;
    acc_a *= pa[d];
    acc_b *= pb[d];
  }
  const std::size_t n = numel(bc.out);
  bc.ia.resize(n);
  bc.ib.resize(n);
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t o = 0; o < n; ++o) {
    std::size_t oa = 0, ob = 0;
    for (std::size_t d = 0; d < r; ++d) {
      oa += idx[d] * stra[d];
      ob += idx[d] * strb[d];
    }
    bc.ia[o] = oa;
    bc.ib[o] = ob;
    for (std::size_t d = r; d-- > 0;) {
      if (++idx[d] < bc.out[d]) break;
      idx[d] = 0;
    }
  }
  return bc;
}

// (outer, extent, inner) decomposition of a shape around `axis`.
struct AxisView {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisView axis_view(const Shape& s, std::size_t axis, const char* op) {
  if (axis >= s.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for " + shape_str(s));
  }
  AxisView v;
  for (std::size_t d = 0; d < axis; ++d) v.outer *= s[d];
  v.extent = s[axis];
  for (std::size_t d = axis + 1; d < s.size(); ++d) v.inner *= s[d];
  return v;
}

template <class Fwd, class Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  Tape& t = a.tape();
  auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  const std::size_t ia = a.id();
  // deriv(x, y) returns dy/dx given input x and output y.
  return t.record(a.shape(), std::move(out), {a}, [ia, deriv](Tape& tp, std::size_t self) {
    if (!tp.needs_grad(ia)) return;
    auto x = tp.value(ia);
    auto y = tp.value(self);
    auto g = tp.grad(self);
    auto ga = tp.grad_mut(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(x[i], y[i]);
  });
}

}  // namespace

// ---- linear algebra --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tape& t = common_tape(a, b);
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw DimensionError("matmul: shapes " + shape_str(sa) + " and " + shape_str(sb) +
                         " are incompatible");
  }
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  std::vector<double> out(m * n);
  kernels::matmul(a.values(), b.values(), out, m, k, n);
  const std::size_t ia = a.id(), ib = b.id();
  return t.record({m, n}, std::move(out), {a, b}, [ia, ib, m, k, n](Tape& tp, std::size_t self) {
    auto g = tp.grad(self);
    if (tp.needs_grad(ia)) kernels::matmul_nt_acc(g, tp.value(ib), tp.grad_mut(ia), m, n, k);
    if (tp.needs_grad(ib)) kernels::matmul_tn_acc(tp.value(ia), g, tp.grad_mut(ib), m, k, n);
  });
}

Tensor transpose(const Tensor& a) {
  Tape& t = a.tape();
  const std::size_t m = a.rows(), n = a.cols();
  auto av = a.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  const std::size_t ia = a.id();
  return t.record({n, m}, std::move(out), {a}, [ia, m, n](Tape& tp, std::size_t self) {
    auto g = tp.grad(self);
    auto ga = tp.grad_mut(ia);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
  });
}

// ---- broadcasting binary ops -----------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  Tape& t = common_tape(a, b);
  auto bc = broadcast(a.shape(), b.shape(), "add");
  auto av = a.values();
  auto bv = b.values();
  const std::size_t n = numel(bc.out);
  std::vector<double> out(n);
  if (bc.same) {
    for (std::size_t i = 0; i < n; ++i) out[i] = av[i] + bv[i];
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = av[bc.ia[i]] + bv[bc.ib[i]];
  }
  const std::size_t ia = a.id(), ib = b.id();
  Shape out_shape = bc.out;
  return t.record(std::move(out_shape), std::move(out), {a, b},
                  [ia, ib, bc = std::move(bc)](Tape& tp, std::size_t self) {
                    auto g = tp.grad(self);
                    if (tp.needs_grad(ia)) {
                      auto ga = tp.grad_mut(ia);
                      for (std::size_t i = 0; i < g.size(); ++i) ga[bc.same ? i : bc.ia[i]] += g[i];
                    }
                    if (tp.needs_grad(ib)) {
                      auto gb = tp.grad_mut(ib);
                      for (std::size_t i = 0; i < g.size(); ++i) gb[bc.same ? i : bc.ib[i]] += g[i];
                    }
                  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Tape& t = common_tape(a, b);
  auto bc = broadcast(a.shape(), b.shape(), "sub");
  auto av = a.values();
  auto bv = b.values();
  const std::size_t n = numel(bc.out);
  std::vector<double> out(n);
  if (bc.same) {
    for (std::size_t i = 0; i < n; ++i) out[i] = av[i] - bv[i];
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = av[bc.ia[i]] - bv[bc.ib[i]];
  }
  const std::size_t ia = a.id(), ib = b.id();
  Shape out_shape = bc.out;
  return t.record(std::move(out_shape), std::move(out), {a, b},
                  [ia, ib, bc = std::move(bc)](Tape& tp, std::size_t self) {
                    auto g = tp.grad(self);
                    if (tp.needs_grad(ia)) {
                      auto ga = tp.grad_mut(ia);
                      for (std::size_t i = 0; i < g.size(); ++i) ga[bc.same ? i : bc.ia[i]] += g[i];
                    }
                    if (tp.needs_grad(ib)) {
                      auto gb = tp.grad_mut(ib);
                      for (std::size_t i = 0; i < g.size(); ++i) gb[bc.same ? i : bc.ib[i]] -= g[i];
                    }
                  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Tape& t = common_tape(a, b);
  auto bc = broadcast(a.shape(), b.shape(), "mul");
  auto av = a.values();
  auto bv = b.values();
  const std::size_t n = numel(bc.out);
  std::vector<double> out(n);
  if (bc.same) {
    for (std::size_t i = 0; i < n; ++i) out[i] = av[i] * bv[i];
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = av[bc.ia[i]] * bv[bc.ib[i]];
  }
  const std::size_t ia = a.id(), ib = b.id();
  Shape out_shape = bc.out;
  return t.record(std::move(out_shape), std::move(out), {a, b},
                  [ia, ib, bc = std::move(bc)](Tape& tp, std::size_t self) {
                    auto g = tp.grad(self);
                    auto x = tp.value(ia);
                    auto y = tp.value(ib);
                    if (tp.needs_grad(ia)) {
                      auto ga = tp.grad_mut(ia);
                      for (std::size_t i = 0; i < g.size(); ++i) {
                        const std::size_t pa = bc.same ? i : bc.ia[i];
                        const std::size_t pb = bc.same ? i : bc.ib[i];
                        ga[pa] += g[i] * y[pb];
                      }
                    }
                    if (tp.needs_grad(ib)) {
                      auto gb = tp.grad_mut(ib);
                      for (std::size_t i = 0; i < g.size(); ++i) {
                        const std::size_t pa = bc.same ? i : bc.ia[i];
                        const std::size_t pb = bc.same ? i : bc.ib[i];
                        gb[pb] += g[i] * x[pa];
                      }
                    }
                  });
}

// ---- elementwise -----------------------------------------------------------

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double x) { return x * factor; },
               [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return unary(a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double x : a.values()) {
    if (!(x > 0.0)) throw DomainError("log of non-positive value " + std::to_string(x));
  }
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor square(const Tensor& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor abs_smooth(const Tensor& a, double eps) {
  const double e2 = eps * eps;
  return unary(a, [e2](double x) { return std::sqrt(x * x + e2); },
               [](double x, double y) { return x / y; });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

// ---- reductions ------------------------------------------------------------

Tensor sum(const Tensor& a) {
  Tape& t = a.tape();
  double s = 0.0;
  for (double x : a.values()) s += x;
  const std::size_t ia = a.id();
  return t.record({1}, {s}, {a}, [ia](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)[0];
    for (double& v : tp.grad_mut(ia)) v += g;
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor sum(const Tensor& a, std::size_t axis) {
  Tape& t = a.tape();
  const auto v = axis_view(a.shape(), axis, "sum");
  Shape out_shape = a.shape();
  out_shape[axis] = 1;
  auto av = a.values();
  std::vector<double> out(v.outer * v.inner, 0.0);
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t e = 0; e < v.extent; ++e)
      for (std::size_t i = 0; i < v.inner; ++i)
        out[o * v.inner + i] += av[(o * v.extent + e) * v.inner + i];
  const std::size_t ia = a.id();
  return t.record(std::move(out_shape), std::move(out), {a}, [ia, v](Tape& tp, std::size_t self) {
    auto g = tp.grad(self);
    auto ga = tp.grad_mut(ia);
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t e = 0; e < v.extent; ++e)
        for (std::size_t i = 0; i < v.inner; ++i)
          ga[(o * v.extent + e) * v.inner + i] += g[o * v.inner + i];
  });
}

Tensor mean(const Tensor& a, std::size_t axis) {
  const auto v = axis_view(a.shape(), axis, "mean");
  return scale(sum(a, axis), 1.0 / static_cast<double>(v.extent));
}

// ---- structural ------------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  Tape& t = parts.front().tape();
  const Shape& s0 = parts.front().shape();
  if (axis >= s0.size()) throw DimensionError("concat: axis out of range for " + shape_str(s0));
  Shape out_shape = s0;
  out_shape[axis] = 0;
  std::vector<AxisView> views;
  for (const auto& p : parts) {
    if (&p.tape() != &t) throw ContractError("concat: operands live on different tapes");
    const Shape& s = p.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == s0[d];
    if (!ok) {
      throw DimensionError("concat: shapes " + shape_str(s0) + " and " + shape_str(s) +
                           " differ off axis " + std::to_string(axis));
    }
    out_shape[axis] += s[axis];
    views.push_back(axis_view(s, axis, "concat"));
  }
  const std::size_t outer = views.front().outer, inner = views.front().inner;
  const std::size_t total = out_shape[axis];
  std::vector<double> out(numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    offsets.push_back(off);
    auto pv = parts[p].values();
    const std::size_t ext = views[p].extent;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(o * ext * inner), ext * inner,
                  out.begin() + static_cast<std::ptrdiff_t>((o * total + off) * inner));
    off += ext;
  }
  std::vector<std::size_t> ids;
  std::vector<std::size_t> extents;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    ids.push_back(parts[p].id());
    extents.push_back(views[p].extent);
  }
  return t.record(std::move(out_shape), std::move(out), parts,
                  [ids, extents, offsets, outer, inner, total](Tape& tp, std::size_t self) {
                    auto g = tp.grad(self);
                    for (std::size_t p = 0; p < ids.size(); ++p) {
                      if (!tp.needs_grad(ids[p])) continue;
                      auto gp = tp.grad_mut(ids[p]);
                      const std::size_t ext = extents[p];
                      for (std::size_t o = 0; o < outer; ++o)
                        for (std::size_t j = 0; j < ext * inner; ++j)
                          gp[o * ext * inner + j] += g[(o * total + offsets[p]) * inner + j];
                    }
                  });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  Tape& t = a.tape();
  const auto v = axis_view(a.shape(), axis, "slice");
  if (begin >= end || end > v.extent) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for axis of extent " + std::to_string(v.extent));
  }
  const std::size_t ext = end - begin;
  Shape out_shape = a.shape();
  out_shape[axis] = ext;
  auto av = a.values();
  std::vector<double> out(v.outer * ext * v.inner);
  for (std::size_t o = 0; o < v.outer; ++o)
    std::copy_n(av.begin() + static_cast<std::ptrdiff_t>((o * v.extent + begin) * v.inner),
                ext * v.inner, out.begin() + static_cast<std::ptrdiff_t>(o * ext * v.inner));
  const std::size_t ia = a.id();
  return t.record(std::move(out_shape), std::move(out), {a},
                  [ia, v, begin, ext](Tape& tp, std::size_t self) {
                    auto g = tp.grad(self);
                    auto ga = tp.grad_mut(ia);
                    for (std::size_t o = 0; o < v.outer; ++o)
                      for (std::size_t j = 0; j < ext * v.inner; ++j)
                        ga[(o * v.extent + begin) * v.inner + j] += g[o * ext * v.inner + j];
                  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw DimensionError("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape));
  }
  Tape& t = a.tape();
  const std::size_t ia = a.id();
  return t.record(std::move(shape), a.to_vector(), {a}, [ia](Tape& tp, std::size_t self) {
    auto g = tp.grad(self);
    auto ga = tp.grad_mut(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Tensor detach(const Tensor& a) { return a.tape().constant(a.shape(), a.to_vector()); }

// ---- normalization ---------------------------------------------------------

Tensor softmax(const Tensor& a, std::size_t axis) {
  Tape& t = a.tape();
  const auto v = axis_view(a.shape(), axis, "softmax");
  if (v.extent == 0) throw DimensionError("softmax over an empty axis");
  auto av = a.values();
  std::vector<double> out(av.size());
  if (v.inner == 1) {
    kernels::softmax_rows(av, out, v.outer, v.extent);
  } else {
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t i = 0; i < v.inner; ++i) {
        auto at = [&](std::size_t e) { return (o * v.extent + e) * v.inner + i; };
        double mx = av[at(0)];
        for (std::size_t e = 1; e < v.extent; ++e) mx = std::max(mx, av[at(e)]);
        double total = 0.0;
        for (std::size_t e = 0; e < v.extent; ++e) total += (out[at(e)] = std::exp(av[at(e)] - mx));
        for (std::size_t e = 0; e < v.extent; ++e) out[at(e)] /= total;
      }
    }
  }
  const std::size_t ia = a.id();
  return t.record(a.shape(), std::move(out), {a}, [ia, v](Tape& tp, std::size_t self) {
    auto y = tp.value(self);
    auto g = tp.grad(self);
    auto ga = tp.grad_mut(ia);
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t i = 0; i < v.inner; ++i) {
        auto at = [&](std::size_t e) { return (o * v.extent + e) * v.inner + i; };
        double dot = 0.0;
        for (std::size_t e = 0; e < v.extent; ++e) dot += g[at(e)] * y[at(e)];
        for (std::size_t e = 0; e < v.extent; ++e) ga[at(e)] += y[at(e)] * (g[at(e)] - dot);
      }
    }
  });
}

Tensor layer_norm(const Tensor& a, double eps) {
  Tape& t = a.tape();
  const Shape& s = a.shape();
  if (s.empty()) throw DimensionError("layer_norm on rank-0 tensor");
  const std::size_t n = s.back();
  const std::size_t rows = a.size() / n;
  auto av = a.values();
  std::vector<double> out(av.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += x[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (x[j] - mu) * (x[j] - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = (x[j] - mu) * inv_std[r];
  }
  const std::size_t ia = a.id();
  return t.record(s, std::move(out), {a},
                  [ia, n, rows, inv_std = std::move(inv_std)](Tape& tp, std::size_t self) {
                    auto xhat = tp.value(self);
                    auto g = tp.grad(self);
                    auto ga = tp.grad_mut(ia);
                    const double inv_n = 1.0 / static_cast<double>(n);
                    for (std::size_t r = 0; r < rows; ++r) {
                      double gm = 0.0, gx = 0.0;
                      for (std::size_t j = 0; j < n; ++j) {
                        gm += g[r * n + j];
                        gx += g[r * n + j] * xhat[r * n + j];
                      }
                      gm *= inv_n;
                      gx *= inv_n;
                      for (std::size_t j = 0; j < n; ++j)
                        ga[r * n + j] += inv_std[r] * (g[r * n + j] - gm - xhat[r * n + j] * gx);
                    }
                  });
}

}  // namespace tpt::ad
