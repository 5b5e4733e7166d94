#include <algorithm>
#include <cmath>

#include "memdep/tensor/tensor.hpp"

namespace memdep::tensor {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
}

bool want_grad(const Tape& tp, const Tensor& a) { return tp.enabled() && a.requires_grad(); }
bool want_grad(const Tape& tp, const Tensor& a, const Tensor& b) {
  return tp.enabled() && (a.requires_grad() || b.requires_grad());
}

}  // namespace

Tensor matmul(Tape& tp, const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows())
    throw ShapeError("matmul: incompatible " + a.shape_str() + " x " + b.shape_str());
  int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out({m, n}, want_grad(tp, a, b));
  {
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (int i = 0; i < m; ++i)
      for (int t = 0; t < k; ++t) {
        double av = pa[i * k + t];
        if (av == 0.0) continue;
        const double* brow = pb + t * n;
        double* orow = po + i * n;
        for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
  }
  if (out.requires_grad())
    tp.record([&tp, a, b, out, m, k, n] {
      const auto* go = tp.maybe_grad(out);
      if (!go) return;
      if (a.requires_grad()) {
        auto& ga = tp.grad(a);
        const double* pb = b.data();
        for (int i = 0; i < m; ++i)
          for (int t = 0; t < k; ++t) {
            double s = 0.0;
            const double* brow = pb + t * n;
            const double* grow = go->data() + i * n;
            for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
            ga[static_cast<size_t>(i) * static_cast<size_t>(k) + static_cast<size_t>(t)] += s;
          }
      }
      if (b.requires_grad()) {
        auto& gb = tp.grad(b);
        const double* pa = a.data();
        for (int i = 0; i < m; ++i) {
          const double* grow = go->data() + i * n;
          for (int t = 0; t < k; ++t) {
            double av = pa[i * k + t];
            if (av == 0.0) continue;
            double* gbrow = gb.data() + static_cast<size_t>(t) * static_cast<size_t>(n);
            for (int j = 0; j < n; ++j) gbrow[j] += av * grow[j];
          }
        }
      }
    });
  return out;
}

Tensor add(Tape& tp, const Tensor& a, const Tensor& b) {
  bool row_broadcast = a.ndim() == 2 && b.ndim() == 2 && b.rows() == 1 && a.cols() == b.cols() &&
                       a.rows() != 1;
  if (!row_broadcast) check_same_shape(a, b, "add");
  Tensor out(a.shape(), want_grad(tp, a, b));
  int64_t n = a.numel(), bn = b.numel();
  for (int64_t i = 0; i < n; ++i) out.at(i) = a.at(i) + b.at(i % bn);
  if (out.requires_grad())
    tp.record([&tp, a, b, out, n, bn] {
      const auto* go = tp.maybe_grad(out);
      if (!go) return;
      if (a.requires_grad()) {
        auto& ga = tp.grad(a);
        for (int64_t i = 0; i < n; ++i) ga[static_cast<size_t>(i)] += (*go)[static_cast<size_t>(i)];
      }
      if (b.requires_grad()) {
        auto& gb = tp.grad(b);
        for (int64_t i = 0; i < n; ++i)
          gb[static_cast<size_t>(i % bn)] += (*go)[static_cast<size_t>(i)];
      }
    });
  return out;
}

Tensor sub(Tape& tp, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out(a.shape(), want_grad(tp, a, b));
  int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.at(i) = a.at(i) - b.at(i);
  if (out.requires_grad())
    tp.record([&tp, a, b, out, n] {
      const auto* go = tp.maybe_grad(out);
      if (!go) return;
      if (a.requires_grad()) {
        auto& ga = tp.grad(a);
        for (int64_t i = 0; i < n; ++i) ga[static_cast<size_t>(i)] += (*go)[static_cast<size_t>(i)];
      }
      if (b.requires_grad()) {
        auto& gb = tp.grad(b);
        for (int64_t i = 0; i < n; ++i) gb[static_cast<size_t>(i)] -= (*go)[static_cast<size_t>(i)];
      }
    });
  return out;
}

Tensor mul(Tape& tp, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out(a.shape(), want_grad(tp, a, b));
  int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.at(i) = a.at(i) * b.at(i);
  if (out.requires_grad())
    tp.record([&tp, a, b, out, n] {
      const auto* go = tp.maybe_grad(out);
      if (!go) return;
      if (a.requires_grad()) {
        auto& ga = tp.grad(a);
        for (int64_t i = 0; i < n; ++i)
          ga[static_cast<size_t>(i)] += (*go)[static_cast<size_t>(i)] * b.at(i);
      }
      if (b.requires_grad()) {
        auto& gb = tp.grad(b);
        for (int64_t i = 0; i < n; ++i)
          gb[static_cast<size_t>(i)] += (*go)[static_cast<size_t>(i)] * a.at(i);
      }
    });
  return out;
}

Tensor emax(Tape& tp, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "emax");
  Tensor out(a.shape(), want_grad(tp, a, b));
  int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.at(i) = a.at(i) >= b.at(i) ? a.at(i) : b.at(i);
  if (out.requires_grad())
    tp.record([&tp, a, b, out, n] {
      const auto* go = tp.maybe_grad(out);
      if (!go) return;
      for (int64_t i = 0; i < n; ++i) {
        bool take_a = a.at(i) >= b.at(i);
        if (take_a && a.requires_grad()) tp.grad(a)[static_cast<size_t>(i)] += (*go)[static_cast<size_t>(i)];
        if (!take_a && b.requires_grad()) tp.grad(b)[static_cast<size_t>(i)] += (*go)[static_cast<size_t>(i)];
      }
    });
  return out;
}

Tensor scale(Tape& tp, const Tensor& a, double s) {
  Tensor out(a.shape(), want_grad(tp, a));
  int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.at(i) = a.at(i) * s;
  if (out.requires_grad())
    tp.record([&tp, a, out, n, s] {
      const auto* go = tp.maybe_grad(out);
      if (!go) return;
      auto& ga = tp.grad(a);
      for (int64_t i = 0; i < n; ++i) ga[static_cast<size_t>(i)] += (*go)[static_cast<size_t>(i)] * s;
    });
  return out;
}

Tensor add_scalar(Tape& tp, const Tensor& a, double s) {
  Tensor out(a.shape(), want_grad(tp, a));
  int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.at(i) = a.at(i) + s;
  if (out.requires_grad())
    tp.record([&tp, a, out, n] {
      const auto* go = tp.maybe_grad(out);
      if (!go) return;
      auto& ga = tp.grad(a);
      for (int64_t i = 0; i < n; ++i) ga[static_cast<size_t>(i)] += (*go)[static_cast<size_t>(i)];
    });
  return out;
}

Tensor transpose(Tape& tp, const Tensor& a) {
  int m = a.rows(), n = a.cols();
  Tensor out({n, m}, want_grad(tp, a));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at2(j, i) = a.at2(i, j);
  if (out.requires_grad())
    tp.record([&tp, a, out, m, n] {
      const auto* go = tp.maybe_grad(out);
      if (!go) return;
      auto& ga = tp.grad(a);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          ga[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(j)] +=
              (*go)[static_cast<size_t>(j) * static_cast<size_t>(m) + static_cast<size_t>(i)];
    });
  return out;
}

Tensor reshape(Tape& tp, const Tensor& a, std::vector<int> shape) {
  Tensor out = Tensor::from(std::move(shape),
                            std::vector<double>(a.data(), a.data() + a.numel()),
                            want_grad(tp, a));
  if (out.numel() != a.numel())
    throw ShapeError("reshape: element count mismatch " + a.shape_str() + " -> " +
                     out.shape_str());
  if (out.requires_grad())
    tp.record([&tp, a, out] {
      const auto* go = tp.maybe_grad(out);
      if (!go) return;
      auto& ga = tp.grad(a);
      for (size_t i = 0; i < go->size(); ++i) ga[i] += (*go)[i];
    });
  return out;
}

Tensor concat_rows(Tape& tp, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: empty input");
  int n = parts[0].cols(), m = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p.cols() != n) throw ShapeError("concat_rows: column mismatch");
    m += p.rows();
    rg = rg || p.requires_grad();
  }
  rg = rg && tp.enabled();
  Tensor out({m, n}, rg);
  {
    double* po = out.data();
    for (const auto& p : parts) {
      std::copy(p.data(), p.data() + p.numel(), po);
      po += p.numel();
    }
  }
  if (rg)
    tp.record([&tp, parts, out] {
      const auto* go = tp.maybe_grad(out);
      if (!go) return;
      size_t off = 0;
      for (const auto& p : parts) {
        size_t cnt = static_cast<size_t>(p.numel());
        if (p.requires_grad()) {
          auto& gp = tp.grad(p);
          for (size_t i = 0; i < cnt; ++i) gp[i] += (*go)[off + i];
        }
        off += cnt;
      }
    });
  return out;
}

Tensor concat_cols(Tape& tp, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: empty input");
  int m = parts[0].rows(), n = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p.rows() != m) throw ShapeError("concat_cols: row mismatch");
    n += p.cols();
    rg = rg || p.requires_grad();
  }
  rg = rg && tp.enabled();
  Tensor out({m, n}, rg);
  {
    int coff = 0;
    for (const auto& p : parts) {
      int pc = p.cols();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < pc; ++j) out.at2(i, coff + j) = p.at2(i, j);
      coff += pc;
    }
  }
  if (rg)
    tp.record([&tp, parts, out, m, n] {
      const auto* go = tp.maybe_grad(out);
      if (!go) return;
      int coff = 0;
      for (const auto& p : parts) {
        int pc = p.cols();
        if (p.requires_grad()) {
          auto& gp = tp.grad(p);
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < pc; ++j)
              gp[static_cast<size_t>(i) * static_cast<size_t>(pc) + static_cast<size_t>(j)] +=
                  (*go)[static_cast<size_t>(i) * static_cast<size_t>(n) +
                        static_cast<size_t>(coff + j)];
        }
        coff += pc;
      }
    });
  return out;
}

Tensor slice_rows(Tape& tp, const Tensor& a, int r0, int r1) {
  int m = a.rows(), n = a.cols();
  if (r0 < 0 || r1 > m || r0 >= r1) throw ShapeError("slice_rows: bad range");
  Tensor out({r1 - r0, n}, want_grad(tp, a));
  std::copy(a.data() + static_cast<int64_t>(r0) * n, a.data() + static_cast<int64_t>(r1) * n,
            out.data());
  if (out.requires_grad())
    tp.record([&tp, a, out, r0, n] {
      const auto* go = tp.maybe_grad(out);
      if (!go) return;
      auto& ga = tp.grad(a);
      for (size_t i = 0; i < go->size(); ++i)
        ga[static_cast<size_t>(r0) * static_cast<size_t>(n) + i] += (*go)[i];
    });
  return out;
}

Tensor slice_cols(Tape& tp, const Tensor& a, int c0, int c1) {
  int m = a.rows(), n = a.cols();
  if (c0 < 0 || c1 > n || c0 >= c1) throw ShapeError("slice_cols: bad range");
  int w = c1 - c0;
  Tensor out({m, w}, want_grad(tp, a));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < w; ++j) out.at2(i, j) = a.at2(i, c0 + j);
  if (out.requires_grad())
    tp.record([&tp, a, out, m, n, c0, w] {
      const auto* go = tp.maybe_grad(out);
      if (!go) return;
      auto& ga = tp.grad(a);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < w; ++j)
          ga[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(c0 + j)] +=
              (*go)[static_cast<size_t>(i) * static_cast<size_t>(w) + static_cast<size_t>(j)];
    });
  return out;
}

Tensor gather_rows(Tape& tp, const Tensor& a, const std::vector<int>& rows) {
  int m = a.rows(), n = a.cols();
  for (int r : rows)
    if (r < 0 || r >= m) throw ShapeError("gather_rows: index out of range");
  Tensor out({static_cast<int>(rows.size()), n}, want_grad(tp, a));
  for (size_t i = 0; i < rows.size(); ++i)
    std::copy(a.data() + static_cast<int64_t>(rows[i]) * n,
              a.data() + static_cast<int64_t>(rows[i] + 1) * n, out.data() + i * static_cast<size_t>(n));
  if (out.requires_grad())
    tp.record([&tp, a, out, rows, n] {
      const auto* go = tp.maybe_grad(out);
      if (!go) return;
      auto& ga = tp.grad(a);
      for (size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < n; ++j)
          ga[static_cast<size_t>(rows[i]) * static_cast<size_t>(n) + static_cast<size_t>(j)] +=
              (*go)[i * static_cast<size_t>(n) + static_cast<size_t>(j)];
    });
  return out;
}

Tensor relu(Tape& tp, const Tensor& a) {
  Tensor out(a.shape(), want_grad(tp, a));
  int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.at(i) = a.at(i) > 0.0 ? a.at(i) : 0.0;
  if (out.requires_grad())
    tp.record([&tp, a, out, n] {
      const auto* go = tp.maybe_grad(out);
      if (!go) return;
      auto& ga = tp.grad(a);
      for (int64_t i = 0; i < n; ++i)
        if (a.at(i) > 0.0) ga[static_cast<size_t>(i)] += (*go)[static_cast<size_t>(i)];
    });
  return out;
}

Tensor sigmoid(Tape& tp, const Tensor& a) {
  Tensor out(a.shape(), want_grad(tp, a));
  int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.at(i) = 1.0 / (1.0 + std::exp(-a.at(i)));
  if (out.requires_grad())
    tp.record([&tp, a, out, n] {
      const auto* go = tp.maybe_grad(out);
      if (!go) return;
      auto& ga = tp.grad(a);
      for (int64_t i = 0; i < n; ++i) {
        double s = out.at(i);
        ga[static_cast<size_t>(i)] += (*go)[static_cast<size_t>(i)] * s * (1.0 - s);
      }
    });
  return out;
}

Tensor abs_val(Tape& tp, const Tensor& a) {
  Tensor out(a.shape(), want_grad(tp, a));
  int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.at(i) = std::fabs(a.at(i));
  if (out.requires_grad())
    tp.record([&tp, a, out, n] {
      const auto* go = tp.maybe_grad(out);
      if (!go) return;
      auto& ga = tp.grad(a);
      for (int64_t i = 0; i < n; ++i) {
        double s = a.at(i) > 0.0 ? 1.0 : (a.at(i) < 0.0 ? -1.0 : 0.0);
        ga[static_cast<size_t>(i)] += (*go)[static_cast<size_t>(i)] * s;
      }
    });
  return out;
}

Tensor softmax_rows(Tape& tp, const Tensor& a) {
  int m = a.rows(), n = a.cols();
  Tensor out({m, n}, want_grad(tp, a));
  for (int i = 0; i < m; ++i) {
    double mx = a.at2(i, 0);
    for (int j = 1; j < n; ++j) mx = std::max(mx, a.at2(i, j));
    double z = 0.0;
    for (int j = 0; j < n; ++j) {
      double e = std::exp(a.at2(i, j) - mx);
      out.at2(i, j) = e;
      z += e;
    }
    for (int j = 0; j < n; ++j) out.at2(i, j) /= z;
  }
  if (out.requires_grad())
    tp.record([&tp, a, out, m, n] {
      const auto* go = tp.maybe_grad(out);
      if (!go) return;
      auto& ga = tp.grad(a);
      for (int i = 0; i < m; ++i) {
        double dot = 0.0;
        for (int j = 0; j < n; ++j)
          dot += (*go)[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(j)] *
                 out.at2(i, j);
        for (int j = 0; j < n; ++j)
          ga[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(j)] +=
              out.at2(i, j) *
              ((*go)[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(j)] -
               dot);
      }
    });
  return out;
}

Tensor max_over_rows(Tape& tp, const Tensor& a) {
  int m = a.rows(), n = a.cols();
  Tensor out({1, n}, want_grad(tp, a));
  std::vector<int> arg(static_cast<size_t>(n), 0);
  for (int j = 0; j < n; ++j) {
    double best = a.at2(0, j);
    for (int i = 1; i < m; ++i)
      if (a.at2(i, j) > best) {
        best = a.at2(i, j);
        arg[static_cast<size_t>(j)] = i;
      }
    out.at2(0, j) = best;
  }
  if (out.requires_grad())
    tp.record([&tp, a, out, arg, n] {
      const auto* go = tp.maybe_grad(out);
      if (!go) return;
      auto& ga = tp.grad(a);
      for (int j = 0; j < n; ++j)
        ga[static_cast<size_t>(arg[static_cast<size_t>(j)]) * static_cast<size_t>(n) +
           static_cast<size_t>(j)] += (*go)[static_cast<size_t>(j)];
    });
  return out;
}

Tensor mean_rows(Tape& tp, const Tensor& a) {
  int m = a.rows(), n = a.cols();
  Tensor out({1, n}, want_grad(tp, a));
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += a.at2(i, j);
    out.at2(0, j) = s / m;
  }
  if (out.requires_grad())
    tp.record([&tp, a, out, m, n] {
      const auto* go = tp.maybe_grad(out);
      if (!go) return;
      auto& ga = tp.grad(a);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          ga[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(j)] +=
              (*go)[static_cast<size_t>(j)] / m;
    });
  return out;
}

Tensor sum_all(Tape& tp, const Tensor& a) {
  Tensor out({1}, want_grad(tp, a));
  double s = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) s += a.at(i);
  out.at(0) = s;
  if (out.requires_grad())
    tp.record([&tp, a, out] {
      const auto* go = tp.maybe_grad(out);
      if (!go) return;
      auto& ga = tp.grad(a);
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += (*go)[0];
    });
  return out;
}

Tensor layer_norm(Tape& tp, const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
  int m = a.rows(), n = a.cols();
  if (gain.numel() != n || bias.numel() != n)
    throw ShapeError("layer_norm: gain/bias size mismatch");
  Tensor out({m, n}, tp.enabled() && (a.requires_grad() || gain.requires_grad() ||
                                      bias.requires_grad()));
  std::vector<double> mean(static_cast<size_t>(m)), istd(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    double mu = 0.0;
    for (int j = 0; j < n; ++j) mu += a.at2(i, j);
    mu /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) {
      double d = a.at2(i, j) - mu;
      var += d * d;
    }
    var /= n;
    double is = 1.0 / std::sqrt(var + eps);
    mean[static_cast<size_t>(i)] = mu;
    istd[static_cast<size_t>(i)] = is;
    for (int j = 0; j < n; ++j)
      out.at2(i, j) = (a.at2(i, j) - mu) * is * gain.at(j) + bias.at(j);
  }
  if (out.requires_grad())
    tp.record([&tp, a, gain, bias, out, m, n, mean, istd] {
      const auto* go = tp.maybe_grad(out);
      if (!go) return;
      auto at_go = [&](int i, int j) {
        return (*go)[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(j)];
      };
      for (int i = 0; i < m; ++i) {
        double mu = mean[static_cast<size_t>(i)], is = istd[static_cast<size_t>(i)];
        if (gain.requires_grad()) {
          auto& gg = tp.grad(gain);
          for (int j = 0; j < n; ++j)
            gg[static_cast<size_t>(j)] += at_go(i, j) * (a.at2(i, j) - mu) * is;
        }
        if (bias.requires_grad()) {
          auto& gb = tp.grad(bias);
          for (int j = 0; j < n; ++j) gb[static_cast<size_t>(j)] += at_go(i, j);
        }
        if (a.requires_grad()) {
          auto& ga = tp.grad(a);
          double sum_g = 0.0, sum_gx = 0.0;
          for (int j = 0; j < n; ++j) {
            double gh = at_go(i, j) * gain.at(j);
            double xh = (a.at2(i, j) - mu) * is;
            sum_g += gh;
            sum_gx += gh * xh;
          }
          for (int j = 0; j < n; ++j) {
            double gh = at_go(i, j) * gain.at(j);
            double xh = (a.at2(i, j) - mu) * is;
            ga[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(j)] +=
                is * (gh - sum_g / n - xh * sum_gx / n);
          }
        }
      }
    });
  return out;
}

Tensor cross_entropy_rows(Tape& tp, const Tensor& logits, const std::vector<int>& targets) {
  int m = logits.rows(), n = logits.cols();
  if (static_cast<int>(targets.size()) != m)
    throw ShapeError("cross_entropy_rows: target count mismatch");
  for (int t : targets)
    if (t < 0 || t >= n) throw ShapeError("cross_entropy_rows: target out of range");
  Tensor out({1}, want_grad(tp, logits));
  // Cache row softmax for the backward pass.
  auto probs = std::make_shared<std::vector<double>>(static_cast<size_t>(m) *
                                                     static_cast<size_t>(n));
  double loss = 0.0;
  for (int i = 0; i < m; ++i) {
    double mx = logits.at2(i, 0);
    for (int j = 1; j < n; ++j) mx = std::max(mx, logits.at2(i, j));
    double z = 0.0;
    for (int j = 0; j < n; ++j) z += std::exp(logits.at2(i, j) - mx);
    double lz = std::log(z) + mx;
    loss += lz - logits.at2(i, targets[static_cast<size_t>(i)]);
    for (int j = 0; j < n; ++j)
      (*probs)[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(j)] =
          std::exp(logits.at2(i, j) - lz);
  }
  out.at(0) = loss;
  if (out.requires_grad())
    tp.record([&tp, logits, out, probs, targets, m, n] {
      const auto* go = tp.maybe_grad(out);
      if (!go) return;
      auto& gl = tp.grad(logits);
      double g = (*go)[0];
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          double p =
              (*probs)[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(j)];
          double onehot = j == targets[static_cast<size_t>(i)] ? 1.0 : 0.0;
          gl[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(j)] +=
              g * (p - onehot);
        }
    });
  return out;
}

Tensor bce_with_logits(Tape& tp, const Tensor& logits, const std::vector<double>& targets) {
  int64_t m = logits.numel();
  if (static_cast<int64_t>(targets.size()) != m)
    throw ShapeError("bce_with_logits: target count mismatch");
  Tensor out({1}, want_grad(tp, logits));
  double loss = 0.0;
  for (int64_t i = 0; i < m; ++i) {
    double x = logits.at(i), y = targets[static_cast<size_t>(i)];
    loss += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::fabs(x)));
  }
  out.at(0) = loss;
  if (out.requires_grad())
    tp.record([&tp, logits, out, targets, m] {
      const auto* go = tp.maybe_grad(out);
      if (!go) return;
      auto& gl = tp.grad(logits);
      double g = (*go)[0];
      for (int64_t i = 0; i < m; ++i) {
        double s = 1.0 / (1.0 + std::exp(-logits.at(i)));
        gl[static_cast<size_t>(i)] += g * (s - targets[static_cast<size_t>(i)]);
      }
    });
  return out;
}

}  // namespace memdep::tensor
