#include "gedforge/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gedforge::ad {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

std::int64_t shape_numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    require(d >= 1, "tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<int> s, double fill)
    : shape(std::move(s)), data(static_cast<std::size_t>(shape_numel(shape)), fill) {}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data.assign(1, v);
  return t;
}

Tensor glorot(const std::vector<int>& shape, Rng& rng) {
  double fan_in = 0.0, fan_out = 0.0;
  if (shape.size() == 2) {
    fan_in = shape[0];
    fan_out = shape[1];
  } else if (shape.size() == 4) {
    fan_in = static_cast<double>(shape[1]) * shape[2] * shape[3];
    fan_out = static_cast<double>(shape[0]) * shape[2] * shape[3];
  } else {
    throw std::invalid_argument("glorot init expects a matrix or a conv filter shape");
  }
  double limit = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor t(shape);
  for (auto& x : t.data) x = rng.uniform(-limit, limit);
  return t;
}

NodeId Graph::emplace(Tensor value, bool needs_grad, std::function<void(Graph&)> backprop) {
  nodes_.push_back({std::move(value), Tensor{}, needs_grad, std::move(backprop)});
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::input(Tensor value, bool needs_grad) {
  return emplace(std::move(value), needs_grad, nullptr);
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.rank() == 2 && tb.rank() == 2 && ta.dim(1) == tb.dim(0), "matmul shape mismatch");
  const int m = ta.dim(0), k = ta.dim(1), n = tb.dim(1);
  Tensor out({m, n});
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      double aip = ta[i * k + p];
      for (int j = 0; j < n; ++j) out[i * n + j] += aip * tb[p * n + j];
    }
  NodeId id = emplace(std::move(out), nodes_[a].needs_grad || nodes_[b].needs_grad, nullptr);
  nodes_[id].backprop = [a, b, id, m, k, n](Graph& g) {
    const Tensor& go = g.grad(id);
    if (g.nodes_[a].needs_grad) {
      const Tensor& tb2 = g.value(b);
      Tensor& ga = g.grad_slot(a);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          double gij = go[i * n + j];
          for (int p = 0; p < k; ++p) ga[i * k + p] += gij * tb2[p * n + j];
        }
    }
    if (g.nodes_[b].needs_grad) {
      const Tensor& ta2 = g.value(a);
      Tensor& gb = g.grad_slot(b);
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
          double aip = ta2[i * k + p];
          for (int j = 0; j < n; ++j) gb[p * n + j] += aip * go[i * n + j];
        }
    }
  };
  return id;
}

NodeId Graph::matmul_nt(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.rank() == 2 && tb.rank() == 2 && ta.dim(1) == tb.dim(1), "matmul_nt shape mismatch");
  const int m = ta.dim(0), k = ta.dim(1), n = tb.dim(0);
  Tensor out({m, n});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += ta[i * k + p] * tb[j * k + p];
      out[i * n + j] = s;
    }
  NodeId id = emplace(std::move(out), nodes_[a].needs_grad || nodes_[b].needs_grad, nullptr);
  nodes_[id].backprop = [a, b, id, m, k, n](Graph& g) {
    const Tensor& go = g.grad(id);
    if (g.nodes_[a].needs_grad) {
      const Tensor& tb2 = g.value(b);
      Tensor& ga = g.grad_slot(a);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          double gij = go[i * n + j];
          for (int p = 0; p < k; ++p) ga[i * k + p] += gij * tb2[j * k + p];
        }
    }
    if (g.nodes_[b].needs_grad) {
      const Tensor& ta2 = g.value(a);
      Tensor& gb = g.grad_slot(b);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          double gij = go[i * n + j];
          for (int p = 0; p < k; ++p) gb[j * k + p] += gij * ta2[i * k + p];
        }
    }
  };
  return id;
}

NodeId Graph::gcn_aggregate(NodeId x, const AggregateCoeffs& coeffs) {
  const Tensor& tx = value(x);
  require(tx.rank() == 2, "gcn_aggregate expects a matrix");
  const int n = tx.dim(0), d = tx.dim(1);
  require(static_cast<int>(coeffs.size()) == n, "gcn_aggregate coefficient rows mismatch");
  Tensor out({n, d});
  std::vector<double> terms;
  for (int i = 0; i < n; ++i) {
    for (int col = 0; col < d; ++col) {
      terms.clear();
      for (auto [j, w] : coeffs[i]) terms.push_back(w * tx[j * d + col]);
      // value-sorted accumulation makes the sum independent of the node
      // numbering that produced the coefficient lists
      std::sort(terms.begin(), terms.end());
      double s = 0.0;
      for (double t : terms) s += t;
      out[i * d + col] = s;
    }
  }
  NodeId id = emplace(std::move(out), nodes_[x].needs_grad, nullptr);
  nodes_[id].backprop = [x, id, coeffs, n, d](Graph& g) {
    if (!g.nodes_[x].needs_grad) return;
    const Tensor& go = g.grad(id);
    Tensor& gx = g.grad_slot(x);
    for (int i = 0; i < n; ++i)
      for (auto [j, w] : coeffs[i])
        for (int col = 0; col < d; ++col) gx[j * d + col] += w * go[i * d + col];
  };
  return id;
}

NodeId Graph::add(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.shape == tb.shape, "add shape mismatch");
  Tensor out = ta;
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += tb[i];
  NodeId id = emplace(std::move(out), nodes_[a].needs_grad || nodes_[b].needs_grad, nullptr);
  nodes_[id].backprop = [a, b, id](Graph& g) {
    const Tensor& go = g.grad(id);
    if (g.nodes_[a].needs_grad) {
      Tensor& ga = g.grad_slot(a);
      for (std::int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i];
    }
    if (g.nodes_[b].needs_grad) {
      Tensor& gb = g.grad_slot(b);
      for (std::int64_t i = 0; i < go.numel(); ++i) gb[i] += go[i];
    }
  };
  return id;
}

NodeId Graph::add_bias(NodeId x, NodeId bias) {
  const Tensor& tx = value(x);
  const Tensor& tb = value(bias);
  require(tx.rank() == 2 && tb.rank() == 1 && tx.dim(1) == tb.dim(0), "add_bias shape mismatch");
  const int n = tx.dim(0), d = tx.dim(1);
  Tensor out = tx;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) out[i * d + j] += tb[j];
  NodeId id = emplace(std::move(out), nodes_[x].needs_grad || nodes_[bias].needs_grad, nullptr);
  nodes_[id].backprop = [x, bias, id, n, d](Graph& g) {
    const Tensor& go = g.grad(id);
    if (g.nodes_[x].needs_grad) {
      Tensor& gx = g.grad_slot(x);
      for (std::int64_t i = 0; i < go.numel(); ++i) gx[i] += go[i];
    }
    if (g.nodes_[bias].needs_grad) {
      Tensor& gb = g.grad_slot(bias);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) gb[j] += go[i * d + j];
    }
  };
  return id;
}

NodeId Graph::relu(NodeId x) {
  Tensor out = value(x);
  for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
  NodeId id = emplace(std::move(out), nodes_[x].needs_grad, nullptr);
  nodes_[id].backprop = [x, id](Graph& g) {
    if (!g.nodes_[x].needs_grad) return;
    const Tensor& go = g.grad(id);
    const Tensor& tx = g.value(x);
    Tensor& gx = g.grad_slot(x);
    for (std::int64_t i = 0; i < go.numel(); ++i)
      if (tx[i] > 0.0) gx[i] += go[i];
  };
  return id;
}

NodeId Graph::sigmoid(NodeId x) {
  Tensor out = value(x);
  for (auto& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  NodeId id = emplace(std::move(out), nodes_[x].needs_grad, nullptr);
  nodes_[id].backprop = [x, id](Graph& g) {
    if (!g.nodes_[x].needs_grad) return;
    const Tensor& go = g.grad(id);
    const Tensor& ty = g.value(id);
    Tensor& gx = g.grad_slot(x);
    for (std::int64_t i = 0; i < go.numel(); ++i) gx[i] += go[i] * ty[i] * (1.0 - ty[i]);
  };
  return id;
}

NodeId Graph::conv2d(NodeId x, NodeId w, NodeId bias, int window) {
  const Tensor& tx = value(x);
  const Tensor& tw = value(w);
  const Tensor& tb = value(bias);
  require(tx.rank() == 4 && tw.rank() == 4 && tb.rank() == 1, "conv2d expects 4d input and filter");
  require(tw.dim(2) == window && tw.dim(3) == window, "conv2d filter window mismatch");
  require(tw.dim(1) == tx.dim(1), "conv2d channel mismatch");
  require(tb.dim(0) == tw.dim(0), "conv2d bias mismatch");
  const int batch = tx.dim(0), cin = tx.dim(1), h = tx.dim(2), wd = tx.dim(3);
  const int cout = tw.dim(0);
  const int pad = (window - 1) / 2;  // even windows get the extra zero at the far edge

  Tensor out({batch, cout, h, wd});
  for (int b = 0; b < batch; ++b)
    for (int co = 0; co < cout; ++co) {
      double* op = &out.data[((b * cout + co) * h) * wd];
      for (int y = 0; y < h; ++y)
        for (int xo = 0; xo < wd; ++xo) {
          double s = tb[co];
          const int ky0 = std::max(0, pad - y), ky1 = std::min(window, h + pad - y);
          const int kx0 = std::max(0, pad - xo), kx1 = std::min(window, wd + pad - xo);
          for (int ci = 0; ci < cin; ++ci) {
            const double* ip = &tx.data[((b * cin + ci) * h) * wd];
            const double* wp = &tw.data[((co * cin + ci) * window) * window];
            for (int ky = ky0; ky < ky1; ++ky) {
              const int iy = y + ky - pad;
              for (int kx = kx0; kx < kx1; ++kx) s += wp[ky * window + kx] * ip[iy * wd + xo + kx - pad];
            }
          }
          op[y * wd + xo] = s;
        }
    }

  bool ng = nodes_[x].needs_grad || nodes_[w].needs_grad || nodes_[bias].needs_grad;
  NodeId id = emplace(std::move(out), ng, nullptr);
  nodes_[id].backprop = [x, w, bias, id, batch, cin, cout, h, wd, window, pad](Graph& g) {
    const Tensor& go = g.grad(id);
    const Tensor& tx = g.value(x);
    const Tensor& tw = g.value(w);
    const bool need_x = g.nodes_[x].needs_grad;
    const bool need_w = g.nodes_[w].needs_grad;
    if (g.nodes_[bias].needs_grad) {
      Tensor& gb = g.grad_slot(bias);
      for (int b = 0; b < batch; ++b)
        for (int co = 0; co < cout; ++co) {
          const double* gp = &go.data[((b * cout + co) * h) * wd];
          double s = 0.0;
          for (int i = 0; i < h * wd; ++i) s += gp[i];
          gb[co] += s;
        }
    }
    if (!need_x && !need_w) return;
    for (int b = 0; b < batch; ++b)
      for (int co = 0; co < cout; ++co) {
        const double* gp = &go.data[((b * cout + co) * h) * wd];
        for (int y = 0; y < h; ++y)
          for (int xo = 0; xo < wd; ++xo) {
            const double gout = gp[y * wd + xo];
            if (gout == 0.0) continue;
            const int ky0 = std::max(0, pad - y), ky1 = std::min(window, h + pad - y);
            const int kx0 = std::max(0, pad - xo), kx1 = std::min(window, wd + pad - xo);
            for (int ci = 0; ci < cin; ++ci) {
              const double* ip = &tx.data[((b * cin + ci) * h) * wd];
              const double* wp = &tw.data[((co * cin + ci) * window) * window];
              double* gip = need_x ? &g.grad_slot(x).data[((b * cin + ci) * h) * wd] : nullptr;
              double* gwp = need_w ? &g.grad_slot(w).data[((co * cin + ci) * window) * window] : nullptr;
              for (int ky = ky0; ky < ky1; ++ky) {
                const int iy = y + ky - pad;
                for (int kx = kx0; kx < kx1; ++kx) {
                  const int ix = xo + kx - pad;
                  if (gip) gip[iy * wd + ix] += gout * wp[ky * window + kx];
                  if (gwp) gwp[ky * window + kx] += gout * ip[iy * wd + ix];
                }
              }
            }
          }
      }
  };
  return id;
}

NodeId Graph::maxpool2d(NodeId x, int size) {
  const Tensor& tx = value(x);
  require(tx.rank() == 4, "maxpool2d expects a 4d tensor");
  require(size >= 1, "maxpool2d window must be positive");
  const int batch = tx.dim(0), c = tx.dim(1), h = tx.dim(2), w = tx.dim(3);
  const int oh = (h + size - 1) / size, ow = (w + size - 1) / size;

  Tensor out({batch, c, oh, ow});
  std::vector<std::int64_t> argmax(static_cast<std::size_t>(out.numel()));
  std::int64_t o = 0;
  for (int b = 0; b < batch; ++b)
    for (int ch = 0; ch < c; ++ch) {
      const std::int64_t base = (static_cast<std::int64_t>(b) * c + ch) * h * w;
      for (int y = 0; y < oh; ++y)
        for (int xo = 0; xo < ow; ++xo, ++o) {
          double best = -std::numeric_limits<double>::infinity();
          std::int64_t best_at = -1;
          for (int iy = y * size; iy < std::min(h, (y + 1) * size); ++iy)
            for (int ix = xo * size; ix < std::min(w, (xo + 1) * size); ++ix) {
              std::int64_t at = base + static_cast<std::int64_t>(iy) * w + ix;
              if (tx[at] > best) {  // strict: earliest flat index wins ties
                best = tx[at];
                best_at = at;
              }
            }
          out[o] = best;
          argmax[o] = best_at;
        }
    }

  NodeId id = emplace(std::move(out), nodes_[x].needs_grad, nullptr);
  nodes_[id].backprop = [x, id, argmax](Graph& g) {
    if (!g.nodes_[x].needs_grad) return;
    const Tensor& go = g.grad(id);
    Tensor& gx = g.grad_slot(x);
    for (std::int64_t i = 0; i < go.numel(); ++i) gx[argmax[i]] += go[i];
  };
  return id;
}

NodeId Graph::resize_bilinear(NodeId x, int out_h, int out_w) {
  const Tensor& tx = value(x);
  require(tx.rank() == 4, "resize_bilinear expects a 4d tensor");
  require(out_h >= 1 && out_w >= 1, "resize target must be positive");
  const int batch = tx.dim(0), c = tx.dim(1), h = tx.dim(2), w = tx.dim(3);

  // align-corners source coordinates; a singleton target samples the center
  auto src_of = [](int t, int target, int source) {
    if (target == 1) return (source - 1) / 2.0;
    return t * (source - 1.0) / (target - 1.0);
  };
  struct Tap {
    int lo;
    double frac;
  };
  std::vector<Tap> ytap(out_h), xtap(out_w);
  for (int y = 0; y < out_h; ++y) {
    double s = src_of(y, out_h, h);
    int lo = std::min(static_cast<int>(s), h - 1);
    ytap[y] = {lo, s - lo};
  }
  for (int xo = 0; xo < out_w; ++xo) {
    double s = src_of(xo, out_w, w);
    int lo = std::min(static_cast<int>(s), w - 1);
    xtap[xo] = {lo, s - lo};
  }
  auto hi = [](const Tap& t, int limit) { return std::min(t.lo + 1, limit - 1); };

  Tensor out({batch, c, out_h, out_w});
  for (int b = 0; b < batch; ++b)
    for (int ch = 0; ch < c; ++ch) {
      const double* ip = &tx.data[(static_cast<std::size_t>(b) * c + ch) * h * w];
      double* op = &out.data[(static_cast<std::size_t>(b) * c + ch) * out_h * out_w];
      for (int y = 0; y < out_h; ++y)
        for (int xo = 0; xo < out_w; ++xo) {
          const Tap& ty = ytap[y];
          const Tap& txp = xtap[xo];
          int y1 = hi(ty, h), x1 = hi(txp, w);
          double v00 = ip[ty.lo * w + txp.lo], v01 = ip[ty.lo * w + x1];
          double v10 = ip[y1 * w + txp.lo], v11 = ip[y1 * w + x1];
          double top = v00 + (v01 - v00) * txp.frac;
          double bot = v10 + (v11 - v10) * txp.frac;
          op[y * out_w + xo] = top + (bot - top) * ty.frac;
        }
    }

  NodeId id = emplace(std::move(out), nodes_[x].needs_grad, nullptr);
  nodes_[id].backprop = [x, id, batch, c, h, w, out_h, out_w, ytap, xtap, hi](Graph& g) {
    if (!g.nodes_[x].needs_grad) return;
    const Tensor& go = g.grad(id);
    Tensor& gx = g.grad_slot(x);
    for (int b = 0; b < batch; ++b)
      for (int ch = 0; ch < c; ++ch) {
        double* gip = &gx.data[(static_cast<std::size_t>(b) * c + ch) * h * w];
        const double* gop = &go.data[(static_cast<std::size_t>(b) * c + ch) * out_h * out_w];
        for (int y = 0; y < out_h; ++y)
          for (int xo = 0; xo < out_w; ++xo) {
            const Tap& ty = ytap[y];
            const Tap& txp = xtap[xo];
            int y1 = hi(ty, h), x1 = hi(txp, w);
            double gv = gop[y * out_w + xo];
            gip[ty.lo * w + txp.lo] += gv * (1 - ty.frac) * (1 - txp.frac);
            gip[ty.lo * w + x1] += gv * (1 - ty.frac) * txp.frac;
            gip[y1 * w + txp.lo] += gv * ty.frac * (1 - txp.frac);
            gip[y1 * w + x1] += gv * ty.frac * txp.frac;
          }
      }
  };
  return id;
}

NodeId Graph::reshape(NodeId x, std::vector<int> shape) {
  const Tensor& tx = value(x);
  require(shape_numel(shape) == tx.numel(), "reshape must preserve the element count");
  Tensor out = tx;
  out.shape = std::move(shape);
  NodeId id = emplace(std::move(out), nodes_[x].needs_grad, nullptr);
  nodes_[id].backprop = [x, id](Graph& g) {
    if (!g.nodes_[x].needs_grad) return;
    const Tensor& go = g.grad(id);
    Tensor& gx = g.grad_slot(x);
    for (std::int64_t i = 0; i < go.numel(); ++i) gx[i] += go[i];
  };
  return id;
}

NodeId Graph::gather_rows_pad(NodeId x, std::vector<int> order, int pad_to) {
  const Tensor& tx = value(x);
  require(tx.rank() == 2, "gather_rows_pad expects a matrix");
  const int n = static_cast<int>(order.size()), d = tx.dim(1);
  require(pad_to >= n, "pad_to smaller than the row count");
  for (int r : order) require(r >= 0 && r < tx.dim(0), "gather row out of range");
  Tensor out({pad_to, d});
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < d; ++j) out[r * d + j] = tx[order[r] * d + j];
  NodeId id = emplace(std::move(out), nodes_[x].needs_grad, nullptr);
  nodes_[id].backprop = [x, id, order, d](Graph& g) {
    if (!g.nodes_[x].needs_grad) return;
    const Tensor& go = g.grad(id);
    Tensor& gx = g.grad_slot(x);
    for (std::size_t r = 0; r < order.size(); ++r)
      for (int j = 0; j < d; ++j) gx[order[r] * d + j] += go[r * d + j];
  };
  return id;
}

NodeId Graph::mean_rows(NodeId x) {
  const Tensor& tx = value(x);
  require(tx.rank() == 2, "mean_rows expects a matrix");
  const int n = tx.dim(0), d = tx.dim(1);
  Tensor out({1, d});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) out[j] += tx[i * d + j];
  for (int j = 0; j < d; ++j) out[j] /= n;
  NodeId id = emplace(std::move(out), nodes_[x].needs_grad, nullptr);
  nodes_[id].backprop = [x, id, n, d](Graph& g) {
    if (!g.nodes_[x].needs_grad) return;
    const Tensor& go = g.grad(id);
    Tensor& gx = g.grad_slot(x);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) gx[i * d + j] += go[j] / n;
  };
  return id;
}

NodeId Graph::dot(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.shape == tb.shape, "dot shape mismatch");
  double s = 0.0;
  for (std::int64_t i = 0; i < ta.numel(); ++i) s += ta[i] * tb[i];
  NodeId id = emplace(Tensor::scalar(s), nodes_[a].needs_grad || nodes_[b].needs_grad, nullptr);
  nodes_[id].backprop = [a, b, id](Graph& g) {
    const double go = g.grad(id)[0];
    const Tensor& ta2 = g.value(a);
    const Tensor& tb2 = g.value(b);
    if (g.nodes_[a].needs_grad) {
      Tensor& ga = g.grad_slot(a);
      for (std::int64_t i = 0; i < ta2.numel(); ++i) ga[i] += go * tb2[i];
    }
    if (g.nodes_[b].needs_grad) {
      Tensor& gb = g.grad_slot(b);
      for (std::int64_t i = 0; i < tb2.numel(); ++i) gb[i] += go * ta2[i];
    }
  };
  return id;
}

NodeId Graph::stack_scalars(const std::vector<NodeId>& parts) {
  require(!parts.empty(), "stack_scalars needs at least one element");
  Tensor out({static_cast<int>(parts.size())});
  bool ng = false;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    require(value(parts[i]).numel() == 1, "stack_scalars expects scalars");
    out[i] = value(parts[i])[0];
    ng = ng || nodes_[parts[i]].needs_grad;
  }
  NodeId id = emplace(std::move(out), ng, nullptr);
  nodes_[id].backprop = [parts, id](Graph& g) {
    const Tensor& go = g.grad(id);
    for (std::size_t i = 0; i < parts.size(); ++i)
      if (g.nodes_[parts[i]].needs_grad) g.grad_slot(parts[i])[0] += go[i];
  };
  return id;
}

NodeId Graph::mse_loss(NodeId pred, const Tensor& target) {
  const Tensor& tp = value(pred);
  require(tp.shape == target.shape, "mse_loss shape mismatch");
  const std::int64_t n = tp.numel();
  double s = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    double d = tp[i] - target[i];
    s += d * d;
  }
  NodeId id = emplace(Tensor::scalar(s / n), nodes_[pred].needs_grad, nullptr);
  nodes_[id].backprop = [pred, id, target, n](Graph& g) {
    if (!g.nodes_[pred].needs_grad) return;
    const double go = g.grad(id)[0];
    const Tensor& tp2 = g.value(pred);
    Tensor& gp = g.grad_slot(pred);
    for (std::int64_t i = 0; i < n; ++i) gp[i] += go * 2.0 * (tp2[i] - target[i]) / n;
  };
  return id;
}

void Graph::backward(NodeId loss) {
  require(loss >= 0 && loss < size(), "backward target out of range");
  require(value(loss).numel() == 1, "backward needs a scalar loss");
  for (Node& node : nodes_)
    if (node.needs_grad) node.grad = Tensor(node.value.shape.empty() ? std::vector<int>{} : node.value.shape, 0.0);
  if (!nodes_[loss].needs_grad) return;  // nothing trainable feeds the loss
  nodes_[loss].grad.data.assign(1, 1.0);
  for (NodeId id = loss; id >= 0; --id)
    if (nodes_[id].needs_grad && nodes_[id].backprop) nodes_[id].backprop(*this);
}

AdamState AdamState::init(const std::vector<Tensor>& params) {
  AdamState s;
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (const Tensor& p : params) {
    s.m.push_back(Tensor(p.shape.empty() ? std::vector<int>{} : p.shape, 0.0));
    s.v.push_back(Tensor(p.shape.empty() ? std::vector<int>{} : p.shape, 0.0));
  }
  return s;
}

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step list size mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (params[p].shape != grads[p].shape) throw std::invalid_argument("adam_step shape mismatch");
    for (std::int64_t i = 0; i < params[p].numel(); ++i) {
      double g = grads[p][i];
      double& m = state.m[p][i];
      double& v = state.v[p][i];
      m = state.beta1 * m + (1.0 - state.beta1) * g;
      v = state.beta2 * v + (1.0 - state.beta2) * g * g;
      params[p][i] -= state.lr * (m / bc1) / (std::sqrt(v / bc2) + state.eps);
    }
  }
}

}  // namespace gedforge::ad
