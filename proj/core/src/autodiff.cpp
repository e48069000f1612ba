#include "evotf/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace evotf::ad {

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

namespace {

thread_local bool g_grad_enabled = true;
std::atomic<std::uint64_t> g_seq{0};

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void require_defined(const Tensor& t, const char* who) {
  require(t.defined(), std::string(who) + ": undefined tensor");
}

std::shared_ptr<Node> fresh_node(std::int64_t numel) {
  auto n = std::make_shared<Node>();
  n->seq = ++g_seq;
  n->numel = numel;
  return n;
}

Tensor make_out(Shape s) {
  Tensor t;
  t.shape_ = std::move(s);
  t.data_ = std::make_shared<std::vector<float>>(
      static_cast<std::size_t>(shape_numel(t.shape_)), 0.0f);
  return t;
}

// Attaches a node to `out` iff grad mode is on and any parent is tracked.
// Returns nullptr when no graph should be built.
std::shared_ptr<Node> maybe_node(Tensor& out,
                                 std::initializer_list<const Tensor*> parents) {
  if (!g_grad_enabled) return nullptr;
  bool any = false;
  for (const Tensor* p : parents) any = any || (p && p->tracked());
  if (!any) return nullptr;
  auto n = fresh_node(out.numel());
  for (const Tensor* p : parents) {
    if (p && p->tracked()) n->parents.push_back(p->node_);
  }
  out.node_ = n;
  return n;
}

std::vector<std::int64_t> row_major_strides(const Shape& s) {
  std::vector<std::int64_t> st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) {
    st[static_cast<std::size_t>(i)] =
        st[static_cast<std::size_t>(i) + 1] * s[static_cast<std::size_t>(i) + 1];
  }
  return st;
}

// C[m,n] += A[m,k] * B[k,n]
void matmul_acc(const float* __restrict a, const float* __restrict b,
                float* __restrict c, std::int64_t m, std::int64_t k,
                std::int64_t n) {
  for (std::int64_t i = 0; i < m; ++i) {
    const float* ar = a + i * k;
    float* cr = c + i * n;
    for (std::int64_t kk = 0; kk < k; ++kk) {
      const float av = ar[kk];
      const float* br = b + kk * n;
      for (std::int64_t j = 0; j < n; ++j) cr[j] += av * br[j];
    }
  }
}

// gA[m,k] += gC[m,n] * B[k,n]^T  (rows of gC dotted with rows of B)
void matmul_grad_a(const float* __restrict gc, const float* __restrict b,
                   float* __restrict ga, std::int64_t m, std::int64_t k,
                   std::int64_t n) {
  for (std::int64_t i = 0; i < m; ++i) {
    const float* gr = gc + i * n;
    float* gar = ga + i * k;
    for (std::int64_t kk = 0; kk < k; ++kk) {
      const float* br = b + kk * n;
      float s = 0.0f;
      for (std::int64_t j = 0; j < n; ++j) s += gr[j] * br[j];
      gar[kk] += s;
    }
  }
}

// gB[k,n] += A[m,k]^T * gC[m,n]
void matmul_grad_b(const float* __restrict a, const float* __restrict gc,
                   float* __restrict gb, std::int64_t m, std::int64_t k,
                   std::int64_t n) {
  for (std::int64_t i = 0; i < m; ++i) {
    const float* ar = a + i * k;
    const float* gr = gc + i * n;
    for (std::int64_t kk = 0; kk < k; ++kk) {
      const float av = ar[kk];
      float* gbr = gb + kk * n;
      for (std::int64_t j = 0; j < n; ++j) gbr[j] += av * gr[j];
    }
  }
}

}  // namespace

Tensor Tensor::zeros(Shape s) { return make_out(std::move(s)); }

Tensor Tensor::full(Shape s, float v) {
  Tensor t = make_out(std::move(s));
  std::fill(t.data_->begin(), t.data_->end(), v);
  return t;
}

Tensor Tensor::from(Shape s, std::vector<float> vals) {
  require(shape_numel(s) == static_cast<std::int64_t>(vals.size()),
          "Tensor::from: value count does not match shape " + shape_str(s));
  Tensor t;
  t.shape_ = std::move(s);
  t.data_ = std::make_shared<std::vector<float>>(std::move(vals));
  return t;
}

Tensor Tensor::param(Shape s, std::vector<float> vals) {
  Tensor t = from(std::move(s), std::move(vals));
  t.node_ = fresh_node(t.numel());
  t.node_->leaf = true;
  return t;
}

float Tensor::scalar() const {
  require(defined() && numel() == 1, "scalar() needs a 1-element tensor");
  return (*data_)[0];
}

const std::vector<float>& Tensor::grad() const {
  require(node_ != nullptr, "grad(): tensor has no node");
  return node_->grad_buf();
}

std::vector<float>& Tensor::grad_mut() {
  require(node_ != nullptr, "grad_mut(): tensor has no node");
  return node_->grad_buf();
}

void Tensor::zero_grad() {
  if (node_) node_->grad.assign(static_cast<std::size_t>(numel()), 0.0f);
}

Tensor Tensor::detached() const {
  Tensor t;
  t.shape_ = shape_;
  t.data_ = data_;
  return t;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev; }

void backward(const Tensor& loss) {
  require(loss.tracked(), "backward: loss is not part of a graph");
  require(loss.numel() == 1, "backward: loss must be scalar");

  std::vector<Node*> reachable;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{loss.node_.get()};
  seen.insert(loss.node_.get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    reachable.push_back(n);
    for (auto& p : n->parents) {
      if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  for (Node* n : reachable) {
    n->grad.assign(static_cast<std::size_t>(n->numel), 0.0f);
  }
  loss.node_->grad[0] = 1.0f;

  std::sort(reachable.begin(), reachable.end(),
            [](Node* a, Node* b) { return a->seq > b->seq; });
  for (Node* n : reachable) {
    if (n->backprop) n->backprop(n->grad);
  }
}

// ---- ops ------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  require(a.rank() >= 1 && b.rank() == 2,
          "matmul: need lhs [...,k] and rhs [k,n], got " + shape_str(a.shape_) +
              " x " + shape_str(b.shape_));
  const std::int64_t k = a.dim(a.rank() - 1);
  require(k == b.dim(0), "matmul: inner dims differ, " + shape_str(a.shape_) +
                             " x " + shape_str(b.shape_));
  const std::int64_t n = b.dim(1);
  const std::int64_t m = a.numel() / k;

  Shape os = a.shape_;
  os.back() = static_cast<int>(n);
  Tensor out = make_out(os);
  matmul_acc(a.data_->data(), b.data_->data(), out.data_->data(), m, k, n);

  if (auto node = maybe_node(out, {&a, &b})) {
    node->backprop = [an = a.node_, bn = b.node_, ad = a.data_, bd = b.data_, m,
                      k, n](const std::vector<float>& g) {
      if (an) {
        matmul_grad_a(g.data(), bd->data(), an->grad_buf().data(), m, k, n);
      }
      if (bn) {
        matmul_grad_b(ad->data(), g.data(), bn->grad_buf().data(), m, k, n);
      }
    };
  }
  return out;
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  require_defined(a, "bmm");
  require_defined(b, "bmm");
  require(a.rank() >= 3 && b.rank() == a.rank(),
          "bmm: need [L...,m,k] x [L...,k,n], got " + shape_str(a.shape_) +
              " x " + shape_str(b.shape_));
  for (int i = 0; i < a.rank() - 2; ++i) {
    require(a.dim(i) == b.dim(i), "bmm: leading dims differ, " +
                                      shape_str(a.shape_) + " x " +
                                      shape_str(b.shape_));
  }
  const std::int64_t m = a.dim(a.rank() - 2);
  const std::int64_t k = a.dim(a.rank() - 1);
  require(k == b.dim(b.rank() - 2), "bmm: inner dims differ, " +
                                        shape_str(a.shape_) + " x " +
                                        shape_str(b.shape_));
  const std::int64_t n = b.dim(b.rank() - 1);
  const std::int64_t batches = a.numel() / (m * k);

  Shape os = a.shape_;
  os[os.size() - 1] = static_cast<int>(n);
  os[os.size() - 2] = static_cast<int>(m);
  Tensor out = make_out(os);
  for (std::int64_t t = 0; t < batches; ++t) {
    matmul_acc(a.data_->data() + t * m * k, b.data_->data() + t * k * n,
               out.data_->data() + t * m * n, m, k, n);
  }

  if (auto node = maybe_node(out, {&a, &b})) {
    node->backprop = [an = a.node_, bn = b.node_, ad = a.data_, bd = b.data_,
                      m, k, n, batches](const std::vector<float>& g) {
      for (std::int64_t t = 0; t < batches; ++t) {
        const float* gt = g.data() + t * m * n;
        if (an) {
          matmul_grad_a(gt, bd->data() + t * k * n,
                        an->grad_buf().data() + t * m * k, m, k, n);
        }
        if (bn) {
          matmul_grad_b(ad->data() + t * m * k, gt,
                        bn->grad_buf().data() + t * k * n, m, k, n);
        }
      }
    };
  }
  return out;
}

Tensor permute(const Tensor& x, const std::vector<int>& axes) {
  require_defined(x, "permute");
  require(static_cast<int>(axes.size()) == x.rank(),
          "permute: axes size must equal rank");
  std::vector<bool> used(axes.size(), false);
  for (int a : axes) {
    require(a >= 0 && a < x.rank() && !used[static_cast<std::size_t>(a)],
            "permute: invalid axes");
    used[static_cast<std::size_t>(a)] = true;
  }

  Shape os(axes.size());
  for (std::size_t i = 0; i < axes.size(); ++i) os[i] = x.dim(axes[i]);
  Tensor out = make_out(os);

  const auto xst = row_major_strides(x.shape_);
  // stride in x for each output axis
  std::vector<std::int64_t> ost(axes.size());
  for (std::size_t i = 0; i < axes.size(); ++i) {
    ost[i] = xst[static_cast<std::size_t>(axes[i])];
  }
  const std::int64_t total = out.numel();
  const int r = out.rank();
  const float* xd = x.data_->data();
  float* od = out.data_->data();
  std::vector<std::int64_t> idx(static_cast<std::size_t>(r), 0);
  std::int64_t xoff = 0;
  for (std::int64_t o = 0; o < total; ++o) {
    od[o] = xd[xoff];
    for (int i = r - 1; i >= 0; --i) {
      auto ui = static_cast<std::size_t>(i);
      if (++idx[ui] < os[ui]) {
        xoff += ost[ui];
        break;
      }
      xoff -= ost[ui] * (os[ui] - 1);
      idx[ui] = 0;
    }
  }

  if (auto node = maybe_node(out, {&x})) {
    node->backprop = [xn = x.node_, os, ost, r,
                      total](const std::vector<float>& g) {
      float* gx = xn->grad_buf().data();
      std::vector<std::int64_t> idx2(static_cast<std::size_t>(r), 0);
      std::int64_t xo = 0;
      for (std::int64_t o = 0; o < total; ++o) {
        gx[xo] += g[o];
        for (int i = r - 1; i >= 0; --i) {
          auto ui = static_cast<std::size_t>(i);
          if (++idx2[ui] < os[ui]) {
            xo += ost[ui];
            break;
          }
          xo -= ost[ui] * (os[ui] - 1);
          idx2[ui] = 0;
        }
      }
    };
  }
  return out;
}

Tensor transpose_last2(const Tensor& x) {
  require(x.rank() >= 2, "transpose_last2: rank must be >= 2");
  std::vector<int> axes(static_cast<std::size_t>(x.rank()));
  for (int i = 0; i < x.rank(); ++i) axes[static_cast<std::size_t>(i)] = i;
  std::swap(axes[axes.size() - 1], axes[axes.size() - 2]);
  return permute(x, axes);
}

Tensor reshape(const Tensor& x, Shape s) {
  require_defined(x, "reshape");
  require(shape_numel(s) == x.numel(),
          "reshape: " + shape_str(x.shape_) + " -> " + shape_str(s) +
              " changes element count");
  Tensor out;
  out.shape_ = std::move(s);
  out.data_ = x.data_;  // view
  if (g_grad_enabled && x.tracked()) {
    out.node_ = fresh_node(out.numel());
    out.node_->parents = {x.node_};
    out.node_->backprop = [xn = x.node_](const std::vector<float>& g) {
      auto& gx = xn->grad_buf();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    };
  }
  return out;
}

namespace {

enum class BinOp { Add, Sub, Mul, Div };

Tensor binary(const Tensor& a, const Tensor& b, BinOp op) {
  require_defined(a, "binary op");
  require_defined(b, "binary op");
  require(a.shape_ == b.shape_, "elementwise op: shapes differ, " +
                                    shape_str(a.shape_) + " vs " +
                                    shape_str(b.shape_));
  Tensor out = make_out(a.shape_);
  const float* ad = a.data_->data();
  const float* bd = b.data_->data();
  float* od = out.data_->data();
  const std::int64_t n = out.numel();
  switch (op) {
    case BinOp::Add:
      for (std::int64_t i = 0; i < n; ++i) od[i] = ad[i] + bd[i];
      break;
    case BinOp::Sub:
      for (std::int64_t i = 0; i < n; ++i) od[i] = ad[i] - bd[i];
      break;
    case BinOp::Mul:
      for (std::int64_t i = 0; i < n; ++i) od[i] = ad[i] * bd[i];
      break;
    case BinOp::Div:
      for (std::int64_t i = 0; i < n; ++i) od[i] = ad[i] / bd[i];
      break;
  }

  if (auto node = maybe_node(out, {&a, &b})) {
    node->backprop = [an = a.node_, bn = b.node_, ad2 = a.data_, bd2 = b.data_,
                      od2 = out.data_, op](const std::vector<float>& g) {
      const std::size_t n2 = g.size();
      const float* av = ad2->data();
      const float* bv = bd2->data();
      const float* ov = od2->data();
      if (an) {
        auto& ga = an->grad_buf();
        switch (op) {
          case BinOp::Add:
          case BinOp::Sub:
            for (std::size_t i = 0; i < n2; ++i) ga[i] += g[i];
            break;
          case BinOp::Mul:
            for (std::size_t i = 0; i < n2; ++i) ga[i] += g[i] * bv[i];
            break;
          case BinOp::Div:
            for (std::size_t i = 0; i < n2; ++i) ga[i] += g[i] / bv[i];
            break;
        }
      }
      if (bn) {
        auto& gb = bn->grad_buf();
        switch (op) {
          case BinOp::Add:
            for (std::size_t i = 0; i < n2; ++i) gb[i] += g[i];
            break;
          case BinOp::Sub:
            for (std::size_t i = 0; i < n2; ++i) gb[i] -= g[i];
            break;
          case BinOp::Mul:
            for (std::size_t i = 0; i < n2; ++i) gb[i] += g[i] * av[i];
            break;
          case BinOp::Div:
            for (std::size_t i = 0; i < n2; ++i) gb[i] -= g[i] * ov[i] / bv[i];
            break;
        }
      }
    };
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Mul); }
Tensor div(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Div); }

Tensor add_suffix(const Tensor& x, const Tensor& b) {
  require_defined(x, "add_suffix");
  require_defined(b, "add_suffix");
  require(b.rank() <= x.rank(), "add_suffix: addend rank exceeds tensor rank");
  for (int i = 0; i < b.rank(); ++i) {
    require(b.dim(b.rank() - 1 - i) == x.dim(x.rank() - 1 - i),
            "add_suffix: " + shape_str(b.shape_) + " is not a suffix of " +
                shape_str(x.shape_));
  }
  const std::int64_t inner = b.numel();
  const std::int64_t rows = x.numel() / inner;
  Tensor out = make_out(x.shape_);
  const float* xd = x.data_->data();
  const float* bd = b.data_->data();
  float* od = out.data_->data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* xr = xd + r * inner;
    float* orow = od + r * inner;
    for (std::int64_t i = 0; i < inner; ++i) orow[i] = xr[i] + bd[i];
  }

  if (auto node = maybe_node(out, {&x, &b})) {
    node->backprop = [xn = x.node_, bn = b.node_, rows,
                      inner](const std::vector<float>& g) {
      if (xn) {
        auto& gx = xn->grad_buf();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (bn) {
        auto& gb = bn->grad_buf();
        for (std::int64_t r = 0; r < rows; ++r) {
          const float* gr = g.data() + r * inner;
          for (std::int64_t i = 0; i < inner; ++i) {
            gb[static_cast<std::size_t>(i)] += gr[i];
          }
        }
      }
    };
  }
  return out;
}

namespace {

template <typename Fwd, typename Bwd>
Tensor unary(const Tensor& x, Fwd fwd, Bwd mk_grad, const char* who) {
  require_defined(x, who);
  Tensor out = make_out(x.shape_);
  const float* xd = x.data_->data();
  float* od = out.data_->data();
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) od[i] = fwd(xd[i]);

  if (auto node = maybe_node(out, {&x})) {
    node->backprop = [xn = x.node_, xd2 = x.data_, od2 = out.data_,
                      mk_grad](const std::vector<float>& g) {
      auto& gx = xn->grad_buf();
      const float* xv = xd2->data();
      const float* ov = od2->data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        gx[i] += g[i] * mk_grad(xv[i], ov[i]);
      }
    };
  }
  return out;
}

}  // namespace

Tensor scale(const Tensor& x, float c) {
  return unary(
      x, [c](float v) { return v * c; },
      [c](float, float) { return c; }, "scale");
}

Tensor add_scalar(const Tensor& x, float c) {
  return unary(
      x, [c](float v) { return v + c; }, [](float, float) { return 1.0f; },
      "add_scalar");
}

Tensor neg(const Tensor& x) { return scale(x, -1.0f); }

Tensor exp(const Tensor& x) {
  return unary(
      x, [](float v) { return std::exp(v); },
      [](float, float o) { return o; }, "exp");
}

Tensor log(const Tensor& x) {
  return unary(
      x, [](float v) { return std::log(v); },
      [](float v, float) { return 1.0f / v; }, "log");
}

Tensor square(const Tensor& x) {
  return unary(
      x, [](float v) { return v * v; },
      [](float v, float) { return 2.0f * v; }, "square");
}

Tensor gelu(const Tensor& x) {
  constexpr float kInvSqrt2 = 0.70710678118654752f;
  constexpr float kInvSqrt2Pi = 0.39894228040143268f;
  return unary(
      x,
      [](float v) { return 0.5f * v * (1.0f + std::erf(v * kInvSqrt2)); },
      [](float v, float) {
        float cdf = 0.5f * (1.0f + std::erf(v * kInvSqrt2));
        float pdf = kInvSqrt2Pi * std::exp(-0.5f * v * v);
        return cdf + v * pdf;
      },
      "gelu");
}

Tensor softmax_lastdim(const Tensor& x, const Tensor* mask) {
  require_defined(x, "softmax");
  require(x.rank() >= 1, "softmax: rank must be >= 1");
  const std::int64_t cols = x.dim(x.rank() - 1);
  const std::int64_t rows = x.numel() / cols;
  std::int64_t mask_rows = 0;
  const float* md = nullptr;
  if (mask) {
    require_defined(*mask, "softmax mask");
    require(mask->rank() <= x.rank() &&
                mask->dim(mask->rank() - 1) == cols &&
                x.numel() % mask->numel() == 0,
            "softmax: mask " + shape_str(mask->shape_) +
                " is not a suffix of " + shape_str(x.shape_));
    for (int i = 0; i < mask->rank(); ++i) {
      require(mask->dim(mask->rank() - 1 - i) == x.dim(x.rank() - 1 - i),
              "softmax: mask " + shape_str(mask->shape_) +
                  " is not a suffix of " + shape_str(x.shape_));
    }
    mask_rows = mask->numel() / cols;
    md = mask->data_->data();
  }

  Tensor out = make_out(x.shape_);
  const float* xd = x.data_->data();
  float* od = out.data_->data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* xr = xd + r * cols;
    float* orow = od + r * cols;
    const float* mr = md ? md + (r % mask_rows) * cols : nullptr;
    float mx = -std::numeric_limits<float>::infinity();
    for (std::int64_t j = 0; j < cols; ++j) {
      if (!mr || mr[j] > 0.5f) mx = std::max(mx, xr[j]);
    }
    require(std::isfinite(mx) || !mr,
            "softmax: row has no unmasked entries");
    float denom = 0.0f;
    for (std::int64_t j = 0; j < cols; ++j) {
      if (!mr || mr[j] > 0.5f) {
        orow[j] = std::exp(xr[j] - mx);
        denom += orow[j];
      } else {
        orow[j] = 0.0f;
      }
    }
    for (std::int64_t j = 0; j < cols; ++j) {
      if (!mr || mr[j] > 0.5f) orow[j] /= denom;
    }
  }

  if (auto node = maybe_node(out, {&x})) {
    node->backprop = [xn = x.node_, od2 = out.data_, rows,
                      cols](const std::vector<float>& g) {
      auto& gx = xn->grad_buf();
      const float* p = od2->data();
      for (std::int64_t r = 0; r < rows; ++r) {
        const float* pr = p + r * cols;
        const float* gr = g.data() + r * cols;
        float dot = 0.0f;
        for (std::int64_t j = 0; j < cols; ++j) dot += gr[j] * pr[j];
        float* gxr = gx.data() + r * cols;
        for (std::int64_t j = 0; j < cols; ++j) {
          gxr[j] += pr[j] * (gr[j] - dot);
        }
      }
    };
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  float eps) {
  require_defined(x, "layer_norm");
  require_defined(gamma, "layer_norm");
  require_defined(beta, "layer_norm");
  const std::int64_t cols = x.dim(x.rank() - 1);
  require(gamma.rank() == 1 && gamma.dim(0) == cols && beta.rank() == 1 &&
              beta.dim(0) == cols,
          "layer_norm: affine params must be shape [" + std::to_string(cols) +
              "]");
  const std::int64_t rows = x.numel() / cols;

  Tensor out = make_out(x.shape_);
  auto mean = std::make_shared<std::vector<float>>(rows);
  auto rstd = std::make_shared<std::vector<float>>(rows);
  const float* xd = x.data_->data();
  const float* gd = gamma.data_->data();
  const float* bd = beta.data_->data();
  float* od = out.data_->data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* xr = xd + r * cols;
    double s = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) s += xr[j];
    const auto mu = static_cast<float>(s / static_cast<double>(cols));
    double v = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) {
      const double d = xr[j] - mu;
      v += d * d;
    }
    const auto rs = static_cast<float>(
        1.0 / std::sqrt(v / static_cast<double>(cols) + eps));
    (*mean)[static_cast<std::size_t>(r)] = mu;
    (*rstd)[static_cast<std::size_t>(r)] = rs;
    float* orow = od + r * cols;
    for (std::int64_t j = 0; j < cols; ++j) {
      orow[j] = (xr[j] - mu) * rs * gd[j] + bd[j];
    }
  }

  if (auto node = maybe_node(out, {&x, &gamma, &beta})) {
    node->backprop = [xn = x.node_, gn = gamma.node_, bn = beta.node_,
                      xd2 = x.data_, gd2 = gamma.data_, mean, rstd, rows,
                      cols](const std::vector<float>& g) {
      const float* xv = xd2->data();
      const float* gamma_v = gd2->data();
      for (std::int64_t r = 0; r < rows; ++r) {
        const float mu = (*mean)[static_cast<std::size_t>(r)];
        const float rs = (*rstd)[static_cast<std::size_t>(r)];
        const float* xr = xv + r * cols;
        const float* gr = g.data() + r * cols;
        if (xn) {
          float m1 = 0.0f, m2 = 0.0f;
          for (std::int64_t j = 0; j < cols; ++j) {
            const float xhat = (xr[j] - mu) * rs;
            const float h = gr[j] * gamma_v[j];
            m1 += h;
            m2 += h * xhat;
          }
          m1 /= static_cast<float>(cols);
          m2 /= static_cast<float>(cols);
          float* gxr = xn->grad_buf().data() + r * cols;
          for (std::int64_t j = 0; j < cols; ++j) {
            const float xhat = (xr[j] - mu) * rs;
            const float h = gr[j] * gamma_v[j];
            gxr[j] += (h - m1 - xhat * m2) * rs;
          }
        }
        if (gn) {
          auto& gg = gn->grad_buf();
          for (std::int64_t j = 0; j < cols; ++j) {
            gg[static_cast<std::size_t>(j)] += gr[j] * (xr[j] - mu) * rs;
          }
        }
        if (bn) {
          auto& gb = bn->grad_buf();
          for (std::int64_t j = 0; j < cols; ++j) {
            gb[static_cast<std::size_t>(j)] += gr[j];
          }
        }
      }
    };
  }
  return out;
}

Tensor slice_lastdim(const Tensor& x, int start, int len) {
  require_defined(x, "slice_lastdim");
  const std::int64_t cols = x.dim(x.rank() - 1);
  require(start >= 0 && len > 0 && start + len <= cols,
          "slice_lastdim: range [" + std::to_string(start) + "," +
              std::to_string(start + len) + ") out of " + shape_str(x.shape_));
  const std::int64_t rows = x.numel() / cols;
  Shape os = x.shape_;
  os.back() = len;
  Tensor out = make_out(os);
  const float* xd = x.data_->data();
  float* od = out.data_->data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* xr = xd + r * cols + start;
    float* orow = od + r * len;
    for (std::int64_t j = 0; j < len; ++j) orow[j] = xr[j];
  }

  if (auto node = maybe_node(out, {&x})) {
    node->backprop = [xn = x.node_, rows, cols, start,
                      len](const std::vector<float>& g) {
      auto& gx = xn->grad_buf();
      for (std::int64_t r = 0; r < rows; ++r) {
        float* gxr = gx.data() + r * cols + start;
        const float* gr = g.data() + r * len;
        for (std::int64_t j = 0; j < len; ++j) gxr[j] += gr[j];
      }
    };
  }
  return out;
}

Tensor concat_lastdim(const std::vector<Tensor>& xs) {
  require(!xs.empty(), "concat_lastdim: empty input list");
  const Tensor& first = xs.front();
  require_defined(first, "concat_lastdim");
  std::int64_t total_cols = 0;
  for (const Tensor& t : xs) {
    require_defined(t, "concat_lastdim");
    require(t.rank() == first.rank(), "concat_lastdim: rank mismatch");
    for (int i = 0; i + 1 < t.rank(); ++i) {
      require(t.dim(i) == first.dim(i),
              "concat_lastdim: leading dims differ, " + shape_str(t.shape_) +
                  " vs " + shape_str(first.shape_));
    }
    total_cols += t.dim(t.rank() - 1);
  }
  const std::int64_t rows = first.numel() / first.dim(first.rank() - 1);
  Shape os = first.shape_;
  os.back() = static_cast<int>(total_cols);
  Tensor out = make_out(os);
  float* od = out.data_->data();
  std::int64_t off = 0;
  for (const Tensor& t : xs) {
    const std::int64_t c = t.dim(t.rank() - 1);
    const float* td = t.data_->data();
    for (std::int64_t r = 0; r < rows; ++r) {
      float* orow = od + r * total_cols + off;
      const float* tr = td + r * c;
      for (std::int64_t j = 0; j < c; ++j) orow[j] = tr[j];
    }
    off += c;
  }

  bool any = false;
  for (const Tensor& t : xs) any = any || t.tracked();
  if (g_grad_enabled && any) {
    auto node = fresh_node(out.numel());
    struct Piece {
      std::shared_ptr<Node> n;
      std::int64_t cols;
      std::int64_t off;
    };
    std::vector<Piece> pieces;
    std::int64_t o2 = 0;
    for (const Tensor& t : xs) {
      const std::int64_t c = t.dim(t.rank() - 1);
      if (t.tracked()) {
        node->parents.push_back(t.node_);
        pieces.push_back({t.node_, c, o2});
      }
      o2 += c;
    }
    node->backprop = [pieces, rows, total_cols](const std::vector<float>& g) {
      for (const auto& p : pieces) {
        auto& gx = p.n->grad_buf();
        for (std::int64_t r = 0; r < rows; ++r) {
          const float* gr = g.data() + r * total_cols + p.off;
          float* gxr = gx.data() + r * p.cols;
          for (std::int64_t j = 0; j < p.cols; ++j) gxr[j] += gr[j];
        }
      }
    };
    out.node_ = node;
  }
  return out;
}

Tensor expand_at(const Tensor& x, int axis, int times) {
  require_defined(x, "expand_at");
  require(axis >= 0 && axis <= x.rank() && times >= 1,
          "expand_at: bad axis or repeat count");
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis; i < x.rank(); ++i) inner *= x.dim(i);
  Shape os = x.shape_;
  os.insert(os.begin() + axis, times);
  Tensor out = make_out(os);
  const float* xd = x.data_->data();
  float* od = out.data_->data();
  for (std::int64_t o = 0; o < outer; ++o) {
    const float* xr = xd + o * inner;
    for (int t = 0; t < times; ++t) {
      float* orow = od + (o * times + t) * inner;
      for (std::int64_t i = 0; i < inner; ++i) orow[i] = xr[i];
    }
  }

  if (auto node = maybe_node(out, {&x})) {
    node->backprop = [xn = x.node_, outer, inner,
                      times](const std::vector<float>& g) {
      auto& gx = xn->grad_buf();
      for (std::int64_t o = 0; o < outer; ++o) {
        float* gxr = gx.data() + o * inner;
        for (int t = 0; t < times; ++t) {
          const float* gr = g.data() + (o * times + t) * inner;
          for (std::int64_t i = 0; i < inner; ++i) gxr[i] += gr[i];
        }
      }
    };
  }
  return out;
}

Tensor sum_all(const Tensor& x) {
  require_defined(x, "sum_all");
  double acc = 0.0;
  for (float v : *x.data_) acc += v;
  Tensor out = make_out({1});
  (*out.data_)[0] = static_cast<float>(acc);
  if (auto node = maybe_node(out, {&x})) {
    node->backprop = [xn = x.node_,
                      n = x.numel()](const std::vector<float>& g) {
      auto& gx = xn->grad_buf();
      for (std::int64_t i = 0; i < n; ++i) gx[static_cast<std::size_t>(i)] += g[0];
    };
  }
  return out;
}

}  // namespace evotf::ad
