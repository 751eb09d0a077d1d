#include "reid/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace reid {

using MatRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// --- Var ---------------------------------------------------------------

Var Var::constant(Tensor value) {
  auto impl = std::make_shared<VarImpl>();
  impl->value = std::move(value);
  impl->requires_grad = false;
  impl->op = "constant";
  return Var(std::move(impl));
}

Var Var::leaf(Tensor value) {
  auto impl = std::make_shared<VarImpl>();
  impl->value = std::move(value);
  impl->requires_grad = true;
  impl->op = "leaf";
  return Var(std::move(impl));
}

const Tensor& Var::value() const {
  if (!impl_) throw GraphError("use of undefined Var");
  return impl_->value;
}

bool Var::requires_grad() const { return impl_ && impl_->requires_grad; }

void Var::set_value(Tensor value) const {
  if (!impl_) throw GraphError("set_value on undefined Var");
  impl_->value = std::move(value);
}

Var make_op(const char* name, Tensor value, std::vector<Var> parents,
            std::function<std::vector<Var>(const Var&)> backward) {
  auto impl = std::make_shared<VarImpl>();
  impl->value = std::move(value);
  impl->op = name;
  bool rg = false;
  for (const auto& p : parents)
    if (p.defined() && p.requires_grad()) rg = true;
  impl->requires_grad = rg;
  if (rg) {
    // Constants do not keep their history alive.
    impl->parents = std::move(parents);
    impl->backward = std::move(backward);
  }
  return Var(std::move(impl));
}

// --- grad ----------------------------------------------------------------

std::vector<Var> grad(const Var& output, const std::vector<Var>& inputs, bool create_graph,
                      Var grad_output, bool allow_unreached) {
  if (!output.defined()) throw GraphError("grad: undefined output");
  if (!grad_output.defined()) {
    if (output.numel() != 1)
      throw GraphError("grad: non-scalar output requires an explicit grad_output");
    grad_output = Var::constant(Tensor::full(output.shape(), 1.0));
  } else if (grad_output.shape() != output.shape()) {
    throw ShapeError("grad: grad_output shape " + shape_str(grad_output.shape()) +
                     " does not match output " + shape_str(output.shape()));
  }

  // Post-order DFS over grad-requiring edges gives a topological order.
  std::vector<VarImpl*> order;
  std::unordered_set<VarImpl*> visited;
  if (output.requires_grad()) {
    struct Frame {
      VarImpl* node;
      size_t next;
    };
    std::vector<Frame> stack{{output.impl(), 0}};
    visited.insert(output.impl());
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next < f.node->parents.size()) {
        const Var& pv = f.node->parents[f.next++];
        if (!pv.defined() || !pv.requires_grad()) continue;
        VarImpl* p = pv.impl();
        if (!visited.count(p)) {
          visited.insert(p);
          stack.push_back({p, 0});
        }
      } else {
        order.push_back(f.node);
        stack.pop_back();
      }
    }
  }

  std::unordered_map<VarImpl*, Var> grads;
  if (output.requires_grad()) grads[output.impl()] = grad_output;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    VarImpl* node = *it;
    auto git = grads.find(node);
    if (git == grads.end() || !node->backward) continue;
    std::vector<Var> contribs = node->backward(git->second);
    if (contribs.size() != node->parents.size())
      throw GraphError(std::string("backward arity mismatch in op ") + node->op);
    for (size_t i = 0; i < contribs.size(); ++i) {
      const Var& p = node->parents[i];
      if (!p.defined() || !p.requires_grad() || !contribs[i].defined()) continue;
      Var c = create_graph ? contribs[i] : contribs[i].detach();
      auto pit = grads.find(p.impl());
      if (pit == grads.end())
        grads.emplace(p.impl(), c);
      else
        pit->second = add(pit->second, c);
    }
  }

  std::vector<Var> result;
  result.reserve(inputs.size());
  for (const auto& in : inputs) {
    if (!in.defined()) throw GraphError("grad: undefined input");
    auto it = grads.find(in.impl());
    if (it == grads.end()) {
      if (!allow_unreached)
        throw GraphError("grad: input is not connected to the output in the graph");
      result.push_back(Var::constant(Tensor::zeros(in.shape())));
      continue;
    }
    result.push_back(it->second);
  }
  return result;
}

// --- broadcasting helpers --------------------------------------------------

static Shape broadcast_shape(const Shape& a, const Shape& b) {
  int nd = std::max(a.size(), b.size());
  Shape out(nd);
  for (int i = 0; i < nd; ++i) {
    int da = i < nd - static_cast<int>(a.size()) ? 1 : a[i - (nd - a.size())];
    int db = i < nd - static_cast<int>(b.size()) ? 1 : b[i - (nd - b.size())];
    if (da != db && da != 1 && db != 1)
      throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    out[i] = std::max(da, db);
  }
  return out;
}

// Right-aligned strides into `shape` for an operand of shape `s` (0 where the
// operand is broadcast).
static std::vector<int64_t> broadcast_strides(const Shape& shape, const Shape& s) {
  int nd = shape.size();
  std::vector<int64_t> strides(nd, 0);
  int off = nd - static_cast<int>(s.size());
  int64_t acc = 1;
  for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
    if (s[i] != 1) strides[off + i] = acc;
    acc *= s[i];
  }
  return strides;
}

template <typename F>
static Tensor ew_binary(const Tensor& a, const Tensor& b, F f) {
  if (a.shape() == b.shape()) {
    Tensor out(a.shape());
    const Scalar* pa = a.data();
    const Scalar* pb = b.data();
    Scalar* po = out.data();
    for (int64_t i = 0, n = a.numel(); i < n; ++i) po[i] = f(pa[i], pb[i]);
    return out;
  }
  if (b.numel() == 1) {
    Tensor out(a.shape());
    const Scalar* pa = a.data();
    Scalar vb = b.data()[0];
    Scalar* po = out.data();
    for (int64_t i = 0, n = a.numel(); i < n; ++i) po[i] = f(pa[i], vb);
    return out;
  }
  if (a.numel() == 1) {
    Tensor out(b.shape());
    Scalar va = a.data()[0];
    const Scalar* pb = b.data();
    Scalar* po = out.data();
    for (int64_t i = 0, n = b.numel(); i < n; ++i) po[i] = f(va, pb[i]);
    return out;
  }
  Shape os = broadcast_shape(a.shape(), b.shape());
  Tensor out(os);
  int nd = os.size();
  auto sa = broadcast_strides(os, a.shape());
  auto sb = broadcast_strides(os, b.shape());
  std::vector<int> idx(nd, 0);
  const Scalar* pa = a.data();
  const Scalar* pb = b.data();
  Scalar* po = out.data();
  int64_t oa = 0, ob = 0;
  for (int64_t o = 0, n = out.numel(); o < n; ++o) {
    po[o] = f(pa[oa], pb[ob]);
    for (int d = nd - 1; d >= 0; --d) {
      idx[d]++;
      oa += sa[d];
      ob += sb[d];
      if (idx[d] < os[d]) break;
      oa -= static_cast<int64_t>(os[d]) * sa[d];
      ob -= static_cast<int64_t>(os[d]) * sb[d];
      idx[d] = 0;
    }
  }
  return out;
}

template <typename F>
static Tensor ew_unary(const Tensor& a, F f) {
  Tensor out(a.shape());
  const Scalar* pa = a.data();
  Scalar* po = out.data();
  for (int64_t i = 0, n = a.numel(); i < n; ++i) po[i] = f(pa[i]);
  return out;
}

// Checks that `target` is a right-aligned reduction of `src`.
static void check_reducible(const Shape& src, const Shape& target) {
  if (target.size() > src.size())
    throw ShapeError("sum_to target " + shape_str(target) + " has more dims than " + shape_str(src));
  int off = src.size() - target.size();
  for (size_t i = 0; i < target.size(); ++i)
    if (target[i] != 1 && target[i] != src[off + i])
      throw ShapeError("sum_to target " + shape_str(target) + " incompatible with " + shape_str(src));
}

static Tensor sum_to_value(const Tensor& a, const Shape& target) {
  check_reducible(a.shape(), target);
  Tensor out(target);
  if (out.numel() == 1) {
    Scalar acc = 0;
    const Scalar* pa = a.data();
    for (int64_t i = 0, n = a.numel(); i < n; ++i) acc += pa[i];
    out.data()[0] = acc;
    return out;
  }
  const Shape& as = a.shape();
  int nd = as.size();
  auto st = broadcast_strides(as, target);  // strides of target aligned into a
  std::vector<int> idx(nd, 0);
  const Scalar* pa = a.data();
  Scalar* po = out.data();
  int64_t ot = 0;
  for (int64_t o = 0, n = a.numel(); o < n; ++o) {
    po[ot] += pa[o];
    for (int d = nd - 1; d >= 0; --d) {
      idx[d]++;
      ot += st[d];
      if (idx[d] < as[d]) break;
      ot -= static_cast<int64_t>(as[d]) * st[d];
      idx[d] = 0;
    }
  }
  return out;
}

static Tensor broadcast_to_value(const Tensor& a, const Shape& target) {
  check_reducible(target, a.shape());
  Tensor out(target);
  int nd = target.size();
  auto sa = broadcast_strides(target, a.shape());
  std::vector<int> idx(nd, 0);
  const Scalar* pa = a.data();
  Scalar* po = out.data();
  int64_t oa = 0;
  for (int64_t o = 0, n = out.numel(); o < n; ++o) {
    po[o] = pa[oa];
    for (int d = nd - 1; d >= 0; --d) {
      idx[d]++;
      oa += sa[d];
      if (idx[d] < target[d]) break;
      oa -= static_cast<int64_t>(target[d]) * sa[d];
      idx[d] = 0;
    }
  }
  return out;
}

// --- primitive ops ----------------------------------------------------------

Var neg(const Var& a) {
  return make_op("neg", ew_unary(a.value(), [](Scalar x) { return -x; }), {a},
                 [](const Var& g) { return std::vector<Var>{neg(g)}; });
}

Var add(const Var& a, const Var& b) {
  Shape sa = a.shape(), sb = b.shape();
  return make_op("add", ew_binary(a.value(), b.value(), [](Scalar x, Scalar y) { return x + y; }),
                 {a, b}, [sa, sb](const Var& g) {
                   return std::vector<Var>{sum_to(g, sa), sum_to(g, sb)};
                 });
}

Var sub(const Var& a, const Var& b) {
  Shape sa = a.shape(), sb = b.shape();
  return make_op("sub", ew_binary(a.value(), b.value(), [](Scalar x, Scalar y) { return x - y; }),
                 {a, b}, [sa, sb](const Var& g) {
                   return std::vector<Var>{sum_to(g, sa), sum_to(neg(g), sb)};
                 });
}

Var mul(const Var& a, const Var& b) {
  Shape sa = a.shape(), sb = b.shape();
  return make_op("mul", ew_binary(a.value(), b.value(), [](Scalar x, Scalar y) { return x * y; }),
                 {a, b}, [a, b, sa, sb](const Var& g) {
                   std::vector<Var> out(2);
                   if (a.requires_grad()) out[0] = sum_to(mul(g, b), sa);
                   if (b.requires_grad()) out[1] = sum_to(mul(g, a), sb);
                   return out;
                 });
}

Var div(const Var& a, const Var& b) {
  Shape sa = a.shape(), sb = b.shape();
  return make_op("div", ew_binary(a.value(), b.value(), [](Scalar x, Scalar y) { return x / y; }),
                 {a, b}, [a, b, sa, sb](const Var& g) {
                   std::vector<Var> out(2);
                   if (a.requires_grad()) out[0] = sum_to(div(g, b), sa);
                   if (b.requires_grad()) out[1] = sum_to(neg(div(mul(g, a), mul(b, b))), sb);
                   return out;
                 });
}

Var matmul(const Var& a, const Var& b) {
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (ta.ndim() != 2 || tb.ndim() != 2 || ta.dim(1) != tb.dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_str(ta.shape()) + " x " +
                     shape_str(tb.shape()));
  int m = ta.dim(0), k = ta.dim(1), n = tb.dim(1);
  Tensor out({m, n});
  Eigen::Map<const MatRM> A(ta.data(), m, k);
  Eigen::Map<const MatRM> B(tb.data(), k, n);
  Eigen::Map<MatRM> O(out.data(), m, n);
  O.noalias() = A * B;
  return make_op("matmul", std::move(out), {a, b}, [a, b](const Var& g) {
    std::vector<Var> out(2);
    if (a.requires_grad()) out[0] = matmul(g, transpose(b));
    if (b.requires_grad()) out[1] = matmul(transpose(a), g);
    return out;
  });
}

Var transpose(const Var& a) {
  const Tensor& ta = a.value();
  if (ta.ndim() != 2) throw ShapeError("transpose: expected 2-D, got " + shape_str(ta.shape()));
  int m = ta.dim(0), n = ta.dim(1);
  Tensor out({n, m});
  Eigen::Map<const MatRM> A(ta.data(), m, n);
  Eigen::Map<MatRM> O(out.data(), n, m);
  O = A.transpose();
  return make_op("transpose", std::move(out), {a},
                 [](const Var& g) { return std::vector<Var>{transpose(g)}; });
}

Var reshape(const Var& a, Shape shape) {
  Shape sa = a.shape();
  return make_op("reshape", a.value().reshaped(std::move(shape)), {a},
                 [sa](const Var& g) { return std::vector<Var>{reshape(g, sa)}; });
}

Var relu(const Var& a) {
  const Tensor& ta = a.value();
  Tensor out(ta.shape());
  Tensor mask(ta.shape());
  const Scalar* pa = ta.data();
  Scalar* po = out.data();
  Scalar* pm = mask.data();
  for (int64_t i = 0, n = ta.numel(); i < n; ++i) {
    bool pos = pa[i] > 0;
    po[i] = pos ? pa[i] : 0.0;
    pm[i] = pos ? 1.0 : 0.0;
  }
  return make_op("relu", std::move(out), {a}, [mask](const Var& g) {
    return std::vector<Var>{mul(g, Var::constant(mask))};
  });
}

Var exp(const Var& a) {
  return make_op("exp", ew_unary(a.value(), [](Scalar x) { return std::exp(x); }), {a},
                 [a](const Var& g) { return std::vector<Var>{mul(g, exp(a))}; });
}

Var log(const Var& a) {
  return make_op("log", ew_unary(a.value(), [](Scalar x) { return std::log(x); }), {a},
                 [a](const Var& g) { return std::vector<Var>{div(g, a)}; });
}

Var sqrt(const Var& a) {
  return make_op("sqrt", ew_unary(a.value(), [](Scalar x) { return std::sqrt(x); }), {a},
                 [a](const Var& g) { return std::vector<Var>{div(g * 0.5, sqrt(a))}; });
}

Var sigmoid(const Var& a) {
  auto f = [](Scalar x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    Scalar e = std::exp(x);
    return e / (1.0 + e);
  };
  return make_op("sigmoid", ew_unary(a.value(), f), {a}, [a](const Var& g) {
    Var s = sigmoid(a);
    return std::vector<Var>{mul(g, mul(s, neg(s) + 1.0))};
  });
}

Var pow2(const Var& a) { return mul(a, a); }

Var sum_to(const Var& a, Shape shape) {
  if (a.shape() == shape) return a;
  Shape sa = a.shape();
  return make_op("sum_to", sum_to_value(a.value(), shape), {a},
                 [sa](const Var& g) { return std::vector<Var>{broadcast_to(g, sa)}; });
}

Var broadcast_to(const Var& a, Shape shape) {
  if (a.shape() == shape) return a;
  Shape sa = a.shape();
  return make_op("broadcast_to", broadcast_to_value(a.value(), shape), {a},
                 [sa](const Var& g) { return std::vector<Var>{sum_to(g, sa)}; });
}

Var sum(const Var& a) {
  Shape ones(a.shape().size(), 1);
  return reshape(sum_to(a, ones), {1});
}

Var mean(const Var& a) { return sum(a) * (1.0 / static_cast<Scalar>(a.numel())); }

Var rowwise_max(const Var& a) {
  const Tensor& ta = a.value();
  if (ta.ndim() != 2) throw ShapeError("rowwise_max: expected 2-D, got " + shape_str(ta.shape()));
  int r = ta.dim(0), c = ta.dim(1);
  Tensor out({r});
  auto idx = std::make_shared<std::vector<int64_t>>(r);
  const Scalar* pa = ta.data();
  Scalar* po = out.data();
  for (int i = 0; i < r; ++i) {
    int64_t best = static_cast<int64_t>(i) * c;
    Scalar bv = pa[best];
    for (int j = 1; j < c; ++j) {
      Scalar v = pa[static_cast<int64_t>(i) * c + j];
      if (v > bv) {
        bv = v;
        best = static_cast<int64_t>(i) * c + j;
      }
    }
    po[i] = bv;
    (*idx)[i] = best;
  }
  Shape sa = ta.shape();
  return make_op("rowwise_max", std::move(out), {a}, [idx, sa](const Var& g) {
    return std::vector<Var>{scatter(g, idx, sa)};
  });
}

Var rowwise_min(const Var& a) { return neg(rowwise_max(neg(a))); }

Var gather(const Var& a, IndexVec idx, Shape out_shape) {
  const Tensor& ta = a.value();
  if (static_cast<int64_t>(idx->size()) != shape_numel(out_shape))
    throw ShapeError("gather: index count does not match output shape");
  Tensor out(out_shape);
  const Scalar* pa = ta.data();
  Scalar* po = out.data();
  const int64_t n = ta.numel();
  for (size_t i = 0; i < idx->size(); ++i) {
    int64_t j = (*idx)[i];
    if (j >= n || j < -1) throw ShapeError("gather: index out of range");
    po[i] = j < 0 ? 0.0 : pa[j];
  }
  Shape sa = ta.shape();
  return make_op("gather", std::move(out), {a}, [idx, sa](const Var& g) {
    return std::vector<Var>{scatter(g, idx, sa)};
  });
}

Var scatter(const Var& a, IndexVec idx, Shape out_shape) {
  const Tensor& ta = a.value();
  if (static_cast<int64_t>(idx->size()) != ta.numel())
    throw ShapeError("scatter: index count does not match input shape");
  Tensor out(out_shape);
  const Scalar* pa = ta.data();
  Scalar* po = out.data();
  const int64_t n = out.numel();
  for (size_t i = 0; i < idx->size(); ++i) {
    int64_t j = (*idx)[i];
    if (j >= n || j < -1) throw ShapeError("scatter: index out of range");
    if (j >= 0) po[j] += pa[i];
  }
  Shape sa = ta.shape();
  return make_op("scatter", std::move(out), {a}, [idx, sa](const Var& g) {
    return std::vector<Var>{gather(g, idx, sa)};
  });
}

Var take_rows(const Var& a, const std::vector<int>& rows) {
  const Tensor& ta = a.value();
  if (ta.ndim() < 1) throw ShapeError("take_rows: needs at least 1-D");
  int64_t block = ta.numel() / ta.dim(0);
  auto idx = std::make_shared<std::vector<int64_t>>();
  idx->reserve(rows.size() * block);
  for (int r : rows) {
    if (r < 0 || r >= ta.dim(0)) throw ShapeError("take_rows: row index out of range");
    for (int64_t j = 0; j < block; ++j) idx->push_back(static_cast<int64_t>(r) * block + j);
  }
  Shape os = ta.shape();
  os[0] = static_cast<int>(rows.size());
  return gather(a, idx, os);
}

Var softmax(const Var& a) {
  const Tensor& ta = a.value();
  if (ta.ndim() != 2) throw ShapeError("softmax: expected 2-D, got " + shape_str(ta.shape()));
  int n = ta.dim(0);
  Var shift = reshape(rowwise_max(a), {n, 1}).detach();
  Var e = exp(sub(a, shift));
  return div(e, sum_to(e, {n, 1}));
}

Var log_softmax(const Var& a) {
  const Tensor& ta = a.value();
  if (ta.ndim() != 2) throw ShapeError("log_softmax: expected 2-D, got " + shape_str(ta.shape()));
  int n = ta.dim(0);
  Var shift = reshape(rowwise_max(a), {n, 1}).detach();
  Var sh = sub(a, shift);
  return sub(sh, log(sum_to(exp(sh), {n, 1})));
}

Var cross_entropy_sum(const Var& logits, const std::vector<int>& labels) {
  const Tensor& t = logits.value();
  if (t.ndim() != 2) throw ShapeError("cross_entropy_sum: logits must be 2-D");
  int n = t.dim(0), c = t.dim(1);
  if (static_cast<int>(labels.size()) != n)
    throw ShapeError("cross_entropy_sum: got " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " rows");
  auto idx = std::make_shared<std::vector<int64_t>>(n);
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= c)
      throw DataError("label " + std::to_string(labels[i]) + " out of range [0," +
                      std::to_string(c) + ")");
    (*idx)[i] = static_cast<int64_t>(i) * c + labels[i];
  }
  Var picked = gather(log_softmax(logits), idx, {n});
  return neg(sum(picked));
}

Var rowwise_l2_norm(const Var& a, Scalar eps) {
  const Tensor& t = a.value();
  if (t.ndim() != 2) throw ShapeError("rowwise_l2_norm: expected 2-D");
  int r = t.dim(0);
  Var s = sum_to(mul(a, a), {r, 1});
  return reshape(sqrt(s + eps), {r});
}

// --- operators --------------------------------------------------------------

Var operator+(const Var& a, const Var& b) { return add(a, b); }
Var operator-(const Var& a, const Var& b) { return sub(a, b); }
Var operator*(const Var& a, const Var& b) { return mul(a, b); }
Var operator/(const Var& a, const Var& b) { return div(a, b); }
Var operator-(const Var& a) { return neg(a); }
Var operator+(const Var& a, Scalar s) { return add(a, Var::constant(Tensor::scalar(s))); }
Var operator-(const Var& a, Scalar s) { return sub(a, Var::constant(Tensor::scalar(s))); }
Var operator*(const Var& a, Scalar s) { return mul(a, Var::constant(Tensor::scalar(s))); }
Var operator*(Scalar s, const Var& a) { return mul(a, Var::constant(Tensor::scalar(s))); }
Var operator/(const Var& a, Scalar s) { return div(a, Var::constant(Tensor::scalar(s))); }

}  // namespace reid
