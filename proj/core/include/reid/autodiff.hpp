#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "reid/tensor.hpp"

namespace reid {

// Reverse-mode autodiff over Tensor. Every op's backward closure is written
// in terms of other Var ops, so gradients returned with create_graph=true are
// themselves differentiable (needed to train through gradient-derived
// attention maps).

struct VarImpl;

class Var {
 public:
  Var() = default;

  static Var constant(Tensor value);
  static Var leaf(Tensor value);  // requires gradients (parameters, probe inputs)

  bool defined() const { return impl_ != nullptr; }
  const Tensor& value() const;
  bool requires_grad() const;
  const Shape& shape() const { return value().shape(); }
  int64_t numel() const { return value().numel(); }
  Scalar item() const { return value().item(); }

  // Same value, cut from the graph.
  Var detach() const { return constant(value()); }

  // Replaces the stored value (optimizer updates on leaves). Any graph built
  // on the old value must already be dropped by the caller.
  void set_value(Tensor value) const;

  VarImpl* impl() const { return impl_.get(); }

 private:
  explicit Var(std::shared_ptr<VarImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<VarImpl> impl_;
  friend Var make_op(const char* name, Tensor value, std::vector<Var> parents,
                     std::function<std::vector<Var>(const Var&)> backward);
};

struct VarImpl {
  Tensor value;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<Var> parents;
  // Maps the upstream gradient to per-parent gradient contributions
  // (undefined Var for parents that do not require grad).
  std::function<std::vector<Var>(const Var&)> backward;
};

// Gradients of `output` w.r.t. each of `inputs`. `output` must be scalar
// unless `grad_output` (same shape as output) is given. With create_graph the
// results stay connected so they can be differentiated again. Inputs not
// reachable from `output` raise GraphError, or produce zeros when
// `allow_unreached` is set (optimizer steps over partial objectives).
std::vector<Var> grad(const Var& output, const std::vector<Var>& inputs, bool create_graph,
                      Var grad_output = Var(), bool allow_unreached = false);

// --- primitive and composite ops ------------------------------------------

Var neg(const Var& a);
Var add(const Var& a, const Var& b);  // numpy-style right-aligned broadcasting
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var matmul(const Var& a, const Var& b);  // 2-D only
Var transpose(const Var& a);             // 2-D
Var reshape(const Var& a, Shape shape);
Var relu(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
Var sigmoid(const Var& a);
Var pow2(const Var& a);

// Reductions / shape movement. sum_to/broadcast_to are adjoint to each other.
Var sum_to(const Var& a, Shape shape);
Var broadcast_to(const Var& a, Shape shape);
Var sum(const Var& a);   // -> [1]
Var mean(const Var& a);  // -> [1]

// Row-wise max/min over the last axis of a 2-D tensor -> [rows]. Argmax
// positions are captured at forward time and treated as constants.
Var rowwise_max(const Var& a);
Var rowwise_min(const Var& a);

using IndexVec = std::shared_ptr<const std::vector<int64_t>>;

// out.flat[i] = a.flat[idx[i]], with idx -1 producing 0 (padding).
Var gather(const Var& a, IndexVec idx, Shape out_shape);
// out.flat[idx[i]] += a.flat[i]; -1 entries are skipped. Adjoint of gather.
Var scatter(const Var& a, IndexVec idx, Shape out_shape);

// Row selection on the leading axis (graph-preserving sub-batch).
Var take_rows(const Var& a, const std::vector<int>& rows);

Var softmax(const Var& a);      // over last axis of 2-D [N,C]
Var log_softmax(const Var& a);  // over last axis of 2-D [N,C]

// -sum_n log softmax(logits)_n[labels_n]; labels validated against C.
Var cross_entropy_sum(const Var& logits, const std::vector<int>& labels);

// sqrt(sum(v^2) + eps) per row of a 2-D tensor -> [rows]. The epsilon keeps
// the gradient finite at v == 0 while perturbing the value by < 1e-9.
Var rowwise_l2_norm(const Var& a, Scalar eps = 1e-18);

// Scalar convenience.
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator+(const Var& a, Scalar s);
Var operator-(const Var& a, Scalar s);
Var operator*(const Var& a, Scalar s);
Var operator*(Scalar s, const Var& a);
Var operator/(const Var& a, Scalar s);

Var make_op(const char* name, Tensor value, std::vector<Var> parents,
            std::function<std::vector<Var>(const Var&)> backward);

}  // namespace reid
