#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tcav/error.hpp"
#include "tcav/tensor.hpp"

// Reverse-mode autodiff over a fixed set of primitives. Graphs are built
// once (node order is topological by construction), then forward/backward
// may run many times with rebound leaves; node buffers are reused across
// passes. A graph instance is single-writer; distinct instances are
// independent.

namespace tcav::num {

enum class OpKind {
  kLeaf,
  kMatMul,
  kAdd,
  kMul,
  kSigmoid,
  kTanh,
  kConcat,
  kSlice,
  kReduceSum,
  kSigmoidCrossEntropy,
};

inline const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kReduceSum: return "reduce_sum";
    case OpKind::kSigmoidCrossEntropy: return "sigmoid_cross_entropy";
  }
  return "?";
}

// Numerically stable logistic; separate branches avoid exp overflow.
inline double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

class ComputeGraph {
 public:
  using EigenMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using EigenConstMap =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  int leaf(const std::string& name, Shape shape, bool differentiable = true) {
    require(!name.empty(), "leaf: name must be non-empty");
    require(leaf_ids_.find(name) == leaf_ids_.end(), "leaf: duplicate leaf name '" + name + "'");
    Node n;
    n.op = OpKind::kLeaf;
    n.name = name;
    n.differentiable = differentiable;
    n.value = Tensor(std::move(shape));
    const int id = push(std::move(n));
    leaf_ids_[name] = id;
    return id;
  }

  int matmul(int a, int b) {
    const Tensor &ta = nodes_[a].value, &tb = nodes_[b].value;
    check(ta.rank() == 2 && tb.rank() == 2, a, "matmul inputs must be rank-2");
    check(ta.cols() == tb.rows(), a,
          "matmul shape mismatch " + shape_str(ta.shape()) + " x " + shape_str(tb.shape()));
    return push(make(OpKind::kMatMul, {a, b}, Shape{ta.rows(), tb.cols()}));
  }

  // Elementwise add; also accepts a row vector [1,m] as second input,
  // broadcast over the rows of the first.
  int add(int a, int b) {
    const Tensor &ta = nodes_[a].value, &tb = nodes_[b].value;
    if (!ta.same_shape(tb)) {
      check(ta.rank() == 2 && tb.rank() == 2 && tb.rows() == 1 && tb.cols() == ta.cols(), a,
            "add shape mismatch " + shape_str(ta.shape()) + " + " + shape_str(tb.shape()));
    }
    return push(make(OpKind::kAdd, {a, b}, ta.shape()));
  }

  int mul(int a, int b) {
    check(nodes_[a].value.same_shape(nodes_[b].value), a, "mul requires identical shapes");
    return push(make(OpKind::kMul, {a, b}, nodes_[a].value.shape()));
  }

  int sigmoid(int a) { return push(make(OpKind::kSigmoid, {a}, nodes_[a].value.shape())); }
  int tanh(int a) { return push(make(OpKind::kTanh, {a}, nodes_[a].value.shape())); }

  int concat(const std::vector<int>& xs, int axis) {
    require(!xs.empty(), "concat: no inputs");
    require(axis == 0 || axis == 1, "concat: axis must be 0 or 1");
    const Tensor& first = nodes_[xs[0]].value;
    check(first.rank() == 2, xs[0], "concat inputs must be rank-2");
    std::size_t along = first.dim(static_cast<std::size_t>(axis));
    const std::size_t other = first.dim(static_cast<std::size_t>(1 - axis));
    for (std::size_t i = 1; i < xs.size(); ++i) {
      const Tensor& t = nodes_[xs[i]].value;
      check(t.rank() == 2 && t.dim(static_cast<std::size_t>(1 - axis)) == other, xs[i],
            "concat shape mismatch at input " + std::to_string(i));
      along += t.dim(static_cast<std::size_t>(axis));
    }
    Shape out = axis == 0 ? Shape{along, other} : Shape{other, along};
    Node n = make(OpKind::kConcat, xs, std::move(out));
    n.axis = axis;
    return push(std::move(n));
  }

  int slice(int a, int axis, std::size_t start, std::size_t len) {
    const Tensor& ta = nodes_[a].value;
    check(ta.rank() == 2, a, "slice input must be rank-2");
    require(axis == 0 || axis == 1, "slice: axis must be 0 or 1");
    const std::size_t along = ta.dim(static_cast<std::size_t>(axis));
    check(len >= 1 && start + len <= along, a, "slice out of range");
    Shape out = axis == 0 ? Shape{len, ta.cols()} : Shape{ta.rows(), len};
    Node n = make(OpKind::kSlice, {a}, std::move(out));
    n.axis = axis;
    n.start = start;
    n.len = len;
    return push(std::move(n));
  }

  int reduce_sum(int a) { return push(make(OpKind::kReduceSum, {a}, Shape{1})); }

  // Mean over all elements of the stable elementwise cross-entropy between
  // sigmoid(logits) and targets.
  int sigmoid_cross_entropy(int logits, int targets) {
    check(nodes_[logits].value.same_shape(nodes_[targets].value), logits,
          "sigmoid_cross_entropy requires identical shapes");
    return push(make(OpKind::kSigmoidCrossEntropy, {logits, targets}, Shape{1}));
  }

  // Request that forward() return this node's value under `name`.
  void mark_output(int id, const std::string& name) {
    require(!name.empty(), "mark_output: name must be non-empty");
    outputs_.emplace_back(name, id);
  }

  // In-place access to a leaf's storage (hot loops fill inputs directly).
  Tensor& mutable_leaf(const std::string& name) {
    auto it = leaf_ids_.find(name);
    require(it != leaf_ids_.end(), "mutable_leaf: no leaf named '" + name + "'");
    Node& n = nodes_[it->second];
    n.bound = true;
    return n.value;
  }

  void set_leaf(const std::string& name, const Tensor& v) {
    auto it = leaf_ids_.find(name);
    require(it != leaf_ids_.end(), "set_leaf: no leaf named '" + name + "'");
    Node& n = nodes_[it->second];
    check(v.same_shape(n.value), it->second,
          "leaf '" + name + "' bound with shape " + shape_str(v.shape()) + ", declared " +
              shape_str(n.value.shape()));
    n.value = v;
    n.bound = true;
  }

  std::map<std::string, Tensor> forward(const std::map<std::string, Tensor>& leaf_values) {
    for (const auto& [name, v] : leaf_values) set_leaf(name, v);
    run_forward();
    std::map<std::string, Tensor> out;
    for (const auto& [name, id] : outputs_) out[name] = nodes_[id].value;
    return out;
  }

  // Forward over already-bound leaves (hot path: rebind with set_leaf, then run).
  void run_forward() {
    for (const auto& [name, id] : leaf_ids_)
      if (!nodes_[id].bound) throw Error("forward: unbound leaf '" + name + "'");
    for (std::size_t i = 0; i < nodes_.size(); ++i) eval(static_cast<int>(i));
    forward_done_ = true;
  }

  std::map<std::string, Tensor> backward(const std::string& output_name) {
    return backward_node(find_named(output_name), std::size_t(0), /*whole=*/true);
  }

  // Backward from one scalar component (flat index) of a non-scalar node.
  std::map<std::string, Tensor> backward_component(const std::string& output_name,
                                                   std::size_t component) {
    return backward_node(find_named(output_name), component, /*whole=*/false);
  }

  std::map<std::string, Tensor> backward_node(int out_id, std::size_t component, bool whole) {
    require(forward_done_, "backward: forward has not been run");
    require(out_id >= 0 && out_id < static_cast<int>(nodes_.size()), "backward: bad node id");
    const Node& out = nodes_[out_id];
    if (whole) {
      require(out.value.size() == 1,
              "backward: output '" + label(out_id) + "' is not scalar; select a component");
      component = 0;
    } else {
      require(component < out.value.size(), "backward: component out of range");
    }

    // Restrict the sweep to ancestors of the output: everything else keeps
    // an exact zero gradient and never contaminates the pass.
    std::vector<char> active(nodes_.size(), 0);
    active[static_cast<std::size_t>(out_id)] = 1;
    for (int i = out_id; i >= 0; --i) {
      if (!active[static_cast<std::size_t>(i)]) continue;
      for (int in : nodes_[i].inputs) active[static_cast<std::size_t>(in)] = 1;
    }

    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (!active[i]) continue;
      Tensor& g = grad_slot(static_cast<int>(i));
      std::fill(g.data(), g.data() + g.size(), 0.0);
    }
    grad_slot(out_id)[component] = 1.0;

    for (int i = out_id; i >= 0; --i) {
      if (!active[static_cast<std::size_t>(i)]) continue;
      propagate(i);
    }

    std::map<std::string, Tensor> grads;
    for (const auto& [name, id] : leaf_ids_) {
      if (!nodes_[id].differentiable) continue;
      if (active[static_cast<std::size_t>(id)]) {
        grads[name] = grads_[id];
      } else {
        grads[name] = Tensor::zeros(nodes_[id].value.shape());
      }
    }
    return grads;
  }

  const Tensor& value(int id) const { return nodes_[id].value; }
  const Tensor& value(const std::string& name) const { return nodes_[find_named(name)].value; }
  const Tensor& gradient(int id) const {
    require(id >= 0 && static_cast<std::size_t>(id) < grads_.size() && grads_[id].size() > 0 &&
                grads_[id].same_shape(nodes_[id].value),
            "gradient: no gradient for node " + label(id));
    return grads_[id];
  }

  std::size_t n_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    OpKind op = OpKind::kLeaf;
    std::string name;
    std::vector<int> inputs;
    int axis = 0;
    std::size_t start = 0, len = 0;
    bool differentiable = false;
    bool bound = false;
    Tensor value;
  };

  Node make(OpKind op, std::vector<int> inputs, Shape out_shape) {
    for (int i : inputs)
      require(i >= 0 && i < static_cast<int>(nodes_.size()), "graph: input id out of range");
    Node n;
    n.op = op;
    n.inputs = std::move(inputs);
    n.value = Tensor(std::move(out_shape));
    return n;
  }

  int push(Node n) {
    nodes_.push_back(std::move(n));
    grads_.emplace_back();
    return static_cast<int>(nodes_.size()) - 1;
  }

  void check(bool cond, int near_node, const std::string& msg) const {
    if (!cond) throw Error("graph node " + label(near_node) + ": " + msg);
  }

  std::string label(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size())) return "#" + std::to_string(id);
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    std::string s = "#" + std::to_string(id) + "(" + op_name(n.op) + ")";
    if (!n.name.empty()) s += "'" + n.name + "'";
    return s;
  }

  int find_named(const std::string& name) const {
    for (const auto& [n, id] : outputs_)
      if (n == name) return id;
    auto it = leaf_ids_.find(name);
    if (it != leaf_ids_.end()) return it->second;
    throw Error("graph: no node named '" + name + "'");
  }

  Tensor& grad_slot(int id) {
    Tensor& g = grads_[static_cast<std::size_t>(id)];
    if (!g.same_shape(nodes_[static_cast<std::size_t>(id)].value))
      g = Tensor(nodes_[static_cast<std::size_t>(id)].value.shape());
    return g;
  }

  static EigenConstMap emap(const Tensor& t) {
    return EigenConstMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                         static_cast<Eigen::Index>(t.cols()));
  }
  static EigenMap emap(Tensor& t) {
    return EigenMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                    static_cast<Eigen::Index>(t.cols()));
  }

  void eval(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    switch (n.op) {
      case OpKind::kLeaf:
        return;
      case OpKind::kMatMul: {
        const Tensor &a = nodes_[n.inputs[0]].value, &b = nodes_[n.inputs[1]].value;
        emap(n.value).noalias() = emap(a) * emap(b);
        return;
      }
      case OpKind::kAdd: {
        const Tensor &a = nodes_[n.inputs[0]].value, &b = nodes_[n.inputs[1]].value;
        if (a.same_shape(b)) {
          for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = a[i] + b[i];
        } else {  // b is [1, m] broadcast over rows of a
          const std::size_t m = a.cols();
          for (std::size_t r = 0; r < a.rows(); ++r)
            for (std::size_t c = 0; c < m; ++c) n.value[r * m + c] = a[r * m + c] + b[c];
        }
        return;
      }
      case OpKind::kMul: {
        const Tensor &a = nodes_[n.inputs[0]].value, &b = nodes_[n.inputs[1]].value;
        for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = a[i] * b[i];
        return;
      }
      case OpKind::kSigmoid: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = stable_sigmoid(a[i]);
        return;
      }
      case OpKind::kTanh: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = std::tanh(a[i]);
        return;
      }
      case OpKind::kConcat: {
        std::size_t off = 0;
        if (n.axis == 0) {
          for (int in : n.inputs) {
            const Tensor& t = nodes_[in].value;
            std::copy(t.data(), t.data() + t.size(), n.value.data() + off);
            off += t.size();
          }
        } else {
          const std::size_t out_cols = n.value.cols();
          for (int in : n.inputs) {
            const Tensor& t = nodes_[in].value;
            for (std::size_t r = 0; r < t.rows(); ++r)
              std::copy(t.data() + r * t.cols(), t.data() + (r + 1) * t.cols(),
                        n.value.data() + r * out_cols + off);
            off += t.cols();
          }
        }
        return;
      }
      case OpKind::kSlice: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        if (n.axis == 0) {
          std::copy(a.data() + n.start * a.cols(), a.data() + (n.start + n.len) * a.cols(),
                    n.value.data());
        } else {
          for (std::size_t r = 0; r < a.rows(); ++r)
            std::copy(a.data() + r * a.cols() + n.start, a.data() + r * a.cols() + n.start + n.len,
                      n.value.data() + r * n.len);
        }
        return;
      }
      case OpKind::kReduceSum: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
        n.value[0] = s;
        return;
      }
      case OpKind::kSigmoidCrossEntropy: {
        const Tensor &z = nodes_[n.inputs[0]].value, &y = nodes_[n.inputs[1]].value;
        double s = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
          const double zi = z[i];
          s += std::max(zi, 0.0) - zi * y[i] + std::log1p(std::exp(-std::abs(zi)));
        }
        n.value[0] = s / static_cast<double>(z.size());
        return;
      }
    }
  }

  void propagate(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.op == OpKind::kLeaf) return;
    const Tensor& g = grads_[static_cast<std::size_t>(id)];
    switch (n.op) {
      case OpKind::kLeaf:
        return;
      case OpKind::kMatMul: {
        const Tensor &a = nodes_[n.inputs[0]].value, &b = nodes_[n.inputs[1]].value;
        emap(grad_slot(n.inputs[0])).noalias() += emap(g) * emap(b).transpose();
        emap(grad_slot(n.inputs[1])).noalias() += emap(a).transpose() * emap(g);
        return;
      }
      case OpKind::kAdd: {
        const Tensor &a = nodes_[n.inputs[0]].value, &b = nodes_[n.inputs[1]].value;
        Tensor& ga = grad_slot(n.inputs[0]);
        Tensor& gb = grad_slot(n.inputs[1]);
        for (std::size_t i = 0; i < a.size(); ++i) ga[i] += g[i];
        if (a.same_shape(b)) {
          for (std::size_t i = 0; i < b.size(); ++i) gb[i] += g[i];
        } else {
          const std::size_t m = a.cols();
          for (std::size_t r = 0; r < a.rows(); ++r)
            for (std::size_t c = 0; c < m; ++c) gb[c] += g[r * m + c];
        }
        return;
      }
      case OpKind::kMul: {
        const Tensor &a = nodes_[n.inputs[0]].value, &b = nodes_[n.inputs[1]].value;
        Tensor& ga = grad_slot(n.inputs[0]);
        Tensor& gb = grad_slot(n.inputs[1]);
        for (std::size_t i = 0; i < a.size(); ++i) {
          ga[i] += g[i] * b[i];
          gb[i] += g[i] * a[i];
        }
        return;
      }
      case OpKind::kSigmoid: {
        Tensor& ga = grad_slot(n.inputs[0]);
        for (std::size_t i = 0; i < n.value.size(); ++i) {
          const double s = n.value[i];
          ga[i] += g[i] * s * (1.0 - s);
        }
        return;
      }
      case OpKind::kTanh: {
        Tensor& ga = grad_slot(n.inputs[0]);
        for (std::size_t i = 0; i < n.value.size(); ++i) {
          const double t = n.value[i];
          ga[i] += g[i] * (1.0 - t * t);
        }
        return;
      }
      case OpKind::kConcat: {
        std::size_t off = 0;
        if (n.axis == 0) {
          for (int in : n.inputs) {
            Tensor& gi = grad_slot(in);
            for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[off + i];
            off += gi.size();
          }
        } else {
          const std::size_t out_cols = n.value.cols();
          for (int in : n.inputs) {
            Tensor& gi = grad_slot(in);
            const std::size_t c = gi.cols();
            for (std::size_t r = 0; r < gi.rows(); ++r)
              for (std::size_t j = 0; j < c; ++j) gi[r * c + j] += g[r * out_cols + off + j];
            off += c;
          }
        }
        return;
      }
      case OpKind::kSlice: {
        Tensor& ga = grad_slot(n.inputs[0]);
        const Tensor& a = nodes_[n.inputs[0]].value;
        if (n.axis == 0) {
          for (std::size_t i = 0; i < g.size(); ++i) ga[n.start * a.cols() + i] += g[i];
        } else {
          for (std::size_t r = 0; r < a.rows(); ++r)
            for (std::size_t j = 0; j < n.len; ++j)
              ga[r * a.cols() + n.start + j] += g[r * n.len + j];
        }
        return;
      }
      case OpKind::kReduceSum: {
        Tensor& ga = grad_slot(n.inputs[0]);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
        return;
      }
      case OpKind::kSigmoidCrossEntropy: {
        const Tensor &z = nodes_[n.inputs[0]].value, &y = nodes_[n.inputs[1]].value;
        Tensor& gz = grad_slot(n.inputs[0]);
        Tensor& gy = grad_slot(n.inputs[1]);
        const double scale = g[0] / static_cast<double>(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) {
          gz[i] += scale * (stable_sigmoid(z[i]) - y[i]);
          gy[i] += scale * (-z[i]);
        }
        return;
      }
    }
  }

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::map<std::string, int> leaf_ids_;
  std::vector<std::pair<std::string, int>> outputs_;
  bool forward_done_ = false;
};

}  // namespace tcav::num
