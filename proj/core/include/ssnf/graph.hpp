#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "ssnf/tensor.hpp"

namespace ssnf {

// Reverse-mode automatic differentiation over a fixed primitive set.
//
// A Graph is built once (shapes are static, nodes stored in topological
// order by construction), then evaluated many times: bind leaf tensors,
// run forward(), seed an output, run backward(). Node buffers are reused
// across evaluations so the training loop does not allocate.
//
// The primitive set is deliberately small: add, mul, matmul, exp, log,
// sin, cos, sigmoid, softplus, relu, sum, broadcast. Everything the model
// needs (prefix products for transmittance, per-ray reductions, one-hot
// gathers) is expressed through matmuls with constant matrices, which keeps
// every derivative auditable.
enum class Op {
  kLeaf,       // input or parameter, bound externally
  kConst,      // baked constant
  kAdd,
  kMul,
  kMatMul,
  kExp,
  kLog,
  kSin,
  kCos,
  kSigmoid,
  kSoftplus,
  kRelu,
  kSum,        // all elements -> [1,1], sequential over flat index
  kBroadcast,  // [1,1] | [1,c] | [r,1] -> [r,c]
  kReshape,    // metadata change, same element order
};

const char* op_name(Op op);

template <class S>
class Graph {
 public:
  struct Val {
    Graph* g = nullptr;
    int id = -1;
    int64_t rows() const { return g->nodes_[id].rows; }
    int64_t cols() const { return g->nodes_[id].cols; }
  };

  // ---- construction ----

  Val input(const std::string& name, int64_t r, int64_t c) { return leaf(name, r, c, false); }
  Val param(const std::string& name, int64_t r, int64_t c) { return leaf(name, r, c, true); }

  Val constant(Tensor<S> v) {
    Node n;
    n.op = Op::kConst;
    n.rows = v.rows();
    n.cols = v.cols();
    n.value = std::move(v);
    n.bound = true;
    return push(std::move(n));
  }
  Val constant_scalar(S v) { return constant(Tensor<S>::scalar(v)); }

  Val add(Val a, Val b) { return binary(Op::kAdd, a, b); }
  Val mul(Val a, Val b) { return binary(Op::kMul, a, b); }

  Val matmul(Val a, Val b) {
    check(a);
    check(b);
    if (a.cols() != b.rows()) throw std::invalid_argument("graph matmul: inner dims differ");
    Node n;
    n.op = Op::kMatMul;
    n.a = a.id;
    n.b = b.id;
    n.rows = a.rows();
    n.cols = b.cols();
    return push(std::move(n));
  }

  Val exp(Val a) { return unary(Op::kExp, a); }
  Val log(Val a) { return unary(Op::kLog, a); }
  Val sin(Val a) { return unary(Op::kSin, a); }
  Val cos(Val a) { return unary(Op::kCos, a); }
  Val sigmoid(Val a) { return unary(Op::kSigmoid, a); }
  Val softplus(Val a) { return unary(Op::kSoftplus, a); }
  Val relu(Val a) { return unary(Op::kRelu, a); }

  Val sum(Val a) {
    check(a);
    Node n;
    n.op = Op::kSum;
    n.a = a.id;
    n.rows = 1;
    n.cols = 1;
    return push(std::move(n));
  }

  Val broadcast(Val a, int64_t r, int64_t c) {
    check(a);
    bool ok = (a.rows() == 1 && a.cols() == 1) || (a.rows() == 1 && a.cols() == c) ||
              (a.cols() == 1 && a.rows() == r);
    if (!ok || r < a.rows() || c < a.cols())
      throw std::invalid_argument("graph broadcast: unsupported expansion");
    Node n;
    n.op = Op::kBroadcast;
    n.a = a.id;
    n.rows = r;
    n.cols = c;
    return push(std::move(n));
  }

  Val reshape(Val a, int64_t r, int64_t c) {
    check(a);
    if (r * c != nodes_[a.id].rows * nodes_[a.id].cols)
      throw std::invalid_argument("graph reshape: element count mismatch");
    Node n;
    n.op = Op::kReshape;
    n.a = a.id;
    n.rows = r;
    n.cols = c;
    return push(std::move(n));
  }

  void mark_output(const std::string& name, Val v) {
    check(v);
    outputs_[name] = v.id;
  }

  // ---- convenience composites (expand to primitives) ----

  // alpha * v + beta, elementwise with scalar constants
  Val scale_shift(Val v, S alpha, S beta) {
    Val out = mul(v, broadcast(constant_scalar(alpha), v.rows(), v.cols()));
    if (beta != S(0)) out = add(out, broadcast(constant_scalar(beta), v.rows(), v.cols()));
    return out;
  }
  Val neg(Val v) { return scale_shift(v, S(-1), S(0)); }
  Val sub(Val a, Val b) { return add(a, neg(b)); }
  // x @ w + row-broadcast bias
  Val linear(Val x, Val w, Val bias) {
    Val y = matmul(x, w);
    return add(y, broadcast(bias, y.rows(), y.cols()));
  }
  // per-row sums via matmul with a constant ones column
  Val row_sum(Val a) { return matmul(a, constant(Tensor<S>::full(a.cols(), 1, S(1)))); }

  // ---- binding and evaluation ----

  bool has_leaf(const std::string& name) const { return leaves_.count(name) > 0; }

  Tensor<S>& leaf_data(const std::string& name) {
    auto it = leaves_.find(name);
    if (it == leaves_.end()) throw std::invalid_argument("unknown leaf: " + name);
    nodes_[it->second].bound = true;
    return nodes_[it->second].value;
  }

  void bind(const std::string& name, const Tensor<S>& t) {
    Tensor<S>& dst = leaf_data(name);
    if (!dst.same_shape(t)) throw std::invalid_argument("bind: shape mismatch for " + name);
    dst = t;
  }

  // Evaluates every node in topological order; returns all marked outputs.
  std::map<std::string, Tensor<S>> forward(const std::map<std::string, Tensor<S>>& inputs = {}) {
    for (const auto& [name, t] : inputs) bind(name, t);
    run_forward();
    std::map<std::string, Tensor<S>> out;
    for (const auto& [name, id] : outputs_) out[name] = nodes_[id].value;
    return out;
  }

  void run_forward() {
    for (auto& n : nodes_)
      if (n.op == Op::kLeaf && !n.bound) throw std::logic_error("forward: unbound leaf " + n.name);
    for (size_t i = 0; i < nodes_.size(); ++i) eval_node(int(i));
    forward_done_ = true;
  }

  const Tensor<S>& value(const std::string& output) const {
    auto it = outputs_.find(output);
    if (it == outputs_.end()) throw std::invalid_argument("unknown output: " + output);
    return nodes_[it->second].value;
  }
  const Tensor<S>& value(Val v) const { return nodes_[v.id].value; }

  // Seeds the named output and accumulates gradients into every trainable
  // leaf reachable from it. Returns name -> gradient for trainable leaves.
  std::map<std::string, Tensor<S>> backward(const std::string& output, const Tensor<S>& seed) {
    if (!forward_done_) throw std::logic_error("backward called before forward");
    auto it = outputs_.find(output);
    if (it == outputs_.end()) throw std::invalid_argument("unknown output: " + output);
    int out_id = it->second;
    const Node& out_node = nodes_[out_id];
    if (seed.rows() != out_node.rows || seed.cols() != out_node.cols)
      throw std::invalid_argument("backward: seed shape mismatch");

    ensure_reachability(out_id);
    const std::vector<char>& needed = needed_cache_[out_id];

    for (size_t i = 0; i < nodes_.size(); ++i) {
      Node& n = nodes_[i];
      if (!needed[i] || !n.requires_grad) continue;
      if (n.grad.rows() != n.rows || n.grad.cols() != n.cols) n.grad = Tensor<S>(n.rows, n.cols);
      n.grad.fill(S(0));
    }
    nodes_[out_id].grad = seed;

    for (int i = int(nodes_.size()) - 1; i >= 0; --i) {
      if (!needed[i] || !nodes_[i].requires_grad) continue;
      backprop_node(i, needed);
    }
    if (check_finite_) {
      for (size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        if (needed[i] && n.requires_grad && !n.grad.all_finite())
          throw std::runtime_error(std::string("non-finite gradient at ") + op_name(n.op) +
                                   " node " + std::to_string(i));
      }
    }

    std::map<std::string, Tensor<S>> grads;
    for (const auto& [name, id] : leaves_)
      if (nodes_[id].trainable && needed[id]) grads[name] = nodes_[id].grad;
    return grads;
  }

  // zero tensor for trainable leaves unreachable from the last backward seed
  Tensor<S> grad_of(const std::string& leaf) const {
    auto it = leaves_.find(leaf);
    if (it == leaves_.end()) throw std::invalid_argument("unknown leaf: " + leaf);
    const Node& n = nodes_[it->second];
    if (n.grad.rows() == n.rows && n.grad.cols() == n.cols) return n.grad;
    return Tensor<S>(n.rows, n.cols);
  }

  void set_check_finite(bool v) { check_finite_ = v; }
  size_t node_count() const { return nodes_.size(); }

  std::vector<std::string> trainable_names() const {
    std::vector<std::string> names;
    for (const auto& [name, id] : leaves_)
      if (nodes_[id].trainable) names.push_back(name);
    return names;
  }

 private:
  struct Node {
    Op op = Op::kLeaf;
    int a = -1, b = -1;
    int64_t rows = 0, cols = 0;
    std::string name;
    bool trainable = false;
    bool bound = false;
    bool requires_grad = false;
    Tensor<S> value, grad;
  };

  Val leaf(const std::string& name, int64_t r, int64_t c, bool trainable) {
    if (leaves_.count(name)) throw std::invalid_argument("duplicate leaf: " + name);
    Node n;
    n.op = Op::kLeaf;
    n.rows = r;
    n.cols = c;
    n.name = name;
    n.trainable = trainable;
    n.requires_grad = trainable;
    n.value = Tensor<S>(r, c);
    Val v = push(std::move(n));
    leaves_[name] = v.id;
    return v;
  }

  void check(Val v) const {
    if (v.g != this || v.id < 0 || v.id >= int(nodes_.size()))
      throw std::invalid_argument("Val does not belong to this graph");
  }

  Val push(Node n) {
    if (n.op != Op::kLeaf && n.op != Op::kConst) {
      bool rg = nodes_[n.a].requires_grad;
      if (n.b >= 0) rg = rg || nodes_[n.b].requires_grad;
      n.requires_grad = rg;
    }
    nodes_.push_back(std::move(n));
    needed_cache_.clear();
    forward_done_ = false;
    return Val{this, int(nodes_.size()) - 1};
  }

  Val unary(Op op, Val a) {
    check(a);
    Node n;
    n.op = op;
    n.a = a.id;
    n.rows = a.rows();
    n.cols = a.cols();
    return push(std::move(n));
  }

  Val binary(Op op, Val a, Val b) {
    check(a);
    check(b);
    if (a.rows() != b.rows() || a.cols() != b.cols())
      throw std::invalid_argument("graph elementwise op: shape mismatch (use broadcast)");
    Node n;
    n.op = op;
    n.a = a.id;
    n.b = b.id;
    n.rows = a.rows();
    n.cols = b.cols();
    return push(std::move(n));
  }

  void eval_node(int id) {
    Node& n = nodes_[id];
    switch (n.op) {
      case Op::kLeaf:
      case Op::kConst:
        break;
      case Op::kAdd:
      case Op::kMul: {
        const auto& a = nodes_[n.a].value;
        const auto& b = nodes_[n.b].value;
        alloc(n);
        const int64_t m = n.value.numel();
        S* out = n.value.data();
        const S* pa = a.data();
        const S* pb = b.data();
        if (n.op == Op::kAdd)
          for (int64_t i = 0; i < m; ++i) out[i] = pa[i] + pb[i];
        else
          for (int64_t i = 0; i < m; ++i) out[i] = pa[i] * pb[i];
        break;
      }
      case Op::kMatMul:
        matmul_into(nodes_[id].value, nodes_[n.a].value, nodes_[n.b].value);
        break;
      case Op::kExp: {
        alloc(n);
        n.value.map().array() = nodes_[n.a].value.map().array().exp();
        break;
      }
      case Op::kLog: {
        alloc(n);
        n.value.map().array() = nodes_[n.a].value.map().array().log();
        break;
      }
      case Op::kSin: {
        alloc(n);
        n.value.map().array() = nodes_[n.a].value.map().array().sin();
        break;
      }
      case Op::kCos: {
        alloc(n);
        n.value.map().array() = nodes_[n.a].value.map().array().cos();
        break;
      }
      case Op::kSigmoid: {
        alloc(n);
        n.value.map().array() = nodes_[n.a].value.map().array().logistic();
        break;
      }
      case Op::kSoftplus: {
        alloc(n);
        auto x = nodes_[n.a].value.map().array();
        n.value.map().array() = x.max(S(0)) + (-x.abs()).exp().log1p();
        break;
      }
      case Op::kRelu: {
        alloc(n);
        n.value.map().array() = nodes_[n.a].value.map().array().max(S(0));
        break;
      }
      case Op::kSum: {
        const auto& a = nodes_[n.a].value;
        alloc(n);
        S acc = S(0);
        const S* pa = a.data();
        const int64_t m = a.numel();
        for (int64_t i = 0; i < m; ++i) acc += pa[i];
        n.value[0] = acc;
        break;
      }
      case Op::kBroadcast: {
        const auto& a = nodes_[n.a].value;
        alloc(n);
        if (a.numel() == 1) {
          n.value.fill(a[0]);
        } else if (a.rows() == 1) {
          for (int64_t r = 0; r < n.rows; ++r)
            for (int64_t c = 0; c < n.cols; ++c) n.value.at(r, c) = a.at(0, c);
        } else {
          for (int64_t r = 0; r < n.rows; ++r)
            for (int64_t c = 0; c < n.cols; ++c) n.value.at(r, c) = a.at(r, 0);
        }
        break;
      }
      case Op::kReshape: {
        const auto& a = nodes_[n.a].value;
        alloc(n);
        std::copy(a.data(), a.data() + a.numel(), n.value.data());
        break;
      }
    }
    if (check_finite_ && n.op != Op::kLeaf && n.op != Op::kConst && !n.value.all_finite())
      throw std::runtime_error(std::string("non-finite value at ") + op_name(n.op) + " node " +
                               std::to_string(id));
  }

  template <class F>
  void map_unary(Node& n, F f) {
    const auto& a = nodes_[n.a].value;
    alloc(n);
    const int64_t m = a.numel();
    S* out = n.value.data();
    const S* pa = a.data();
    for (int64_t i = 0; i < m; ++i) out[i] = f(pa[i]);
  }

  void alloc(Node& n) {
    if (n.value.rows() != n.rows || n.value.cols() != n.cols) n.value = Tensor<S>(n.rows, n.cols);
  }

  void backprop_node(int id, const std::vector<char>& needed) {
    Node& n = nodes_[id];
    const Tensor<S>& g = n.grad;
    auto wants = [&](int in) { return in >= 0 && needed[in] && nodes_[in].requires_grad; };
    switch (n.op) {
      case Op::kLeaf:
      case Op::kConst:
        break;
      case Op::kAdd: {
        if (wants(n.a)) accum_elementwise(n.a, g, nullptr);
        if (wants(n.b)) accum_elementwise(n.b, g, nullptr);
        break;
      }
      case Op::kMul: {
        if (wants(n.a)) accum_elementwise(n.a, g, &nodes_[n.b].value);
        if (wants(n.b)) accum_elementwise(n.b, g, &nodes_[n.a].value);
        break;
      }
      case Op::kMatMul: {
        if (wants(n.a)) matmul_a_bt_accum(nodes_[n.a].grad, g, nodes_[n.b].value);
        if (wants(n.b)) matmul_at_b_accum(nodes_[n.b].grad, nodes_[n.a].value, g);
        break;
      }
      case Op::kExp: {
        if (wants(n.a)) accum_elementwise(n.a, g, &n.value);
        break;
      }
      case Op::kLog: {
        if (wants(n.a)) {
          Tensor<S>& ga = nodes_[n.a].grad;
          const S* px = nodes_[n.a].value.data();
          const S* pg = g.data();
          S* out = ga.data();
          for (int64_t i = 0; i < g.numel(); ++i) out[i] += pg[i] / px[i];
        }
        break;
      }
      case Op::kSin: {
        if (wants(n.a))
          nodes_[n.a].grad.map().array() +=
              g.map().array() * nodes_[n.a].value.map().array().cos();
        break;
      }
      case Op::kCos: {
        if (wants(n.a))
          nodes_[n.a].grad.map().array() -=
              g.map().array() * nodes_[n.a].value.map().array().sin();
        break;
      }
      case Op::kSigmoid: {
        if (wants(n.a)) {
          auto y = n.value.map().array();
          nodes_[n.a].grad.map().array() += g.map().array() * y * (S(1) - y);
        }
        break;
      }
      case Op::kSoftplus: {
        if (wants(n.a))
          nodes_[n.a].grad.map().array() +=
              g.map().array() * nodes_[n.a].value.map().array().logistic();
        break;
      }
      case Op::kRelu: {
        if (wants(n.a)) {
          auto x = nodes_[n.a].value.map().array();
          nodes_[n.a].grad.map().array() +=
              g.map().array() * (x > S(0)).template cast<S>();
        }
        break;
      }
      case Op::kSum: {
        if (wants(n.a)) {
          Tensor<S>& ga = nodes_[n.a].grad;
          const S gv = g[0];
          S* out = ga.data();
          for (int64_t i = 0; i < ga.numel(); ++i) out[i] += gv;
        }
        break;
      }
      case Op::kBroadcast: {
        if (wants(n.a)) {
          Tensor<S>& ga = nodes_[n.a].grad;
          if (ga.numel() == 1) {
            S acc = S(0);
            const S* pg = g.data();
            for (int64_t i = 0; i < g.numel(); ++i) acc += pg[i];
            ga[0] += acc;
          } else if (ga.rows() == 1) {
            for (int64_t r = 0; r < n.rows; ++r)
              for (int64_t c = 0; c < n.cols; ++c) ga.at(0, c) += g.at(r, c);
          } else {
            for (int64_t r = 0; r < n.rows; ++r)
              for (int64_t c = 0; c < n.cols; ++c) ga.at(r, 0) += g.at(r, c);
          }
        }
        break;
      }
      case Op::kReshape: {
        if (wants(n.a)) {
          Tensor<S>& ga = nodes_[n.a].grad;
          const S* pg = g.data();
          S* out = ga.data();
          for (int64_t i = 0; i < g.numel(); ++i) out[i] += pg[i];
        }
        break;
      }
    }
  }

  // grad_a += g  or  grad_a += g * scale (elementwise)
  void accum_elementwise(int target, const Tensor<S>& g, const Tensor<S>* scale) {
    Tensor<S>& ga = nodes_[target].grad;
    S* out = ga.data();
    const S* pg = g.data();
    if (scale) {
      const S* ps = scale->data();
      for (int64_t i = 0; i < g.numel(); ++i) out[i] += pg[i] * ps[i];
    } else {
      for (int64_t i = 0; i < g.numel(); ++i) out[i] += pg[i];
    }
  }

  template <class F>
  void apply_chain(Node& n, F dfdx) {
    Tensor<S>& ga = nodes_[n.a].grad;
    const S* px = nodes_[n.a].value.data();
    const S* pg = n.grad.data();
    S* out = ga.data();
    for (int64_t i = 0; i < n.grad.numel(); ++i) out[i] += pg[i] * dfdx(px[i]);
  }

  void ensure_reachability(int out_id) {
    auto it = needed_cache_.find(out_id);
    if (it != needed_cache_.end()) return;
    std::vector<char> needed(nodes_.size(), 0);
    needed[out_id] = 1;
    for (int i = out_id; i >= 0; --i) {
      if (!needed[i]) continue;
      const Node& n = nodes_[i];
      if (n.a >= 0) needed[n.a] = 1;
      if (n.b >= 0) needed[n.b] = 1;
    }
    needed_cache_[out_id] = std::move(needed);
  }

  std::vector<Node> nodes_;
  std::unordered_map<std::string, int> leaves_;
  std::map<std::string, int> outputs_;
  std::unordered_map<int, std::vector<char>> needed_cache_;
  bool forward_done_ = false;
  bool check_finite_ = true;
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kConst: return "const";
    case Op::kAdd: return "add";
    case Op::kMul: return "mul";
    case Op::kMatMul: return "matmul";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSin: return "sin";
    case Op::kCos: return "cos";
    case Op::kSigmoid: return "sigmoid";
    case Op::kSoftplus: return "softplus";
    case Op::kRelu: return "relu";
    case Op::kSum: return "sum";
    case Op::kBroadcast: return "broadcast";
    case Op::kReshape: return "reshape";
  }
  return "?";
}

// Free-function forms of the evaluation API.
template <class S>
std::map<std::string, Tensor<S>> forward(Graph<S>& g,
                                         const std::map<std::string, Tensor<S>>& inputs) {
  return g.forward(inputs);
}

template <class S>
std::map<std::string, Tensor<S>> backward(Graph<S>& g, const std::string& output,
                                          const Tensor<S>& seed) {
  return g.backward(output, seed);
}

}  // namespace ssnf
