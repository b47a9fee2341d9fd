#include "deconfuse/autodiff.hpp"

#include <cmath>

#include "deconfuse/kernels.hpp"
#include "deconfuse/linalg.hpp"

namespace deconfuse::ad {

namespace {

void check_same_count(const char* op, std::size_t a, std::size_t b) {
  if (a != b)
    throw ShapeError(std::string(op) + ": operand sizes differ (" + std::to_string(a) + " vs " +
                     std::to_string(b) + ")");
}

}  // namespace

NodeId Tape::push(Node node, const char* op_name) {
  if (!all_finite(node.value))
    throw NumericOverflowError(std::string(op_name) + " produced a non-finite value");
  node.grad.assign(node.value.size(), 0.0);
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tensor3 Tape::as_tensor(NodeId id) const {
  const Node& n = nodes_[id];
  Tensor3 t(n.dims.a, n.dims.b, n.dims.c);
  t.v = n.value;
  return t;
}

Matrix Tape::as_matrix(NodeId id) const {
  const Node& n = nodes_[id];
  Matrix m(n.dims.a, n.dims.b);
  m.v = n.value;
  return m;
}

NodeId Tape::leaf(std::span<const double> values, Dims dims) {
  if (values.size() != dims.count()) throw ShapeError("leaf: value count does not match dims");
  Node node;
  node.op = Op::leaf;
  node.dims = dims;
  node.value.assign(values.begin(), values.end());
  return push(std::move(node), "leaf");
}

NodeId Tape::leaf_weights(const FilterBank& bank) {
  Node node;
  node.op = Op::leaf;
  node.dims = Dims::tensor(bank.out_channels, bank.in_channels, bank.kernel_size);
  node.value = bank.w;
  node.bank_geometry = FilterBank(bank.out_channels, bank.in_channels, bank.kernel_size,
                                  bank.stride, bank.padding);
  return push(std::move(node), "leaf");
}

NodeId Tape::conv1d(NodeId input, NodeId weights) {
  const Node& w = nodes_[weights];
  if (w.bank_geometry.kernel_size == 0)
    throw ShapeError("conv1d: weights node was not created by leaf_weights");
  FilterBank bank = w.bank_geometry;
  bank.w = w.value;

  const Tensor3 out = kernels::conv1d(as_tensor(input), bank);
  Node node;
  node.op = Op::conv;
  node.dims = Dims::tensor(out.samples, out.channels, out.length);
  node.value = out.v;
  node.inputs = {input, weights};
  node.bank_geometry = w.bank_geometry;
  return push(std::move(node), "conv1d");
}

NodeId Tape::maxpool1d(NodeId input, std::size_t kernel, std::size_t stride) {
  Node node;
  std::vector<std::size_t> argmax;
  const Tensor3 out = kernels::maxpool1d(as_tensor(input), kernel, stride, &argmax);
  node.op = Op::maxpool;
  node.dims = Dims::tensor(out.samples, out.channels, out.length);
  node.value = out.v;
  node.inputs = {input};
  node.pool_kernel = kernel;
  node.pool_stride = stride;
  node.argmax = std::move(argmax);
  return push(std::move(node), "maxpool1d");
}

NodeId Tape::selu(NodeId input) {
  Node node;
  node.op = Op::selu;
  node.dims = nodes_[input].dims;
  node.value.resize(nodes_[input].value.size());
  for (std::size_t i = 0; i < node.value.size(); ++i)
    node.value[i] = deconfuse::selu(nodes_[input].value[i]);
  node.inputs = {input};
  return push(std::move(node), "selu");
}

NodeId Tape::relu(NodeId input) {
  Node node;
  node.op = Op::relu;
  node.dims = nodes_[input].dims;
  node.value.resize(nodes_[input].value.size());
  for (std::size_t i = 0; i < node.value.size(); ++i)
    node.value[i] = deconfuse::relu(nodes_[input].value[i]);
  node.inputs = {input};
  return push(std::move(node), "relu");
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const Matrix out = kernels::matmul(as_matrix(a), as_matrix(b));
  Node node;
  node.op = Op::matmul;
  node.dims = Dims::matrix(out.rows, out.cols);
  node.value = out.v;
  node.inputs = {a, b};
  return push(std::move(node), "matmul");
}

NodeId Tape::flatten(NodeId tensor_node) {
  const Node& in = nodes_[tensor_node];
  Node node;
  node.op = Op::flatten;
  node.dims = Dims::matrix(in.dims.a, in.dims.b * in.dims.c);
  node.value = in.value;  // channel-major flatten is the identity on storage
  node.inputs = {tensor_node};
  return push(std::move(node), "flatten");
}

NodeId Tape::add(NodeId a, NodeId b) {
  check_same_count("add", nodes_[a].value.size(), nodes_[b].value.size());
  Node node;
  node.op = Op::add;
  node.dims = nodes_[a].dims;
  node.value.resize(nodes_[a].value.size());
  for (std::size_t i = 0; i < node.value.size(); ++i)
    node.value[i] = nodes_[a].value[i] + nodes_[b].value[i];
  node.inputs = {a, b};
  return push(std::move(node), "add");
}

NodeId Tape::sub(NodeId a, NodeId b) {
  check_same_count("sub", nodes_[a].value.size(), nodes_[b].value.size());
  Node node;
  node.op = Op::sub;
  node.dims = nodes_[a].dims;
  node.value.resize(nodes_[a].value.size());
  for (std::size_t i = 0; i < node.value.size(); ++i)
    node.value[i] = nodes_[a].value[i] - nodes_[b].value[i];
  node.inputs = {a, b};
  return push(std::move(node), "sub");
}

NodeId Tape::scale(NodeId a, double factor) {
  Node node;
  node.op = Op::scale;
  node.dims = nodes_[a].dims;
  node.value.resize(nodes_[a].value.size());
  for (std::size_t i = 0; i < node.value.size(); ++i) node.value[i] = factor * nodes_[a].value[i];
  node.inputs = {a};
  node.factor = factor;
  return push(std::move(node), "scale");
}

NodeId Tape::frobenius_sq(NodeId a) {
  Node node;
  node.op = Op::frobenius;
  node.dims = Dims::scalar();
  node.value = {kernels::frobenius_sq(nodes_[a].value)};
  node.inputs = {a};
  return push(std::move(node), "frobenius_sq");
}

NodeId Tape::filters_as_matrix(NodeId weights) {
  const Node& w = nodes_[weights];
  if (w.bank_geometry.kernel_size == 0)
    throw ShapeError("filters_as_matrix: input is not a weights leaf");
  FilterBank bank = w.bank_geometry;
  bank.w = w.value;
  const Matrix m = bank.as_matrix();
  Node node;
  node.op = Op::filters_matrix;
  node.dims = Dims::matrix(m.rows, m.cols);
  node.value = m.v;
  node.inputs = {weights};
  node.bank_geometry = w.bank_geometry;
  return push(std::move(node), "filters_as_matrix");
}

NodeId Tape::logdet_rect(NodeId matrix_node, double sv_floor) {
  const LogdetValueGrad vg = logdet_value_gradient(as_matrix(matrix_node), sv_floor);
  Node node;
  node.op = Op::logdet;
  node.dims = Dims::scalar();
  node.value = {vg.value};
  node.inputs = {matrix_node};
  node.sv_floor = sv_floor;
  node.cached_logdet_grad = vg.gradient;
  return push(std::move(node), "logdet_rect");
}

NodeId Tape::sum(const std::vector<NodeId>& scalars) {
  Node node;
  node.op = Op::sum;
  node.dims = Dims::scalar();
  double acc = 0.0;
  for (NodeId id : scalars) {
    if (nodes_[id].dims.count() != 1) throw ShapeError("sum: inputs must be scalars");
    acc += nodes_[id].value[0];
  }
  node.value = {acc};
  node.inputs = scalars;
  return push(std::move(node), "sum");
}

void Tape::backward(NodeId root) {
  if (nodes_[root].dims.count() != 1) throw ShapeError("backward: root must be a scalar");
  for (Node& n : nodes_) std::fill(n.grad.begin(), n.grad.end(), 0.0);
  nodes_[root].grad[0] = 1.0;

  for (NodeId id = root; id >= 0; --id) {
    Node& n = nodes_[id];
    bool any = false;
    for (double g : n.grad)
      if (g != 0.0) {
        any = true;
        break;
      }
    if (!any || n.op == Op::leaf) continue;

    switch (n.op) {
      case Op::conv: {
        Node& input = nodes_[n.inputs[0]];
        Node& weights = nodes_[n.inputs[1]];
        FilterBank bank = n.bank_geometry;
        bank.w = weights.value;
        Tensor3 grad_out(n.dims.a, n.dims.b, n.dims.c);
        grad_out.v = n.grad;

        const Tensor3 gi = kernels::conv1d_grad_input(grad_out, bank, input.dims.c);
        for (std::size_t i = 0; i < input.grad.size(); ++i) input.grad[i] += gi.v[i];

        Tensor3 in_value(input.dims.a, input.dims.b, input.dims.c);
        in_value.v = input.value;
        const FilterBank gw = kernels::conv1d_grad_weights(in_value, grad_out, bank);
        for (std::size_t i = 0; i < weights.grad.size(); ++i) weights.grad[i] += gw.w[i];
        break;
      }
      case Op::maxpool: {
        Node& input = nodes_[n.inputs[0]];
        Tensor3 grad_out(n.dims.a, n.dims.b, n.dims.c);
        grad_out.v = n.grad;
        const Tensor3 gi = kernels::maxpool1d_backward(grad_out, n.argmax, input.dims.c);
        for (std::size_t i = 0; i < input.grad.size(); ++i) input.grad[i] += gi.v[i];
        break;
      }
      case Op::selu: {
        Node& input = nodes_[n.inputs[0]];
        for (std::size_t i = 0; i < input.grad.size(); ++i)
          input.grad[i] += n.grad[i] * selu_derivative(input.value[i]);
        break;
      }
      case Op::relu: {
        Node& input = nodes_[n.inputs[0]];
        for (std::size_t i = 0; i < input.grad.size(); ++i)
          input.grad[i] += n.grad[i] * relu_derivative(input.value[i]);
        break;
      }
      case Op::matmul: {
        Node& a = nodes_[n.inputs[0]];
        Node& b = nodes_[n.inputs[1]];
        Matrix g(n.dims.a, n.dims.b);
        g.v = n.grad;
        Matrix bm(b.dims.a, b.dims.b);
        bm.v = b.value;
        Matrix am(a.dims.a, a.dims.b);
        am.v = a.value;
        const Matrix ga = kernels::matmul_a_bt(g, bm);
        for (std::size_t i = 0; i < a.grad.size(); ++i) a.grad[i] += ga.v[i];
        const Matrix gb = kernels::matmul_at_b(am, g);
        for (std::size_t i = 0; i < b.grad.size(); ++i) b.grad[i] += gb.v[i];
        break;
      }
      case Op::flatten: {
        Node& input = nodes_[n.inputs[0]];
        for (std::size_t i = 0; i < input.grad.size(); ++i) input.grad[i] += n.grad[i];
        break;
      }
      case Op::add: {
        for (int side = 0; side < 2; ++side) {
          Node& in = nodes_[n.inputs[side]];
          for (std::size_t i = 0; i < in.grad.size(); ++i) in.grad[i] += n.grad[i];
        }
        break;
      }
      case Op::sub: {
        Node& a = nodes_[n.inputs[0]];
        Node& b = nodes_[n.inputs[1]];
        for (std::size_t i = 0; i < a.grad.size(); ++i) a.grad[i] += n.grad[i];
        for (std::size_t i = 0; i < b.grad.size(); ++i) b.grad[i] -= n.grad[i];
        break;
      }
      case Op::scale: {
        Node& input = nodes_[n.inputs[0]];
        for (std::size_t i = 0; i < input.grad.size(); ++i)
          input.grad[i] += n.factor * n.grad[i];
        break;
      }
      case Op::frobenius: {
        Node& input = nodes_[n.inputs[0]];
        const double g = n.grad[0];
        for (std::size_t i = 0; i < input.grad.size(); ++i)
          input.grad[i] += 2.0 * g * input.value[i];
        break;
      }
      case Op::filters_matrix: {
        Node& weights = nodes_[n.inputs[0]];
        const FilterBank& geo = n.bank_geometry;
        // matrix (ci*P + p, m) <-> weight ((m*in + ci)*P + p)
        for (std::size_t m = 0; m < geo.out_channels; ++m)
          for (std::size_t ci = 0; ci < geo.in_channels; ++ci)
            for (std::size_t p = 0; p < geo.kernel_size; ++p)
              weights.grad[(m * geo.in_channels + ci) * geo.kernel_size + p] +=
                  n.grad[(ci * geo.kernel_size + p) * geo.out_channels + m];
        break;
      }
      case Op::logdet: {
        Node& input = nodes_[n.inputs[0]];
        const double g = n.grad[0];
        for (std::size_t i = 0; i < input.grad.size(); ++i)
          input.grad[i] += g * n.cached_logdet_grad.v[i];
        break;
      }
      case Op::sum: {
        for (NodeId in : n.inputs) nodes_[in].grad[0] += n.grad[0];
        break;
      }
      case Op::leaf:
        break;
    }
  }
}

}  // namespace deconfuse::ad
