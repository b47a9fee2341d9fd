#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deconfuse/tensor.hpp"

namespace deconfuse::ad {

using NodeId = std::int32_t;

/// Value layout of a tape node. Everything is stored flat; the dims give it
/// meaning. Scalars use (1,1,1), matrices (rows, cols, 1), tensors (k, c, d).
struct Dims {
  enum class Kind : std::uint8_t { scalar, matrix, tensor } kind = Kind::scalar;
  std::size_t a = 1;
  std::size_t b = 1;
  std::size_t c = 1;

  std::size_t count() const { return a * b * c; }
  static Dims scalar() { return {}; }
  static Dims matrix(std::size_t r, std::size_t c) { return {Kind::matrix, r, c, 1}; }
  static Dims tensor(std::size_t k, std::size_t c, std::size_t d) {
    return {Kind::tensor, k, c, d};
  }
};

/// Reverse-mode tape over the project's numerical primitives. Forward
/// results are kept per node; backward() accumulates adjoints in a fixed
/// order, so gradients are deterministic. Every forward primitive checks its
/// output for non-finite values and raises NumericOverflowError naming the
/// primitive that produced them.
class Tape {
 public:
  NodeId leaf(std::span<const double> values, Dims dims);
  NodeId leaf_tensor(const Tensor3& t) { return leaf(t.v, Dims::tensor(t.samples, t.channels, t.length)); }
  NodeId leaf_matrix(const Matrix& m) { return leaf(m.v, Dims::matrix(m.rows, m.cols)); }

  /// Leaf holding convolution weights; geometry travels with the node.
  NodeId leaf_weights(const FilterBank& bank);

  NodeId conv1d(NodeId input, NodeId weights);
  NodeId maxpool1d(NodeId input, std::size_t kernel, std::size_t stride);
  NodeId selu(NodeId input);
  NodeId relu(NodeId input);
  NodeId matmul(NodeId a, NodeId b);
  NodeId flatten(NodeId tensor_node);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId scale(NodeId a, double factor);
  NodeId frobenius_sq(NodeId a);
  /// Filters-as-columns matrix view of a weights leaf ((in*P) x M).
  NodeId filters_as_matrix(NodeId weights);
  NodeId logdet_rect(NodeId matrix_node, double sv_floor);
  /// Sum of scalar nodes.
  NodeId sum(const std::vector<NodeId>& scalars);

  const std::vector<double>& value(NodeId id) const { return nodes_[id].value; }
  double scalar(NodeId id) const { return nodes_[id].value[0]; }
  Dims dims(NodeId id) const { return nodes_[id].dims; }

  /// Seeds the root with 1 and propagates adjoints to every node.
  void backward(NodeId root);
  const std::vector<double>& grad(NodeId id) const { return nodes_[id].grad; }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    leaf,
    conv,
    maxpool,
    selu,
    relu,
    matmul,
    flatten,
    add,
    sub,
    scale,
    frobenius,
    filters_matrix,
    logdet,
    sum,
  };

  struct Node {
    Op op = Op::leaf;
    Dims dims;
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<NodeId> inputs;
    // op-specific metadata
    FilterBank bank_geometry;           // conv / filters_matrix (weights leaf copy)
    std::size_t pool_kernel = 0;
    std::size_t pool_stride = 0;
    std::vector<std::size_t> argmax;    // maxpool
    double factor = 1.0;                // scale
    double sv_floor = 0.0;              // logdet
    Matrix cached_logdet_grad;          // logdet (from the forward SVD)
  };

  NodeId push(Node node, const char* op_name);
  Tensor3 as_tensor(NodeId id) const;
  Matrix as_matrix(NodeId id) const;

  std::vector<Node> nodes_;
};

}  // namespace deconfuse::ad
