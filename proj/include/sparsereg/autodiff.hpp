#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sparsereg/matrix.hpp"

namespace sparsereg {

using NodeId = std::size_t;

// Column count is always static. Rows are either a fixed count or the batch
// size, which is only known when inputs are bound.
struct Shape {
  std::optional<std::size_t> rows;  // nullopt: batch-sized
  std::size_t cols = 0;

  static Shape batch(std::size_t cols) { return {std::nullopt, cols}; }
  static Shape fixed(std::size_t rows, std::size_t cols) { return {rows, cols}; }
  bool is_scalar() const { return rows == 1 && cols == 1; }
  std::string to_string() const;
  bool operator==(const Shape&) const = default;
};

enum class OpKind {
  kInput,
  kParameter,
  kAffine,           // x W + b, b broadcast over rows
  kRelu,
  kL2NormalizeRows,  // degenerate rows pass through
  kSoftmax,          // row-wise temperature softmax
  kLog,              // log(max(x, kProbabilityFloor))
  kPow,              // max(x, 0)^a; gradient floors x for a < 1
  kAdd,
  kMul,
  kDiv,
  kLinear,  // a * x + b with scalar constants
  kRowSum,
  kMean,
  kSum,
};

std::string_view op_name(OpKind kind);

// Named input bindings for evaluation.
using Inputs = std::map<std::string, Matrix, std::less<>>;

// Parameter name -> gradient, same shape as the parameter.
using GradientSet = std::map<std::string, Matrix, std::less<>>;

struct Node {
  OpKind kind = OpKind::kInput;
  std::vector<NodeId> args;
  double a = 0.0;  // temperature, exponent, or scale depending on kind
  double b = 0.0;  // shift for kLinear
  std::string name;  // inputs and parameters
  std::size_t slot = 0;  // parameter index
  Shape shape;
  bool depends_on_parameter = false;
};

class Graph;

// Node values recorded by one forward pass; consumed by Graph::backward.
class Tape {
 public:
  const Matrix& value(NodeId id) const { return values_.at(id); }
  const Matrix& output() const { return values_.back(); }
  std::size_t batch_rows() const { return batch_rows_; }

 private:
  friend class Graph;
  std::vector<Matrix> values_;
  std::vector<std::vector<double>> row_norms_;  // kL2NormalizeRows only
  std::size_t batch_rows_ = 0;
};

// Immutable DAG over dense matrices. Only parameter values change after
// construction, through parameter(). Evaluation is const and re-entrant.
class Graph {
 public:
  Matrix evaluate(const Inputs& inputs) const;
  Tape forward(const Inputs& inputs) const;

  // Reverse accumulation from a 1x1 output seeded with `seed`.
  GradientSet backward(const Tape& tape, double seed = 1.0) const;

  const Matrix& parameter(std::string_view name) const;
  Matrix& parameter(std::string_view name);
  std::vector<std::string> parameter_names() const;

  NodeId output_node() const { return nodes_.size() - 1; }
  const std::vector<Node>& nodes() const { return nodes_; }
  std::string describe(NodeId id) const;

 private:
  friend class GraphBuilder;
  std::size_t find_parameter(std::string_view name) const;

  std::vector<Node> nodes_;  // topological order; the output is last
  std::vector<std::string> parameter_names_;
  std::vector<Matrix> parameters_;
};

// Builds a Graph node by node. Every method validates shapes immediately and
// throws ShapeError naming the offending node.
class GraphBuilder {
 public:
  NodeId input(std::string name, std::size_t cols);
  NodeId input(std::string name, std::size_t rows, std::size_t cols);
  NodeId parameter(std::string name, Matrix init);

  NodeId affine(NodeId x, NodeId weight, NodeId bias);
  NodeId relu(NodeId x);
  NodeId l2_normalize_rows(NodeId x);
  NodeId softmax(NodeId x, double tau);
  NodeId log(NodeId x);
  NodeId pow(NodeId x, double exponent);
  // Binary ops accept b with the same shape as a, a 1x1 b, or a column b
  // with a's row count (broadcast along columns).
  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId div(NodeId a, NodeId b);
  NodeId linear(NodeId x, double scale, double shift);
  NodeId row_sum(NodeId x);
  NodeId mean(NodeId x);
  NodeId sum(NodeId x);

  const Shape& shape(NodeId id) const { return nodes_.at(id).shape; }

  // Freezes nodes [0, output]; node ids are preserved and `output` becomes
  // the graph output.
  Graph build(NodeId output) const;

 private:
  NodeId push(Node node);
  NodeId binary(OpKind kind, NodeId a, NodeId b);
  const Node& at(NodeId id) const;

  std::vector<Node> nodes_;
  std::vector<std::string> parameter_names_;
  std::vector<Matrix> parameters_;
};

}  // namespace sparsereg
