#include "sparsereg/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "sparsereg/error.hpp"
#include "sparsereg/primitives.hpp"

namespace sparsereg {

std::string Shape::to_string() const {
  return (rows ? std::to_string(*rows) : std::string("N")) + "x" + std::to_string(cols);
}

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kInput: return "input";
    case OpKind::kParameter: return "parameter";
    case OpKind::kAffine: return "affine";
    case OpKind::kRelu: return "relu";
    case OpKind::kL2NormalizeRows: return "l2_normalize_rows";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kLog: return "log";
    case OpKind::kPow: return "pow";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kDiv: return "div";
    case OpKind::kLinear: return "linear";
    case OpKind::kRowSum: return "row_sum";
    case OpKind::kMean: return "mean";
    case OpKind::kSum: return "sum";
  }
  return "unknown";
}

namespace {

std::string node_label(NodeId id, const Node& node) {
  std::string label = "node #" + std::to_string(id) + " (" + std::string(op_name(node.kind));
  if (!node.name.empty()) label += " '" + node.name + "'";
  return label + ")";
}

enum class Broadcast { kSame, kScalar, kColumn };

Broadcast broadcast_kind(const Matrix& a, const Matrix& b) {
  if (b.rows() == a.rows() && b.cols() == a.cols()) return Broadcast::kSame;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::kScalar;
  if (b.rows() == a.rows() && b.cols() == 1) return Broadcast::kColumn;
  throw ShapeError("cannot broadcast " + b.shape_string() + " onto " + a.shape_string());
}

double broadcast_at(const Matrix& b, Broadcast kind, std::size_t r, std::size_t c) {
  switch (kind) {
    case Broadcast::kSame: return b(r, c);
    case Broadcast::kScalar: return b(0, 0);
    case Broadcast::kColumn: return b(r, 0);
  }
  return 0.0;
}

void accumulate_broadcast(Matrix& target, Broadcast kind, std::size_t r, std::size_t c,
                          double value) {
  switch (kind) {
    case Broadcast::kSame: target(r, c) += value; break;
    case Broadcast::kScalar: target(0, 0) += value; break;
    case Broadcast::kColumn: target(r, 0) += value; break;
  }
}

void add_into(Matrix& dst, const Matrix& src) {
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace

// ---------------------------------------------------------------------------
// GraphBuilder

const Node& GraphBuilder::at(NodeId id) const {
  if (id >= nodes_.size()) throw ShapeError("unknown node id " + std::to_string(id));
  return nodes_[id];
}

NodeId GraphBuilder::push(Node node) {
  for (NodeId arg : node.args) {
    if (at(arg).depends_on_parameter) node.depends_on_parameter = true;
  }
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

NodeId GraphBuilder::input(std::string name, std::size_t cols) {
  Node node;
  node.kind = OpKind::kInput;
  node.name = std::move(name);
  node.shape = Shape::batch(cols);
  return push(std::move(node));
}

NodeId GraphBuilder::input(std::string name, std::size_t rows, std::size_t cols) {
  Node node;
  node.kind = OpKind::kInput;
  node.name = std::move(name);
  node.shape = Shape::fixed(rows, cols);
  return push(std::move(node));
}

NodeId GraphBuilder::parameter(std::string name, Matrix init) {
  if (std::find(parameter_names_.begin(), parameter_names_.end(), name) !=
      parameter_names_.end()) {
    throw ShapeError("duplicate parameter name '" + name + "'");
  }
  Node node;
  node.kind = OpKind::kParameter;
  node.name = name;
  node.slot = parameters_.size();
  node.shape = Shape::fixed(init.rows(), init.cols());
  node.depends_on_parameter = true;
  parameter_names_.push_back(std::move(name));
  parameters_.push_back(std::move(init));
  return push(std::move(node));
}

NodeId GraphBuilder::affine(NodeId x, NodeId weight, NodeId bias) {
  const Shape& xs = at(x).shape;
  const Shape& ws = at(weight).shape;
  const Shape& bs = at(bias).shape;
  const std::string label = "node #" + std::to_string(nodes_.size()) + " (affine)";
  if (!ws.rows) throw ShapeError(label + ": weight must have a fixed shape");
  if (*ws.rows != xs.cols) {
    throw ShapeError(label + ": input " + xs.to_string() + " vs weight " + ws.to_string());
  }
  if (bs != Shape::fixed(1, ws.cols)) {
    throw ShapeError(label + ": bias " + bs.to_string() + " must be 1x" + std::to_string(ws.cols));
  }
  Node node;
  node.kind = OpKind::kAffine;
  node.args = {x, weight, bias};
  node.shape = Shape{xs.rows, ws.cols};
  return push(std::move(node));
}

namespace {

Node unary_node(OpKind kind, NodeId x, const Shape& shape, double a = 0.0, double b = 0.0) {
  Node node;
  node.kind = kind;
  node.args = {x};
  node.shape = shape;
  node.a = a;
  node.b = b;
  return node;
}

}  // namespace

NodeId GraphBuilder::relu(NodeId x) { return push(unary_node(OpKind::kRelu, x, at(x).shape)); }

NodeId GraphBuilder::l2_normalize_rows(NodeId x) {
  return push(unary_node(OpKind::kL2NormalizeRows, x, at(x).shape));
}

NodeId GraphBuilder::softmax(NodeId x, double tau) {
  if (!(tau > 0.0)) {
    throw DomainError("node #" + std::to_string(nodes_.size()) +
                      " (softmax): temperature must be positive");
  }
  return push(unary_node(OpKind::kSoftmax, x, at(x).shape, tau));
}

NodeId GraphBuilder::log(NodeId x) { return push(unary_node(OpKind::kLog, x, at(x).shape)); }

NodeId GraphBuilder::pow(NodeId x, double exponent) {
  if (!(exponent > 0.0)) {
    throw DomainError("node #" + std::to_string(nodes_.size()) + " (pow): exponent must be positive");
  }
  return push(unary_node(OpKind::kPow, x, at(x).shape, exponent));
}

NodeId GraphBuilder::linear(NodeId x, double scale, double shift) {
  return push(unary_node(OpKind::kLinear, x, at(x).shape, scale, shift));
}

NodeId GraphBuilder::row_sum(NodeId x) {
  return push(unary_node(OpKind::kRowSum, x, Shape{at(x).shape.rows, 1}));
}

NodeId GraphBuilder::mean(NodeId x) {
  return push(unary_node(OpKind::kMean, x, Shape::fixed(1, 1)));
}

NodeId GraphBuilder::sum(NodeId x) { return push(unary_node(OpKind::kSum, x, Shape::fixed(1, 1))); }

NodeId GraphBuilder::binary(OpKind kind, NodeId a, NodeId b) {
  const Shape& as = at(a).shape;
  const Shape& bs = at(b).shape;
  const bool ok = bs == as || bs.is_scalar() || (bs.rows == as.rows && bs.cols == 1);
  if (!ok) {
    throw ShapeError("node #" + std::to_string(nodes_.size()) + " (" + std::string(op_name(kind)) +
                     "): cannot broadcast " + bs.to_string() + " onto " + as.to_string());
  }
  Node node;
  node.kind = kind;
  node.args = {a, b};
  node.shape = as;
  return push(std::move(node));
}

NodeId GraphBuilder::add(NodeId a, NodeId b) { return binary(OpKind::kAdd, a, b); }
NodeId GraphBuilder::mul(NodeId a, NodeId b) { return binary(OpKind::kMul, a, b); }
NodeId GraphBuilder::div(NodeId a, NodeId b) { return binary(OpKind::kDiv, a, b); }

Graph GraphBuilder::build(NodeId output) const {
  at(output);
  Graph graph;
  graph.nodes_.assign(nodes_.begin(), nodes_.begin() + static_cast<std::ptrdiff_t>(output) + 1);
  // Parameters declared after the output node are unreachable and dropped.
  for (auto& node : graph.nodes_) {
    if (node.kind != OpKind::kParameter) continue;
    const std::size_t old_slot = node.slot;
    node.slot = graph.parameters_.size();
    graph.parameter_names_.push_back(parameter_names_[old_slot]);
    graph.parameters_.push_back(parameters_[old_slot]);
  }
  return graph;
}

// ---------------------------------------------------------------------------
// Graph

std::string Graph::describe(NodeId id) const { return node_label(id, nodes_.at(id)); }

std::size_t Graph::find_parameter(std::string_view name) const {
  for (std::size_t i = 0; i < parameter_names_.size(); ++i) {
    if (parameter_names_[i] == name) return i;
  }
  throw Error("graph has no parameter '" + std::string(name) + "'");
}

const Matrix& Graph::parameter(std::string_view name) const {
  return parameters_[find_parameter(name)];
}

Matrix& Graph::parameter(std::string_view name) { return parameters_[find_parameter(name)]; }

std::vector<std::string> Graph::parameter_names() const { return parameter_names_; }

Matrix Graph::evaluate(const Inputs& inputs) const { return forward(inputs).output(); }

Tape Graph::forward(const Inputs& inputs) const {
  Tape tape;
  tape.values_.resize(nodes_.size());
  tape.row_norms_.resize(nodes_.size());

  std::optional<std::size_t> batch;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    const Node& node = nodes_[id];
    if (node.kind != OpKind::kInput) continue;
    auto it = inputs.find(node.name);
    if (it == inputs.end()) throw ShapeError(node_label(id, node) + ": input not bound");
    const Matrix& value = it->second;
    if (value.cols() != node.shape.cols) {
      throw ShapeError(node_label(id, node) + ": expected " + std::to_string(node.shape.cols) +
                       " columns, got " + value.shape_string());
    }
    if (node.shape.rows) {
      if (value.rows() != *node.shape.rows) {
        throw ShapeError(node_label(id, node) + ": expected " + node.shape.to_string() +
                         ", got " + value.shape_string());
      }
    } else if (batch && *batch != value.rows()) {
      throw ShapeError(node_label(id, node) + ": batch of " + std::to_string(value.rows()) +
                       " rows disagrees with " + std::to_string(*batch));
    } else {
      batch = value.rows();
    }
  }
  tape.batch_rows_ = batch.value_or(0);

  auto& vals = tape.values_;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    const Node& node = nodes_[id];
    Matrix& out = vals[id];
    auto arg = [&](std::size_t i) -> const Matrix& { return vals[node.args[i]]; };
    switch (node.kind) {
      case OpKind::kInput:
        out = inputs.find(node.name)->second;
        break;
      case OpKind::kParameter:
        out = parameters_[node.slot];
        break;
      case OpKind::kAffine: {
        out = matmul(arg(0), arg(1));
        const Matrix& bias = arg(2);
        for (std::size_t r = 0; r < out.rows(); ++r) {
          auto row = out.row(r);
          for (std::size_t c = 0; c < out.cols(); ++c) row[c] += bias(0, c);
        }
        break;
      }
      case OpKind::kRelu:
        out = arg(0);
        for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
        break;
      case OpKind::kL2NormalizeRows: {
        out = arg(0);
        auto& norms = tape.row_norms_[id];
        norms.resize(out.rows());
        for (std::size_t r = 0; r < out.rows(); ++r) {
          auto row = out.row(r);
          double sq = 0.0;
          for (double v : row) sq += v * v;
          norms[r] = std::sqrt(sq);
          if (norms[r] < kNormFloor) continue;
          for (double& v : row) v /= norms[r];
        }
        break;
      }
      case OpKind::kSoftmax: {
        const Matrix& z = arg(0);
        out = Matrix(z.rows(), z.cols());
        for (std::size_t r = 0; r < z.rows(); ++r) {
          const auto s = softmax_tau(z.row(r), node.a);
          std::copy(s.begin(), s.end(), out.row(r).begin());
        }
        break;
      }
      case OpKind::kLog:
        out = arg(0);
        for (double& v : out.values()) v = clamped_log(v);
        break;
      case OpKind::kPow:
        out = arg(0);
        for (double& v : out.values()) v = v > 0.0 ? std::pow(v, node.a) : 0.0;
        break;
      case OpKind::kAdd:
      case OpKind::kMul:
      case OpKind::kDiv: {
        const Matrix& a = arg(0);
        const Matrix& b = arg(1);
        Broadcast kind;
        try {
          kind = broadcast_kind(a, b);
        } catch (const ShapeError& e) {
          throw ShapeError(node_label(id, node) + ": " + e.what());
        }
        out = Matrix(a.rows(), a.cols());
        for (std::size_t r = 0; r < a.rows(); ++r) {
          for (std::size_t c = 0; c < a.cols(); ++c) {
            const double bv = broadcast_at(b, kind, r, c);
            if (node.kind == OpKind::kAdd) {
              out(r, c) = a(r, c) + bv;
            } else if (node.kind == OpKind::kMul) {
              out(r, c) = a(r, c) * bv;
            } else {
              out(r, c) = a(r, c) / bv;
            }
          }
        }
        break;
      }
      case OpKind::kLinear:
        out = arg(0);
        for (double& v : out.values()) v = node.a * v + node.b;
        break;
      case OpKind::kRowSum: {
        const Matrix& x = arg(0);
        out = Matrix(x.rows(), 1);
        for (std::size_t r = 0; r < x.rows(); ++r) {
          double acc = 0.0;
          for (double v : x.row(r)) acc += v;
          out(r, 0) = acc;
        }
        break;
      }
      case OpKind::kMean:
      case OpKind::kSum: {
        const Matrix& x = arg(0);
        double acc = 0.0;
        for (double v : x.values()) acc += v;
        if (node.kind == OpKind::kMean) {
          if (x.size() == 0) throw ShapeError(node_label(id, node) + ": mean of an empty matrix");
          acc /= static_cast<double>(x.size());
        }
        out = Matrix(1, 1, acc);
        break;
      }
    }
  }
  return tape;
}

GradientSet Graph::backward(const Tape& tape, double seed) const {
  if (tape.values_.size() != nodes_.size()) throw Error("tape was recorded by a different graph");
  const NodeId out_id = output_node();
  if (tape.values_[out_id].rows() != 1 || tape.values_[out_id].cols() != 1) {
    throw ShapeError(node_label(out_id, nodes_[out_id]) + ": backward needs a 1x1 output, got " +
                     tape.values_[out_id].shape_string());
  }

  const auto& vals = tape.values_;
  std::vector<Matrix> grads(nodes_.size());
  auto grad_of = [&](NodeId id) -> Matrix& {
    if (grads[id].empty() && vals[id].size() != 0) {
      grads[id] = Matrix(vals[id].rows(), vals[id].cols());
    }
    return grads[id];
  };
  grad_of(out_id)(0, 0) = seed;

  for (NodeId id = out_id + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (!node.depends_on_parameter || grads[id].empty()) continue;
    const Matrix& g = grads[id];
    auto needs = [&](std::size_t i) { return nodes_[node.args[i]].depends_on_parameter; };
    auto arg = [&](std::size_t i) -> const Matrix& { return vals[node.args[i]]; };

    switch (node.kind) {
      case OpKind::kInput:
      case OpKind::kParameter:
        break;
      case OpKind::kAffine: {
        if (needs(0)) add_into(grad_of(node.args[0]), matmul_transpose_b(g, arg(1)));
        if (needs(1)) add_into(grad_of(node.args[1]), matmul_transpose_a(arg(0), g));
        if (needs(2)) {
          Matrix& gb = grad_of(node.args[2]);
          for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
          }
        }
        break;
      }
      case OpKind::kRelu: {
        Matrix& gx = grad_of(node.args[0]);
        const Matrix& x = arg(0);
        for (std::size_t i = 0; i < x.size(); ++i) {
          if (x.values()[i] > 0.0) gx.values()[i] += g.values()[i];
        }
        break;
      }
      case OpKind::kL2NormalizeRows: {
        Matrix& gx = grad_of(node.args[0]);
        const Matrix& y = vals[id];
        const auto& norms = tape.row_norms_[id];
        for (std::size_t r = 0; r < y.rows(); ++r) {
          auto gr = g.row(r);
          auto dst = gx.row(r);
          if (norms[r] < kNormFloor) {
            for (std::size_t c = 0; c < gr.size(); ++c) dst[c] += gr[c];
            continue;
          }
          auto yr = y.row(r);
          double dot = 0.0;
          for (std::size_t c = 0; c < gr.size(); ++c) dot += yr[c] * gr[c];
          for (std::size_t c = 0; c < gr.size(); ++c) dst[c] += (gr[c] - yr[c] * dot) / norms[r];
        }
        break;
      }
      case OpKind::kSoftmax: {
        Matrix& gx = grad_of(node.args[0]);
        const Matrix& s = vals[id];
        for (std::size_t r = 0; r < s.rows(); ++r) {
          auto sr = s.row(r);
          auto gr = g.row(r);
          double dot = 0.0;
          for (std::size_t c = 0; c < sr.size(); ++c) dot += gr[c] * sr[c];
          auto dst = gx.row(r);
          for (std::size_t c = 0; c < sr.size(); ++c) dst[c] += sr[c] * (gr[c] - dot) / node.a;
        }
        break;
      }
      case OpKind::kLog: {
        Matrix& gx = grad_of(node.args[0]);
        const Matrix& x = arg(0);
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double xv = x.values()[i];
          if (xv > kProbabilityFloor) gx.values()[i] += g.values()[i] / xv;
        }
        break;
      }
      case OpKind::kPow: {
        Matrix& gx = grad_of(node.args[0]);
        const Matrix& x = arg(0);
        const double e = node.a;
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double xv = x.values()[i];
          double d;
          if (e < 1.0) {
            d = e * std::pow(std::max(xv, kProbabilityFloor), e - 1.0);
          } else {
            d = e * std::pow(std::max(xv, 0.0), e - 1.0);
          }
          gx.values()[i] += g.values()[i] * d;
        }
        break;
      }
      case OpKind::kAdd:
      case OpKind::kMul:
      case OpKind::kDiv: {
        const Matrix& a = arg(0);
        const Matrix& b = arg(1);
        const Broadcast kind = broadcast_kind(a, b);
        Matrix* ga = needs(0) ? &grad_of(node.args[0]) : nullptr;
        Matrix* gb = needs(1) ? &grad_of(node.args[1]) : nullptr;
        for (std::size_t r = 0; r < a.rows(); ++r) {
          for (std::size_t c = 0; c < a.cols(); ++c) {
            const double gv = g(r, c);
            const double av = a(r, c);
            const double bv = broadcast_at(b, kind, r, c);
            double da = 0.0;
            double db = 0.0;
            if (node.kind == OpKind::kAdd) {
              da = gv;
              db = gv;
            } else if (node.kind == OpKind::kMul) {
              da = gv * bv;
              db = gv * av;
            } else {
              da = gv / bv;
              db = -gv * av / (bv * bv);
            }
            if (ga) (*ga)(r, c) += da;
            if (gb) accumulate_broadcast(*gb, kind, r, c, db);
          }
        }
        break;
      }
      case OpKind::kLinear: {
        Matrix& gx = grad_of(node.args[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gx.values()[i] += node.a * g.values()[i];
        break;
      }
      case OpKind::kRowSum: {
        Matrix& gx = grad_of(node.args[0]);
        for (std::size_t r = 0; r < gx.rows(); ++r) {
          for (double& v : gx.row(r)) v += g(r, 0);
        }
        break;
      }
      case OpKind::kMean:
      case OpKind::kSum: {
        Matrix& gx = grad_of(node.args[0]);
        double scale = g(0, 0);
        if (node.kind == OpKind::kMean) scale /= static_cast<double>(gx.size());
        for (double& v : gx.values()) v += scale;
        break;
      }
    }
  }

  GradientSet result;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    const Node& node = nodes_[id];
    if (node.kind != OpKind::kParameter) continue;
    const Matrix& p = parameters_[node.slot];
    result.emplace(node.name, grads[id].empty() ? Matrix(p.rows(), p.cols()) : grads[id]);
  }
  return result;
}

}  // namespace sparsereg
