#pragma once

#include <string>
#include <vector>

#include "flmn/tensor.hpp"

namespace flmn::diffmath {

// Norm guard for cosine similarity; added to each norm so near-zero rows stay defined.
inline constexpr double kCosineEps = 1e-8;

// The closed set of primitives. Every model computation is built from these.
enum class PrimKind {
  kInput,      // named free input, bound at evaluation time
  kConstant,   // value baked into the graph
  kMatMul,     // [m,k]x[k,n] -> [m,n]; [m,k]x[k] -> [m]; [k]x[k,n] -> [n]; [m]x[n] -> [m,n] (outer)
  kAdd,        // same shape
  kMul,        // same shape elementwise; ([r,c],[r]) or ([r],[r,c]) scales row i by v(i)
  kConcat,     // rank-0s -> [k]; rank-1s -> [sum]
  kSigmoid,
  kTanh,
  kSoftmax,        // rank-1, last (only) axis
  kCosineSimRows,  // ([m], [n,m]) -> [n]; guarded by kCosineEps on both norms
  kScale,          // (scalar, X) -> X scaled
  kOneMinus,       // 1 - x elementwise
  kSum,            // rank-1 axis 0 -> scalar; rank-2 axis 0 -> [cols], axis 1 -> [rows]
  kCrossEntropyLogits,  // (logits [n], target [n]) -> scalar, stable log-sum-exp form
};

const char* prim_kind_name(PrimKind k);

using NodeId = int;

struct Node {
  PrimKind kind{};
  std::vector<NodeId> inputs;
  Shape shape;
  int axis = 0;        // kSum only
  std::string label;   // kInput: binding name; otherwise optional debug tag
  Tensor value;        // kConstant only
};

// Append-only computation graph. Construction validates each primitive's shape
// rule, so stored nodes are topologically ordered and shape-consistent.
class Graph {
 public:
  NodeId input(const std::string& name, Shape shape);
  NodeId constant(Tensor value, std::string label = "");

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId concat(const std::vector<NodeId>& parts);
  NodeId sigmoid(NodeId a);
  NodeId tanh(NodeId a);
  NodeId softmax(NodeId a);
  NodeId cosine_sim_rows(NodeId key, NodeId mat);
  NodeId scale(NodeId scalar, NodeId x);
  NodeId one_minus(NodeId a);
  NodeId sum(NodeId a, int axis);
  NodeId cross_entropy_logits(NodeId logits, NodeId target);

  void set_label(NodeId id, std::string label);

  const Node& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const Shape& shape(NodeId id) const { return node(id).shape; }

  // Named free inputs in registration order.
  const std::vector<std::pair<std::string, NodeId>>& named_inputs() const { return inputs_; }
  NodeId find_input(const std::string& name) const;  // -1 if absent

  std::string describe(NodeId id) const;

 private:
  NodeId push(Node n);
  void check_input_id(NodeId id, const char* who) const;

  std::vector<Node> nodes_;
  std::vector<std::pair<std::string, NodeId>> inputs_;
};

}  // namespace flmn::diffmath
