#include "flmn/graph.hpp"

namespace flmn::diffmath {

const char* prim_kind_name(PrimKind k) {
  switch (k) {
    case PrimKind::kInput: return "input";
    case PrimKind::kConstant: return "constant";
    case PrimKind::kMatMul: return "matmul";
    case PrimKind::kAdd: return "add";
    case PrimKind::kMul: return "elementwise-multiply";
    case PrimKind::kConcat: return "concat";
    case PrimKind::kSigmoid: return "sigmoid";
    case PrimKind::kTanh: return "tanh";
    case PrimKind::kSoftmax: return "softmax";
    case PrimKind::kCosineSimRows: return "cosine-similarity-row";
    case PrimKind::kScale: return "scalar-scale";
    case PrimKind::kOneMinus: return "subtract-from-one";
    case PrimKind::kSum: return "sum";
    case PrimKind::kCrossEntropyLogits: return "cross-entropy-with-logits";
  }
  return "?";
}

std::string Graph::describe(NodeId id) const {
  const Node& n = node(id);
  std::string s = "node #" + std::to_string(id) + " (" + prim_kind_name(n.kind);
  if (!n.label.empty()) s += " '" + n.label + "'";
  s += ")";
  return s;
}

void Graph::check_input_id(NodeId id, const char* who) const {
  if (id < 0 || id >= size())
    throw GraphError(std::string(who) + ": input node id " + std::to_string(id) +
                     " out of range (graph has " + std::to_string(size()) + " nodes)");
}

NodeId Graph::push(Node n) {
  for (NodeId in : n.inputs) check_input_id(in, prim_kind_name(n.kind));
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::input(const std::string& name, Shape shape) {
  if (name.empty()) throw GraphError("input name must be non-empty");
  if (find_input(name) >= 0) throw GraphError("duplicate input name '" + name + "'");
  Node n;
  n.kind = PrimKind::kInput;
  n.shape = std::move(shape);
  n.label = name;
  NodeId id = push(std::move(n));
  inputs_.emplace_back(name, id);
  return id;
}

NodeId Graph::find_input(const std::string& name) const {
  for (const auto& [n, id] : inputs_)
    if (n == name) return id;
  return -1;
}

NodeId Graph::constant(Tensor value, std::string label) {
  Node n;
  n.kind = PrimKind::kConstant;
  n.shape = value.shape;
  n.label = std::move(label);
  n.value = std::move(value);
  return push(std::move(n));
}

void Graph::set_label(NodeId id, std::string label) {
  check_input_id(id, "set_label");
  nodes_[static_cast<std::size_t>(id)].label = std::move(label);
}

namespace {
[[noreturn]] void shape_fail(const char* kind, const std::string& detail) {
  throw GraphError(std::string(kind) + ": " + detail);
}
}  // namespace

NodeId Graph::matmul(NodeId a, NodeId b) {
  check_input_id(a, "matmul");
  check_input_id(b, "matmul");
  const Shape& sa = shape(a);
  const Shape& sb = shape(b);
  Shape out;
  if (sa.size() == 2 && sb.size() == 2) {
    if (sa[1] != sb[0])
      shape_fail("matmul", "inner dimensions differ: " + shape_str(sa) + " vs " + shape_str(sb));
    out = {sa[0], sb[1]};
  } else if (sa.size() == 2 && sb.size() == 1) {
    if (sa[1] != sb[0])
      shape_fail("matmul", "matrix-vector mismatch: " + shape_str(sa) + " vs " + shape_str(sb));
    out = {sa[0]};
  } else if (sa.size() == 1 && sb.size() == 2) {
    if (sa[0] != sb[0])
      shape_fail("matmul", "vector-matrix mismatch: " + shape_str(sa) + " vs " + shape_str(sb));
    out = {sb[1]};
  } else if (sa.size() == 1 && sb.size() == 1) {
    out = {sa[0], sb[0]};  // outer product: left is a column, right is a row
  } else {
    shape_fail("matmul", "unsupported ranks " + shape_str(sa) + ", " + shape_str(sb));
  }
  Node n;
  n.kind = PrimKind::kMatMul;
  n.inputs = {a, b};
  n.shape = std::move(out);
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  check_input_id(a, "add");
  check_input_id(b, "add");
  if (shape(a) != shape(b))
    shape_fail("add", "shapes differ: " + shape_str(shape(a)) + " vs " + shape_str(shape(b)));
  Node n;
  n.kind = PrimKind::kAdd;
  n.inputs = {a, b};
  n.shape = shape(a);
  return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  check_input_id(a, "mul");
  check_input_id(b, "mul");
  const Shape& sa = shape(a);
  const Shape& sb = shape(b);
  Shape out;
  if (sa == sb) {
    out = sa;
  } else if (sa.size() == 2 && sb.size() == 1 && sa[0] == sb[0]) {
    out = sa;  // scale row i by v(i)
  } else if (sa.size() == 1 && sb.size() == 2 && sb[0] == sa[0]) {
    out = sb;
  } else {
    shape_fail("elementwise-multiply",
               "incompatible shapes " + shape_str(sa) + " and " + shape_str(sb));
  }
  Node n;
  n.kind = PrimKind::kMul;
  n.inputs = {a, b};
  n.shape = std::move(out);
  return push(std::move(n));
}

NodeId Graph::concat(const std::vector<NodeId>& parts) {
  if (parts.empty()) shape_fail("concat", "needs at least one part");
  int total = 0;
  int rank = -1;
  for (NodeId p : parts) {
    check_input_id(p, "concat");
    const Shape& s = shape(p);
    if (s.size() > 1) shape_fail("concat", "parts must be scalars or vectors, got " + shape_str(s));
    int r = static_cast<int>(s.size());
    if (rank < 0) rank = r;
    if (r != rank) shape_fail("concat", "mixed scalar/vector parts");
    total += (r == 0) ? 1 : s[0];
  }
  Node n;
  n.kind = PrimKind::kConcat;
  n.inputs = parts;
  n.shape = {total};
  return push(std::move(n));
}

NodeId Graph::sigmoid(NodeId a) {
  check_input_id(a, "sigmoid");
  Node n;
  n.kind = PrimKind::kSigmoid;
  n.inputs = {a};
  n.shape = shape(a);
  return push(std::move(n));
}

NodeId Graph::tanh(NodeId a) {
  check_input_id(a, "tanh");
  Node n;
  n.kind = PrimKind::kTanh;
  n.inputs = {a};
  n.shape = shape(a);
  return push(std::move(n));
}

NodeId Graph::softmax(NodeId a) {
  check_input_id(a, "softmax");
  if (shape(a).size() != 1) shape_fail("softmax", "expects a vector, got " + shape_str(shape(a)));
  Node n;
  n.kind = PrimKind::kSoftmax;
  n.inputs = {a};
  n.shape = shape(a);
  return push(std::move(n));
}

NodeId Graph::cosine_sim_rows(NodeId key, NodeId mat) {
  check_input_id(key, "cosine-similarity-row");
  check_input_id(mat, "cosine-similarity-row");
  const Shape& sk = shape(key);
  const Shape& sm = shape(mat);
  if (sk.size() != 1 || sm.size() != 2 || sm[1] != sk[0])
    shape_fail("cosine-similarity-row",
               "expects key [m] and matrix [n,m], got " + shape_str(sk) + ", " + shape_str(sm));
  Node n;
  n.kind = PrimKind::kCosineSimRows;
  n.inputs = {key, mat};
  n.shape = {sm[0]};
  return push(std::move(n));
}

NodeId Graph::scale(NodeId scalar, NodeId x) {
  check_input_id(scalar, "scalar-scale");
  check_input_id(x, "scalar-scale");
  if (numel(shape(scalar)) != 1)
    shape_fail("scalar-scale", "first argument must be scalar-shaped, got " + shape_str(shape(scalar)));
  Node n;
  n.kind = PrimKind::kScale;
  n.inputs = {scalar, x};
  n.shape = shape(x);
  return push(std::move(n));
}

NodeId Graph::one_minus(NodeId a) {
  check_input_id(a, "subtract-from-one");
  Node n;
  n.kind = PrimKind::kOneMinus;
  n.inputs = {a};
  n.shape = shape(a);
  return push(std::move(n));
}

NodeId Graph::sum(NodeId a, int axis) {
  check_input_id(a, "sum");
  const Shape& s = shape(a);
  Shape out;
  if (s.size() == 1) {
    if (axis != 0) shape_fail("sum", "vector sum requires axis 0");
    out = {};
  } else if (s.size() == 2) {
    if (axis == 0)
      out = {s[1]};
    else if (axis == 1)
      out = {s[0]};
    else
      shape_fail("sum", "matrix sum requires axis 0 or 1");
  } else {
    shape_fail("sum", "expects a vector or matrix, got " + shape_str(s));
  }
  Node n;
  n.kind = PrimKind::kSum;
  n.inputs = {a};
  n.shape = std::move(out);
  n.axis = axis;
  return push(std::move(n));
}

NodeId Graph::cross_entropy_logits(NodeId logits, NodeId target) {
  check_input_id(logits, "cross-entropy-with-logits");
  check_input_id(target, "cross-entropy-with-logits");
  const Shape& sl = shape(logits);
  const Shape& st = shape(target);
  if (sl.size() != 1 || st != sl)
    shape_fail("cross-entropy-with-logits",
               "expects two equal-length vectors, got " + shape_str(sl) + ", " + shape_str(st));
  Node n;
  n.kind = PrimKind::kCrossEntropyLogits;
  n.inputs = {logits, target};
  n.shape = {};
  return push(std::move(n));
}

}  // namespace flmn::diffmath
