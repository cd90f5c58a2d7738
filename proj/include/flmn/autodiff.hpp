#pragma once

#include <map>
#include <string>
#include <vector>

#include "flmn/graph.hpp"

namespace flmn::diffmath {

using NamedTensors = std::map<std::string, Tensor>;

// Free-input values resolved to graph input order. Pointees must outlive use.
struct BoundInputs {
  std::vector<const Tensor*> by_node;  // indexed by NodeId; null for non-input nodes

  static BoundInputs resolve(const Graph& g, const NamedTensors& named);
};

// Reusable forward/backward buffers. Reusing a workspace across evaluations of
// graphs with identical node shapes avoids reallocation.
struct Workspace {
  std::vector<Tensor> values;
  std::vector<Tensor> adjoints;
  std::vector<char> has_adjoint;
};

// Evaluates nodes [first, g.size()) into ws.values. Checks finiteness of every
// produced value and throws GraphError naming the node otherwise.
void forward_range(const Graph& g, const BoundInputs& in, Workspace& ws, NodeId first = 0);

// Reverse sweep seeding d(loss)/d(loss) = 1. Forward values must be present.
// Adjoints land in ws.adjoints for every node on a path to the loss.
void backward(const Graph& g, NodeId loss, Workspace& ws);

// Spec-level entry points -------------------------------------------------

// Returns the value of each requested node.
std::vector<Tensor> evaluate(const Graph& g, const NamedTensors& inputs,
                             const std::vector<NodeId>& outputs);
Tensor evaluate_node(const Graph& g, const NamedTensors& inputs, NodeId output);

// d(loss)/d(input) for every named input; zero tensors for inputs the loss
// does not depend on. The loss node must be scalar-shaped.
NamedTensors gradient(const Graph& g, NodeId loss, const NamedTensors& inputs);

struct GradCheckOptions {
  double step = 1e-5;        // central-difference step
  double tolerance = 1e-4;   // max relative error allowed
  double denom_floor = 1e-4; // relative-error denominator floor; absorbs FD noise near zero
};

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  bool pass = true;  // vacuously true for an empty parameter set
};

// Compares reverse-mode gradients against central finite differences of the
// loss, per named input. Inputs listed in `skip` are exempt (e.g. integer-like
// data that should not be perturbed).
GradCheckReport grad_check(const Graph& g, NodeId loss, const NamedTensors& inputs,
                           const GradCheckOptions& opts = {},
                           const std::vector<std::string>& skip = {});

}  // namespace flmn::diffmath
