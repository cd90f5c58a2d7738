#include "flmn/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace flmn::diffmath {

namespace {

void ensure_shape(Tensor& t, const Shape& s) {
  if (t.shape != s) {
    t.shape = s;
    t.data.resize(numel(s));
  }
}

using VecMap = Eigen::Map<const Eigen::VectorXd>;

Eigen::VectorXd softmax_vec(const Eigen::VectorXd& x) {
  double m = x.maxCoeff();
  Eigen::VectorXd e = (x.array() - m).exp();
  return e / e.sum();
}

}  // namespace

BoundInputs BoundInputs::resolve(const Graph& g, const NamedTensors& named) {
  BoundInputs b;
  b.by_node.assign(static_cast<std::size_t>(g.size()), nullptr);
  for (const auto& [name, id] : g.named_inputs()) {
    auto it = named.find(name);
    if (it == named.end()) throw GraphError("unbound input '" + name + "'");
    b.by_node[static_cast<std::size_t>(id)] = &it->second;
  }
  return b;
}

void forward_range(const Graph& g, const BoundInputs& in, Workspace& ws, NodeId first) {
  ws.values.resize(static_cast<std::size_t>(g.size()));
  for (NodeId id = first; id < g.size(); ++id) {
    const Node& n = g.node(id);
    Tensor& out = ws.values[static_cast<std::size_t>(id)];
    auto val = [&](int k) -> const Tensor& {
      return ws.values[static_cast<std::size_t>(n.inputs[static_cast<std::size_t>(k)])];
    };
    switch (n.kind) {
      case PrimKind::kInput: {
        std::size_t idx = static_cast<std::size_t>(id);
        if (idx >= in.by_node.size() || in.by_node[idx] == nullptr)
          throw GraphError("unbound input at " + g.describe(id));
        const Tensor& bound = *in.by_node[idx];
        if (bound.shape != n.shape)
          throw GraphError("bound value for " + g.describe(id) + " has shape " +
                           shape_str(bound.shape) + ", declared " + shape_str(n.shape));
        out = bound;
        break;
      }
      case PrimKind::kConstant:
        out = n.value;
        break;
      case PrimKind::kMatMul: {
        const Tensor& a = val(0);
        const Tensor& b = val(1);
        ensure_shape(out, n.shape);
        if (a.rank() == 2 && b.rank() == 2)
          out.as_matrix().noalias() = a.as_matrix() * b.as_matrix();
        else if (a.rank() == 2 && b.rank() == 1)
          out.data.noalias() = a.as_matrix() * b.data;
        else if (a.rank() == 1 && b.rank() == 2)
          out.data.noalias() = b.as_matrix().transpose() * a.data;
        else
          out.as_matrix().noalias() = a.data * b.data.transpose();
        break;
      }
      case PrimKind::kAdd:
        ensure_shape(out, n.shape);
        out.data = val(0).data + val(1).data;
        break;
      case PrimKind::kMul: {
        const Tensor& a = val(0);
        const Tensor& b = val(1);
        ensure_shape(out, n.shape);
        if (a.shape == b.shape) {
          out.data = a.data.cwiseProduct(b.data);
        } else if (a.rank() == 2) {
          out.as_matrix() = a.as_matrix().array().colwise() * b.data.array();
        } else {
          out.as_matrix() = b.as_matrix().array().colwise() * a.data.array();
        }
        break;
      }
      case PrimKind::kConcat: {
        ensure_shape(out, n.shape);
        Eigen::Index off = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          const Tensor& p = val(static_cast<int>(k));
          out.data.segment(off, p.data.size()) = p.data;
          off += p.data.size();
        }
        break;
      }
      case PrimKind::kSigmoid:
        ensure_shape(out, n.shape);
        out.data = 1.0 / (1.0 + (-val(0).data.array()).exp());
        break;
      case PrimKind::kTanh:
        ensure_shape(out, n.shape);
        out.data = val(0).data.array().tanh();
        break;
      case PrimKind::kSoftmax:
        ensure_shape(out, n.shape);
        out.data = softmax_vec(val(0).data);
        break;
      case PrimKind::kCosineSimRows: {
        const Tensor& key = val(0);
        const Tensor& mat = val(1);
        ensure_shape(out, n.shape);
        const double kn = key.data.norm() + kCosineEps;
        auto M = mat.as_matrix();
        for (Eigen::Index i = 0; i < M.rows(); ++i) {
          double rn = M.row(i).norm() + kCosineEps;
          out.data[i] = M.row(i).dot(key.data) / (kn * rn);
        }
        break;
      }
      case PrimKind::kScale:
        ensure_shape(out, n.shape);
        out.data = val(0).data[0] * val(1).data;
        break;
      case PrimKind::kOneMinus:
        ensure_shape(out, n.shape);
        out.data = 1.0 - val(0).data.array();
        break;
      case PrimKind::kSum: {
        const Tensor& a = val(0);
        ensure_shape(out, n.shape);
        if (a.rank() == 1)
          out.data[0] = a.data.sum();
        else if (n.axis == 0)
          out.data = a.as_matrix().colwise().sum();
        else
          out.data = a.as_matrix().rowwise().sum();
        break;
      }
      case PrimKind::kCrossEntropyLogits: {
        const Eigen::VectorXd& l = val(0).data;
        const Eigen::VectorXd& t = val(1).data;
        ensure_shape(out, n.shape);
        double m = l.maxCoeff();
        double lse = m + std::log((l.array() - m).exp().sum());
        out.data[0] = lse * t.sum() - t.dot(l);
        break;
      }
    }
    if (!out.all_finite())
      throw GraphError("non-finite value produced at " + g.describe(id));
  }
}

void backward(const Graph& g, NodeId loss, Workspace& ws) {
  if (loss < 0 || loss >= g.size()) throw GraphError("backward: loss node id out of range");
  if (numel(g.shape(loss)) != 1)
    throw GraphError("backward: loss node must be scalar-shaped, got " +
                     shape_str(g.shape(loss)));
  ws.adjoints.resize(static_cast<std::size_t>(g.size()));
  ws.has_adjoint.assign(static_cast<std::size_t>(g.size()), 0);

  auto adj = [&](NodeId id) -> Tensor& {
    std::size_t i = static_cast<std::size_t>(id);
    if (!ws.has_adjoint[i]) {
      ensure_shape(ws.adjoints[i], g.shape(id));
      ws.adjoints[i].data.setZero();
      ws.has_adjoint[i] = 1;
    }
    return ws.adjoints[i];
  };

  adj(loss).data[0] = 1.0;

  for (NodeId id = loss; id >= 0; --id) {
    std::size_t i = static_cast<std::size_t>(id);
    if (!ws.has_adjoint[i]) continue;
    const Node& n = g.node(id);
    if (n.kind == PrimKind::kInput || n.kind == PrimKind::kConstant) continue;
    const Tensor& gout = ws.adjoints[i];
    const Tensor& y = ws.values[i];
    auto val = [&](int k) -> const Tensor& {
      return ws.values[static_cast<std::size_t>(n.inputs[static_cast<std::size_t>(k)])];
    };
    switch (n.kind) {
      case PrimKind::kMatMul: {
        const Tensor& a = val(0);
        const Tensor& b = val(1);
        Tensor& da = adj(n.inputs[0]);
        Tensor& db = adj(n.inputs[1]);
        if (a.rank() == 2 && b.rank() == 2) {
          da.as_matrix().noalias() += gout.as_matrix() * b.as_matrix().transpose();
          db.as_matrix().noalias() += a.as_matrix().transpose() * gout.as_matrix();
        } else if (a.rank() == 2 && b.rank() == 1) {
          da.as_matrix().noalias() += gout.data * b.data.transpose();
          db.data.noalias() += a.as_matrix().transpose() * gout.data;
        } else if (a.rank() == 1 && b.rank() == 2) {
          da.data.noalias() += b.as_matrix() * gout.data;
          db.as_matrix().noalias() += a.data * gout.data.transpose();
        } else {
          da.data.noalias() += gout.as_matrix() * b.data;
          db.data.noalias() += gout.as_matrix().transpose() * a.data;
        }
        break;
      }
      case PrimKind::kAdd:
        adj(n.inputs[0]).data += gout.data;
        adj(n.inputs[1]).data += gout.data;
        break;
      case PrimKind::kMul: {
        const Tensor& a = val(0);
        const Tensor& b = val(1);
        if (a.shape == b.shape) {
          adj(n.inputs[0]).data += gout.data.cwiseProduct(b.data);
          adj(n.inputs[1]).data += gout.data.cwiseProduct(a.data);
        } else if (a.rank() == 2) {
          adj(n.inputs[0]).as_matrix() += gout.as_matrix().array().colwise() * b.data.array();
          adj(n.inputs[1]).data +=
              (gout.as_matrix().array() * a.as_matrix().array()).rowwise().sum().matrix();
        } else {
          adj(n.inputs[1]).as_matrix() += gout.as_matrix().array().colwise() * a.data.array();
          adj(n.inputs[0]).data +=
              (gout.as_matrix().array() * b.as_matrix().array()).rowwise().sum().matrix();
        }
        break;
      }
      case PrimKind::kConcat: {
        Eigen::Index off = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          Tensor& d = adj(n.inputs[k]);
          d.data += gout.data.segment(off, d.data.size());
          off += d.data.size();
        }
        break;
      }
      case PrimKind::kSigmoid:
        adj(n.inputs[0]).data +=
            gout.data.array() * y.data.array() * (1.0 - y.data.array());
        break;
      case PrimKind::kTanh:
        adj(n.inputs[0]).data += gout.data.array() * (1.0 - y.data.array().square());
        break;
      case PrimKind::kSoftmax: {
        double dot = gout.data.dot(y.data);
        adj(n.inputs[0]).data += y.data.array() * (gout.data.array() - dot);
        break;
      }
      case PrimKind::kCosineSimRows: {
        const Tensor& key = val(0);
        const Tensor& mat = val(1);
        Tensor& dk = adj(n.inputs[0]);
        Tensor& dm = adj(n.inputs[1]);
        const double a = key.data.norm();
        const double ag = a + kCosineEps;
        auto M = mat.as_matrix();
        auto dM = dm.as_matrix();
        for (Eigen::Index r = 0; r < M.rows(); ++r) {
          double gr = gout.data[r];
          if (gr == 0.0) continue;
          double b = M.row(r).norm();
          double bg = b + kCosineEps;
          double yr = y.data[r];
          dk.data += gr * (M.row(r).transpose() / (ag * bg));
          if (a > 0.0) dk.data -= gr * yr / (a * ag) * key.data;
          dM.row(r) += gr * (key.data.transpose() / (ag * bg));
          if (b > 0.0) dM.row(r) -= gr * yr / (b * bg) * M.row(r);
        }
        break;
      }
      case PrimKind::kScale: {
        const Tensor& s = val(0);
        const Tensor& x = val(1);
        adj(n.inputs[0]).data[0] += gout.data.dot(x.data);
        adj(n.inputs[1]).data += s.data[0] * gout.data;
        break;
      }
      case PrimKind::kOneMinus:
        adj(n.inputs[0]).data -= gout.data;
        break;
      case PrimKind::kSum: {
        const Tensor& a = val(0);
        Tensor& da = adj(n.inputs[0]);
        if (a.rank() == 1)
          da.data.array() += gout.data[0];
        else if (n.axis == 0)
          da.as_matrix().rowwise() += gout.data.transpose();
        else
          da.as_matrix().colwise() += gout.data;
        break;
      }
      case PrimKind::kCrossEntropyLogits: {
        const Eigen::VectorXd& l = val(0).data;
        const Eigen::VectorXd& t = val(1).data;
        double go = gout.data[0];
        Eigen::VectorXd p = softmax_vec(l);
        adj(n.inputs[0]).data += go * (p * t.sum() - t);
        double m = l.maxCoeff();
        double lse = m + std::log((l.array() - m).exp().sum());
        adj(n.inputs[1]).data += go * (lse - l.array()).matrix();
        break;
      }
      case PrimKind::kInput:
      case PrimKind::kConstant:
        break;
    }
  }
}

std::vector<Tensor> evaluate(const Graph& g, const NamedTensors& inputs,
                             const std::vector<NodeId>& outputs) {
  BoundInputs b = BoundInputs::resolve(g, inputs);
  Workspace ws;
  forward_range(g, b, ws);
  std::vector<Tensor> out;
  out.reserve(outputs.size());
  for (NodeId id : outputs) {
    if (id < 0 || id >= g.size()) throw GraphError("evaluate: requested node id out of range");
    out.push_back(ws.values[static_cast<std::size_t>(id)]);
  }
  return out;
}

Tensor evaluate_node(const Graph& g, const NamedTensors& inputs, NodeId output) {
  return evaluate(g, inputs, {output})[0];
}

NamedTensors gradient(const Graph& g, NodeId loss, const NamedTensors& inputs) {
  BoundInputs b = BoundInputs::resolve(g, inputs);
  Workspace ws;
  forward_range(g, b, ws);
  backward(g, loss, ws);
  NamedTensors grads;
  for (const auto& [name, id] : g.named_inputs()) {
    std::size_t i = static_cast<std::size_t>(id);
    if (ws.has_adjoint[i])
      grads[name] = ws.adjoints[i];
    else
      grads[name] = Tensor::zeros(g.shape(id));
  }
  return grads;
}

GradCheckReport grad_check(const Graph& g, NodeId loss, const NamedTensors& inputs,
                           const GradCheckOptions& opts, const std::vector<std::string>& skip) {
  if (opts.tolerance <= 0) throw GraphError("grad_check: tolerance must be > 0");
  NamedTensors analytic = gradient(g, loss, inputs);
  NamedTensors work = inputs;

  GradCheckReport report;
  for (const auto& [name, id] : g.named_inputs()) {
    if (std::find(skip.begin(), skip.end(), name) != skip.end()) continue;
    const Tensor& grad = analytic.at(name);
    Tensor& x = work.at(name);
    GradCheckEntry entry;
    entry.name = name;
    for (Eigen::Index j = 0; j < x.data.size(); ++j) {
      double orig = x.data[j];
      x.data[j] = orig + opts.step;
      double lp = evaluate_node(g, work, loss).data[0];
      x.data[j] = orig - opts.step;
      double lm = evaluate_node(g, work, loss).data[0];
      x.data[j] = orig;
      double num = (lp - lm) / (2.0 * opts.step);
      double ana = grad.data[j];
      double denom = std::max({std::abs(num), std::abs(ana), opts.denom_floor});
      double rel = std::abs(num - ana) / denom;
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    entry.pass = entry.max_rel_err < opts.tolerance;
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.pass = report.pass && entry.pass;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace flmn::diffmath
