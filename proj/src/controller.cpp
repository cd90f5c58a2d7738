#include "flmn/controller.hpp"

#include <cmath>

#include "flmn/rng.hpp"

namespace flmn::controller {

using diffmath::NodeId;
using diffmath::Shape;
using diffmath::Tensor;

const char* model_kind_name(ModelKind k) {
  return k == ModelKind::kFlmn ? "flmn" : "mann";
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "flmn") return ModelKind::kFlmn;
  if (s == "mann") return ModelKind::kMann;
  throw ConfigError("unknown model kind '" + s + "' (expected flmn or mann)");
}

void ModelConfig::validate() const {
  auto positive = [](int v, const char* what) {
    if (v <= 0) throw ConfigError(std::string(what) + " must be positive, got " + std::to_string(v));
  };
  positive(image_pixels, "image_pixels");
  positive(label_width, "label_width");
  positive(hidden_width, "hidden_width");
  positive(memory_rows, "memory_rows");
  positive(memory_width, "memory_width");
  if (!(gamma > 0.0 && gamma < 1.0))
    throw ConfigError("gamma must lie in (0,1), got " + std::to_string(gamma));
  if (memory_init <= 0.0) throw ConfigError("memory_init must be positive");
}

void ParamSet::add(const std::string& name, Tensor t) {
  if (has(name)) throw Error("duplicate parameter name '" + name + "'");
  items.emplace_back(name, std::move(t));
}

Tensor& ParamSet::at(const std::string& name) {
  for (auto& [n, t] : items)
    if (n == name) return t;
  throw Error("unknown parameter '" + name + "'");
}

const Tensor& ParamSet::at(const std::string& name) const {
  for (const auto& [n, t] : items)
    if (n == name) return t;
  throw Error("unknown parameter '" + name + "'");
}

bool ParamSet::has(const std::string& name) const {
  for (const auto& [n, t] : items)
    if (n == name) return true;
  return false;
}

std::int64_t ParamSet::scalar_count() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : items) n += t.size();
  return n;
}

double ParamSet::squared_norm() const {
  double s = 0.0;
  for (const auto& [name, t] : items) s += t.data.squaredNorm();
  return s;
}

diffmath::NamedTensors ParamSet::to_named() const {
  diffmath::NamedTensors named;
  for (const auto& [n, t] : items) named[n] = t;
  return named;
}

namespace {

Tensor uniform_init(Rng& rng, const Shape& shape, int fan_in) {
  Tensor t = Tensor::zeros(shape);
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data[i] = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

ParamSet init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(derive_seed(seed, 0xC0DE));
  const int H = cfg.hidden_width;
  const int Z = cfg.lstm_input_width();
  const int M = cfg.memory_width;
  const int L = cfg.label_width;
  const int R = cfg.read_width();

  ParamSet p;
  for (const char* gate : {"i", "f", "o", "g"}) {
    p.add(std::string("lstm.W") + gate, uniform_init(rng, {H, Z}, Z));
    p.add(std::string("lstm.b") + gate, Tensor::zeros({H}));
  }
  p.at("lstm.bf").data.setOnes();

  p.add("iface.Wk", uniform_init(rng, {M, H}, H));
  p.add("iface.bk", Tensor::zeros({M}));
  if (cfg.kind == ModelKind::kFlmn) {
    p.add("iface.Waf", uniform_init(rng, {M, H}, H));
    p.add("iface.baf", Tensor::zeros({M}));
    p.add("iface.Wal", uniform_init(rng, {L, H}, H));
    p.add("iface.bal", Tensor::zeros({L}));
  } else {
    p.add("iface.Wa", uniform_init(rng, {M, H}, H));
    p.add("iface.ba", Tensor::zeros({M}));
  }
  p.add("head.W", uniform_init(rng, {L, H + R}, H + R));
  p.add("head.b", Tensor::zeros({L}));
  p.add("alpha", Tensor::scalar(0.0));
  return p;
}

ControllerState init_controller_state(const ModelConfig& cfg) {
  ControllerState s;
  s.h = VectorXd::Zero(cfg.hidden_width);
  s.c = VectorXd::Zero(cfg.hidden_width);
  s.r_prev = VectorXd::Zero(cfg.read_width());
  return s;
}

namespace {

VectorXd affine(const ParamSet& p, const std::string& w, const std::string& b,
                const VectorXd& x) {
  return p.at(w).as_matrix() * x + p.at(b).data;
}

VectorXd sigmoid_vec(const VectorXd& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

}  // namespace

LstmOut lstm_step(const VectorXd& h_prev, const VectorXd& c_prev, const VectorXd& input,
                  const ParamSet& p) {
  VectorXd zh(input.size() + h_prev.size());
  zh << input, h_prev;
  VectorXd i = sigmoid_vec(affine(p, "lstm.Wi", "lstm.bi", zh));
  VectorXd f = sigmoid_vec(affine(p, "lstm.Wf", "lstm.bf", zh));
  VectorXd o = sigmoid_vec(affine(p, "lstm.Wo", "lstm.bo", zh));
  VectorXd g = affine(p, "lstm.Wg", "lstm.bg", zh).array().tanh();
  LstmOut out;
  out.c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
  out.h = o.cwiseProduct(out.c.array().tanh().matrix());
  return out;
}

namespace {

VectorXd classifier_logits(const ParamSet& p, const VectorXd& h, const VectorXd& r) {
  VectorXd hr(h.size() + r.size());
  hr << h, r;
  return p.at("head.W").as_matrix() * hr + p.at("head.b").data;
}

VectorXd lstm_input(const VectorXd& image, const VectorXd& offset_label, const VectorXd& r_prev) {
  VectorXd x(image.size() + offset_label.size() + r_prev.size());
  x << image, offset_label, r_prev;
  return x;
}

}  // namespace

FlmnStepOut controller_step(const ControllerState& ctrl, const memnet::MemoryState& mem,
                            const VectorXd& image, const VectorXd& offset_label,
                            const ParamSet& p, const ModelConfig& cfg) {
  if (image.size() != cfg.image_pixels)
    throw Error("controller_step: image width " + std::to_string(image.size()) +
                " does not match configured " + std::to_string(cfg.image_pixels));
  if (offset_label.size() != cfg.label_width)
    throw Error("controller_step: offset label width mismatch");

  LstmOut hc = lstm_step(ctrl.h, ctrl.c, lstm_input(image, offset_label, ctrl.r_prev), p);

  memnet::InterfaceVectors iface;
  iface.key = affine(p, "iface.Wk", "iface.bk", hc.h).array().tanh();
  iface.add_feature = affine(p, "iface.Waf", "iface.baf", hc.h);
  iface.add_label = affine(p, "iface.Wal", "iface.bal", hc.h);

  memnet::FlmnStepResult ms =
      memnet::flmn_memory_step(mem, iface, p.at("alpha").data[0], cfg.memory_config());

  FlmnStepOut out;
  out.logits = classifier_logits(p, hc.h, ms.read);
  out.ctrl = {hc.h, hc.c, ms.read};
  out.mem = std::move(ms.state);
  out.iface = std::move(iface);
  return out;
}

MannStepOut controller_step(const ControllerState& ctrl, const memnet::MannState& mem,
                            const VectorXd& image, const VectorXd& offset_label,
                            const ParamSet& p, const ModelConfig& cfg) {
  if (image.size() != cfg.image_pixels)
    throw Error("controller_step: image width mismatch");
  if (offset_label.size() != cfg.label_width)
    throw Error("controller_step: offset label width mismatch");

  LstmOut hc = lstm_step(ctrl.h, ctrl.c, lstm_input(image, offset_label, ctrl.r_prev), p);

  MannStepOut out;
  out.key = affine(p, "iface.Wk", "iface.bk", hc.h).array().tanh();
  out.add = affine(p, "iface.Wa", "iface.ba", hc.h);

  memnet::MannStepResult ms = memnet::mann_memory_step(mem, out.key, out.add,
                                                       p.at("alpha").data[0],
                                                       cfg.memory_config());
  out.logits = classifier_logits(p, hc.h, ms.read);
  out.ctrl = {hc.h, hc.c, ms.read};
  out.mem = std::move(ms.state);
  return out;
}

ValueRunner::ValueRunner(const ModelConfig& cfg, const ParamSet& params)
    : cfg_(cfg), params_(params) {
  reset();
}

void ValueRunner::reset() {
  ctrl_ = init_controller_state(cfg_);
  if (cfg_.kind == ModelKind::kFlmn)
    flmn_mem_ = memnet::init_memory(cfg_.memory_config(), cfg_.label_width);
  else
    mann_mem_ = memnet::init_mann_memory(cfg_.memory_config());
}

VectorXd ValueRunner::step(const VectorXd& image, const VectorXd& offset_label) {
  if (cfg_.kind == ModelKind::kFlmn) {
    FlmnStepOut out = controller_step(ctrl_, flmn_mem_, image, offset_label, params_, cfg_);
    ctrl_ = std::move(out.ctrl);
    flmn_mem_ = std::move(out.mem);
    return out.logits;
  }
  MannStepOut out = controller_step(ctrl_, mann_mem_, image, offset_label, params_, cfg_);
  ctrl_ = std::move(out.ctrl);
  mann_mem_ = std::move(out.mem);
  return out.logits;
}

// --- unrolled episode graph ------------------------------------------------

UnrolledEpisode unroll_episode(const ModelConfig& cfg, const ParamSet& params,
                               const episodes::Episode& ep) {
  cfg.validate();
  if (ep.length() == 0) throw Error("unroll_episode: empty episode");
  if (ep.classes != cfg.label_width)
    throw Error("unroll_episode: episode classes " + std::to_string(ep.classes) +
                " do not match configured label width " + std::to_string(cfg.label_width));
  const int T = ep.length();
  const int N = cfg.memory_rows;
  const int M = cfg.memory_width;
  const int L = cfg.label_width;

  UnrolledEpisode run;
  diffmath::Graph& g = run.graph;

  diffmath::BoundInputs bound;
  bound.by_node.resize(params.count());
  for (std::size_t i = 0; i < params.count(); ++i) {
    NodeId id = g.input(params.items[i].first, params.items[i].second.shape);
    bound.by_node[static_cast<std::size_t>(id)] = &params.items[i].second;
  }

  NodeId gate = g.sigmoid(g.find_input("alpha"));
  NodeId gate_c = g.one_minus(gate);

  NodeId mem_f = g.constant(Tensor::full({N, M}, cfg.memory_init), "mem.features");
  NodeId mem_l = cfg.kind == ModelKind::kFlmn
                     ? g.constant(Tensor::full({N, L}, cfg.memory_init), "mem.labels")
                     : -1;
  NodeId w_r_prev =
      g.constant(Tensor::full({N}, 1.0 / static_cast<double>(N)), "w_r.init");
  Tensor lu0 = Tensor::zeros({N});
  lu0.data[0] = 1.0;
  NodeId w_lu_prev = g.constant(std::move(lu0), "w_lu.init");
  NodeId w_wf_prev = -1;

  NodeId h_prev = g.constant(Tensor::zeros({cfg.hidden_width}), "h.init");
  NodeId c_prev = g.constant(Tensor::zeros({cfg.hidden_width}), "c.init");
  NodeId r_prev = g.constant(Tensor::zeros({cfg.read_width()}), "r.init");

  VectorXd usage = VectorXd::Constant(N, 1.0 / static_cast<double>(N));

  diffmath::Workspace& ws = run.ws;
  NodeId done = 0;
  auto advance = [&] {
    forward_range(g, bound, ws, done);
    done = g.size();
  };

  std::vector<NodeId> losses;
  losses.reserve(static_cast<std::size_t>(T));
  run.step_logits.reserve(static_cast<std::size_t>(T));
  run.predictions.reserve(static_cast<std::size_t>(T));

  for (int t = 0; t < T; ++t) {
    if (ep.images[static_cast<std::size_t>(t)].size() != cfg.image_pixels)
      throw Error("unroll_episode: image width mismatch at step " + std::to_string(t));
    if (ep.offset_labels[static_cast<std::size_t>(t)].size() != L)
      throw Error("unroll_episode: offset label width mismatch at step " + std::to_string(t));
    if (ep.targets[static_cast<std::size_t>(t)] < 0 || ep.targets[static_cast<std::size_t>(t)] >= L)
      throw Error("unroll_episode: target out of range at step " + std::to_string(t));
    NodeId x = g.constant(Tensor::from_vector(ep.images[static_cast<std::size_t>(t)]));
    NodeId y = g.constant(Tensor::from_vector(ep.offset_labels[static_cast<std::size_t>(t)]));

    NodeId zh = g.concat({x, y, r_prev, h_prev});
    NodeId gi = g.sigmoid(g.add(g.matmul(g.find_input("lstm.Wi"), zh), g.find_input("lstm.bi")));
    NodeId gf = g.sigmoid(g.add(g.matmul(g.find_input("lstm.Wf"), zh), g.find_input("lstm.bf")));
    NodeId go = g.sigmoid(g.add(g.matmul(g.find_input("lstm.Wo"), zh), g.find_input("lstm.bo")));
    NodeId gg = g.tanh(g.add(g.matmul(g.find_input("lstm.Wg"), zh), g.find_input("lstm.bg")));
    NodeId c = g.add(g.mul(gf, c_prev), g.mul(gi, gg));
    NodeId h = g.mul(go, g.tanh(c));

    NodeId key =
        g.tanh(g.add(g.matmul(g.find_input("iface.Wk"), h), g.find_input("iface.bk")));

    NodeId w_r;
    NodeId r;
    if (cfg.kind == ModelKind::kFlmn) {
      NodeId add_f =
          g.add(g.matmul(g.find_input("iface.Waf"), h), g.find_input("iface.baf"));
      NodeId add_l =
          g.add(g.matmul(g.find_input("iface.Wal"), h), g.find_input("iface.bal"));
      if (w_wf_prev >= 0) mem_l = g.add(mem_l, g.matmul(w_wf_prev, add_l));

      w_r = g.softmax(g.cosine_sim_rows(key, mem_f));
      r = g.matmul(w_r, mem_l);

      NodeId w_wf = g.add(g.scale(gate, w_r_prev), g.scale(gate_c, w_lu_prev));
      mem_f = g.add(g.mul(mem_f, g.one_minus(w_lu_prev)), g.matmul(w_wf, add_f));
      w_wf_prev = w_wf;
    } else {
      NodeId add_v = g.add(g.matmul(g.find_input("iface.Wa"), h), g.find_input("iface.ba"));
      w_r = g.softmax(g.cosine_sim_rows(key, mem_f));
      r = g.matmul(w_r, mem_f);
      NodeId w_w = g.add(g.scale(gate, w_r_prev), g.scale(gate_c, w_lu_prev));
      mem_f = g.add(g.mul(mem_f, g.one_minus(w_lu_prev)), g.matmul(w_w, add_v));
      w_wf_prev = w_w;
    }

    NodeId logits = g.add(g.matmul(g.find_input("head.W"), g.concat({h, r})),
                          g.find_input("head.b"));
    run.step_logits.push_back(logits);

    Tensor target = Tensor::zeros({L});
    target.data[ep.targets[static_cast<std::size_t>(t)]] = 1.0;
    losses.push_back(g.cross_entropy_logits(logits, g.constant(std::move(target))));

    h_prev = h;
    c_prev = c;
    r_prev = r;
    w_r_prev = w_r;

    advance();

    // Discrete least-used bookkeeping: outside the differentiable graph, the
    // resulting one-hot re-enters the next step as a constant.
    const VectorXd& wr_val = ws.values[static_cast<std::size_t>(w_r)].data;
    const VectorXd& ww_val = ws.values[static_cast<std::size_t>(w_wf_prev)].data;
    usage = cfg.gamma * usage + ww_val + wr_val;
    if (t + 1 < T)
      w_lu_prev = g.constant(Tensor::from_vector(memnet::least_used(usage)), "w_lu");

    const VectorXd& lv = ws.values[static_cast<std::size_t>(logits)].data;
    Eigen::Index arg = 0;
    lv.maxCoeff(&arg);
    run.predictions.push_back(static_cast<int>(arg));
  }

  run.loss = g.sum(g.concat(losses), 0);
  advance();
  run.loss_value = ws.values[static_cast<std::size_t>(run.loss)].data[0];
  return run;
}

void accumulate_gradients(UnrolledEpisode& run, const ParamSet& params, ParamSet& grads) {
  diffmath::backward(run.graph, run.loss, run.ws);
  const auto& named = run.graph.named_inputs();
  for (std::size_t i = 0; i < params.count(); ++i) {
    NodeId id = named[i].second;
    if (run.ws.has_adjoint[static_cast<std::size_t>(id)])
      grads.items[i].second.data += run.ws.adjoints[static_cast<std::size_t>(id)].data;
  }
}

ParamSet zeros_like(const ParamSet& params) {
  ParamSet z;
  for (const auto& [name, t] : params.items) z.add(name, Tensor::zeros(t.shape));
  return z;
}

}  // namespace flmn::controller
