#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flmn/autodiff.hpp"
#include "flmn/episodes.hpp"
#include "flmn/memnet.hpp"

namespace flmn::controller {

using Eigen::VectorXd;

enum class ModelKind { kFlmn, kMann };

const char* model_kind_name(ModelKind k);
ModelKind parse_model_kind(const std::string& s);

struct ModelConfig {
  ModelKind kind = ModelKind::kFlmn;
  int image_pixels = episodes::kImagePixels;
  int label_width = 5;    // classes per episode
  int hidden_width = 100;
  int memory_rows = 20;   // rows of each constructed memory matrix
  int memory_width = 30;
  double gamma = 0.95;
  double memory_init = 1e-6;

  // Width of the read memory fed back to the controller and classifier.
  int read_width() const {
    return kind == ModelKind::kFlmn ? label_width : memory_width;
  }
  int lstm_input_width() const {
    return image_pixels + label_width + read_width() + hidden_width;
  }
  memnet::MemoryConfig memory_config() const {
    return {memory_rows, memory_width, gamma, memory_init};
  }
  void validate() const;
};

// Named trainable tensors in a fixed registration order.
struct ParamSet {
  std::vector<std::pair<std::string, diffmath::Tensor>> items;

  void add(const std::string& name, diffmath::Tensor t);
  diffmath::Tensor& at(const std::string& name);
  const diffmath::Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const;
  std::size_t count() const { return items.size(); }
  std::int64_t scalar_count() const;
  double squared_norm() const;

  diffmath::NamedTensors to_named() const;
};

// Weights uniform in +-1/sqrt(fan-in); biases zero except the forget gate's
// (held at one for stable early training); alpha zero so the write gate
// starts at 0.5.
ParamSet init_params(const ModelConfig& cfg, std::uint64_t seed);

struct ControllerState {
  VectorXd h, c, r_prev;
};
ControllerState init_controller_state(const ModelConfig& cfg);

// Plain LSTM cell update over the already concatenated [input, h_prev].
struct LstmOut {
  VectorXd h, c;
};
LstmOut lstm_step(const VectorXd& h_prev, const VectorXd& c_prev, const VectorXd& input,
                  const ParamSet& p);

// Value-level forward for one model step: LSTM update, interface projections,
// memory step, classifier logits over [h, r].
struct FlmnStepOut {
  ControllerState ctrl;
  memnet::MemoryState mem;
  memnet::InterfaceVectors iface;
  VectorXd logits;
};
FlmnStepOut controller_step(const ControllerState& ctrl, const memnet::MemoryState& mem,
                            const VectorXd& image, const VectorXd& offset_label,
                            const ParamSet& p, const ModelConfig& cfg);

struct MannStepOut {
  ControllerState ctrl;
  memnet::MannState mem;
  VectorXd key, add;
  VectorXd logits;
};
MannStepOut controller_step(const ControllerState& ctrl, const memnet::MannState& mem,
                            const VectorXd& image, const VectorXd& offset_label,
                            const ParamSet& p, const ModelConfig& cfg);

// Episode-scoped value-level forward runner (no gradients): dispatches on the
// configured kind and resets all state between episodes.
class ValueRunner {
 public:
  ValueRunner(const ModelConfig& cfg, const ParamSet& params);
  void reset();
  VectorXd step(const VectorXd& image, const VectorXd& offset_label);  // logits

 private:
  const ModelConfig cfg_;
  const ParamSet& params_;
  ControllerState ctrl_;
  memnet::MemoryState flmn_mem_;
  memnet::MannState mann_mem_;
};

// Fully unrolled differentiable episode: T controller+memory steps with a
// per-step cross-entropy against the step's target, summed into one scalar.
// Parameters are free graph inputs; episode data and the discrete least-used
// selections are baked in as constants (re-evaluating the graph keeps them
// fixed, which is the gradient-stop treatment of the usage path).
struct UnrolledEpisode {
  diffmath::Graph graph;
  diffmath::Workspace ws;   // forward values from construction
  diffmath::NodeId loss = -1;
  std::vector<diffmath::NodeId> step_logits;
  std::vector<int> predictions;  // argmax per step
  double loss_value = 0.0;
};

UnrolledEpisode unroll_episode(const ModelConfig& cfg, const ParamSet& params,
                               const episodes::Episode& episode);

// d(loss)/d(param) for an already constructed unroll, reusing the forward
// values held in its workspace. Gradients land in `grads` (same layout as
// `params`), accumulated (+=).
void accumulate_gradients(UnrolledEpisode& run, const ParamSet& params, ParamSet& grads);

// Zero-valued copy of a parameter set's layout.
ParamSet zeros_like(const ParamSet& params);

}  // namespace flmn::controller
