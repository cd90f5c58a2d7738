#include "flmn/selftest.hpp"

#include <cmath>

#include "flmn/controller.hpp"
#include "flmn/csv.hpp"
#include "flmn/harness.hpp"
#include "flmn/reference.hpp"

namespace flmn::selftest {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd random_vec(Rng& rng, int n, double lo = -1.0, double hi = 1.0) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.uniform(lo, hi);
  return v;
}

GroupResult flmn_trace_group() {
  GroupResult g{"equation-oracle-flmn", true, ""};
  const int rows = 8, width = 6, label = 3, steps = 10;
  const double gamma = 0.9, init = 1e-6;
  memnet::MemoryConfig cfg{rows, width, gamma, init};
  memnet::MemoryState state = memnet::init_memory(cfg, label);
  reference::DenseFlmn ref(rows, width, label, gamma, init);
  Rng rng(41);
  double worst = 0.0;
  for (int t = 0; t < steps; ++t) {
    memnet::InterfaceVectors iface{random_vec(rng, width), random_vec(rng, width),
                                   random_vec(rng, label)};
    double alpha = rng.uniform(-2.0, 2.0);
    memnet::FlmnStepResult out = memnet::flmn_memory_step(state, iface, alpha, cfg);
    VectorXd ref_read = ref.step(iface.key, iface.add_feature, iface.add_label, alpha);
    worst = std::max(worst, (out.state.features - ref.mem_f).cwiseAbs().maxCoeff());
    worst = std::max(worst, (out.state.labels - ref.mem_l).cwiseAbs().maxCoeff());
    worst = std::max(worst, (out.state.read_w - ref.w_r).cwiseAbs().maxCoeff());
    worst = std::max(worst, (out.state.usage_w - ref.w_u).cwiseAbs().maxCoeff());
    worst = std::max(worst, (out.state.least_used_w - ref.w_lu).cwiseAbs().maxCoeff());
    worst = std::max(worst, (out.read - ref_read).cwiseAbs().maxCoeff());
    state = std::move(out.state);
  }
  g.pass = worst < 1e-9;
  g.detail = "max deviation " + format_double(worst);
  return g;
}

GroupResult mann_trace_group() {
  GroupResult g{"equation-oracle-mann", true, ""};
  const int rows = 8, width = 6, steps = 10;
  const double gamma = 0.9, init = 1e-6;
  memnet::MemoryConfig cfg{rows, width, gamma, init};
  memnet::MannState state = memnet::init_mann_memory(cfg);
  reference::DenseMann ref(rows, width, gamma, init);
  Rng rng(43);
  double worst = 0.0;
  for (int t = 0; t < steps; ++t) {
    VectorXd key = random_vec(rng, width);
    VectorXd add = random_vec(rng, width);
    double alpha = rng.uniform(-2.0, 2.0);
    memnet::MannStepResult out = memnet::mann_memory_step(state, key, add, alpha, cfg);
    VectorXd ref_read = ref.step(key, add, alpha);
    worst = std::max(worst, (out.state.memory - ref.mem).cwiseAbs().maxCoeff());
    worst = std::max(worst, (out.state.read_w - ref.w_r).cwiseAbs().maxCoeff());
    worst = std::max(worst, (out.state.usage_w - ref.w_u).cwiseAbs().maxCoeff());
    worst = std::max(worst, (out.state.least_used_w - ref.w_lu).cwiseAbs().maxCoeff());
    worst = std::max(worst, (out.read - ref_read).cwiseAbs().maxCoeff());
    state = std::move(out.state);
  }
  g.pass = worst < 1e-9;
  g.detail = "max deviation " + format_double(worst);
  return g;
}

GroupResult usage_oracle_group(bool mutate) {
  GroupResult g{"usage-oracle", true, ""};
  const int rows = 12, steps = 50;
  const double gamma = 0.9;
  const double gamma_impl = mutate ? gamma + 0.05 : gamma;
  Rng rng(47);
  VectorXd usage = VectorXd::Constant(rows, 1.0 / rows);
  VectorXd ref_usage = usage;
  double worst = 0.0;
  for (int t = 0; t < steps; ++t) {
    VectorXd w_w = random_vec(rng, rows, 0.0, 1.0);
    VectorXd w_r = random_vec(rng, rows, 0.0, 1.0);
    usage = memnet::update_usage(usage, w_w, w_r, gamma_impl);
    // Reference recurrence written out directly.
    for (int i = 0; i < rows; ++i) ref_usage[i] = gamma * ref_usage[i] + w_w[i] + w_r[i];
    worst = std::max(worst, (usage - ref_usage).cwiseAbs().maxCoeff());
  }
  g.pass = worst < 1e-9;
  g.detail = "max deviation " + format_double(worst);
  return g;
}

diffmath::NamedTensors random_inputs(const diffmath::Graph& g, Rng& rng) {
  diffmath::NamedTensors named;
  for (const auto& [name, id] : g.named_inputs()) {
    diffmath::Tensor t = diffmath::Tensor::zeros(g.shape(id));
    for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data[i] = rng.uniform(-1.5, 1.5);
    named[name] = t;
  }
  return named;
}

GroupResult gradient_group() {
  GroupResult g{"gradient-checks", true, ""};
  double worst = 0.0;
  Rng rng(53);

  // One compact graph touching every primitive kind.
  {
    diffmath::Graph gr;
    auto key = gr.input("key", {4});
    auto mat = gr.input("mat", {3, 4});
    auto vec = gr.input("vec", {3});
    auto gate = gr.input("gate", {});
    auto sims = gr.cosine_sim_rows(key, mat);
    auto w = gr.softmax(sims);
    auto scaled = gr.scale(gr.sigmoid(gate), gr.mul(w, vec));
    auto outer = gr.matmul(scaled, gr.tanh(key));
    auto cleared = gr.mul(mat, gr.one_minus(vec));
    auto combined = gr.add(outer, cleared);
    auto row = gr.matmul(vec, combined);
    auto col = gr.matmul(combined, key);
    auto joined = gr.concat({row, col, gr.sum(combined, 0), gr.sum(combined, 1)});
    auto target = gr.constant(diffmath::Tensor::full({13}, 1.0 / 13));
    auto loss = gr.cross_entropy_logits(joined, target);
    for (int s = 0; s < 5; ++s) {
      auto report = diffmath::grad_check(gr, loss, random_inputs(gr, rng));
      worst = std::max(worst, report.max_rel_err);
      if (!report.pass) g.pass = false;
    }
  }

  // Tiny full episode graph for both model kinds.
  for (auto kind : {controller::ModelKind::kFlmn, controller::ModelKind::kMann}) {
    controller::ModelConfig mcfg;
    mcfg.kind = kind;
    mcfg.image_pixels = 9;
    mcfg.label_width = 2;
    mcfg.hidden_width = 5;
    mcfg.memory_rows = 4;
    mcfg.memory_width = 6;
    episodes::ClassLibrary lib = episodes::synthetic_library(2, 3, 3, 0.2, 7);
    episodes::EpisodeBatch batch = episodes::make_episode_batch(lib, 2, 2, 1, {}, 11);
    controller::ParamSet params = controller::init_params(mcfg, 13);
    controller::UnrolledEpisode run = controller::unroll_episode(mcfg, params, batch.episodes[0]);
    diffmath::GradCheckOptions opts;
    opts.tolerance = 1e-3;
    auto report = diffmath::grad_check(run.graph, run.loss, params.to_named(), opts);
    worst = std::max(worst, report.max_rel_err);
    if (!report.pass) g.pass = false;
  }

  g.detail = "max relative error " + format_double(worst);
  return g;
}

GroupResult invariant_group() {
  GroupResult g{"invariants", true, ""};
  const int rows = 6, width = 5, label = 3;
  memnet::MemoryConfig cfg{rows, width, 0.9, 1e-6};
  memnet::MemoryState state = memnet::init_memory(cfg, label);
  Rng rng(59);
  std::string why;
  for (int t = 0; t < 200 && g.pass; ++t) {
    memnet::InterfaceVectors iface{random_vec(rng, width), random_vec(rng, width),
                                   random_vec(rng, label)};
    VectorXd w_wf_before = state.feature_write_w;
    MatrixXd labels_before = state.labels;
    memnet::FlmnStepResult out = memnet::flmn_memory_step(state, iface, rng.uniform(-2, 2), cfg);

    if (std::abs(out.state.read_w.sum() - 1.0) > 1e-9 || out.state.read_w.minCoeff() < 0.0) {
      g.pass = false;
      why = "read weights are not a simplex";
    }
    int ones = 0;
    for (int i = 0; i < rows; ++i)
      if (out.state.least_used_w[i] == 1.0) ++ones;
    if (ones != 1 || out.state.least_used_w.sum() != 1.0) {
      g.pass = false;
      why = "least-used weights are not one-hot";
    }
    if (std::abs(out.state.feature_write_w.sum() - 1.0) > 1e-9 ||
        out.state.feature_write_w.minCoeff() < 0.0 || out.state.feature_write_w.maxCoeff() > 1.0) {
      g.pass = false;
      why = "feature write weights are not a convex combination";
    }
    // Label locality: rows touched now are exactly those with nonzero previous
    // feature write weight.
    for (int i = 0; i < rows; ++i) {
      bool touched = (out.state.labels.row(i) - labels_before.row(i)).cwiseAbs().maxCoeff() > 0.0;
      bool expected = std::abs(w_wf_before[i] * iface.add_label.cwiseAbs().maxCoeff()) > 0.0;
      if (touched != expected) {
        g.pass = false;
        why = "label write locality violated at row " + std::to_string(i);
      }
    }
    state = std::move(out.state);
  }
  // Clear-before-write: a zero add vector must leave the cleared row all zero.
  {
    memnet::MemoryState s = memnet::init_memory(cfg, label);
    memnet::InterfaceVectors iface{random_vec(rng, width), VectorXd::Zero(width),
                                   random_vec(rng, label)};
    memnet::FlmnStepResult out = memnet::flmn_memory_step(s, iface, 0.0, cfg);
    Eigen::Index cleared;
    s.least_used_w.maxCoeff(&cleared);
    if (out.state.features.row(cleared).cwiseAbs().maxCoeff() != 0.0) {
      g.pass = false;
      why = "cleared row retains content after a zero write";
    }
  }
  g.detail = g.pass ? "200 random steps" : why;
  return g;
}

GroupResult protocol_group() {
  GroupResult g{"protocol", true, ""};
  episodes::ClassLibrary lib = episodes::synthetic_library(8, 6, 4, 0.1, 61);
  episodes::EpisodeBatch batch = episodes::make_episode_batch(lib, 4, 3, 50, {}, 67);
  std::string why;
  for (const auto& ep : batch.episodes) {
    if (ep.offset_labels[0].cwiseAbs().maxCoeff() != 0.0) {
      g.pass = false;
      why = "first offset label is not zero";
    }
    for (int t = 1; t < ep.length() && g.pass; ++t) {
      Eigen::VectorXd expect = Eigen::VectorXd::Zero(ep.classes);
      expect[ep.targets[static_cast<std::size_t>(t - 1)]] = 1.0;
      if ((ep.offset_labels[static_cast<std::size_t>(t)] - expect).cwiseAbs().maxCoeff() != 0.0) {
        g.pass = false;
        why = "offset label does not match previous target at step " + std::to_string(t);
      }
    }
    std::vector<int> counts(static_cast<std::size_t>(ep.classes), 0);
    for (int t : ep.targets) counts[static_cast<std::size_t>(t)] += 1;
    for (int c : counts)
      if (c != ep.samples) {
        g.pass = false;
        why = "per-class occurrence count violated";
      }
  }
  g.detail = g.pass ? "50 episodes" : why;
  return g;
}

}  // namespace

std::vector<GroupResult> run_selftest(const Options& opts) {
  std::vector<GroupResult> results;
  results.push_back(flmn_trace_group());
  results.push_back(mann_trace_group());
  results.push_back(usage_oracle_group(opts.mutate_usage_gamma));
  results.push_back(gradient_group());
  results.push_back(invariant_group());
  results.push_back(protocol_group());
  return results;
}

}  // namespace flmn::selftest
