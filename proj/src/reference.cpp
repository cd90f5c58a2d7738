#include "flmn/reference.hpp"

#include <cmath>

namespace flmn::reference {

namespace {

double dot(const VectorXd& a, const VectorXd& b) {
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const VectorXd& a) { return std::sqrt(dot(a, a)); }

VectorXd softmax(const VectorXd& x) {
  VectorXd e(x.size());
  double total = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    e[i] = std::exp(x[i]);
    total += e[i];
  }
  for (int i = 0; i < x.size(); ++i) e[i] /= total;
  return e;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

DenseFlmn::DenseFlmn(int rows_, int width_, int label_width_, double gamma_, double init_value)
    : rows(rows_), width(width_), label_width(label_width_), gamma(gamma_) {
  mem_f = MatrixXd::Constant(rows, width, init_value);
  mem_l = MatrixXd::Constant(rows, label_width, init_value);
  w_r = VectorXd::Constant(rows, 1.0 / rows);
  w_u = VectorXd::Constant(rows, 1.0 / rows);
  w_lu = VectorXd::Zero(rows);
  w_lu[0] = 1.0;
  w_wf_prev = VectorXd::Zero(rows);
}

VectorXd DenseFlmn::step(const VectorXd& key, const VectorXd& add_f, const VectorXd& add_l,
                         double alpha) {
  // Label write weights follow the previous feature write.
  w_wl = w_wf_prev;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < label_width; ++j) mem_l(i, j) += w_wl[i] * add_l[j];

  // Cosine addressing against the feature memory, then softmax.
  sims.resize(rows);
  double kn = norm(key);
  for (int i = 0; i < rows; ++i) {
    VectorXd row = mem_f.row(i).transpose();
    sims[i] = dot(key, row) / ((kn + eps) * (norm(row) + eps));
  }
  VectorXd w_r_new = softmax(sims);

  // Read from the label memory.
  read = VectorXd::Zero(label_width);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < label_width; ++j) read[j] += w_r_new[i] * mem_l(i, j);

  // Gated write weights from the previous read / least-used weights.
  double g = sigmoid(alpha);
  w_wf.resize(rows);
  for (int i = 0; i < rows; ++i) w_wf[i] = g * w_r[i] + (1.0 - g) * w_lu[i];

  // Clear the least-used row, then add.
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < width; ++j) mem_f(i, j) *= 1.0 - w_lu[i];
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < width; ++j) mem_f(i, j) += w_wf[i] * add_f[j];

  // Usage decay and least-used selection (lowest index on ties).
  for (int i = 0; i < rows; ++i) w_u[i] = gamma * w_u[i] + w_wf[i] + w_r_new[i];
  int arg = 0;
  for (int i = 1; i < rows; ++i)
    if (w_u[i] < w_u[arg]) arg = i;
  w_lu = VectorXd::Zero(rows);
  w_lu[arg] = 1.0;

  w_r = w_r_new;
  w_wf_prev = w_wf;
  return read;
}

DenseMann::DenseMann(int rows_, int width_, double gamma_, double init_value)
    : rows(rows_), width(width_), gamma(gamma_) {
  mem = MatrixXd::Constant(rows, width, init_value);
  w_r = VectorXd::Constant(rows, 1.0 / rows);
  w_u = VectorXd::Constant(rows, 1.0 / rows);
  w_lu = VectorXd::Zero(rows);
  w_lu[0] = 1.0;
  w_w_prev = VectorXd::Zero(rows);
}

VectorXd DenseMann::step(const VectorXd& key, const VectorXd& add, double alpha) {
  sims.resize(rows);
  double kn = norm(key);
  for (int i = 0; i < rows; ++i) {
    VectorXd row = mem.row(i).transpose();
    sims[i] = dot(key, row) / ((kn + eps) * (norm(row) + eps));
  }
  VectorXd w_r_new = softmax(sims);

  read = VectorXd::Zero(width);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < width; ++j) read[j] += w_r_new[i] * mem(i, j);

  double g = sigmoid(alpha);
  w_w.resize(rows);
  for (int i = 0; i < rows; ++i) w_w[i] = g * w_r[i] + (1.0 - g) * w_lu[i];

  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < width; ++j) mem(i, j) *= 1.0 - w_lu[i];
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < width; ++j) mem(i, j) += w_w[i] * add[j];

  for (int i = 0; i < rows; ++i) w_u[i] = gamma * w_u[i] + w_w[i] + w_r_new[i];
  int arg = 0;
  for (int i = 1; i < rows; ++i)
    if (w_u[i] < w_u[arg]) arg = i;
  w_lu = VectorXd::Zero(rows);
  w_lu[arg] = 1.0;

  w_r = w_r_new;
  w_w_prev = w_w;
  return read;
}

DenseLstmState dense_lstm_step(const DenseLstmParams& p, const DenseLstmState& s,
                               const VectorXd& x) {
  const int hidden = static_cast<int>(s.h.size());
  VectorXd zh(x.size() + hidden);
  for (int i = 0; i < x.size(); ++i) zh[i] = x[i];
  for (int i = 0; i < hidden; ++i) zh[x.size() + i] = s.h[i];

  auto gate = [&](const MatrixXd& W, const VectorXd& b, bool tanh_act) {
    VectorXd out(hidden);
    for (int i = 0; i < hidden; ++i) {
      double acc = b[i];
      for (int j = 0; j < zh.size(); ++j) acc += W(i, j) * zh[j];
      out[i] = tanh_act ? std::tanh(acc) : sigmoid(acc);
    }
    return out;
  };

  VectorXd gi = gate(p.Wi, p.bi, false);
  VectorXd gf = gate(p.Wf, p.bf, false);
  VectorXd go = gate(p.Wo, p.bo, false);
  VectorXd gg = gate(p.Wg, p.bg, true);

  DenseLstmState out;
  out.c.resize(hidden);
  out.h.resize(hidden);
  for (int i = 0; i < hidden; ++i) {
    out.c[i] = gf[i] * s.c[i] + gi[i] * gg[i];
    out.h[i] = go[i] * std::tanh(out.c[i]);
  }
  return out;
}

}  // namespace flmn::reference
