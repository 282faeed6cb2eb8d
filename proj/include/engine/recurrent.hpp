#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "engine/numerics.hpp"

namespace engine {

/// Parameters of one gated memory cell with diagonal peephole connections.
/// Input-side matrices are n x d, hidden-side n x n, vectors length n.
struct CellParams {
  int input_dim = 0;   // d
  int hidden_dim = 0;  // n
  Matrix W_xi, W_hi, W_xf, W_hf, W_xc, W_hc, W_xo, W_ho;
  Vector w_ci, w_cf, w_co;  // diagonal peepholes, applied elementwise
  Vector b_i, b_f, b_c, b_o;

  static CellParams zeros(int input_dim, int hidden_dim);
  /// Weights normal(0, std), biases zero. forget_bias is added to b_f.
  static CellParams random(int input_dim, int hidden_dim, double std, Rng& rng,
                           double forget_bias = 0.0);

  /// Flat views of every parameter block, in declaration order. The same
  /// order is used for gradients, the optimizer, and serialization.
  std::vector<Eigen::Map<Vector>> blocks();
  std::vector<Eigen::Map<const Vector>> blocks() const;
};

/// Gradients share the parameter layout exactly.
using CellGradients = CellParams;

struct CellState {
  Vector h;  // hidden state, |h_j| <= 1
  Vector c;  // memory cell

  static CellState zeros(int hidden_dim);
};

/// Per-frame values recorded during the forward pass, as needed for BPTT.
struct FrameRecord {
  Vector x;          // cell input
  Vector gate_i, gate_f, gate_o;
  Vector cand;       // tanh candidate
  Vector c, h;       // post-step state
};

struct ForwardTape {
  std::vector<FrameRecord> frames;

  int length() const { return static_cast<int>(frames.size()); }
  const Vector& hidden(int t) const { return frames[t].h; }
};

/// One step of the gated cell. The output gate peeks at the freshly
/// updated cell value c_t, not c_{t-1}.
std::pair<CellState, FrameRecord> cell_step(const CellParams& p,
                                            const CellState& s,
                                            const Vector& x);

/// Plain recurrent step h' = sigmoid(W_ih x + W_hh h + b_h).
Vector vanilla_rnn_step(const Matrix& W_ih, const Matrix& W_hh,
                        const Vector& b_h, const Vector& h, const Vector& x);

/// Unrolls the cell over a sequence from a zero initial state.
ForwardTape forward_sequence(const CellParams& p,
                             const std::vector<Vector>& xs);

struct BackwardResult {
  CellGradients grads;
  std::vector<Vector> dx;  // gradient w.r.t. each frame's cell input
};

/// Exact backpropagation through time. dh[t] is the upstream gradient of
/// the total loss w.r.t. h_t. If truncation is set, gradient flow from any
/// frame is cut after that many steps back.
BackwardResult backward_sequence(const CellParams& p, const ForwardTape& tape,
                                 const std::vector<Vector>& dh,
                                 std::optional<int> truncation = std::nullopt);

/// Loss over the hidden-state sequence: returns (value, dloss/dh per frame).
using SequenceLoss = std::function<std::pair<double, std::vector<Vector>>(
    const std::vector<Vector>& hs)>;

/// Central finite differences over every cell parameter; returns the max
/// relative error |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double gradient_check(const CellParams& p, const std::vector<Vector>& xs,
                      const SequenceLoss& loss, double step = 1e-5);

/// Scales all gradient blocks so their joint L2 norm is at most max_norm.
void clip_by_global_norm(std::vector<Eigen::Map<Vector>> blocks,
                         double max_norm);

}  // namespace engine
