#include "engine/recurrent.hpp"

#include <cmath>
#include <stdexcept>

namespace engine {

namespace {

Vector sigmoid(const Vector& z) {
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

}  // namespace

CellParams CellParams::zeros(int input_dim, int hidden_dim) {
  CellParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  const int d = input_dim, n = hidden_dim;
  p.W_xi = Matrix::Zero(n, d);
  p.W_hi = Matrix::Zero(n, n);
  p.W_xf = Matrix::Zero(n, d);
  p.W_hf = Matrix::Zero(n, n);
  p.W_xc = Matrix::Zero(n, d);
  p.W_hc = Matrix::Zero(n, n);
  p.W_xo = Matrix::Zero(n, d);
  p.W_ho = Matrix::Zero(n, n);
  p.w_ci = Vector::Zero(n);
  p.w_cf = Vector::Zero(n);
  p.w_co = Vector::Zero(n);
  p.b_i = Vector::Zero(n);
  p.b_f = Vector::Zero(n);
  p.b_c = Vector::Zero(n);
  p.b_o = Vector::Zero(n);
  return p;
}

CellParams CellParams::random(int input_dim, int hidden_dim, double std,
                              Rng& rng, double forget_bias) {
  CellParams p = zeros(input_dim, hidden_dim);
  const int d = input_dim, n = hidden_dim;
  p.W_xi = randn(rng, n, d, std);
  p.W_hi = randn(rng, n, n, std);
  p.W_xf = randn(rng, n, d, std);
  p.W_hf = randn(rng, n, n, std);
  p.W_xc = randn(rng, n, d, std);
  p.W_hc = randn(rng, n, n, std);
  p.W_xo = randn(rng, n, d, std);
  p.W_ho = randn(rng, n, n, std);
  p.w_ci = randn_vec(rng, n, std);
  p.w_cf = randn_vec(rng, n, std);
  p.w_co = randn_vec(rng, n, std);
  p.b_f.array() += forget_bias;
  return p;
}

std::vector<Eigen::Map<Vector>> CellParams::blocks() {
  std::vector<Eigen::Map<Vector>> out;
  for (Matrix* m : {&W_xi, &W_hi, &W_xf, &W_hf, &W_xc, &W_hc, &W_xo, &W_ho}) {
    out.emplace_back(m->data(), m->size());
  }
  for (Vector* v : {&w_ci, &w_cf, &w_co, &b_i, &b_f, &b_c, &b_o}) {
    out.emplace_back(v->data(), v->size());
  }
  return out;
}

std::vector<Eigen::Map<const Vector>> CellParams::blocks() const {
  std::vector<Eigen::Map<const Vector>> out;
  for (const Matrix* m :
       {&W_xi, &W_hi, &W_xf, &W_hf, &W_xc, &W_hc, &W_xo, &W_ho}) {
    out.emplace_back(m->data(), m->size());
  }
  for (const Vector* v : {&w_ci, &w_cf, &w_co, &b_i, &b_f, &b_c, &b_o}) {
    out.emplace_back(v->data(), v->size());
  }
  return out;
}

CellState CellState::zeros(int hidden_dim) {
  return CellState{Vector::Zero(hidden_dim), Vector::Zero(hidden_dim)};
}

std::pair<CellState, FrameRecord> cell_step(const CellParams& p,
                                            const CellState& s,
                                            const Vector& x) {
  if (x.size() != p.input_dim || s.h.size() != p.hidden_dim ||
      s.c.size() != p.hidden_dim) {
    throw std::invalid_argument("cell_step: dimension mismatch");
  }
  FrameRecord r;
  r.x = x;
  r.gate_i = sigmoid(p.W_xi * x + p.W_hi * s.h +
                     p.w_ci.cwiseProduct(s.c) + p.b_i);
  r.gate_f = sigmoid(p.W_xf * x + p.W_hf * s.h +
                     p.w_cf.cwiseProduct(s.c) + p.b_f);
  r.cand = (p.W_xc * x + p.W_hc * s.h + p.b_c).array().tanh();
  r.c = r.gate_f.cwiseProduct(s.c) + r.gate_i.cwiseProduct(r.cand);
  r.gate_o = sigmoid(p.W_xo * x + p.W_ho * s.h +
                     p.w_co.cwiseProduct(r.c) + p.b_o);
  r.h = r.gate_o.cwiseProduct(r.c.array().tanh().matrix());
  return {CellState{r.h, r.c}, r};
}

Vector vanilla_rnn_step(const Matrix& W_ih, const Matrix& W_hh,
                        const Vector& b_h, const Vector& h, const Vector& x) {
  if (W_ih.cols() != x.size() || W_hh.cols() != h.size() ||
      W_ih.rows() != W_hh.rows() || b_h.size() != W_ih.rows()) {
    throw std::invalid_argument("vanilla_rnn_step: dimension mismatch");
  }
  return sigmoid(W_ih * x + W_hh * h + b_h);
}

ForwardTape forward_sequence(const CellParams& p,
                             const std::vector<Vector>& xs) {
  if (xs.empty()) throw std::invalid_argument("forward_sequence: empty sequence");
  ForwardTape tape;
  tape.frames.reserve(xs.size());
  CellState s = CellState::zeros(p.hidden_dim);
  for (const auto& x : xs) {
    auto [next, record] = cell_step(p, s, x);
    s = std::move(next);
    tape.frames.push_back(std::move(record));
  }
  return tape;
}

namespace {

// Single full backward sweep. dh[t] carries the upstream gradient per
// frame; flow below from_frame is suppressed (used for truncation).
void backward_sweep(const CellParams& p, const ForwardTape& tape,
                    const std::vector<Vector>& dh, int from_frame,
                    int to_frame, CellGradients& g, std::vector<Vector>* dx) {
  const int n = p.hidden_dim;
  const Vector zero = Vector::Zero(n);
  Vector dh_next = Vector::Zero(n);
  Vector dc_next = Vector::Zero(n);
  for (int t = to_frame; t >= from_frame; --t) {
    const FrameRecord& r = tape.frames[t];
    const Vector& c_prev = t > 0 ? tape.frames[t - 1].c : zero;
    const Vector& h_prev = t > 0 ? tape.frames[t - 1].h : zero;

    const Vector dht = dh[t] + dh_next;
    const Vector tanh_c = r.c.array().tanh();

    const Vector d_o = dht.cwiseProduct(tanh_c);
    const Vector da_o =
        d_o.cwiseProduct(r.gate_o.cwiseProduct(Vector::Ones(n) - r.gate_o));

    Vector dc = dht.cwiseProduct(r.gate_o)
                    .cwiseProduct((1.0 - tanh_c.array().square()).matrix()) +
                dc_next + da_o.cwiseProduct(p.w_co);

    const Vector d_i = dc.cwiseProduct(r.cand);
    const Vector da_i =
        d_i.cwiseProduct(r.gate_i.cwiseProduct(Vector::Ones(n) - r.gate_i));
    const Vector d_f = dc.cwiseProduct(c_prev);
    const Vector da_f =
        d_f.cwiseProduct(r.gate_f.cwiseProduct(Vector::Ones(n) - r.gate_f));
    const Vector da_c =
        dc.cwiseProduct(r.gate_i)
            .cwiseProduct((1.0 - r.cand.array().square()).matrix());

    g.W_xi.noalias() += da_i * r.x.transpose();
    g.W_hi.noalias() += da_i * h_prev.transpose();
    g.W_xf.noalias() += da_f * r.x.transpose();
    g.W_hf.noalias() += da_f * h_prev.transpose();
    g.W_xc.noalias() += da_c * r.x.transpose();
    g.W_hc.noalias() += da_c * h_prev.transpose();
    g.W_xo.noalias() += da_o * r.x.transpose();
    g.W_ho.noalias() += da_o * h_prev.transpose();
    g.w_ci += da_i.cwiseProduct(c_prev);
    g.w_cf += da_f.cwiseProduct(c_prev);
    g.w_co += da_o.cwiseProduct(r.c);
    g.b_i += da_i;
    g.b_f += da_f;
    g.b_c += da_c;
    g.b_o += da_o;

    if (dx) {
      (*dx)[t] += p.W_xi.transpose() * da_i + p.W_xf.transpose() * da_f +
                  p.W_xc.transpose() * da_c + p.W_xo.transpose() * da_o;
    }

    dh_next = p.W_hi.transpose() * da_i + p.W_hf.transpose() * da_f +
              p.W_hc.transpose() * da_c + p.W_ho.transpose() * da_o;
    dc_next = dc.cwiseProduct(r.gate_f) + da_i.cwiseProduct(p.w_ci) +
              da_f.cwiseProduct(p.w_cf);
  }
}

}  // namespace

BackwardResult backward_sequence(const CellParams& p, const ForwardTape& tape,
                                 const std::vector<Vector>& dh,
                                 std::optional<int> truncation) {
  const int T = tape.length();
  if (static_cast<int>(dh.size()) != T) {
    throw std::invalid_argument("backward_sequence: dh length mismatch");
  }
  BackwardResult out;
  out.grads = CellGradients::zeros(p.input_dim, p.hidden_dim);
  out.dx.assign(T, Vector::Zero(p.input_dim));

  if (!truncation) {
    backward_sweep(p, tape, dh, 0, T - 1, out.grads, &out.dx);
    return out;
  }
  const int span = std::max(*truncation, 1);
  std::vector<Vector> single(T, Vector::Zero(p.hidden_dim));
  for (int t = 0; t < T; ++t) {
    single[t] = dh[t];
    backward_sweep(p, tape, single, std::max(0, t - span + 1), t, out.grads,
                   &out.dx);
    single[t].setZero();
  }
  return out;
}

double gradient_check(const CellParams& p, const std::vector<Vector>& xs,
                      const SequenceLoss& loss, double step) {
  ForwardTape tape = forward_sequence(p, xs);
  std::vector<Vector> hs;
  hs.reserve(tape.frames.size());
  for (const auto& f : tape.frames) hs.push_back(f.h);
  auto [value, dh] = loss(hs);
  (void)value;
  BackwardResult analytic = backward_sequence(p, tape, dh);

  CellParams probe = p;
  auto probe_blocks = probe.blocks();
  auto grad_blocks = analytic.grads.blocks();

  auto eval_loss = [&]() {
    ForwardTape t2 = forward_sequence(probe, xs);
    std::vector<Vector> h2;
    h2.reserve(t2.frames.size());
    for (const auto& f : t2.frames) h2.push_back(f.h);
    return loss(h2).first;
  };

  double max_err = 0.0;
  for (std::size_t b = 0; b < probe_blocks.size(); ++b) {
    for (Eigen::Index i = 0; i < probe_blocks[b].size(); ++i) {
      const double saved = probe_blocks[b][i];
      probe_blocks[b][i] = saved + step;
      const double up = eval_loss();
      probe_blocks[b][i] = saved - step;
      const double down = eval_loss();
      probe_blocks[b][i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic_val = grad_blocks[b][i];
      const double denom =
          std::max({std::abs(analytic_val), std::abs(numeric), 1e-8});
      max_err = std::max(max_err, std::abs(analytic_val - numeric) / denom);
    }
  }
  return max_err;
}

void clip_by_global_norm(std::vector<Eigen::Map<Vector>> blocks,
                         double max_norm) {
  double sq = 0.0;
  for (const auto& b : blocks) sq += b.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (auto& b : blocks) b *= scale;
  }
}

}  // namespace engine
