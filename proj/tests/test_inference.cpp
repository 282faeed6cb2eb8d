#include <doctest.h>

#include <cmath>
#include <sstream>

#include "engine/inference.hpp"
#include "engine/training.hpp"

using namespace engine;

namespace {

Model make_model(Rng& rng, int input, int hidden, int classes,
                 double std = 0.5) {
  Model m;
  m.projection = ProjectionParams{randn(rng, hidden, input, std),
                                  randn_vec(rng, hidden, std)};
  // the cell consumes the projected frame, so its input dim is hidden
  m.cell = CellParams::random(hidden, hidden, std, rng);
  m.classifier = ClassifierHead::random(hidden, classes, std, rng);
  for (int c = 0; c < classes; ++c) {
    m.label_names.push_back("c" + std::to_string(c));
  }
  return m;
}

FeatureSequence random_seq(Rng& rng, int frames, int dim) {
  FeatureSequence seq;
  for (int t = 0; t < frames; ++t) seq.frames.push_back(randn_vec(rng, dim, 1.0));
  return seq;
}

}  // namespace

TEST_CASE("untrained zero model predicts uniformly with full uncertainty") {
  Model m;
  m.projection = ProjectionParams{Matrix::Zero(4, 3), Vector::Zero(4)};
  m.cell = CellParams::zeros(4, 4);
  m.classifier = ClassifierHead::zeros(4, 5);
  m.label_names = {"a", "b", "c", "d", "e"};

  Session session(m);
  const FramePrediction p = session.feed_frame(Vector::Ones(3));
  for (int i = 0; i < 5; ++i) CHECK(p.belief.probs[i] == doctest::Approx(0.2));
  CHECK(p.uncertainty == doctest::Approx(1.0));
  CHECK(p.label == 0);
}

TEST_CASE("streaming inference matches the batch trajectory bitwise") {
  Rng rng(21);
  Model m = make_model(rng, 6, 5, 4);
  for (int trial = 0; trial < 10; ++trial) {
    const FeatureSequence seq = random_seq(rng, 20, 6);
    const auto batch = belief_trajectory(m, seq);
    Session session(m);
    REQUIRE(batch.size() == 20);
    for (int t = 0; t < 20; ++t) {
      const FramePrediction p = session.feed_frame(seq.frames[t]);
      CHECK((p.belief.probs - batch[t].belief.probs).cwiseAbs().maxCoeff() ==
            0.0);
      CHECK(p.uncertainty == batch[t].uncertainty);
      CHECK(p.label == batch[t].label);
    }
  }
}

TEST_CASE("session state advances frame by frame") {
  Rng rng(22);
  Model m = make_model(rng, 4, 5, 3);
  Session session(m);
  CHECK(session.frames_fed() == 0);
  CHECK(session.state().h.norm() == 0.0);
  session.feed_frame(Vector::Ones(4));
  CHECK(session.frames_fed() == 1);
  CHECK(session.state().h.norm() > 0.0);
  CHECK_THROWS_AS(session.feed_frame(Vector::Ones(5)), std::invalid_argument);
}

TEST_CASE("converged reports a stable label only after k matching frames") {
  Rng rng(23);
  Model m = make_model(rng, 4, 5, 3);
  // force one dominant class so labels repeat
  m.classifier->b_u.setZero();
  m.classifier->b_u[2] = 50.0;
  m.classifier->W_u.setZero();

  Session session(m);
  CHECK_FALSE(session.converged(1).has_value());  // nothing fed yet
  session.feed_frame(Vector::Ones(4));
  CHECK(session.converged(1) == 2);
  CHECK_FALSE(session.converged(2).has_value());  // history shorter than k
  session.feed_frame(Vector::Ones(4));
  session.feed_frame(Vector::Ones(4));
  CHECK(session.converged(3) == 2);
  CHECK_THROWS_AS(session.converged(0), std::invalid_argument);
}

TEST_CASE("converged is empty while the label is still flapping") {
  // cell with only a strong input->candidate path: the cell sign tracks
  // the (alternating) input sign, so the label flips every frame
  Model m;
  m.projection = ProjectionParams{Matrix::Identity(1, 1), Vector::Zero(1)};
  m.cell = CellParams::zeros(1, 1);
  m.cell.W_xc(0, 0) = 10.0;
  m.classifier = ClassifierHead::zeros(1, 2);
  m.classifier->W_u(0, 0) = 5.0;
  m.classifier->W_u(1, 0) = -5.0;
  m.label_names = {"pos", "neg"};

  Session session(m);
  std::vector<int> labels;
  for (int t = 0; t < 10; ++t) {
    Vector x(1);
    x[0] = t % 2 == 0 ? 3.0 : -3.0;
    labels.push_back(session.feed_frame(x).label);
  }
  for (std::size_t i = 1; i < labels.size(); ++i) {
    CHECK(labels[i] != labels[i - 1]);
  }
  CHECK(session.converged(1).has_value());  // the last frame alone
  CHECK_FALSE(session.converged(2).has_value());
  CHECK_FALSE(session.converged(10).has_value());
}

TEST_CASE("classify_sequence weights later frames more") {
  Rng rng(25);
  Model m = make_model(rng, 4, 5, 3);

  SUBCASE("single frame reduces to the frame belief") {
    const FeatureSequence seq = random_seq(rng, 1, 4);
    const auto traj = belief_trajectory(m, seq);
    const auto cls = classify_sequence(m, seq);
    CHECK((cls.average.probs - traj[0].belief.probs).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK(cls.label == traj[0].label);
  }

  SUBCASE("two frames mix with weights 1/3 and 2/3") {
    const FeatureSequence seq = random_seq(rng, 2, 4);
    const auto traj = belief_trajectory(m, seq);
    const auto cls = classify_sequence(m, seq);
    const Vector expected =
        (1.0 / 3.0) * traj[0].belief.probs + (2.0 / 3.0) * traj[1].belief.probs;
    CHECK((cls.average.probs - expected).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("identical frames with a frozen state average to the frame belief") {
    // a model with zero recurrent weights is stateless, so every frame has
    // the same belief and any convex weighting returns it
    Model stateless = m;
    stateless.cell = CellParams::zeros(5, 5);
    FeatureSequence seq;
    const Vector x = randn_vec(rng, 4, 1.0);
    for (int t = 0; t < 7; ++t) seq.frames.push_back(x);
    const auto traj = belief_trajectory(stateless, seq);
    const auto cls = classify_sequence(stateless, seq);
    CHECK((cls.average.probs - traj[0].belief.probs).cwiseAbs().maxCoeff() <
          1e-12);
  }

  CHECK_THROWS_AS(classify_sequence(m, FeatureSequence{}),
                  std::invalid_argument);
}

TEST_CASE("classify_sequence output is a distribution") {
  Rng rng(26);
  Model m = make_model(rng, 4, 6, 5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto cls = classify_sequence(m, random_seq(rng, 15, 4));
    CHECK(cls.average.probs.sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(cls.average.probs.minCoeff() >= 0.0);
    CHECK(cls.label == predict_label(cls.average));
  }
}

TEST_CASE("estimate_forces returns one clamped row per frame") {
  Rng rng(27);
  Model m;
  m.projection = ProjectionParams{randn(rng, 5, 4, 0.5), randn_vec(rng, 5, 0.5)};
  m.cell = CellParams::random(5, 5, 0.5, rng);
  m.regressor = RegressorHead::random(5, 3, 0.5, rng);
  m.regressor->b_v << 0.5, 30.0, -30.0;  // channels 1 and 2 clamp
  m.channel_names = {"a", "b", "c"};

  const FeatureSequence seq = random_seq(rng, 12, 4);
  const ForceTrace est = estimate_forces(m, seq);
  CHECK(est.frames() == 12);
  CHECK(est.channel_count() == 3);
  CHECK(est.channels == m.channel_names);
  CHECK(est.values.minCoeff() >= 0.0);
  CHECK(est.values.maxCoeff() <= 1.0);
  for (int t = 0; t < 12; ++t) {
    CHECK(est.values(t, 1) == doctest::Approx(1.0));
    CHECK(est.values(t, 2) == doctest::Approx(0.0));
  }

  Model no_head = m;
  no_head.regressor.reset();
  CHECK_THROWS_AS(estimate_forces(no_head, seq), std::invalid_argument);
}

TEST_CASE("a constant-bias regressor emits the bias everywhere") {
  Rng rng(28);
  Model m;
  m.projection = ProjectionParams{Matrix::Zero(4, 3), Vector::Zero(4)};
  m.cell = CellParams::zeros(4, 4);
  m.regressor = RegressorHead::zeros(4, 2);
  m.regressor->b_v << 0.25, 0.75;
  const ForceTrace est = estimate_forces(m, random_seq(rng, 9, 3));
  for (int t = 0; t < 9; ++t) {
    CHECK(est.values(t, 0) == doctest::Approx(0.25));
    CHECK(est.values(t, 1) == doctest::Approx(0.75));
  }
}

TEST_CASE("write_trajectory emits one CSV record per frame") {
  Rng rng(29);
  Model m = make_model(rng, 4, 5, 3);
  const auto traj = belief_trajectory(m, random_seq(rng, 4, 4));
  std::ostringstream os;
  write_trajectory(os, traj);
  std::istringstream is(os.str());
  int lines = 0;
  for (std::string line; std::getline(is, line);) {
    if (line.empty()) continue;
    ++lines;
    // frame, 3 probabilities, uncertainty, label = 6 fields
    CHECK(std::count(line.begin(), line.end(), ',') == 5);
  }
  CHECK(lines == 4);
}
