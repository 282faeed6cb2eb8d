#include <doctest.h>

#include <cmath>

#include "engine/heads.hpp"

using namespace engine;

TEST_CASE("project") {
  SUBCASE("identity") {
    ProjectionParams p{Matrix::Identity(3, 3), Vector::Zero(3)};
    Vector x(3);
    x << 1.0, 2.0, 3.0;
    CHECK((project(p, x) - x).norm() == doctest::Approx(0.0));
  }
  SUBCASE("zero input yields the bias") {
    Rng rng(1);
    ProjectionParams p{randn(rng, 4, 3, 1.0), randn_vec(rng, 4, 1.0)};
    CHECK((project(p, Vector::Zero(3)) - p.b_p).norm() == doctest::Approx(0.0));
  }
  SUBCASE("matches scalar loops") {
    Rng rng(2);
    ProjectionParams p{randn(rng, 3, 5, 1.0), randn_vec(rng, 3, 1.0)};
    const Vector x = randn_vec(rng, 5, 1.0);
    const Vector y = project(p, x);
    for (int r = 0; r < 3; ++r) {
      double acc = p.b_p[r];
      for (int j = 0; j < 5; ++j) acc += p.W_p(r, j) * x[j];
      CHECK(y[r] == doctest::Approx(acc).epsilon(1e-12));
    }
    CHECK_THROWS_AS(project(p, Vector::Zero(4)), std::invalid_argument);
  }
}

TEST_CASE("classify_frame") {
  SUBCASE("zero head is uniform") {
    const ClassifierHead head = ClassifierHead::zeros(4, 5);
    const Distribution d = classify_frame(head, Vector::Ones(4));
    for (int i = 0; i < 5; ++i) CHECK(d.probs[i] == doctest::Approx(0.2));
  }
  SUBCASE("a big bias saturates") {
    ClassifierHead head = ClassifierHead::zeros(4, 5);
    head.b_u[0] = 10.0;
    const Distribution d = classify_frame(head, Vector::Zero(4));
    CHECK(d.probs[0] > 0.999);
  }
  SUBCASE("matches softmax(W h + b)") {
    Rng rng(3);
    const ClassifierHead head = ClassifierHead::random(4, 3, 1.0, rng);
    const Vector h = randn_vec(rng, 4, 1.0);
    const Distribution d = classify_frame(head, h);
    const Distribution expected = softmax(head.W_u * h + head.b_u);
    CHECK((d.probs - expected.probs).norm() < 1e-12);
  }
}

TEST_CASE("predict_label breaks ties to the lowest index") {
  Vector p1(3);
  p1 << 0.1, 0.7, 0.2;
  CHECK(predict_label(Distribution::from(p1)) == 1);

  Vector p2(2);
  p2 << 0.5, 0.5;
  CHECK(predict_label(Distribution::from(p2)) == 0);

  CHECK(predict_label(Distribution::from(Vector::Constant(5, 0.2))) == 0);
}

TEST_CASE("predict_label is invariant to logit shifts") {
  Rng rng(4);
  const ClassifierHead head = ClassifierHead::random(4, 5, 1.0, rng);
  for (int trial = 0; trial < 25; ++trial) {
    const Vector h = randn_vec(rng, 4, 1.0);
    const Vector logits = head.W_u * h + head.b_u;
    const int a = predict_label(softmax(logits));
    const int b = predict_label(softmax((logits.array() + 123.0).matrix()));
    CHECK(a == b);
  }
}

TEST_CASE("nll_loss") {
  Vector sure(3);
  sure << 1.0, 0.0, 0.0;
  CHECK(nll_loss({Distribution::from(sure)}, {0}) == doctest::Approx(0.0));

  const Distribution uniform5 = Distribution::from(Vector::Constant(5, 0.2));
  CHECK(nll_loss({uniform5}, {3}) == doctest::Approx(std::log(5.0)));
  CHECK(nll_loss({uniform5, uniform5}, {0, 4}) ==
        doctest::Approx(2.0 * std::log(5.0)));

  CHECK_THROWS_AS(nll_loss({uniform5}, {5}), std::invalid_argument);
  CHECK_THROWS_AS(nll_loss({uniform5}, {0, 1}), std::invalid_argument);
}

TEST_CASE("nll_loss is nonnegative") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Distribution d = softmax(randn_vec(rng, 4, 2.0));
    CHECK(nll_loss({d}, {static_cast<int>(rng.below(4))}) >= 0.0);
  }
}

TEST_CASE("regress_forces") {
  SUBCASE("zero weights yield the bias") {
    Rng rng(6);
    RegressorHead head = RegressorHead::zeros(4, 3);
    head.b_v = randn_vec(rng, 3, 1.0);
    CHECK((regress_forces(head, randn_vec(rng, 4, 1.0)) - head.b_v).norm() ==
          doctest::Approx(0.0));
    CHECK((regress_forces(head, Vector::Zero(4)) - head.b_v).norm() ==
          doctest::Approx(0.0));
  }
  SUBCASE("matches scalar loops") {
    Rng rng(7);
    const RegressorHead head = RegressorHead::random(4, 2, 1.0, rng);
    const Vector h = randn_vec(rng, 4, 1.0);
    const Vector v = regress_forces(head, h);
    for (int r = 0; r < 2; ++r) {
      double acc = head.b_v[r];
      for (int j = 0; j < 4; ++j) acc += head.W_v(r, j) * h[j];
      CHECK(v[r] == doctest::Approx(acc).epsilon(1e-12));
    }
  }
}

TEST_CASE("l2_loss") {
  ForceTrace a, b;
  a.values = Matrix::Zero(2, 4);
  b.values = Matrix::Ones(2, 4);
  CHECK(l2_loss(a, a) == doctest::Approx(0.0));
  CHECK(l2_loss(a, b) == doctest::Approx(8.0));

  ForceTrace c;
  c.values = 3.0 * Matrix::Ones(2, 4);
  // residual scaled by 3 scales the loss by 9
  CHECK(l2_loss(a, c) == doctest::Approx(9.0 * l2_loss(a, b)));

  ForceTrace wrong;
  wrong.values = Matrix::Zero(3, 4);
  CHECK_THROWS_AS(l2_loss(a, wrong), std::invalid_argument);
}
