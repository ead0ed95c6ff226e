// Copyright 2026 The runwayseq Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>

#include "runwayseq/gradcheck.hpp"
#include "runwayseq/optimizer.hpp"
#include "runwayseq/tensor.hpp"
#include "test_util.hpp"

using namespace runwayseq;
using runwayseq::testing::random_matrix;
using runwayseq::testing::random_vector;

namespace {

// Central difference of a scalar function of one vector.
template <typename F>
Vector numeric_grad(F f, Vector x, double eps = 1e-6) {
  Vector g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const double saved = x(i);
    x(i) = saved + eps;
    const double up = f(x);
    x(i) = saved - eps;
    const double down = f(x);
    x(i) = saved;
    g(i) = (up - down) / (2 * eps);
  }
  return g;
}

double max_rel(const Vector& a, const Vector& b) {
  double worst = 0.0;
  for (Index i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a(i) - b(i)) /
                                std::max(1e-8, std::abs(a(i)) + std::abs(b(i))));
  return worst;
}

}  // namespace

TEST_CASE("linear_forward") {
  Vector x(2), b(2);
  x << 3, 4;
  b << 0, 0;
  CHECK(linear_forward(Matrix::Identity(2, 2), x, b) == x);

  Matrix W(2, 2);
  W << 1, 1, 1, -1;
  x << 2, 5;
  b << 1, 0;
  const Vector y = linear_forward(W, x, b);
  CHECK(y(0) == 8.0);
  CHECK(y(1) == -3.0);

  CHECK_THROWS_AS(linear_forward(Matrix::Zero(3, 2), Vector::Zero(3), Vector::Zero(3)),
                  ShapeError);
}

TEST_CASE("linear_backward") {
  Vector x(2), g(2);
  x << 1, 0;
  g << 1, 1;
  const auto grads = linear_backward(Matrix::Identity(2, 2), x, g);
  CHECK(grads.x == g);
  CHECK(grads.b == g);

  const auto zero = linear_backward(Matrix::Identity(2, 2), x, Vector::Zero(2));
  CHECK(zero.W.isZero(0));
  CHECK(zero.x.isZero(0));
  CHECK(zero.b.isZero(0));

  SUBCASE("matches finite differences through a probe loss") {
    Rng rng(3);
    Matrix W = random_matrix(3, 4, rng);
    Vector xv = random_vector(4, rng);
    Vector bv = random_vector(3, rng);
    const Vector probe = random_vector(3, rng);
    const auto loss = [&] { return probe.dot(linear_forward(W, xv, bv)); };
    const auto lg = linear_backward(W, xv, probe);
    const auto res = finite_difference_check(loss, {flat(W), flat(xv), flat(bv)},
                                             {flat(lg.W), flat(lg.x), flat(lg.b)});
    CHECK(res.max_rel_error < 1e-5);
  }
  CHECK_THROWS_AS(linear_backward(Matrix::Zero(2, 3), Vector::Zero(2), Vector::Zero(2)),
                  ShapeError);
}

TEST_CASE("softmax") {
  const Vector u = softmax(Vector::Zero(4));
  for (Index i = 0; i < 4; ++i) CHECK(u(i) == doctest::Approx(0.25).epsilon(1e-15));

  Vector big(2);
  big << 1000, 0;
  const Vector s = softmax(big);
  CHECK(s.allFinite());
  CHECK(s(0) == doctest::Approx(1.0));
  CHECK(s(1) == doctest::Approx(0.0));

  Vector l2(2);
  l2 << std::log(2.0), 0;
  const Vector t = softmax(l2);
  CHECK(t(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(t(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  CHECK_THROWS_AS(softmax(Vector(0)), ShapeError);

  SUBCASE("simplex for inputs up to magnitude 1e3") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
      const Index n = 1 + static_cast<Index>(rng.below(300));
      Vector v(n);
      for (Index i = 0; i < n; ++i) v(i) = rng.uniform(-1e3, 1e3);
      const Vector p = softmax(v);
      CHECK(std::abs(p.sum() - 1.0) <= 1e-12);
      CHECK((p.array() >= 0).all());
      CHECK((p.array() <= 1).all());
    }
  }
}

TEST_CASE("cross_entropy") {
  const Vector uniform = Vector::Constant(202, 1.0 / 202);
  const auto ce = cross_entropy(uniform, 17);
  CHECK(ce.loss == doctest::Approx(5.308267697401205).epsilon(1e-12));

  Vector onehot = Vector::Zero(5);
  onehot(2) = 1.0;
  CHECK(cross_entropy(onehot, 2).loss == 0.0);

  CHECK_THROWS_AS(cross_entropy(uniform, 202), std::out_of_range);
  CHECK_THROWS_AS(cross_entropy(uniform, -1), std::out_of_range);

  SUBCASE("logit gradient matches finite differences") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      const Vector logits = random_vector(6, rng, 2.0);
      const Index label = static_cast<Index>(rng.below(6));
      const auto f = [label](const Vector& z) { return cross_entropy(softmax(z), label).loss; };
      const auto analytic = cross_entropy(softmax(logits), label).grad_logits;
      CHECK(max_rel(analytic, numeric_grad(f, logits)) < 1e-5);
    }
  }
}

TEST_CASE("maxpool_columns") {
  Matrix one(1, 3);
  one << 4, -2, 7;
  const auto single = maxpool_columns(one);
  CHECK(single.values == one.row(0).transpose());
  CHECK((single.argmax.array() == 0).all());

  Matrix two(2, 2);
  two << 1, 5, 3, 2;
  const auto p = maxpool_columns(two);
  CHECK(p.values(0) == 3);
  CHECK(p.values(1) == 5);
  CHECK(p.argmax(0) == 1);
  CHECK(p.argmax(1) == 0);

  Matrix tie(2, 1);
  tie << 2, 2;
  CHECK(maxpool_columns(tie).argmax(0) == 0);

  CHECK_THROWS_AS(maxpool_columns(Matrix(0, 3)), ShapeError);

  SUBCASE("backprop routes only to argmax and matches finite differences") {
    Rng rng(9);
    Matrix rows = random_matrix(4, 5, rng);
    const Vector probe = random_vector(5, rng);
    const auto pooled = maxpool_columns(rows);
    const Matrix grad = maxpool_backward(probe, pooled.argmax, rows.rows());
    for (Index j = 0; j < 5; ++j)
      for (Index i = 0; i < 4; ++i)
        CHECK(grad(i, j) == (i == pooled.argmax(j) ? probe(j) : 0.0));
    const auto loss = [&] { return probe.dot(maxpool_columns(rows).values); };
    const auto res = finite_difference_check(loss, {flat(rows)}, {flat(grad)});
    CHECK(res.max_rel_error < 1e-5);
  }
}

TEST_CASE("activations") {
  CHECK(std::tanh(0.0) == 0.0);
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(tanh_grad_from_output(Vector::Zero(1))(0) == 1.0);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) == 1.0);

  Rng rng(1);
  const Vector z = random_vector(50, rng, 2.0);
  const Vector t = tanh_forward(z);
  const Vector s = sigmoid_forward(z);
  const Vector dt = tanh_grad_from_output(t);
  const Vector ds = sigmoid_grad_from_output(s);
  for (Index i = 0; i < z.size(); ++i) {
    const double h = 1e-5;
    const double fd_t = (std::tanh(z(i) + h) - std::tanh(z(i) - h)) / (2 * h);
    const double fd_s = (sigmoid(z(i) + h) - sigmoid(z(i) - h)) / (2 * h);
    CHECK(std::abs(fd_t - dt(i)) / (std::abs(fd_t) + std::abs(dt(i))) < 1e-7);
    CHECK(std::abs(fd_s - ds(i)) / (std::abs(fd_s) + std::abs(ds(i))) < 1e-7);
  }
}

TEST_CASE("cosine_distance") {
  Vector a(3);
  a << 1, 2, 3;
  CHECK(cosine_distance(a, a).distance == 0.0);

  Vector e0(2), e1(2), neg(2);
  e0 << 1, 0;
  e1 << 0, 1;
  neg << -1, 0;
  CHECK(cosine_distance(e0, e1).distance == 1.0);
  CHECK(cosine_distance(e0, neg).distance == 2.0);

  const auto degenerate = cosine_distance(Vector::Zero(3), a);
  CHECK(degenerate.distance == 1.0);
  CHECK(degenerate.grad_a.isZero(0));
  CHECK(degenerate.grad_b.isZero(0));
  CHECK(cosine_similarity(Vector::Zero(3), a) == 0.0);
  CHECK_THROWS_AS(cosine_distance(e0, a), ShapeError);

  SUBCASE("identity, symmetry, range and gradients") {
    Rng rng(21);
    for (int trial = 0; trial < 100; ++trial) {
      const Index n = 1 + static_cast<Index>(rng.below(20));
      const Vector x = random_vector(n, rng, rng.uniform(0.01, 100));
      const Vector y = random_vector(n, rng);
      CHECK(cosine_distance(x, x).distance == 0.0);
      const double dxy = cosine_distance(x, y).distance;
      CHECK(dxy == cosine_distance(y, x).distance);
      CHECK(dxy >= 0.0);
      CHECK(dxy <= 2.0);
    }
    const Vector x = random_vector(7, rng);
    const Vector y = random_vector(7, rng);
    const auto cd = cosine_distance(x, y);
    CHECK(max_rel(cd.grad_a, numeric_grad([&](const Vector& v) { return cosine_distance(v, y).distance; }, x)) < 1e-5);
    CHECK(max_rel(cd.grad_b, numeric_grad([&](const Vector& v) { return cosine_distance(x, v).distance; }, y)) < 1e-5);
  }
}

TEST_CASE("xavier_init") {
  Rng rng(123);
  const Matrix m = xavier_init(256, 512, rng);
  const double bound = std::sqrt(6.0 / 768.0);
  CHECK(bound == doctest::Approx(0.0884).epsilon(1e-3));
  CHECK(m.cwiseAbs().maxCoeff() <= bound);

  Rng again(123);
  CHECK(xavier_init(256, 512, again) == m);

  SUBCASE("sample mean is within 3 sigma of zero") {
    Rng r(99);
    const Matrix big = xavier_init(100, 1000, r);
    const double b = std::sqrt(6.0 / 1100.0);
    const double sigma_mean = (b / std::sqrt(3.0)) / std::sqrt(1e5);
    CHECK(std::abs(big.mean()) < 3 * sigma_mean);
  }
  CHECK_THROWS_AS(xavier_init(0, 3, rng), ShapeError);
}

TEST_CASE("Rng is deterministic and in range") {
  Rng a(77), b(77);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(a.below(7) == b.below(7));
    CHECK(a.normal() == b.normal());
  }
  CHECK(mix_seed(1, 2) != mix_seed(1, 3));
  CHECK(mix_seed(1, 2) == mix_seed(1, 2));
}

TEST_CASE("adam_step") {
  Vector x = Vector::Constant(4, 0.5);
  const Vector g = Vector::Ones(4);
  AdamState st;  // lr 1e-4
  adam_step({flat(x)}, {flat(g)}, st);
  CHECK(st.step_count == 1);
  // Bias-corrected first step: lr * g / (|g| + eps).
  const double expected = 1e-4 * 1.0 / (1.0 + 1e-8);
  for (Index i = 0; i < 4; ++i) CHECK((0.5 - x(i)) == doctest::Approx(expected).epsilon(1e-12));
  adam_step({flat(x)}, {flat(g)}, st);
  CHECK(st.step_count == 2);

  Vector y = Vector::Constant(3, 2.0);
  const Vector zero = Vector::Zero(3);
  AdamState fresh;
  adam_step({flat(y)}, {flat(zero)}, fresh);
  CHECK(y == Vector::Constant(3, 2.0));

  Vector wrong = Vector::Zero(2);
  CHECK_THROWS_AS(adam_step({flat(y)}, {flat(wrong)}, fresh), ShapeError);
  Vector other = Vector::Zero(5);
  const Vector other_g = Vector::Zero(5);
  CHECK_THROWS_AS(adam_step({flat(other)}, {flat(other_g)}, fresh), ShapeError);
}

TEST_CASE("adadelta_step against a scalar trace") {
  const double rho = 0.95, eps = 1e-6;
  const double grads[5] = {1.0, 1.0, -0.5, 2.0, 0.25};

  // Scalar recursion written out independently.
  double x_ref = 0.3, eg2 = 0.0, edx2 = 0.0;
  double first_update = 0.0;
  for (int k = 0; k < 5; ++k) {
    const double g = grads[k];
    eg2 = rho * eg2 + (1 - rho) * g * g;
    const double dx = -std::sqrt(edx2 + eps) / std::sqrt(eg2 + eps) * g;
    edx2 = rho * edx2 + (1 - rho) * dx * dx;
    x_ref += dx;
    if (k == 0) first_update = dx;
  }
  CHECK(first_update == doctest::Approx(-std::sqrt(eps) / std::sqrt(0.05 + eps)));

  Vector x = Vector::Constant(2, 0.3);
  AdaDeltaState st;
  for (double g : grads) {
    const Vector gv = Vector::Constant(2, g);
    adadelta_step({flat(x)}, {flat(gv)}, st);
  }
  CHECK(x(0) == doctest::Approx(x_ref).epsilon(1e-14));
  CHECK(x(1) == x(0));

  Vector y = Vector::Constant(2, 1.0);
  const Vector zero = Vector::Zero(2);
  AdaDeltaState fresh;
  adadelta_step({flat(y)}, {flat(zero)}, fresh);
  CHECK(y == Vector::Constant(2, 1.0));
}

TEST_CASE("finite_difference_check") {
  Vector x(2);
  x << 1, 2;
  const Vector g = 2 * x;
  const auto res = finite_difference_check([&] { return x.squaredNorm(); }, {flat(x)}, {flat(g)});
  CHECK(res.max_rel_error < 1e-8);
  CHECK(res.coordinates_checked == 2);
  CHECK(x(0) == 1.0);  // restored

  const Vector wrong = 3 * x;
  CHECK(finite_difference_check([&] { return x.squaredNorm(); }, {flat(x)}, {flat(wrong)})
            .max_rel_error > 0.1);
  CHECK_THROWS_AS(
      finite_difference_check([] { return std::nan(""); }, {flat(x)}, {flat(g)}),
      NumericError);
}
