#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "nvx/common.hpp"
#include "nvx/tensorgrad.hpp"

using namespace nvx;

namespace {

void fill_gaussian(Mat& m, Rng& rng, double scale = 1.0) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.gaussian();
}

void fill_gaussian(Vec& v, Rng& rng, double scale = 1.0) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = scale * rng.gaussian();
}

GruParams random_gru(int input, int hidden, Rng& rng) {
  GruParams p;
  p.init_zero(input, hidden);
  const double s = 0.5;
  fill_gaussian(p.wz, rng, s);
  fill_gaussian(p.wr, rng, s);
  fill_gaussian(p.wh, rng, s);
  fill_gaussian(p.uz, rng, s);
  fill_gaussian(p.ur, rng, s);
  fill_gaussian(p.uh, rng, s);
  fill_gaussian(p.bz, rng, s);
  fill_gaussian(p.br, rng, s);
  fill_gaussian(p.bh, rng, s);
  return p;
}

}  // namespace

TEST_CASE("gru zero fixed point and half decay") {
  GruParams p;
  p.init_zero(4, 3);
  const Vec h0 = gru_cell(p, Vec::Zero(4), Vec::Zero(3));
  CHECK(h0.cwiseAbs().maxCoeff() == 0.0);

  Vec h_prev(3);
  h_prev << 1.0, -2.0, 0.5;
  // Zero params give z = 0.5 and candidate 0, so the state halves.
  const Vec h1 = gru_cell(p, Vec::Ones(4), h_prev);
  CHECK((h1 - 0.5 * h_prev).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("gru rejects mismatched shapes") {
  GruParams p;
  p.init_zero(4, 3);
  CHECK_THROWS_AS(gru_cell(p, Vec::Zero(5), Vec::Zero(3)), DimError);
  CHECK_THROWS_AS(gru_cell(p, Vec::Zero(4), Vec::Zero(2)), DimError);
  p.uz = Mat::Zero(2, 2);
  CHECK_THROWS_AS(p.validate(), DimError);
}

TEST_CASE("gru state stays inside the gate hull") {
  Rng rng(41);
  GruParams p = random_gru(5, 4, rng);
  Mat h = Mat::Zero(2, 4);
  for (int t = 0; t < 50; ++t) {
    Mat x(2, 5);
    fill_gaussian(x, rng, 2.0);
    const Mat bound = h.cwiseAbs().cwiseMax(1.0);
    h = gru_forward(p, x, h, nullptr);
    CHECK((h.cwiseAbs().array() <= bound.array() + 1e-12).all());
  }
}

TEST_CASE("gru gradients match finite differences") {
  Rng rng(42);
  const int input = 4, hidden = 3, batch = 3;
  GruParams p = random_gru(input, hidden, rng);
  Mat x(batch, input), h_prev(batch, hidden), proj(batch, hidden);
  fill_gaussian(x, rng);
  fill_gaussian(h_prev, rng);
  fill_gaussian(proj, rng);

  const auto loss = [&]() {
    return gru_forward(p, x, h_prev, nullptr).cwiseProduct(proj).sum();
  };

  GruCache cache;
  gru_forward(p, x, h_prev, &cache);
  GruGrads g;
  g.init_zero(input, hidden);
  Mat dx, dh_prev;
  gru_backward(p, x, h_prev, cache, proj, g, dx, dh_prev);

  const std::vector<TensorRef> refs = {
      tensor_ref(p.wz, g.wz), tensor_ref(p.wr, g.wr), tensor_ref(p.wh, g.wh),
      tensor_ref(p.uz, g.uz), tensor_ref(p.ur, g.ur), tensor_ref(p.uh, g.uh),
      tensor_ref(p.bz, g.bz), tensor_ref(p.br, g.br), tensor_ref(p.bh, g.bh),
      tensor_ref(x, dx),      tensor_ref(h_prev, dh_prev)};
  CHECK(grad_check(refs, loss, 1e-6) <= 1e-5);
}

TEST_CASE("attention singleton and uniform cases") {
  Rng rng(43);
  Mat h_enc(1, 6);
  fill_gaussian(h_enc, rng);
  Vec q(3);
  fill_gaussian(q, rng);
  Mat w(6, 3);
  fill_gaussian(w, rng);

  Vec context, alpha;
  attention_step(h_enc, q, w, context, alpha);
  REQUIRE(alpha.size() == 1);
  CHECK(alpha(0) == 1.0);
  CHECK((context.transpose() - h_enc.row(0)).cwiseAbs().maxCoeff() <= 1e-15);

  Mat h5(5, 6);
  fill_gaussian(h5, rng);
  attention_step(h5, q, Mat::Zero(6, 3), context, alpha);
  for (int t = 0; t < 5; ++t) CHECK(alpha(t) == doctest::Approx(0.2).epsilon(1e-12));
  const Vec mean = h5.colwise().mean();
  CHECK((context - mean).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("attention weights are a stable distribution") {
  Rng rng(44);
  // Unit-scale draws mirror the op's domain (GRU states are bounded by 1).
  for (int trial = 0; trial < 200; ++trial) {
    const int t = 1 + static_cast<int>(rng.below(12));
    Mat h(t, 4);
    fill_gaussian(h, rng);
    Vec q(3);
    fill_gaussian(q, rng);
    Mat w(4, 3);
    fill_gaussian(w, rng);
    Vec context, alpha;
    attention_step(h, q, w, context, alpha);
    CHECK(alpha.minCoeff() > 0.0);
    CHECK(std::abs(alpha.sum() - 1.0) <= 1e-12);
  }
  // Extreme scores may underflow to exact zeros but never break normalization.
  for (int trial = 0; trial < 50; ++trial) {
    Mat h(6, 4);
    fill_gaussian(h, rng, 50.0);
    Vec q(3);
    fill_gaussian(q, rng, 50.0);
    Mat w(4, 3);
    fill_gaussian(w, rng, 50.0);
    Vec context, alpha;
    attention_step(h, q, w, context, alpha);
    CHECK(alpha.minCoeff() >= 0.0);
    CHECK(alpha.maxCoeff() <= 1.0);
    CHECK(std::abs(alpha.sum() - 1.0) <= 1e-12);
  }
}

TEST_CASE("attention gradients match finite differences") {
  Rng rng(45);
  Mat h_enc(6, 5);
  fill_gaussian(h_enc, rng);
  Vec q(3);
  fill_gaussian(q, rng);
  Mat w(5, 3);
  fill_gaussian(w, rng);
  Vec proj(5);
  fill_gaussian(proj, rng);

  const auto loss = [&]() {
    Vec context, alpha;
    attention_step(h_enc, q, w, context, alpha);
    return context.dot(proj);
  };

  Vec context, alpha;
  attention_step(h_enc, q, w, context, alpha);
  Mat dh = Mat::Zero(6, 5), dw = Mat::Zero(5, 3);
  Vec dq = Vec::Zero(3);
  attention_backward(h_enc, q, w, alpha, proj, dh, dq, dw);

  const std::vector<TensorRef> refs = {tensor_ref(h_enc, dh), tensor_ref(q, dq),
                                       tensor_ref(w, dw)};
  CHECK(grad_check(refs, loss, 1e-6) <= 1e-5);
}

TEST_CASE("dense closed forms") {
  const Mat eye = Mat::Identity(3, 3);
  Vec x(3);
  x << 1.0, 2.0, 3.0;
  CHECK((dense(eye, Vec::Zero(3), x) - x).cwiseAbs().maxCoeff() == 0.0);

  Rng rng(46);
  Mat w(4, 3);
  Vec b(4);
  fill_gaussian(w, rng);
  fill_gaussian(b, rng);
  CHECK((dense(w, b, Vec::Zero(3)) - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(dense(w, b, Vec::Zero(5)), DimError);
}

TEST_CASE("dense gradients are exact to linear-op tolerance") {
  Rng rng(47);
  Mat w(4, 3), x(2, 3), proj(2, 4);
  Vec b(4);
  fill_gaussian(w, rng);
  fill_gaussian(b, rng);
  fill_gaussian(x, rng);
  fill_gaussian(proj, rng);

  const auto loss = [&]() { return dense_forward(w, b, x).cwiseProduct(proj).sum(); };

  Mat dw = Mat::Zero(4, 3), dx;
  Vec db = Vec::Zero(4);
  dense_backward(w, x, proj, dw, db, dx);
  const std::vector<TensorRef> refs = {tensor_ref(w, dw), tensor_ref(b, db),
                                       tensor_ref(x, dx)};
  CHECK(grad_check(refs, loss, 1e-6) <= 1e-7);
}

TEST_CASE("dropout identity modes") {
  Rng rng(48);
  Vec x(64);
  fill_gaussian(x, rng);
  Rng r1(1), r2(1);
  CHECK((dropout(x, 0.2, false, r1) - x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((dropout(x, 0.0, true, r1) - x).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(dropout(x, 1.0, true, r2), DimError);
  CHECK_THROWS_AS(dropout(x, -0.1, true, r2), DimError);
}

TEST_CASE("dropout statistics at a million entries") {
  Rng rng(49);
  Vec ones = Vec::Ones(1000000);
  const Vec out = dropout(ones, 0.2, true, rng);
  double zeros = 0.0;
  for (Eigen::Index i = 0; i < out.size(); ++i)
    if (out(i) == 0.0) zeros += 1.0;
  const double frac = zeros / static_cast<double>(out.size());
  CHECK(frac >= 0.195);
  CHECK(frac <= 0.205);
  CHECK(out.mean() == doctest::Approx(1.0).epsilon(0.01));

  Rng a(7), b(7);
  const Vec da = dropout(ones, 0.2, true, a);
  const Vec db = dropout(ones, 0.2, true, b);
  CHECK((da - db).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("masked mse closed forms") {
  Rng rng(50);
  Mat pred(4, 3);
  fill_gaussian(pred, rng);
  CHECK(masked_mse(pred, pred, Vec::Ones(4)) == 0.0);

  Mat p1 = Mat::Zero(1, 1), t1 = Mat::Zero(1, 1);
  p1(0, 0) = 3.0;
  CHECK(masked_mse(p1, t1, Vec::Ones(1)) == 9.0);

  CHECK_THROWS_AS(masked_mse(pred, pred, Vec::Zero(4)), DimError);
  CHECK_THROWS_AS(masked_mse(pred, Mat::Zero(4, 2), Vec::Ones(4)), DimError);

  // Masked rows do not contribute.
  Mat target = pred;
  target.row(2).setConstant(99.0);
  Vec mask = Vec::Ones(4);
  mask(2) = 0.0;
  CHECK(masked_mse(pred, target, mask) == 0.0);
}

TEST_CASE("masked mse gradient matches finite differences") {
  Rng rng(51);
  Mat pred(5, 4), target(5, 4);
  fill_gaussian(pred, rng);
  fill_gaussian(target, rng);
  Vec mask(5);
  mask << 1, 0, 1, 1, 0;

  const auto loss = [&]() { return masked_mse(pred, target, mask); };
  const Mat g = masked_mse_grad(pred, target, mask);
  CHECK(g.row(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.row(4).cwiseAbs().maxCoeff() == 0.0);
  CHECK(grad_check({tensor_ref(pred, g)}, loss, 1e-6) <= 1e-7);
}

TEST_CASE("adam zero gradient leaves fresh params in place") {
  Mat p = Mat::Constant(2, 2, 1.5);
  const Mat zero = Mat::Zero(2, 2);
  AdamState st;
  st.init({tensor_ref(p, zero)});
  adam_step({tensor_ref(p, zero)}, st);
  CHECK(st.step_count == 1);
  CHECK((p.array() == 1.5).all());
  CHECK(st.m[0].cwiseAbs().maxCoeff() == 0.0);
  CHECK(st.v[0].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adam first step is approximately -lr * sign(g)") {
  Mat p = Mat::Constant(1, 1, 0.7);
  Mat g = Mat::Constant(1, 1, 0.5);
  AdamState st;
  st.init({tensor_ref(p, g)});
  adam_step({tensor_ref(p, g)}, st);
  const double delta = 0.7 - p(0, 0);
  CHECK(delta == doctest::Approx(st.hyper.lr).epsilon(1e-6));

  p(0, 0) = 0.7;
  g(0, 0) = -2.0;
  AdamState st2;
  st2.init({tensor_ref(p, g)});
  adam_step({tensor_ref(p, g)}, st2);
  CHECK(p(0, 0) - 0.7 == doctest::Approx(st2.hyper.lr).epsilon(1e-6));
}

TEST_CASE("adam walks monotonically against a constant gradient") {
  Mat p = Mat::Constant(1, 1, 1.0);
  const Mat g = Mat::Constant(1, 1, 0.3);
  AdamState st;
  st.init({tensor_ref(p, g)});
  double prev = p(0, 0);
  for (int i = 0; i < 100; ++i) {
    adam_step({tensor_ref(p, g)}, st);
    CHECK(p(0, 0) < prev);
    prev = p(0, 0);
  }
  CHECK(st.step_count == 100);
}

TEST_CASE("adam keeps parameters finite and checks shapes") {
  Rng rng(52);
  Mat p(3, 3), g(3, 3);
  fill_gaussian(p, rng);
  fill_gaussian(g, rng);
  AdamState st;
  st.init({tensor_ref(p, g)});
  for (int i = 0; i < 200; ++i) {
    fill_gaussian(g, rng, 100.0);
    adam_step({tensor_ref(p, g)}, st);
  }
  CHECK(all_finite(p));

  Mat wrong = Mat::Zero(2, 2);
  const Mat wrong_g = Mat::Zero(2, 2);
  CHECK_THROWS_AS(adam_step({tensor_ref(wrong, wrong_g)}, st), DimError);
}

TEST_CASE("grad_check harness flags wrong gradients") {
  Mat x(2, 2);
  x << 0.3, -0.7, 1.1, 0.2;
  const auto loss = [&]() { return x.squaredNorm(); };
  const Mat good = 2.0 * x;
  CHECK(grad_check({tensor_ref(x, good)}, loss, 1e-6) <= 1e-9);
  const Mat bad = 3.0 * x;
  CHECK(grad_check({tensor_ref(x, bad)}, loss, 1e-6) > 0.1);
}
