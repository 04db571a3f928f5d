#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "doctest.h"
#include "gedforge/rng.hpp"
#include "gedforge/tensor.hpp"

namespace ad = gedforge::ad;
using gedforge::Rng;

namespace {

ad::Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  ad::Tensor t(std::move(shape));
  for (auto& x : t.data) x = rng.uniform(lo, hi);
  return t;
}

// distinct entries with gaps far larger than the finite-difference step,
// so argmax style ops keep their selection under perturbation
ad::Tensor spread_tensor(std::vector<int> shape, Rng& rng) {
  ad::Tensor t(std::move(shape));
  std::vector<double> grid(t.data.size());
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = 0.05 * static_cast<double>(i);
  rng.shuffle(grid);
  t.data = grid;
  return t;
}

using Builder = std::function<ad::NodeId(ad::Graph&, const std::vector<ad::NodeId>&)>;

double eval_scalar(const std::vector<ad::Tensor>& inputs, const Builder& build) {
  ad::Graph g;
  std::vector<ad::NodeId> ids;
  ids.reserve(inputs.size());
  for (const auto& t : inputs) ids.push_back(g.input(t, true));
  return g.value(build(g, ids))[0];
}

// central differences against the reverse pass, relative error on a unit floor
void check_gradients(const std::vector<ad::Tensor>& inputs, const Builder& build,
                     double tol = 1e-4) {
  const double eps = 1e-4;
  ad::Graph g;
  std::vector<ad::NodeId> ids;
  ids.reserve(inputs.size());
  for (const auto& t : inputs) ids.push_back(g.input(t, true));
  ad::NodeId loss = build(g, ids);
  REQUIRE(g.value(loss).numel() == 1);
  g.backward(loss);

  for (std::size_t p = 0; p < inputs.size(); ++p) {
    const ad::Tensor& analytic = g.grad(ids[p]);
    REQUIRE(analytic.numel() == inputs[p].numel());
    for (std::int64_t i = 0; i < inputs[p].numel(); ++i) {
      auto plus = inputs;
      auto minus = inputs;
      plus[p][i] += eps;
      minus[p][i] -= eps;
      double fd = (eval_scalar(plus, build) - eval_scalar(minus, build)) / (2.0 * eps);
      double a = analytic[i];
      double err = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1.0});
      CAPTURE(p);
      CAPTURE(i);
      CAPTURE(a);
      CAPTURE(fd);
      CHECK(err < tol);
    }
  }
}

// projects an arbitrary output tensor to a scalar with fixed coefficients;
// a fresh generator per call keeps the projection identical across rebuilds
ad::NodeId project(ad::Graph& g, ad::NodeId y, std::uint64_t seed) {
  Rng rng(seed);
  ad::Tensor c = random_tensor(g.value(y).shape, rng);
  return g.dot(y, g.input(std::move(c), false));
}

}  // namespace

TEST_CASE("tensor shapes and fills") {
  ad::Tensor t({2, 3}, 0.5);
  CHECK(t.numel() == 6);
  CHECK(t.rank() == 2);
  CHECK(t.dim(1) == 3);
  for (double v : t.data) CHECK(v == 0.5);
  CHECK(ad::Tensor::scalar(4.0).numel() == 1);
  CHECK(ad::Tensor::scalar(4.0)[0] == 4.0);
  CHECK_THROWS_AS(ad::Tensor({2, 0}), std::invalid_argument);
}

TEST_CASE("glorot init range and determinism") {
  Rng a(99), b(99);
  ad::Tensor ta = ad::glorot({4, 3}, a);
  ad::Tensor tb = ad::glorot({4, 3}, b);
  CHECK(ta.data == tb.data);
  double limit = std::sqrt(6.0 / 7.0);
  for (double v : ta.data) {
    CHECK(v >= -limit);
    CHECK(v <= limit);
  }
  Rng c(99);
  ad::Tensor tc = ad::glorot({8, 2, 3, 3}, c);
  double limit4 = std::sqrt(6.0 / (2 * 9 + 8 * 9));
  CHECK(tc.numel() == 8 * 2 * 9);
  for (double v : tc.data) CHECK(std::abs(v) <= limit4);
  CHECK_THROWS_AS(ad::glorot({5}, c), std::invalid_argument);
}

TEST_CASE("matmul forward and gradients") {
  ad::Graph g;
  ad::NodeId a = g.input(ad::Tensor({2, 2}), false);
  // rebuild with concrete values
  ad::Graph h;
  ad::Tensor ta({2, 3});
  ta.data = {1, 2, 3, 4, 5, 6};
  ad::Tensor tb({3, 2});
  tb.data = {7, 8, 9, 10, 11, 12};
  ad::NodeId x = h.input(ta, false);
  ad::NodeId y = h.input(tb, false);
  const ad::Tensor& out = h.value(h.matmul(x, y));
  CHECK(out.shape == std::vector<int>{2, 2});
  CHECK(out.data == std::vector<double>{58, 64, 139, 154});
  (void)a;

  Rng rng(1);
  std::vector<ad::Tensor> inputs{random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)};
    check_gradients(inputs, [](ad::Graph& gr, const std::vector<ad::NodeId>& ids) {
    return project(gr, gr.matmul(ids[0], ids[1]), 1001ull);
  });
  CHECK_THROWS_AS((void)h.matmul(x, x), std::invalid_argument);
}

TEST_CASE("matmul_nt matches matmul with a transposed operand") {
  Rng rng(3);
  ad::Tensor ta = random_tensor({3, 4}, rng);
  ad::Tensor tb = random_tensor({5, 4}, rng);
  ad::Tensor tbt({4, 5});
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j) tbt[j * 5 + i] = tb[i * 4 + j];
  ad::Graph g;
  ad::Tensor nt = g.value(g.matmul_nt(g.input(ta, false), g.input(tb, false)));
  ad::Tensor mm = g.value(g.matmul(g.input(ta, false), g.input(tbt, false)));
  CHECK(nt.shape == std::vector<int>{3, 5});
  for (std::int64_t i = 0; i < nt.numel(); ++i) CHECK(nt[i] == doctest::Approx(mm[i]).epsilon(1e-12));

    std::vector<ad::Tensor> inputs{ta, tb};
  check_gradients(inputs, [](ad::Graph& gr, const std::vector<ad::NodeId>& ids) {
    return project(gr, gr.matmul_nt(ids[0], ids[1]), 1002ull);
  });
}

TEST_CASE("gcn_aggregate forward matches a plain weighted sum") {
  // path 0-1-2 with self loops, coefficients 1/sqrt((d_i+1)(d_j+1))
  ad::AggregateCoeffs coeffs(3);
  auto w = [](int di, int dj) { return 1.0 / std::sqrt(double(di) * dj); };
  coeffs[0] = {{0, w(2, 2)}, {1, w(2, 3)}};
  coeffs[1] = {{0, w(3, 2)}, {1, w(3, 3)}, {2, w(3, 2)}};
  coeffs[2] = {{1, w(2, 3)}, {2, w(2, 2)}};
  Rng rng(5);
  ad::Tensor x = random_tensor({3, 4}, rng);
  ad::Graph g;
  const ad::Tensor& out = g.value(g.gcn_aggregate(g.input(x, false), coeffs));
  for (int i = 0; i < 3; ++i) {
    for (int col = 0; col < 4; ++col) {
      double want = 0.0;
      for (auto [j, c] : coeffs[i]) want += c * x[j * 4 + col];
      CHECK(out[i * 4 + col] == doctest::Approx(want).epsilon(1e-12));
    }
  }

    std::vector<ad::Tensor> inputs{x};
  check_gradients(inputs, [&coeffs](ad::Graph& gr, const std::vector<ad::NodeId>& ids) {
    return project(gr, gr.gcn_aggregate(ids[0], coeffs), 1003ull);
  });
}

TEST_CASE("gcn_aggregate is bit stable under term reordering") {
  Rng rng(7);
  ad::Tensor x = random_tensor({4, 6}, rng);
  ad::AggregateCoeffs coeffs(4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) coeffs[i].push_back({j, rng.uniform(0.1, 1.0)});
  ad::AggregateCoeffs shuffled = coeffs;
  for (auto& row : shuffled) std::reverse(row.begin(), row.end());

  ad::Graph g1, g2;
  const ad::Tensor& a = g1.value(g1.gcn_aggregate(g1.input(x, false), coeffs));
  const ad::Tensor& b = g2.value(g2.gcn_aggregate(g2.input(x, false), shuffled));
  CHECK(a.data == b.data);
}

TEST_CASE("add and add_bias") {
  Rng rng(8);
  std::vector<ad::Tensor> inputs{random_tensor({3, 2}, rng), random_tensor({3, 2}, rng)};
    check_gradients(inputs, [](ad::Graph& gr, const std::vector<ad::NodeId>& ids) {
    return project(gr, gr.add(ids[0], ids[1]), 1004ull);
  });

  std::vector<ad::Tensor> binputs{random_tensor({4, 3}, rng), random_tensor({3}, rng)};
  check_gradients(binputs, [](ad::Graph& gr, const std::vector<ad::NodeId>& ids) {
    return project(gr, gr.add_bias(ids[0], ids[1]), 1005ull);
  });

  ad::Graph g;
  ad::Tensor m({2, 2});
  m.data = {1, 2, 3, 4};
  ad::Tensor b({2});
  b.data = {10, 20};
  const ad::Tensor& out = g.value(g.add_bias(g.input(m, false), g.input(b, false)));
  CHECK(out.data == std::vector<double>{11, 22, 13, 24});
}

TEST_CASE("relu forward example and gradient away from the kink") {
  ad::Graph g;
  ad::Tensor t({3});
  t.data = {-1.0, 0.0, 2.0};
  const ad::Tensor& out = g.value(g.relu(g.input(t, false)));
  CHECK(out.data == std::vector<double>{0.0, 0.0, 2.0});

  ad::Tensor in({2, 3});
  in.data = {-0.9, 0.7, -0.4, 1.3, 0.5, -1.1};
    std::vector<ad::Tensor> inputs{in};
  check_gradients(inputs, [](ad::Graph& gr, const std::vector<ad::NodeId>& ids) {
    return project(gr, gr.relu(ids[0]), 1006ull);
  });
}

TEST_CASE("sigmoid forward and gradient") {
  ad::Graph g;
  ad::Tensor t({3});
  t.data = {0.0, 2.0, -2.0};
  const ad::Tensor& out = g.value(g.sigmoid(g.input(t, false)));
  CHECK(out[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(out[1] == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-15));
  CHECK(out[1] + out[2] == doctest::Approx(1.0).epsilon(1e-12));

  Rng rng(11);
  std::vector<ad::Tensor> inputs{random_tensor({5}, rng, -2.0, 2.0)};
  check_gradients(inputs, [](ad::Graph& gr, const std::vector<ad::NodeId>& ids) {
    return project(gr, gr.sigmoid(ids[0]), 1007ull);
  });
}

TEST_CASE("conv2d with a one hot center tap is the identity") {
  Rng rng(13);
  ad::Tensor x = random_tensor({1, 1, 5, 4}, rng);
  ad::Tensor w({1, 1, 3, 3}, 0.0);
  w[4] = 1.0;
  ad::Tensor b({1}, 0.0);
  ad::Graph g;
  const ad::Tensor& out =
      g.value(g.conv2d(g.input(x, false), g.input(w, false), g.input(b, false), 3));
  CHECK(out.shape == x.shape);
  CHECK(out.data == x.data);
}

TEST_CASE("conv2d gradients, odd and even windows") {
  Rng rng(14);
  for (int window : {3, 6}) {
    std::vector<ad::Tensor> inputs{random_tensor({2, 2, 4, 5}, rng),
                                   random_tensor({3, 2, window, window}, rng),
                                   random_tensor({3}, rng)};
    check_gradients(inputs, [window](ad::Graph& gr, const std::vector<ad::NodeId>& ids) {
      return project(gr, gr.conv2d(ids[0], ids[1], ids[2], window), 1008ull);
    });
  }
}

TEST_CASE("maxpool2d keeps partial windows and picks the first of a tie") {
  ad::Graph g;
  ad::Tensor t({1, 1, 3, 3});
  t.data = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  const ad::Tensor& out = g.value(g.maxpool2d(g.input(t, false), 2));
  CHECK(out.shape == std::vector<int>{1, 1, 2, 2});
  CHECK(out.data == std::vector<double>{5, 6, 8, 9});

  ad::Graph g2;
  ad::Tensor flat({1, 1, 2, 2}, 7.0);
  ad::NodeId x = g2.input(flat, true);
  g2.backward(g2.maxpool2d(x, 2));
  CHECK(g2.grad(x).data == std::vector<double>{1, 0, 0, 0});
}

TEST_CASE("maxpool2d gradient") {
  Rng rng(16);
  std::vector<ad::Tensor> inputs{spread_tensor({2, 3, 5, 5}, rng)};
  check_gradients(inputs, [](ad::Graph& gr, const std::vector<ad::NodeId>& ids) {
    return project(gr, gr.maxpool2d(ids[0], 2), 1009ull);
  });
  std::vector<ad::Tensor> in3{spread_tensor({1, 2, 7, 4}, rng)};
  check_gradients(in3, [](ad::Graph& gr, const std::vector<ad::NodeId>& ids) {
    return project(gr, gr.maxpool2d(ids[0], 3), 1010ull);
  });
}

TEST_CASE("resize_bilinear endpoints, identity, and gradient") {
  ad::Tensor t({1, 1, 3, 3});
  t.data = {0, 1, 2, 3, 4, 5, 6, 7, 8};

  ad::Graph g;
  const ad::Tensor& same = g.value(g.resize_bilinear(g.input(t, false), 3, 3));
  CHECK(same.data == t.data);

  const ad::Tensor& down = g.value(g.resize_bilinear(g.input(t, false), 2, 2));
  CHECK(down.data == std::vector<double>{0, 2, 6, 8});

  const ad::Tensor& center = g.value(g.resize_bilinear(g.input(t, false), 1, 1));
  CHECK(center.data == std::vector<double>{4});

  ad::Tensor q({1, 1, 2, 2});
  q.data = {0, 1, 2, 3};
  const ad::Tensor& up = g.value(g.resize_bilinear(g.input(q, false), 3, 3));
  CHECK(up.data == std::vector<double>{0, 0.5, 1, 1, 1.5, 2, 2, 2.5, 3});

  Rng rng(18);
  std::vector<ad::Tensor> inputs{random_tensor({1, 2, 4, 6}, rng)};
  check_gradients(inputs, [](ad::Graph& gr, const std::vector<ad::NodeId>& ids) {
    return project(gr, gr.resize_bilinear(ids[0], 10, 10), 1011ull);
  });
  check_gradients(inputs, [](ad::Graph& gr, const std::vector<ad::NodeId>& ids) {
    return project(gr, gr.resize_bilinear(ids[0], 2, 3), 1012ull);
  });
}

TEST_CASE("reshape, gather_rows_pad, mean_rows") {
  Rng rng(20);
  std::vector<ad::Tensor> inputs{random_tensor({2, 6}, rng)};
  check_gradients(inputs, [](ad::Graph& gr, const std::vector<ad::NodeId>& ids) {
    return project(gr, gr.reshape(ids[0], {3, 4}), 1013ull);
  });
  ad::Graph g;
  CHECK_THROWS_AS((void)g.reshape(g.input(inputs[0], false), {5, 5}), std::invalid_argument);

  ad::Tensor m({3, 2});
  m.data = {1, 2, 3, 4, 5, 6};
  const ad::Tensor& gathered = g.value(g.gather_rows_pad(g.input(m, false), {2, 0}, 4));
  CHECK(gathered.shape == std::vector<int>{4, 2});
  CHECK(gathered.data == std::vector<double>{5, 6, 1, 2, 0, 0, 0, 0});

  std::vector<ad::Tensor> ginputs{random_tensor({4, 3}, rng)};
  check_gradients(ginputs, [](ad::Graph& gr, const std::vector<ad::NodeId>& ids) {
    return project(gr, gr.gather_rows_pad(ids[0], {3, 1, 0}, 6), 1014ull);
  });

  const ad::Tensor& mean = g.value(g.mean_rows(g.input(m, false)));
  CHECK(mean.shape == std::vector<int>{1, 2});
  CHECK(mean.data == std::vector<double>{3, 4});
  check_gradients(ginputs, [](ad::Graph& gr, const std::vector<ad::NodeId>& ids) {
    return project(gr, gr.mean_rows(ids[0]), 1015ull);
  });
}

TEST_CASE("dot and stack_scalars") {
  Rng rng(22);
  std::vector<ad::Tensor> inputs{random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)};
  check_gradients(inputs, [](ad::Graph& gr, const std::vector<ad::NodeId>& ids) {
    return gr.dot(ids[0], ids[1]);
  });

  std::vector<ad::Tensor> sinputs{random_tensor({4}, rng), random_tensor({4}, rng)};
  check_gradients(sinputs, [](ad::Graph& gr, const std::vector<ad::NodeId>& ids) {
    ad::NodeId c = gr.input(ad::Tensor({4}, 0.25), false);
    std::vector<ad::NodeId> parts{gr.dot(ids[0], c), gr.dot(ids[0], ids[1]), gr.dot(ids[1], c)};
    return project(gr, gr.stack_scalars(parts), 1016ull);
  });
}

TEST_CASE("mse_loss value and exact gradient") {
  ad::Graph g;
  ad::Tensor pred({2});
  pred.data = {1.0, 2.0};
  ad::Tensor target({2});
  target.data = {0.0, 0.0};
  ad::NodeId p = g.input(pred, true);
  ad::NodeId loss = g.mse_loss(p, target);
  CHECK(g.value(loss)[0] == 2.5);
  g.backward(loss);
  CHECK(g.grad(p).data == std::vector<double>{1.0, 2.0});

  Rng rng(24);
  ad::Tensor t = random_tensor({6}, rng);
  std::vector<ad::Tensor> inputs{random_tensor({6}, rng)};
  check_gradients(inputs, [&t](ad::Graph& gr, const std::vector<ad::NodeId>& ids) {
    return gr.mse_loss(ids[0], t);
  });
}

TEST_CASE("fan out accumulates gradients") {
  ad::Graph g;
  ad::Tensor t({3});
  t.data = {0.5, -0.25, 2.0};
  ad::Tensor c({3});
  c.data = {3.0, 5.0, 7.0};
  ad::NodeId x = g.input(t, true);
  ad::NodeId y = g.add(x, x);
  ad::NodeId loss = g.dot(y, g.input(c, false));
  g.backward(loss);
  CHECK(g.grad(x).data == std::vector<double>{6.0, 10.0, 14.0});
}

TEST_CASE("a chained network gradchecks end to end") {
  Rng rng(25);
  std::vector<ad::Tensor> inputs{random_tensor({1, 1, 6, 6}, rng), random_tensor({2, 1, 3, 3}, rng),
                                 random_tensor({2}, rng), random_tensor({8, 4}, rng),
                                 random_tensor({4}, rng)};
  check_gradients(
      inputs,
      [](ad::Graph& gr, const std::vector<ad::NodeId>& ids) {
        ad::NodeId c = gr.conv2d(ids[0], ids[1], ids[2], 3);
        ad::NodeId p = gr.maxpool2d(gr.relu(c), 2);
        ad::NodeId r = gr.reshape(gr.resize_bilinear(p, 2, 2), {1, 8});
        ad::NodeId d = gr.sigmoid(gr.add_bias(gr.matmul(r, ids[3]), ids[4]));
        return project(gr, d, 1017ull);
      },
      2e-4);
}

TEST_CASE("backward requires a scalar and tolerates grad free losses") {
  ad::Graph g;
  ad::NodeId x = g.input(ad::Tensor({2, 2}, 1.0), true);
  CHECK_THROWS_AS(g.backward(x), std::invalid_argument);

  ad::Graph h;
  ad::NodeId frozen = h.input(ad::Tensor({3}, 2.0), false);
  ad::NodeId loss = h.dot(frozen, frozen);
  h.backward(loss);  // nothing trainable, must not crash
  CHECK(h.value(loss)[0] == 12.0);
}

TEST_CASE("adam first step magnitude and zero grad fixpoint") {
  std::vector<ad::Tensor> params{ad::Tensor({2}, 1.0)};
  std::vector<ad::Tensor> grads{ad::Tensor({2}, 0.0)};
  grads[0].data = {0.5, -0.5};
  ad::AdamState state = ad::AdamState::init(params);
  ad::adam_step(params, grads, state);
  CHECK(state.t == 1);
  for (int i = 0; i < 2; ++i) {
    double delta = params[0][i] - 1.0;
    CHECK(std::abs(delta) >= 0.00099);
    CHECK(std::abs(delta) <= 0.001);
  }
  CHECK(params[0][0] < 1.0);
  CHECK(params[0][1] > 1.0);

  std::vector<ad::Tensor> still{ad::Tensor({3}, 4.0)};
  std::vector<ad::Tensor> zero{ad::Tensor({3}, 0.0)};
  ad::AdamState s2 = ad::AdamState::init(still);
  ad::adam_step(still, zero, s2);
  CHECK(still[0].data == std::vector<double>{4.0, 4.0, 4.0});
}

TEST_CASE("adam converges on a quadratic") {
  std::vector<ad::Tensor> params{ad::Tensor({1}, 3.0)};
  ad::AdamState state = ad::AdamState::init(params);
  state.lr = 0.05;
  for (int it = 0; it < 400; ++it) {
    std::vector<ad::Tensor> grads{ad::Tensor({1}, 2.0 * (params[0][0] - 1.25))};
    ad::adam_step(params, grads, state);
  }
  CHECK(params[0][0] == doctest::Approx(1.25).epsilon(1e-3));
}
