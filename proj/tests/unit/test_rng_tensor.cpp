#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "invit/rng.hpp"
#include "invit/tensor.hpp"

using namespace invit;

namespace {

TensorT<double> rand_tensor(Rng& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
  TensorT<double> t(r, c, 0.0, true);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_SUITE("rng_tensor") {

TEST_CASE("streams are reproducible and tag-sensitive") {
  Rng a = Rng::stream(17, {1, 2});
  Rng b = Rng::stream(17, {1, 2});
  Rng c = Rng::stream(17, {2, 1});
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 64; ++i) {
    const uint64_t x = a.u64();
    all_equal &= x == b.u64();
    any_diff |= x != c.u64();
  }
  CHECK(all_equal);
  CHECK(any_diff);
  CHECK(derive_seed(5, {7}) != derive_seed(5, {8}));
  CHECK(derive_seed(5, {7, 8}) != derive_seed(5, {8, 7}));
}

TEST_CASE("uniform and normal moments") {
  Rng rng(123);
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.005);

  double mean = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    mean += x;
    sq += x * x;
  }
  mean /= n;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(std::sqrt(sq / n - mean * mean) - 1.0) < 0.01);
}

TEST_CASE("uniform_int covers its range without bias at the edges") {
  Rng rng(9);
  std::vector<int> hits(5, 0);
  for (int i = 0; i < 5000; ++i) {
    const int v = rng.uniform_int(2, 6);
    REQUIRE(v >= 2);
    REQUIRE(v <= 6);
    ++hits[static_cast<size_t>(v - 2)];
  }
  for (int h : hits) CHECK(h > 800);
}

TEST_CASE("shuffle permutes and is seed-deterministic") {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  Rng r1(4), r2(4);
  auto a = v, b = v;
  r1.shuffle(a);
  r2.shuffle(b);
  CHECK(a == b);
  CHECK(a != v);
  std::sort(a.begin(), a.end());
  CHECK(a == v);
}

TEST_CASE("gradcheck: matmul, add broadcast, scale") {
  Rng rng(1);
  auto A = rand_tensor(rng, 3, 4);
  auto B = rand_tensor(rng, 4, 2);
  auto bias = rand_tensor(rng, 1, 2);
  auto fn = [&] { return reduce_sum(tanh_elem(scale(add(matmul(A, B), bias), 0.7))); };
  CHECK(gradcheck(fn, {A, B, bias}, 1e-5) < 5e-6);
}

TEST_CASE("matmul_nt matches matmul against the explicit transpose") {
  Rng rng(2);
  auto A = rand_tensor(rng, 3, 5);
  auto B = rand_tensor(rng, 4, 5);
  TensorT<double> Bt(5, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 5; ++j) Bt.at(j, i) = B.at(i, j);
  auto lhs = matmul_nt(A, B);
  auto rhs = matmul(A, Bt);
  for (size_t i = 0; i < lhs.size(); ++i)
    CHECK(lhs.data()[i] == doctest::Approx(rhs.data()[i]).epsilon(1e-12));
  auto fn = [&] { return reduce_sum(matmul_nt(A, B)); };
  CHECK(gradcheck(fn, {A, B}, 1e-5) < 5e-6);
}

TEST_CASE("gradcheck: softmax_rows, log_elem, pick") {
  Rng rng(3);
  auto X = rand_tensor(rng, 2, 6);
  auto fn = [&] { return log_elem(pick(softmax_rows(X), 1, 2)); };
  CHECK(gradcheck(fn, {X}, 1e-5) < 5e-6);

  auto sm = softmax_rows(X);
  for (int i = 0; i < sm.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j < sm.cols(); ++j) {
      CHECK(sm.at(i, j) > 0.0);
      s += sm.at(i, j);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("gradcheck: layer_norm and its direct-formula value") {
  Rng rng(4);
  auto X = rand_tensor(rng, 3, 8);
  auto g = rand_tensor(rng, 1, 8, 0.5, 1.5);
  auto b = rand_tensor(rng, 1, 8);
  auto out = layer_norm(X, g, b);
  for (int i = 0; i < 3; ++i) {
    double mean = 0.0, var = 0.0;
    for (int j = 0; j < 8; ++j) mean += X.at(i, j);
    mean /= 8.0;
    for (int j = 0; j < 8; ++j) var += (X.at(i, j) - mean) * (X.at(i, j) - mean);
    var /= 8.0;
    for (int j = 0; j < 8; ++j) {
      const double want = (X.at(i, j) - mean) / std::sqrt(var + 1e-5) * g.at(0, j) + b.at(0, j);
      CHECK(out.at(i, j) == doctest::Approx(want).epsilon(1e-10));
    }
  }
  auto fn = [&] { return reduce_sum(layer_norm(X, g, b)); };
  CHECK(gradcheck(fn, {X, g, b}, 1e-5) < 5e-6);
}

TEST_CASE("gelu matches x * normal_cdf(x)") {
  const auto x = TensorT<double>::from({-8.0, -1.0, 0.0, 0.5, 8.0}, 1, 5);
  const auto y = gelu(x);
  CHECK(y.data()[0] == doctest::Approx(0.0).epsilon(1e-12));       // deep negative gates off
  CHECK(y.data()[1] == doctest::Approx(-0.15865525).epsilon(1e-7));
  CHECK(y.data()[2] == 0.0);
  CHECK(y.data()[3] == doctest::Approx(0.5 * 0.69146246).epsilon(1e-7));
  CHECK(y.data()[4] == doctest::Approx(8.0).epsilon(1e-12));       // deep positive passes through
}

TEST_CASE("gradcheck: relu, masked_fill, gather_rows, concat, reduce_mean") {
  Rng rng(5);
  // keep values away from the relu kink so central differences stay valid
  auto X = rand_tensor(rng, 4, 3, 0.2, 1.0);
  auto Y = rand_tensor(rng, 4, 2);
  std::vector<uint8_t> mask(12, 0);
  mask[1] = mask[7] = 1;
  const std::vector<int> idx{2, 0, 2, 3};
  auto fn = [&] {
    auto left = relu(masked_fill(X, mask, -0.5));
    auto joined = concat_cols<double>({left, gelu(Y)});
    return reduce_mean(gather_rows(concat_rows<double>({joined, joined}), idx));
  };
  CHECK(gradcheck(fn, {X, Y}, 1e-5) < 5e-6);
}

TEST_CASE("multihead_attention matches a plain per-head softmax oracle") {
  Rng rng(6);
  const int rows = 5, d = 8, heads = 2, dh = d / heads;
  auto Q = rand_tensor(rng, rows, d);
  auto K = rand_tensor(rng, rows, d);
  auto V = rand_tensor(rng, rows, d);
  auto out = multihead_attention(Q, K, V, heads);

  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < rows; ++i) {
      std::vector<double> logits(static_cast<size_t>(rows), 0.0);
      for (int j = 0; j < rows; ++j) {
        double dot = 0.0;
        for (int c = 0; c < dh; ++c) dot += Q.at(i, h * dh + c) * K.at(j, h * dh + c);
        logits[static_cast<size_t>(j)] = dot / std::sqrt(static_cast<double>(dh));
      }
      const double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (double& l : logits) {
        l = std::exp(l - mx);
        z += l;
      }
      for (int c = 0; c < dh; ++c) {
        double want = 0.0;
        for (int j = 0; j < rows; ++j) want += logits[static_cast<size_t>(j)] / z * V.at(j, h * dh + c);
        CHECK(out.at(i, h * dh + c) == doctest::Approx(want).epsilon(1e-10));
      }
    }
  }

  auto fn = [&] { return reduce_mean(multihead_attention(Q, K, V, heads)); };
  CHECK(gradcheck(fn, {Q, K, V}, 1e-5) < 5e-6);
}

TEST_CASE("cross-attention shapes: queries and keys may disagree on rows") {
  Rng rng(7);
  auto Q = rand_tensor(rng, 1, 8);
  auto K = rand_tensor(rng, 6, 8);
  auto V = rand_tensor(rng, 6, 8);
  auto out = multihead_attention(Q, K, V, 2);
  CHECK(out.rows() == 1);
  CHECK(out.cols() == 8);
  auto fn = [&] { return reduce_sum(multihead_attention(Q, K, V, 2)); };
  CHECK(gradcheck(fn, {Q, K, V}, 1e-5) < 5e-6);
}

TEST_CASE("shared subexpression accumulates both gradient paths") {
  TensorT<double> x = TensorT<double>::from({0.3, -0.4, 0.9}, 1, 3, true);
  auto loss = reduce_sum(add(scale(x, 2.0), tanh_elem(x)));
  loss.backward();
  for (int j = 0; j < 3; ++j) {
    const double th = std::tanh(x.at(0, j));
    CHECK(x.grad()[static_cast<size_t>(j)] == doctest::Approx(2.0 + 1.0 - th * th).epsilon(1e-12));
  }
}

TEST_CASE("NoGradGuard suppresses graph recording") {
  TensorT<double> x = TensorT<double>::from({1.0, 2.0}, 1, 2, true);
  {
    NoGradGuard guard;
    auto loss = reduce_sum(scale(x, 3.0));
    loss.backward();
  }
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == 0.0);
}

TEST_CASE("second backward sweep cannot double-accumulate") {
  TensorT<double> x = TensorT<double>::from({1.5}, 1, 1, true);
  auto loss = scale(x, 4.0);
  loss.backward();
  CHECK(x.grad()[0] == doctest::Approx(4.0));
  loss.backward();
  CHECK(x.grad()[0] == doctest::Approx(4.0));
}

TEST_CASE("backward seed scales gradients") {
  TensorT<double> x = TensorT<double>::from({2.0}, 1, 1, true);
  auto loss = scale(x, 3.0);
  loss.backward(0.5);
  CHECK(x.grad()[0] == doctest::Approx(1.5));
}

TEST_CASE("shape errors throw") {
  TensorT<double> a(2, 3), b(2, 2);
  CHECK_THROWS_AS(matmul(a, b), LogicError);
  CHECK_THROWS_AS(add(a, b), LogicError);
  CHECK_THROWS_AS(TensorT<double>(0, 3), LogicError);
  CHECK_THROWS_AS(a.item(), LogicError);
}

}  // TEST_SUITE
