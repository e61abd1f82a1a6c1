#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rhcbf/barrier_net.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace rhcbf;

namespace {

Vec random_vec(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = gauss(rng);
  return v;
}

// Central finite difference of a scalar function of one parameter entry.
template <typename F>
double central_diff(F&& f, double& slot, double step = 1e-5) {
  const double saved = slot;
  slot = saved + step;
  const double hi = f();
  slot = saved - step;
  const double lo = f();
  slot = saved;
  return (hi - lo) / (2.0 * step);
}

}  // namespace

TEST_CASE("zero weights make h constant at the output bias") {
  BarrierNet net({2, 4, 1}, 0);
  for (auto& W : net.weights()) W.setZero();
  for (auto& b : net.biases()) b.setZero();
  net.biases().back()[0] = 0.7;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10; ++i) {
    CHECK(net.forward(random_vec(2, rng)) == doctest::Approx(0.7));
    CHECK(net.grad_z(random_vec(2, rng)).norm() == 0.0);
  }
}

TEST_CASE("1-1-1 net reproduces tanh closed forms") {
  BarrierNet net({1, 1, 1}, 0);
  net.weights()[0](0, 0) = 1.0;
  net.weights()[1](0, 0) = 1.0;
  net.biases()[0][0] = 0.0;
  net.biases()[1][0] = 0.0;
  const Vec z = Vec::Constant(1, 0.5);
  CHECK(net.forward(z) == doctest::Approx(std::tanh(0.5)).epsilon(1e-12));
  const double expected_grad = 1.0 - std::tanh(0.5) * std::tanh(0.5);
  CHECK(net.grad_z(z)[0] == doctest::Approx(expected_grad).epsilon(1e-12));
}

TEST_CASE("permuting hidden units leaves h unchanged") {
  BarrierNet net({2, 4, 1}, 3);
  BarrierNet permuted = net;
  permuted.weights()[0].row(0).swap(permuted.weights()[0].row(2));
  std::swap(permuted.biases()[0][0], permuted.biases()[0][2]);
  permuted.weights()[1].col(0).swap(permuted.weights()[1].col(2));
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const Vec z = random_vec(2, rng);
    CHECK(net.forward(z) == doctest::Approx(permuted.forward(z)).epsilon(1e-12));
  }
}

TEST_CASE("grad_z matches central finite differences to 1e-6") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    BarrierNet net({3, 8, 4, 1}, 100 + trial);
    Vec z = random_vec(3, rng);
    const Vec g = net.grad_z(z);
    for (int i = 0; i < 3; ++i) {
      const double fd = central_diff([&] { return net.forward(z); }, z[i]);
      if (std::abs(fd) < 1e-12) continue;
      CHECK(std::abs(g[i] - fd) / std::abs(fd) <= 1e-6);
    }
  }
}

TEST_CASE("param_grad of h alone equals the backprop gradient (FD oracle)") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    BarrierNet net({2, 5, 3, 1}, 500 + trial);
    const Vec z = random_vec(2, rng);
    LossTerm term;
    term.z = z;
    term.value_coeff = 1.0;
    const ParamGrad g = net.param_grad({term});
    for (int l = 0; l < net.num_layers(); ++l) {
      auto& W = net.weights()[l];
      for (int r = 0; r < W.rows(); ++r)
        for (int c = 0; c < W.cols(); ++c) {
          const double fd = central_diff([&] { return net.forward(z); }, W(r, c));
          CHECK(g.dW[l](r, c) == doctest::Approx(fd).epsilon(1e-4));
        }
    }
  }
}

TEST_CASE("param_grad of directional gradient terms matches FD to 1e-5") {
  std::mt19937_64 rng(31);
  int checked = 0;
  for (int trial = 0; trial < 25; ++trial) {
    BarrierNet net({2, 6, 4, 1}, 900 + trial);
    const Vec z = random_vec(2, rng);
    const Vec v = random_vec(2, rng);
    LossTerm term;
    term.z = z;
    term.value_coeff = 0.3;
    term.grad_coeff = v;
    const ParamGrad g = net.param_grad({term});
    auto objective = [&] {
      return 0.3 * net.forward(z) + v.dot(net.grad_z(z));
    };
    for (int l = 0; l < net.num_layers(); ++l) {
      auto& W = net.weights()[l];
      for (int r = 0; r < W.rows(); ++r)
        for (int c = 0; c < W.cols(); ++c) {
          const double fd = central_diff(objective, W(r, c));
          if (std::abs(fd) < 1e-12) continue;
          CHECK(std::abs(g.dW[l](r, c) - fd) / std::abs(fd) <= 1e-5);
          ++checked;
        }
      auto& b = net.biases()[l];
      for (int r = 0; r < b.size(); ++r) {
        const double fd = central_diff(objective, b[r]);
        if (std::abs(fd) < 1e-12) continue;
        CHECK(std::abs(g.db[l][r] - fd) / std::abs(fd) <= 1e-5);
        ++checked;
      }
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("scaling a loss term scales its gradient linearly") {
  BarrierNet net({2, 4, 1}, 77);
  std::mt19937_64 rng(42);
  LossTerm term;
  term.z = random_vec(2, rng);
  term.value_coeff = 1.0;
  term.grad_coeff = random_vec(2, rng);
  LossTerm scaled = term;
  scaled.value_coeff *= 3.0;
  scaled.grad_coeff *= 3.0;
  const ParamGrad g1 = net.param_grad({term});
  const ParamGrad g3 = net.param_grad({scaled});
  for (int l = 0; l < net.num_layers(); ++l) {
    CHECK((g3.dW[l] - 3.0 * g1.dW[l]).norm() <= 1e-12 * g3.dW[l].norm() + 1e-14);
    CHECK((g3.db[l] - 3.0 * g1.db[l]).norm() <= 1e-12 * g3.db[l].norm() + 1e-14);
  }
}

TEST_CASE("global_lipschitz_bound: single layer and product rule") {
  BarrierNet single({1, 1}, 0);
  single.weights()[0](0, 0) = 3.0;
  single.biases()[0].setZero();
  CHECK(single.global_lipschitz_bound() == doctest::Approx(3.0).epsilon(1e-8));

  BarrierNet two({1, 1, 1}, 0);
  two.weights()[0](0, 0) = 2.0;
  two.weights()[1](0, 0) = 3.0;
  CHECK(two.global_lipschitz_bound() == doctest::Approx(6.0).epsilon(1e-8));
}

TEST_CASE("global_lipschitz_bound dominates sampled gradient norms") {
  BarrierNet net({3, 16, 8, 1}, 12);
  const double bound = net.global_lipschitz_bound();
  std::mt19937_64 rng(13);
  double max_grad = 0.0;
  for (int i = 0; i < 10000; ++i)
    max_grad = std::max(max_grad, net.grad_z(2.0 * random_vec(3, rng)).norm());
  CHECK(max_grad <= bound + 1e-12);
}

TEST_CASE("global_lipschitz_bound shrinks when weights shrink") {
  BarrierNet net({2, 8, 1}, 9);
  const double before = net.global_lipschitz_bound();
  net.weights()[0] *= 0.5;
  CHECK(net.global_lipschitz_bound() <= before);
}

TEST_CASE("second finite differences of h converge at 2nd order") {
  BarrierNet net({1, 6, 1}, 4);
  const Vec z = Vec::Constant(1, 0.3);
  auto second_diff = [&](double step) {
    Vec zp = z, zm = z;
    zp[0] += step;
    zm[0] -= step;
    return (net.forward(zp) - 2.0 * net.forward(z) + net.forward(zm)) /
           (step * step);
  };
  // Richardson ratio: D(s) = f'' + c s^2 + O(s^4), so successive differences
  // shrink by ~4 per step halving when the difference scheme is 2nd order.
  const double s = 2e-2;
  const double d1 = second_diff(4 * s) - second_diff(2 * s);
  const double d2 = second_diff(2 * s) - second_diff(s);
  CHECK(std::abs(d1) / std::max(std::abs(d2), 1e-14) >= 3.0);
}

TEST_CASE("checkpoint round-trip reproduces h bit-identically") {
  BarrierNet net({4, 32, 16, 1}, 2024);
  const auto path =
      (std::filesystem::temp_directory_path() / "rhcbf_net.json").string();
  net.save(path, 2024, "deadbeef");
  const BarrierNet loaded = BarrierNet::load(path);
  std::mt19937_64 rng(55);
  for (int i = 0; i < 100; ++i) {
    const Vec z = random_vec(4, rng);
    CHECK(net.forward(z) == loaded.forward(z));
  }
}

TEST_CASE("malformed and unsupported checkpoints raise clear errors") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto truncated = (dir / "rhcbf_trunc.json").string();
  {
    std::ofstream out(truncated);
    out << "{\"version\": 1, \"layer_dims\": [2, ";
  }
  CHECK_THROWS(BarrierNet::load(truncated));

  BarrierNet net({2, 3, 1}, 1);
  const auto vpath = (dir / "rhcbf_badver.json").string();
  net.save(vpath);
  {
    std::ifstream in(vpath);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    const auto pos = text.find("\"version\": 1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 12, "\"version\": 9");
    std::ofstream out(vpath);
    out << text;
  }
  try {
    BarrierNet::load(vpath);
    FAIL("expected an unsupported-version error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
}

TEST_CASE("parameter count follows sum (in+1)*out") {
  BarrierNet net({4, 32, 16, 1}, 0);
  CHECK(net.parameter_count() == (4 + 1) * 32 + (32 + 1) * 16 + (16 + 1) * 1);
}
