#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <vector>

#include "flowsense/adam.hpp"
#include "flowsense/checkpoint.hpp"
#include "flowsense/errors.hpp"
#include "flowsense/grad_check.hpp"
#include "flowsense/prng.hpp"
#include "flowsense/tape.hpp"

using flowsense::NumericError;
using flowsense::ValidationError;
using flowsense::Xorshift64Star;
using flowsense::neural::AdamState;
using flowsense::neural::grad_check;
using flowsense::neural::NamedTensor;
using flowsense::neural::Tape;
using flowsense::neural::Tensor;

namespace {

Tensor random_tensor(std::vector<int> shape, Xorshift64Star& rng,
                     double limit = 1.0) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t.at(i) = rng.uniform_pm(limit);
  return t;
}

using Builder =
    std::function<Tape::NodeId(Tape&, const std::vector<Tape::NodeId>&)>;

// Rebuilds the graph for value and gradient evaluation and runs the central
// finite-difference comparison.
double fd_check(const Builder& builder, const std::vector<Tensor>& params,
                int probes, uint64_t seed) {
  auto loss_fn = [&](const std::vector<Tensor>& ps) {
    Tape tape;
    std::vector<Tape::NodeId> ids;
    for (const Tensor& p : ps) ids.push_back(tape.input(p, false));
    return tape.value(builder(tape, ids)).at(0);
  };
  auto grad_fn = [&](const std::vector<Tensor>& ps) {
    Tape tape;
    std::vector<Tape::NodeId> ids;
    for (const Tensor& p : ps) ids.push_back(tape.input(p, true));
    tape.backward(builder(tape, ids));
    std::vector<Tensor> grads;
    for (Tape::NodeId id : ids) grads.push_back(tape.grad(id));
    return grads;
  };
  return grad_check(loss_fn, grad_fn, params, probes, seed).max_relative_error;
}

}  // namespace

TEST_CASE("matmul matches a hand-computed product") {
  Tape tape;
  const auto a = tape.input(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  const auto b = tape.input(Tensor::matrix(3, 1, {1, 0, -1}));
  const auto c = tape.matmul(a, b);
  CHECK(tape.value(c).at(0, 0) == -2.0);
  CHECK(tape.value(c).at(1, 0) == -2.0);

  const auto i3 = tape.input(
      Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  const auto ai = tape.matmul(a, i3);
  for (int i = 0; i < 6; ++i) CHECK(tape.value(ai).at(i) == tape.value(a).at(i));
}

TEST_CASE("matmul rejects mismatched shapes, naming both") {
  Tape tape;
  const auto a = tape.input(Tensor({2, 3}));
  const auto b = tape.input(Tensor({4, 2}));
  try {
    tape.matmul(a, b);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[4x2]") != std::string::npos);
  }
}

TEST_CASE("softmax of [0,0] is [0.5,0.5] and rows sum to one") {
  Tape tape;
  const auto x = tape.input(Tensor::matrix(1, 2, {0.0, 0.0}));
  const auto y = tape.softmax(x);
  CHECK(tape.value(y).at(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(tape.value(y).at(0, 1) == doctest::Approx(0.5).epsilon(1e-15));

  Xorshift64Star rng(3);
  const auto r = tape.input(random_tensor({6, 9}, rng, 30.0));
  const auto s = tape.softmax(r);
  for (int i = 0; i < 6; ++i) {
    double sum = 0.0;
    for (int j = 0; j < 9; ++j) sum += tape.value(s).at(i, j);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("mean over rows of a constant tensor is that constant") {
  Tape tape;
  Tensor c({5, 3});
  c.fill(2.75);
  const auto m = tape.mean_rows(tape.input(c));
  for (int j = 0; j < 3; ++j) {
    CHECK(tape.value(m).at(0, j) == 2.75);
  }
}

TEST_CASE("layer_norm rows have zero mean and unit variance") {
  Xorshift64Star rng(4);
  Tape tape;
  const auto x = tape.input(random_tensor({7, 16}, rng, 3.0));
  const auto y = tape.layer_norm(x);
  for (int i = 0; i < 7; ++i) {
    double mean = 0.0, var = 0.0;
    for (int j = 0; j < 16; ++j) mean += tape.value(y).at(i, j);
    mean /= 16;
    for (int j = 0; j < 16; ++j) {
      const double d = tape.value(y).at(i, j) - mean;
      var += d * d;
    }
    var /= 16;
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(var - 1.0) < 1e-6);
  }
}

TEST_CASE("backward of sum(x) is all ones") {
  Xorshift64Star rng(5);
  Tape tape;
  const auto x = tape.input(random_tensor({4, 6}, rng), true);
  tape.backward(tape.sum_all(x));
  for (int64_t i = 0; i < 24; ++i) {
    CHECK(tape.grad(x).at(i) == 1.0);
  }
}

TEST_CASE("backward of mse(Ax, y) matches the closed form") {
  Xorshift64Star rng(6);
  const Tensor a_val = random_tensor({5, 3}, rng);
  const Tensor x_val = random_tensor({3, 1}, rng);
  const Tensor y_val = random_tensor({5, 1}, rng);

  Tape tape;
  const auto a = tape.input(a_val, false);
  const auto x = tape.input(x_val, true);
  const auto y = tape.input(y_val, false);
  tape.backward(tape.mse(tape.matmul(a, x), y));

  // 2 A^T (A x - y) / n
  std::vector<double> residual(5, 0.0);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 3; ++j) residual[i] += a_val.at(i, j) * x_val.at(j, 0);
    residual[i] -= y_val.at(i, 0);
  }
  for (int j = 0; j < 3; ++j) {
    double expected = 0.0;
    for (int i = 0; i < 5; ++i) expected += a_val.at(i, j) * residual[i];
    expected *= 2.0 / 5.0;
    CHECK(tape.grad(x).at(j, 0) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("backward requires a scalar loss") {
  Tape tape;
  const auto x = tape.input(Tensor({2, 2}), true);
  CHECK_THROWS_AS(tape.backward(tape.relu(x)), ValidationError);
}

TEST_CASE("every backward rule passes the finite-difference oracle") {
  Xorshift64Star rng(7);
  struct Case {
    const char* name;
    Builder builder;
    std::vector<Tensor> params;
  };
  const Tensor target23 = random_tensor({2, 3}, rng);
  const Tensor target43 = random_tensor({4, 3}, rng);
  const Tensor target64 = random_tensor({6, 4}, rng);
  const Tensor target13 = random_tensor({1, 3}, rng);

  std::vector<Case> cases;
  cases.push_back({"matmul",
                   [&](Tape& t, const std::vector<Tape::NodeId>& p) {
                     return t.mse(t.matmul(p[0], p[1]), t.input(target23));
                   },
                   {random_tensor({2, 4}, rng), random_tensor({4, 3}, rng)}});
  cases.push_back({"add+scale",
                   [&](Tape& t, const std::vector<Tape::NodeId>& p) {
                     return t.mse(t.add(t.scale(p[0], 1.7), p[1]),
                                  t.input(target23));
                   },
                   {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)}});
  cases.push_back({"sub",
                   [&](Tape& t, const std::vector<Tape::NodeId>& p) {
                     return t.mse(t.sub(p[0], p[1]), t.input(target23));
                   },
                   {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)}});
  cases.push_back({"add_rowvec+mul_rowvec",
                   [&](Tape& t, const std::vector<Tape::NodeId>& p) {
                     return t.mse(t.add_rowvec(t.mul_rowvec(p[0], p[1]), p[2]),
                                  t.input(target43));
                   },
                   {random_tensor({4, 3}, rng), random_tensor({3}, rng),
                    random_tensor({3}, rng)}});
  cases.push_back({"concat_cols",
                   [&](Tape& t, const std::vector<Tape::NodeId>& p) {
                     return t.sum_all(
                         t.tanh(t.concat_cols({p[0], p[1], p[2]})));
                   },
                   {random_tensor({4, 2}, rng), random_tensor({4, 3}, rng),
                    random_tensor({4, 1}, rng)}});
  cases.push_back({"relu",
                   [&](Tape& t, const std::vector<Tape::NodeId>& p) {
                     return t.mse(t.relu(p[0]), t.input(target23));
                   },
                   {random_tensor({2, 3}, rng)}});
  cases.push_back({"tanh",
                   [&](Tape& t, const std::vector<Tape::NodeId>& p) {
                     return t.mse(t.tanh(p[0]), t.input(target23));
                   },
                   {random_tensor({2, 3}, rng)}});
  cases.push_back({"layer_norm",
                   [&](Tape& t, const std::vector<Tape::NodeId>& p) {
                     return t.mse(t.layer_norm(p[0]), t.input(target43));
                   },
                   {random_tensor({4, 3}, rng, 2.0)}});
  cases.push_back({"softmax",
                   [&](Tape& t, const std::vector<Tape::NodeId>& p) {
                     return t.mse(t.softmax(p[0]), t.input(target43));
                   },
                   {random_tensor({4, 3}, rng, 2.0)}});
  cases.push_back({"mean_rows",
                   [&](Tape& t, const std::vector<Tape::NodeId>& p) {
                     return t.mse(t.mean_rows(p[0]), t.input(target13));
                   },
                   {random_tensor({5, 3}, rng)}});
  const Tensor gather_target = random_tensor({4, 3}, rng);
  cases.push_back({"gather_rows",
                   [&](Tape& t, const std::vector<Tape::NodeId>& p) {
                     return t.mse(t.gather_rows(p[0], {2, 0, 1, 0}),
                                  t.input(gather_target));
                   },
                   {random_tensor({3, 3}, rng)}});
  const Tensor scatter_target = random_tensor({4, 3}, rng);
  cases.push_back({"scatter_sum_rows",
                   [&](Tape& t, const std::vector<Tape::NodeId>& p) {
                     return t.mse(t.scatter_sum_rows(p[0], {1, 0, 1, 2}, 4),
                                  t.input(scatter_target));
                   },
                   {random_tensor({4, 3}, rng)}});
  const Tensor segment_target = random_tensor({2, 3}, rng);
  cases.push_back({"segment_mean_rows",
                   [&](Tape& t, const std::vector<Tape::NodeId>& p) {
                     return t.mse(t.segment_mean_rows(p[0], {0, 0, 1, 1, 1}, 2),
                                  t.input(segment_target));
                   },
                   {random_tensor({5, 3}, rng)}});
  cases.push_back(
      {"attention",
       [&](Tape& t, const std::vector<Tape::NodeId>& p) {
         return t.mse(t.attention(p[0], p[1], p[2], /*seq_len=*/3, /*heads=*/2),
                      t.input(target64));
       },
       {random_tensor({6, 4}, rng), random_tensor({6, 4}, rng),
        random_tensor({6, 4}, rng)}});
  cases.push_back({"mse-both-sides",
                   [&](Tape& t, const std::vector<Tape::NodeId>& p) {
                     return t.mse(p[0], p[1]);
                   },
                   {random_tensor({3, 3}, rng), random_tensor({3, 3}, rng)}});

  for (auto& c : cases) {
    const double err = fd_check(c.builder, c.params, 25, 1000);
    CHECK_MESSAGE(err < 1e-4, c.name << " max relative error " << err);
  }
}

TEST_CASE("composite MLP graph passes finite differences") {
  Xorshift64Star rng(8);
  const Tensor x = random_tensor({6, 5}, rng);
  const Tensor target = random_tensor({6, 1}, rng);
  Builder builder = [&](Tape& t, const std::vector<Tape::NodeId>& p) {
    const auto h = t.relu(t.add_rowvec(t.matmul(t.input(x), p[0]), p[1]));
    const auto h2 = t.tanh(t.add_rowvec(t.matmul(h, p[2]), p[3]));
    return t.mse(t.add_rowvec(t.matmul(h2, p[4]), p[5]), t.input(target));
  };
  std::vector<Tensor> params = {random_tensor({5, 7}, rng),
                                random_tensor({7}, rng),
                                random_tensor({7, 4}, rng),
                                random_tensor({4}, rng),
                                random_tensor({4, 1}, rng),
                                random_tensor({1}, rng)};
  CHECK(fd_check(builder, params, 60, 2000) < 1e-4);
}

TEST_CASE("grad_check on a quadratic is exact to rounding") {
  Xorshift64Star rng(9);
  std::vector<Tensor> params = {random_tensor({3, 3}, rng)};
  Builder builder = [](Tape& t, const std::vector<Tape::NodeId>& p) {
    return t.mse(p[0], t.input(Tensor({3, 3})));
  };
  CHECK(fd_check(builder, params, 9, 3000) < 1e-8);
}

TEST_CASE("grad_check flags a corrupted backward rule") {
  Xorshift64Star rng(10);
  std::vector<Tensor> params = {random_tensor({4, 4}, rng)};
  const Tensor target = random_tensor({4, 4}, rng, 2.0);
  // tanh forward with a derivative overstated by 30 percent
  Builder bad = [&](Tape& t, const std::vector<Tape::NodeId>& p) {
    const auto y = t.custom_unary(
        p[0], [](double v) { return std::tanh(v); },
        [](double, double y_val) { return 1.3 * (1.0 - y_val * y_val); });
    return t.mse(y, t.input(target));
  };
  CHECK(fd_check(bad, params, 20, 4000) > 1e-2);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Xorshift64Star rng(20);
  Tensor p = random_tensor({3, 2}, rng);
  const Tensor before = p;
  Tensor g({3, 2});
  AdamState state;
  std::vector<Tensor*> params{&p};
  std::vector<const Tensor*> grads{&g};
  adam_step(params, grads, state);
  CHECK(p == before);
}

TEST_CASE("adam: first-step magnitude is about the learning rate") {
  Tensor p({2}, {1.0, -2.0});
  Tensor g({2}, {0.3, -40.0});
  AdamState state;
  state.learning_rate = 1e-3;
  std::vector<Tensor*> params{&p};
  std::vector<const Tensor*> grads{&g};
  adam_step(params, grads, state);
  CHECK(std::abs(p.at(0) - (1.0 - 1e-3)) < 1e-9);
  CHECK(std::abs(p.at(1) - (-2.0 + 1e-3)) < 1e-9);
}

TEST_CASE("adam is deterministic across identical runs") {
  Xorshift64Star rng(21);
  Tensor p1 = random_tensor({4, 4}, rng);
  Tensor p2 = p1;
  const Tensor g1 = random_tensor({4, 4}, rng);
  AdamState s1, s2;
  std::vector<Tensor*> params1{&p1}, params2{&p2};
  std::vector<const Tensor*> grads{&g1};
  for (int i = 0; i < 5; ++i) {
    adam_step(params1, grads, s1);
    adam_step(params2, grads, s2);
  }
  CHECK(p1 == p2);
}

TEST_CASE("tensor archive round-trips bit-exactly") {
  Xorshift64Star rng(22);
  const std::string path = "test_archive.fsta";
  std::vector<NamedTensor> tensors;
  tensors.push_back({"alpha", random_tensor({3, 4}, rng)});
  tensors.push_back({"beta/bias", random_tensor({7}, rng)});
  tensors.push_back({"scalar", Tensor::scalar(0.5)});
  flowsense::neural::save_tensors(path, tensors);
  const auto loaded = flowsense::neural::load_tensors(path);
  REQUIRE(loaded.size() == tensors.size());
  for (size_t i = 0; i < tensors.size(); ++i) {
    CHECK(loaded[i].name == tensors[i].name);
    CHECK(loaded[i].tensor == tensors[i].tensor);
  }
  std::filesystem::remove(path);
}

TEST_CASE("tensor archive rejects foreign and damaged files") {
  const std::string path = "test_bad_archive.fsta";
  {
    std::ofstream out(path, std::ios::binary);
    out << "not an archive at all";
  }
  CHECK_THROWS_AS(flowsense::neural::load_tensors(path), ValidationError);

  // Correct magic, unsupported version.
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    const char magic[4] = {'F', 'S', 'T', 'A'};
    out.write(magic, 4);
    const uint32_t version = 99, count = 0;
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&count), 4);
  }
  CHECK_THROWS_WITH_AS(flowsense::neural::load_tensors(path),
                       doctest::Contains("version"), ValidationError);

  // Truncated payload.
  {
    std::vector<NamedTensor> tensors{{"x", Tensor({4, 4})}};
    flowsense::neural::save_tensors(path, tensors);
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 9));
  }
  CHECK_THROWS_WITH_AS(flowsense::neural::load_tensors(path),
                       doctest::Contains("truncated"), ValidationError);
  std::filesystem::remove(path);
}

TEST_CASE("ops reject non-finite values") {
  Tape tape;
  Tensor bad({2});
  bad.at(0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(tape.input(bad), NumericError);
}

TEST_CASE("tape ops are bit-deterministic across runs") {
  Xorshift64Star rng(23);
  const Tensor a = random_tensor({8, 8}, rng);
  const Tensor b = random_tensor({8, 8}, rng);
  auto run = [&]() {
    Tape tape;
    const auto x = tape.input(a);
    const auto y = tape.input(b);
    return tape.value(tape.softmax(tape.matmul(tape.tanh(x), y)));
  };
  CHECK(run() == run());
}
