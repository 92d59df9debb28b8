#include <random>

#include "doctest.h"
#include "support.hpp"

using namespace styletalk;
using testsupport::check_gradients;
using testsupport::random_matrix;

namespace {

ag::Var leaf(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  return ag::Var(random_matrix(r, c, rng, scale), true);
}

void expect_exact(const std::function<ag::Var()>& f, std::vector<ag::Var> params) {
  const testsupport::GradReport r = check_gradients(f, std::move(params), 1e-6);
  CHECK(r.checked > 0);
  CHECK(r.passed == r.checked);
}

}  // namespace

TEST_SUITE("autograd") {
  TEST_CASE("elementwise and reduction gradients") {
    std::mt19937_64 rng(1);
    ag::Var a = leaf(3, 4, rng), b = leaf(3, 4, rng), row = leaf(1, 4, rng);
    ag::Var pos(random_matrix(3, 4, rng).cwiseAbs().array() + 0.5, true);
    expect_exact([&] { return ag::sum(ag::mul(ag::add(a, row), ag::sub(b, a))); }, {a, b, row});
    expect_exact([&] { return ag::mean(ag::div(a, pos)); }, {a, pos});
    expect_exact([&] { return ag::sum(ag::log(pos)); }, {pos});
    expect_exact([&] { return ag::sum(ag::sqrt(pos)); }, {pos});
    expect_exact([&] { return ag::norm2(ag::scale(ag::add_scalar(a, 0.3), -2.0)); }, {a});
    expect_exact([&] { return ag::sum(ag::square(ag::leaky_relu(a, 0.2))); }, {a});
    expect_exact([&] { return ag::sum(ag::row_sum(ag::mul(a, a))); }, {a});
  }

  TEST_CASE("matrix and structural gradients") {
    std::mt19937_64 rng(2);
    ag::Var x = leaf(5, 3, rng), w = leaf(3, 4, rng), bias = leaf(1, 4, rng);
    const std::vector<int> rows = {4, 0, 0, 2};
    const std::vector<int> cols = {1, 3};
    expect_exact(
        [&] {
          const ag::Var y = ag::linear(x, w, bias);
          return ag::sum(ag::square(ag::gather_cols(ag::gather_rows(y, rows), cols)));
        },
        {x, w, bias});
    expect_exact([&] { return ag::sum(ag::mul(ag::transpose(ag::matmul(x, w)), ag::transpose(ag::matmul(x, w)))); },
                 {x, w});
    expect_exact([&] { return ag::sum(ag::square(ag::reshape(x, 3, 5))); }, {x});
    expect_exact([&] { return ag::sum(ag::square(ag::concat_cols({x, ag::scale(x, 2.0)}))); }, {x});
    expect_exact([&] { return ag::sum(ag::square(ag::concat_rows({x, x}))); }, {x});
    ag::Var g = leaf(6, 3, rng);
    expect_exact([&] { return ag::sum(ag::square(ag::group_mean_rows(g, 3))); }, {g});
    expect_exact([&] { return ag::sum(ag::square(ag::group_max_rows(g, 2))); }, {g});
  }

  TEST_CASE("network primitive gradients") {
    std::mt19937_64 rng(3);
    ag::Var x = leaf(6, 4, rng), gamma = leaf(1, 4, rng), beta = leaf(1, 4, rng);
    ag::Var target(random_matrix(6, 4, rng), false);
    expect_exact([&] { return ag::sum(ag::mul(ag::softmax_rows(x), target)); }, {x});
    CHECK(check_gradients([&] { return ag::sum(ag::mul(ag::layer_norm(x, gamma, beta), target)); },
                          {x, gamma, beta})
              .pass_rate() == 1.0);
    ag::Var q = leaf(4, 4, rng), k = leaf(6, 4, rng), v = leaf(6, 4, rng);
    CHECK(check_gradients([&] { return ag::sum(ag::mul(ag::grouped_attention(q, k, v, 2, 2, 3), ag::gather_rows(target, std::vector<int>{0, 1, 2, 3}))); },
                          {q, k, v})
              .pass_rate() == 1.0);
    expect_exact([&] { return ag::sum(ag::square(ag::unfold1d(x, 4, 2, 1))); }, {x});
    ag::Var img = leaf(9, 8, rng);
    expect_exact([&] { return ag::sum(ag::square(ag::box_filter(img, 3))); }, {img});
    ag::Var a = leaf(5, 3, rng), b = leaf(5, 3, rng);
    expect_exact([&] { return ag::sum(ag::row_cosine(a, b, 1e-8)); }, {a, b});
  }

  TEST_CASE("box filter matches a direct window mean") {
    std::mt19937_64 rng(4);
    const MatrixD m = random_matrix(6, 5, rng);
    const MatrixD out = ag::box_filter(ag::Var(m), 3).value();
    REQUIRE(out.rows() == 4);
    REQUIRE(out.cols() == 3);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 3; ++c) CHECK(out(r, c) == doctest::Approx(m.block(r, c, 3, 3).mean()).epsilon(1e-12));
  }

  TEST_CASE("unfold pads with zeros") {
    MatrixD m(3, 1);
    m << 1, 2, 3;
    const MatrixD u = ag::unfold1d(ag::Var(m), 4, 2, 1).value();
    // a single window over padded positions -1..2
    REQUIRE(u.rows() == 1);
    CHECK(u(0, 0) == 0.0);
    CHECK(u(0, 1) == 1.0);
    CHECK(u(0, 3) == 3.0);
  }

  TEST_CASE("no-grad mode builds no graph") {
    std::mt19937_64 rng(5);
    ag::Var a = leaf(2, 2, rng);
    ag::NoGradGuard guard;
    CHECK_FALSE(ag::grad_enabled());
    const ag::Var y = ag::sum(ag::square(a));
    CHECK_FALSE(y.requires_grad());
  }

  TEST_CASE("gradients accumulate until zeroed") {
    ag::Var a(MatrixD::Constant(1, 1, 3.0), true);
    ag::backward(ag::square(a));
    ag::backward(ag::square(a));
    CHECK(a.grad()(0, 0) == 12.0);
    a.zero_grad();
    CHECK(a.grad().size() == 0);
  }
}

TEST_SUITE("nn") {
  TEST_CASE("adam with zero gradient leaves parameters unchanged") {
    std::mt19937_64 rng(6);
    ag::Var p(random_matrix(3, 3, rng), true);
    const MatrixD before = p.value();
    nn::Adam opt({p}, {});
    opt.step();
    CHECK((p.value().array() == before.array()).all());
  }

  TEST_CASE("adam first step moves each entry by lr against the gradient sign") {
    ag::Var p(MatrixD::Zero(1, 3), true);
    nn::Adam opt({p}, {.lr = 0.1});
    MatrixD target(1, 3);
    target << 1.0, -2.0, 0.5;
    ag::backward(ag::sum(ag::mul(p, ag::Var(target))));
    opt.step();
    // bias-corrected first step is -lr * g / (|g| + eps')
    for (int j = 0; j < 3; ++j) CHECK(p.value()(0, j) == doctest::Approx(-0.1 * (target(0, j) > 0 ? 1 : -1)).epsilon(1e-6));
    CHECK(p.grad().size() == 0);
  }

  TEST_CASE("sinusoidal positions") {
    const MatrixD pe = nn::sinusoidal_positions(3, 4);
    CHECK(pe(0, 0) == 0.0);
    CHECK(pe(0, 1) == 1.0);
    CHECK(pe(1, 0) == doctest::Approx(std::sin(1.0)));
    CHECK(pe(2, 2) == doctest::Approx(std::sin(2.0 / 100.0)));
  }

  TEST_CASE("param store naming, freezing and copying") {
    std::mt19937_64 rng(7);
    nn::ParamStore root("m");
    nn::ParamStore sub = root.scoped("layer");
    nn::Linear lin(sub, "fc", 2, 3, rng);
    REQUIRE(root.find("m.layer.fc.weight") != nullptr);
    CHECK(root.numel() == 2 * 3 + 3);
    root.set_trainable(false);
    CHECK_FALSE(lin.weight().requires_grad());
    root.set_trainable(true);
    CHECK(lin.weight().requires_grad());

    nn::ParamStore other("m");
    nn::ParamStore osub = other.scoped("layer");
    nn::Linear lin2(osub, "fc", 2, 3, rng);
    other.copy_values_from(root);
    CHECK((lin2.weight().value().array() == lin.weight().value().array()).all());
  }
}
