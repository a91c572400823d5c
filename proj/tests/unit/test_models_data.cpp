#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "wdlab/autodiff.hpp"
#include "wdlab/data.hpp"
#include "wdlab/errors.hpp"
#include "wdlab/losses.hpp"
#include "wdlab/models.hpp"

using namespace wdlab;

namespace {

MLPSpec invariant_spec(bool skip) {
  MLPSpec spec{{4, 8, 8, 3}};
  spec.skip_connections = skip;
  return make_scale_invariant(spec);
}

}  // namespace

TEST_CASE("build_mlp") {
  const MLPSpec spec{{2, 4, 2}};
  const auto a = build_mlp(spec, 0);
  const auto b = build_mlp(spec, 0);
  CHECK(a.params == b.params);
  CHECK_FALSE(a.params == build_mlp(spec, 1).params);
  CHECK(a.params.total_dim() == 2 * 4 + 4 + 4 * 2 + 2);

  MLPSpec fixed = spec;
  fixed.last_layer_fixed = true;
  const auto f = build_mlp(fixed, 0);
  CHECK(f.params.total_dim() == 2 * 4 + 4);
  CHECK(f.model.fixed_last_layer().rows() == 4);
  CHECK(f.model.fixed_last_layer().cols() == 2);

  const RowMatrix zeros = RowMatrix::Zero(3, 2);
  CHECK(evaluate_outputs(a.model, a.params, zeros).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(build_mlp(MLPSpec{{3}}, 0), ConfigError);
  CHECK_THROWS_AS(build_mlp(MLPSpec{{3, 0, 2}}, 0), ConfigError);
  CHECK_THROWS_AS(evaluate_outputs(a.model, a.params, RowMatrix::Zero(3, 5)), ShapeError);
  CHECK_THROWS_AS(make_scale_invariant(MLPSpec{{3, 2}}), ConfigError);
}

TEST_CASE("scale-invariant transform") {
  const MLPSpec spec = invariant_spec(false);
  CHECK(spec.last_layer_fixed);
  CHECK(spec.normalization == Normalization::non_affine);

  SUBCASE("outputs are constant along rays") {
    double worst = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
      const auto built = build_mlp(invariant_spec(s % 2 == 1), s);
      std::mt19937_64 rng(s);
      const DataBatch batch = oracle::random_batch(3, 4, 3, rng);
      FlatVector w = built.params.flatten();
      if (w.norm() < 1) w /= w.norm();
      const RowMatrix h1 = evaluate_outputs(built.model, built.params.with_values(w), batch.inputs);
      const RowMatrix h2 = evaluate_outputs(built.model, built.params.with_values(2 * w), batch.inputs);
      worst = std::max(worst, (h1 - h2).cwiseAbs().maxCoeff());
    }
    CHECK(worst <= 1e-12);
  }

  SUBCASE("gradients scale as 1/alpha and are orthogonal to w") {
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto built = build_mlp(invariant_spec(s % 2 == 0), s);
      std::mt19937_64 rng(s + 50);
      const DataBatch batch = oracle::random_batch(12, 4, 3, rng);
      const FlatVector w = built.params.flatten();
      const auto base = loss_and_gradient(built.model, built.params, batch);
      CHECK(std::abs(w.dot(base.grad)) <= 1e-10 * w.norm() * base.grad.norm());
      for (double alpha : {0.5, 2.0, 10.0}) {
        const auto scaled = loss_and_gradient(built.model, built.params.with_values(alpha * w), batch);
        CHECK(oracle::rel_err(scaled.grad, base.grad / alpha) <= 1e-8);
        CHECK(scaled.loss == doctest::Approx(base.loss).epsilon(1e-12));
        CHECK(scaled.grad.norm() * alpha * w.norm() == doctest::Approx(base.grad.norm() * w.norm()).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("He initialization keeps activations in a sane envelope") {
  TaskSpec task{TaskKind::gauss_blobs, 512, 8, 4, 1.0, 3};
  Dataset ds = generate(task);
  standardize(ds.train, ds.train);
  const auto built = build_mlp(MLPSpec{{8, 64, 64, 64, 4}}, 1);
  const auto fr = forward(built.model, built.params, ds.train);
  int relu_layers = 0;
  for (const auto& node : fr.tape.nodes()) {
    if (node.kind != OpKind::relu) continue;
    const auto& v = node.value.data();
    const double mean = v.mean();
    const double sd = std::sqrt((v.array() - mean).square().mean());
    CHECK(sd >= 0.5);
    CHECK(sd <= 2.0);
    ++relu_layers;
  }
  CHECK(relu_layers == 3);
}

TEST_CASE("losses") {
  RowMatrix uniform = RowMatrix::Constant(3, 10, 1.5);
  const std::vector<int> labels{0, 4, 9};
  CHECK(loss_crossentropy(uniform, labels) == doctest::Approx(std::log(10.0)).epsilon(1e-14));
  CHECK(loss_crossentropy(uniform, labels) == doctest::Approx(2.302585).epsilon(1e-6));
  CHECK_THROWS_AS(loss_crossentropy(uniform, std::vector<int>{0, 4, 10}), DomainError);
  CHECK_THROWS_AS(loss_bce(0.3, 2), DomainError);

  RowMatrix pred(2, 2);
  pred << 1, 2, 3, 4;
  CHECK(loss_sq(pred, pred) == 0.0);
  CHECK(loss_sq(pred, RowMatrix::Zero(2, 2)) == doctest::Approx(30.0 / 4));

  for (int label : {0, 1}) {
    for (int i = 0; i <= 2000; ++i) {
      const double z = -10.0 + 0.01 * i;
      const double d = loss_bce_derivative(z, label);
      CHECK(d * d <= loss_bce(z, label));
    }
  }
  // derivative against a central difference
  for (double z : {-3.0, 0.0, 0.7, 5.0}) {
    const double fd = (loss_bce(z + 1e-6, 1) - loss_bce(z - 1e-6, 1)) / 2e-6;
    CHECK(loss_bce_derivative(z, 1) == doctest::Approx(fd).epsilon(1e-7));
  }
  CHECK(loss_bce(-800.0, 1) == doctest::Approx(800.0));
}

TEST_CASE("synthetic tasks") {
  SUBCASE("determinism") {
    const TaskSpec blobs{TaskKind::gauss_blobs, 120, 5, 3, 0.5, 7};
    CHECK(generate(blobs).train == generate(blobs).train);
    CHECK(generate(blobs).test == generate(blobs).test);
    TaskSpec other = blobs;
    other.seed = 8;
    CHECK_FALSE(generate(other).train == generate(blobs).train);
  }
  SUBCASE("linreg without noise is exactly linear") {
    const TaskSpec lin{TaskKind::linreg, 50, 4, 2, 0.0, 3};
    const Dataset ds = generate(lin);
    const FlatVector teacher = linreg_teacher(lin);
    CHECK(ds.train.targets.cols() == 1);
    for (Index i = 0; i < ds.train.size(); ++i) {
      CHECK(ds.train.targets(i, 0) == ds.train.inputs.row(i).dot(teacher));
    }
  }
  SUBCASE("class balance and split") {
    const TaskSpec spiral{TaskKind::spiral, 200, 2, 2, 0.1, 1};
    const Dataset ds = generate(spiral);
    CHECK(ds.train.size() == 200);
    CHECK(ds.test.size() == 50);
    CHECK(std::count(ds.train.labels.begin(), ds.train.labels.end(), 0) == 100);
    CHECK(std::count(ds.train.labels.begin(), ds.train.labels.end(), 1) == 100);
    // spiral radius is at most 1 before noise
    CHECK(ds.train.inputs.leftCols(2).rowwise().norm().maxCoeff() < 1.5);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(generate(TaskSpec{TaskKind::gauss_blobs, 2, 2, 3, 0.1, 0}), ConfigError);
    CHECK_THROWS_AS(generate(TaskSpec{TaskKind::spiral, 10, 1, 2, 0.1, 0}), ConfigError);
    CHECK_THROWS_AS(parse_task_kind("cifar"), ConfigError);
  }
}

TEST_CASE("csv round trip") {
  const Dataset blobs = generate(TaskSpec{TaskKind::gauss_blobs, 40, 3, 2, 0.3, 5});
  std::stringstream ss;
  write_csv(ss, blobs.train);
  const std::string text = ss.str();
  CHECK(text.rfind("x0,x1,x2,label\n", 0) == 0);
  CHECK(read_csv(ss, true) == blobs.train);

  const Dataset lin = generate(TaskSpec{TaskKind::linreg, 30, 2, 2, 0.1, 5});
  std::stringstream rs;
  write_csv(rs, lin.train);
  CHECK(read_csv(rs, false) == lin.train);

  std::stringstream bad("x0,label\n1.0,2.0,3.0\n");
  CHECK_THROWS_AS(read_csv(bad, true), ConfigError);
}

TEST_CASE("data batch helpers") {
  const Dataset ds = generate(TaskSpec{TaskKind::gauss_blobs, 20, 3, 2, 0.3, 5});
  const std::vector<Index> rows{3, 3, 0};
  const DataBatch sub = ds.train.subset(rows);
  CHECK(sub.size() == 3);
  CHECK(sub.inputs.row(0) == ds.train.inputs.row(3));
  CHECK(sub.labels[2] == ds.train.labels[0]);
  DataBatch broken = ds.train;
  broken.labels.pop_back();
  CHECK_THROWS_AS(broken.validate(), ShapeError);

  DataBatch st = ds.train;
  standardize(st, ds.train);
  CHECK(st.inputs.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
}
