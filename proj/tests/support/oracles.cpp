#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace oracle {

using wdlab::ParamSet;
using wdlab::Tape;
using wdlab::Tensor;
using wdlab::Var;

FlatVector fd_gradient(const ScalarFn& f, const FlatVector& w, double h) {
  FlatVector g(w.size());
  FlatVector x = w;
  for (Index i = 0; i < w.size(); ++i) {
    x(i) = w(i) + h;
    const double up = f(x);
    x(i) = w(i) - h;
    const double down = f(x);
    x(i) = w(i);
    g(i) = (up - down) / (2 * h);
  }
  return g;
}

RowMatrix dense_hessian(const VectorFn& grad, const FlatVector& w, double h) {
  const Index p = w.size();
  RowMatrix H(p, p);
  FlatVector x = w;
  for (Index j = 0; j < p; ++j) {
    x(j) = w(j) + h;
    const FlatVector up = grad(x);
    x(j) = w(j) - h;
    const FlatVector down = grad(x);
    x(j) = w(j);
    H.col(j) = (up - down) / (2 * h);
  }
  return (H + H.transpose()) / 2;
}

double rel_err(const FlatVector& a, const FlatVector& b, double floor) {
  const double scale = std::max({a.norm(), b.norm(), floor});
  return (a - b).norm() / scale;
}

namespace {

using Grid = std::vector<std::vector<double>>;

Grid to_grid(const RowMatrix& m) {
  Grid g(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) g[i][j] = m(i, j);
  return g;
}

// x (n x a) times a weight read row-major from w[offset..] with shape a x b.
Grid affine(const Grid& x, const FlatVector& w, Index& offset, std::size_t b, bool bias) {
  const std::size_t a = x.front().size();
  Grid out(x.size(), std::vector<double>(b, 0.0));
  for (std::size_t r = 0; r < x.size(); ++r)
    for (std::size_t k = 0; k < a; ++k)
      for (std::size_t c = 0; c < b; ++c) out[r][c] += x[r][k] * w(offset + static_cast<Index>(k * b + c));
  offset += static_cast<Index>(a * b);
  if (bias) {
    for (auto& row : out)
      for (std::size_t c = 0; c < b; ++c) row[c] += w(offset + static_cast<Index>(c));
    offset += static_cast<Index>(b);
  }
  return out;
}

Grid normalize_rows(Grid x, double eps) {
  for (auto& row : x) {
    double mean = 0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(row.size());
    double var = 0;
    for (double v : row) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(row.size()));
    for (double& v : row) v = (sd + eps) > 0 ? (v - mean) / (sd + eps) : 0.0;
  }
  return x;
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

RowMatrix mlp_outputs(const wdlab::MLPSpec& spec, const RowMatrix& fixed_last, const FlatVector& w,
                      const RowMatrix& inputs) {
  const auto& widths = spec.layer_widths;
  const bool normalized = spec.normalization == wdlab::Normalization::non_affine;
  Grid h = to_grid(inputs);
  Index offset = 0;
  for (std::size_t l = 0; l + 2 < widths.size(); ++l) {
    Grid z = affine(h, w, offset, static_cast<std::size_t>(widths[l + 1]), true);
    if (normalized) z = normalize_rows(z, spec.norm_eps);
    for (auto& row : z)
      for (double& v : row) v = std::max(v, 0.0);
    if (spec.skip_connections && widths[l] == widths[l + 1]) {
      const Grid skip = normalized ? normalize_rows(h, spec.norm_eps) : h;
      for (std::size_t r = 0; r < z.size(); ++r)
        for (std::size_t c = 0; c < z[r].size(); ++c) z[r][c] += skip[r][c];
    }
    h = z;
  }
  Grid out;
  if (spec.last_layer_fixed) {
    const std::size_t b = static_cast<std::size_t>(fixed_last.cols());
    out.assign(h.size(), std::vector<double>(b, 0.0));
    for (std::size_t r = 0; r < h.size(); ++r)
      for (std::size_t k = 0; k < h[r].size(); ++k)
        for (std::size_t c = 0; c < b; ++c) out[r][c] += h[r][k] * fixed_last(static_cast<Index>(k), static_cast<Index>(c));
  } else {
    out = affine(h, w, offset, static_cast<std::size_t>(widths.back()), true);
  }
  if (offset != w.size()) throw std::logic_error("mlp oracle: parameter count mismatch");
  RowMatrix m(static_cast<Index>(out.size()), widths.back());
  for (std::size_t r = 0; r < out.size(); ++r)
    for (std::size_t c = 0; c < out[r].size(); ++c) m(static_cast<Index>(r), static_cast<Index>(c)) = out[r][c];
  return m;
}

double mlp_loss(const wdlab::MLPSpec& spec, const RowMatrix& fixed_last, const FlatVector& w,
                const DataBatch& batch) {
  const RowMatrix out = mlp_outputs(spec, fixed_last, w, batch.inputs);
  const Index n = out.rows();
  double total = 0;
  switch (spec.loss) {
    case wdlab::LossKind::softmax_xent:
      for (Index r = 0; r < n; ++r) {
        double mx = -std::numeric_limits<double>::infinity();
        for (Index c = 0; c < out.cols(); ++c) mx = std::max(mx, out(r, c));
        double s = 0;
        for (Index c = 0; c < out.cols(); ++c) s += std::exp(out(r, c) - mx);
        total += mx + std::log(s) - out(r, batch.labels[static_cast<std::size_t>(r)]);
      }
      return total / static_cast<double>(n);
    case wdlab::LossKind::logistic_xent:
      for (Index r = 0; r < n; ++r) {
        const double z = out(r, 0);
        total += batch.labels[static_cast<std::size_t>(r)] == 1 ? softplus(-z) : softplus(z);
      }
      return total / static_cast<double>(n);
    case wdlab::LossKind::squared:
      for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < out.cols(); ++c) total += (out(r, c) - batch.targets(r, c)) * (out(r, c) - batch.targets(r, c));
      return total / static_cast<double>(out.size());
  }
  return NAN;
}

RowMatrix mlp_output_jacobian(const wdlab::MLPSpec& spec, const RowMatrix& fixed_last, const FlatVector& w,
                              const RowMatrix& inputs, double h) {
  const Index k = spec.layer_widths.back();
  RowMatrix J(inputs.rows() * k, w.size());
  FlatVector x = w;
  for (Index j = 0; j < w.size(); ++j) {
    x(j) = w(j) + h;
    const RowMatrix up = mlp_outputs(spec, fixed_last, x, inputs);
    x(j) = w(j) - h;
    const RowMatrix down = mlp_outputs(spec, fixed_last, x, inputs);
    x(j) = w(j);
    const RowMatrix d = (up - down) / (2 * h);
    J.col(j) = Eigen::Map<const FlatVector>(d.data(), d.size());
  }
  return J;
}

FlatVector loss_output_gradient(wdlab::LossKind kind, const RowMatrix& outputs, const DataBatch& batch) {
  const Index n = outputs.rows(), k = outputs.cols();
  FlatVector g = FlatVector::Zero(n * k);
  for (Index r = 0; r < n; ++r) {
    switch (kind) {
      case wdlab::LossKind::softmax_xent: {
        const Eigen::RowVectorXd e = (outputs.row(r).array() - outputs.row(r).maxCoeff()).exp();
        for (Index c = 0; c < k; ++c) g(r * k + c) = e(c) / e.sum() / static_cast<double>(n);
        g(r * k + batch.labels[static_cast<std::size_t>(r)]) -= 1.0 / static_cast<double>(n);
        break;
      }
      case wdlab::LossKind::logistic_xent: {
        const double s = 1 / (1 + std::exp(-outputs(r, 0)));
        g(r) = (s - batch.labels[static_cast<std::size_t>(r)]) / static_cast<double>(n);
        break;
      }
      case wdlab::LossKind::squared:
        for (Index c = 0; c < k; ++c)
          g(r * k + c) = 2 * (outputs(r, c) - batch.targets(r, c)) / static_cast<double>(n * k);
        break;
    }
  }
  return g;
}

RowMatrix loss_output_hessian(wdlab::LossKind kind, const RowMatrix& outputs, const DataBatch&) {
  const Index n = outputs.rows(), k = outputs.cols();
  RowMatrix H = RowMatrix::Zero(n * k, n * k);
  for (Index r = 0; r < n; ++r) {
    switch (kind) {
      case wdlab::LossKind::softmax_xent: {
        const Eigen::RowVectorXd e = (outputs.row(r).array() - outputs.row(r).maxCoeff()).exp();
        const Eigen::RowVectorXd p = e / e.sum();
        for (Index a = 0; a < k; ++a)
          for (Index b = 0; b < k; ++b)
            H(r * k + a, r * k + b) = ((a == b ? p(a) : 0.0) - p(a) * p(b)) / static_cast<double>(n);
        break;
      }
      case wdlab::LossKind::logistic_xent: {
        const double s = 1 / (1 + std::exp(-outputs(r, 0)));
        H(r, r) = s * (1 - s) / static_cast<double>(n);
        break;
      }
      case wdlab::LossKind::squared:
        for (Index c = 0; c < k; ++c) H(r * k + c, r * k + c) = 2.0 / static_cast<double>(n * k);
        break;
    }
  }
  return H;
}

RowMatrix gauss_newton_matrix(const wdlab::MLPSpec& spec, const RowMatrix& fixed_last, const FlatVector& w,
                              const DataBatch& batch) {
  const RowMatrix J = mlp_output_jacobian(spec, fixed_last, w, batch.inputs);
  const RowMatrix out = mlp_outputs(spec, fixed_last, w, batch.inputs);
  return J.transpose() * loss_output_hessian(spec.loss, out, batch) * J;
}

FlatVector residual_curvature(const wdlab::MLPSpec& spec, const RowMatrix& fixed_last, const FlatVector& w,
                              const DataBatch& batch, const FlatVector& v, double eps) {
  const RowMatrix out = mlp_outputs(spec, fixed_last, w, batch.inputs);
  const FlatVector r = loss_output_gradient(spec.loss, out, batch);
  const double step = eps / v.norm();
  const RowMatrix up = mlp_output_jacobian(spec, fixed_last, w + step * v, batch.inputs);
  const RowMatrix down = mlp_output_jacobian(spec, fixed_last, w - step * v, batch.inputs);
  return (up - down).transpose() * r / (2 * step);
}

double round_to_format(double x, int fraction_bits, int exponent_bits) {
  if (std::isnan(x) || std::isinf(x) || x == 0.0) return x;
  const int emax = (1 << (exponent_bits - 1)) - 1;
  const int emin = 1 - emax;
  const double max_finite = std::ldexp(2.0 - std::ldexp(1.0, -fraction_bits), emax);
  int e = 0;
  std::frexp(std::abs(x), &e);
  const int exponent = std::max(e - 1, emin);
  const double ulp = std::ldexp(1.0, exponent - fraction_bits);
  const double q = std::nearbyint(std::abs(x) / ulp) * ulp;
  const double mag = q > max_finite ? std::numeric_limits<double>::infinity() : q;
  return std::copysign(mag, x);
}

namespace {

double decode(std::uint16_t bits, int fraction_bits, int exponent_bits) {
  const bool negative = (bits >> 15) & 1u;
  const unsigned exponent = (bits >> fraction_bits) & ((1u << exponent_bits) - 1u);
  const unsigned fraction = bits & ((1u << fraction_bits) - 1u);
  const int bias = (1 << (exponent_bits - 1)) - 1;
  double mag;
  if (exponent == (1u << exponent_bits) - 1u) {
    mag = fraction ? std::numeric_limits<double>::quiet_NaN() : std::numeric_limits<double>::infinity();
  } else if (exponent == 0) {
    mag = std::ldexp(static_cast<double>(fraction), 1 - bias - fraction_bits);
  } else {
    mag = std::ldexp(static_cast<double>(fraction + (1u << fraction_bits)), static_cast<int>(exponent) - bias - fraction_bits);
  }
  return negative ? -mag : mag;
}

}  // namespace

double decode_bf16(std::uint16_t bits) { return decode(bits, 7, 8); }
double decode_fp16(std::uint16_t bits) { return decode(bits, 10, 5); }

Var ProgramModel::outputs(Tape&, const ParamSet&, const RowMatrix&) const {
  throw std::logic_error("program model has no per-example outputs");
}

DataBatch random_batch(Index n, Index dim, int classes, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  DataBatch b;
  b.inputs.resize(n, dim);
  for (Index i = 0; i < b.inputs.size(); ++i) b.inputs.data()[i] = normal(rng);
  for (Index i = 0; i < n; ++i) b.labels.push_back(static_cast<int>(i % classes));
  return b;
}

namespace {

RowMatrix random_matrix(Index r, Index c, std::mt19937_64& rng, double min_abs = 0.0) {
  std::normal_distribution<double> normal;
  RowMatrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) {
    double v;
    do v = normal(rng);
    while (std::abs(v) < min_abs);
    m.data()[i] = v;
  }
  return m;
}

// Worst relative error of the tape gradient against central differences of
// the model's own forward pass.
double program_check(const ProgramModel& model, const ParamSet& params) {
  const DataBatch empty;
  const FlatVector g = wdlab::loss_and_gradient(model, params, empty).grad;
  const FlatVector fd = fd_gradient(
      [&](const FlatVector& w) { return wdlab::evaluate_loss(model, params.with_values(w), empty); },
      params.flatten());
  return rel_err(g, fd, 1e-8);
}

struct PrimitiveSpec {
  std::string name;
  std::function<double(std::mt19937_64&)> run;
};

// Reduces a tensor-valued node to a scalar through a fixed random weighting.
Var weighted_mean(Tape& tape, Var x, const RowMatrix& weights) { return tape.mean(tape.mul(x, tape.constant(weights))); }

std::vector<PrimitiveSpec> primitive_specs() {
  std::vector<PrimitiveSpec> specs;
  auto binary = [](std::string name, Index ar, Index ac, Index br, Index bc,
                   std::function<Var(Tape&, Var, Var)> op, Index outr, Index outc) {
    return PrimitiveSpec{name, [=](std::mt19937_64& rng) {
                           ParamSet p;
                           p.add("a", Tensor::from_matrix(random_matrix(ar, ac, rng)));
                           if (br == 1 && bc > 0 && ar != 1) {
                             p.add("b", Tensor::from_vector(FlatVector(random_matrix(bc, 1, rng))));
                           } else {
                             p.add("b", Tensor::from_matrix(random_matrix(br, bc, rng)));
                           }
                           const RowMatrix weights = random_matrix(outr, outc, rng);
                           ProgramModel m([=](Tape& t, const ParamSet& ps) {
                             return weighted_mean(t, op(t, t.param(ps, 0), t.param(ps, 1)), weights);
                           });
                           return program_check(m, p);
                         }};
  };
  specs.push_back(binary("matmul", 3, 4, 4, 2, [](Tape& t, Var a, Var b) { return t.matmul(a, b); }, 3, 2));
  specs.push_back(binary("add", 3, 4, 3, 4, [](Tape& t, Var a, Var b) { return t.add(a, b); }, 3, 4));
  specs.push_back(binary("add_bias", 3, 4, 1, 4, [](Tape& t, Var a, Var b) { return t.add_bias(a, b); }, 3, 4));
  specs.push_back(binary("mul", 3, 4, 3, 4, [](Tape& t, Var a, Var b) { return t.mul(a, b); }, 3, 4));

  specs.push_back({"relu", [](std::mt19937_64& rng) {
                     ParamSet p;
                     p.add("a", Tensor::from_matrix(random_matrix(4, 5, rng, 1e-2)));
                     const RowMatrix weights = random_matrix(4, 5, rng);
                     ProgramModel m([=](Tape& t, const ParamSet& ps) { return weighted_mean(t, t.relu(t.param(ps, 0)), weights); });
                     return program_check(m, p);
                   }});
  specs.push_back({"mean", [](std::mt19937_64& rng) {
                     ParamSet p;
                     p.add("a", Tensor::from_matrix(random_matrix(3, 5, rng)));
                     ProgramModel m([](Tape& t, const ParamSet& ps) { return t.mean(t.param(ps, 0)); });
                     return program_check(m, p);
                   }});
  for (double eps : {1e-5, 0.0}) {
    specs.push_back({eps > 0 ? "normalize(eps=1e-5)" : "normalize(eps=0)", [eps](std::mt19937_64& rng) {
                       ParamSet p;
                       p.add("a", Tensor::from_matrix(random_matrix(3, 6, rng)));
                       const RowMatrix weights = random_matrix(3, 6, rng);
                       ProgramModel m([=](Tape& t, const ParamSet& ps) {
                         return weighted_mean(t, t.normalize(t.param(ps, 0), eps), weights);
                       });
                       return program_check(m, p);
                     }});
  }
  specs.push_back({"softmax_xent", [](std::mt19937_64& rng) {
                     ParamSet p;
                     p.add("z", Tensor::from_matrix(random_matrix(5, 4, rng) * 3.0));
                     std::vector<int> labels;
                     for (int i = 0; i < 5; ++i) labels.push_back(static_cast<int>(rng() % 4));
                     ProgramModel m([=](Tape& t, const ParamSet& ps) { return t.softmax_xent(t.param(ps, 0), labels); });
                     return program_check(m, p);
                   }});
  specs.push_back({"logistic_xent", [](std::mt19937_64& rng) {
                     ParamSet p;
                     p.add("z", Tensor::from_matrix(random_matrix(6, 1, rng) * 3.0));
                     std::vector<int> labels;
                     for (int i = 0; i < 6; ++i) labels.push_back(static_cast<int>(rng() % 2));
                     ProgramModel m([=](Tape& t, const ParamSet& ps) { return t.logistic_xent(t.param(ps, 0), labels); });
                     return program_check(m, p);
                   }});
  return specs;
}

}  // namespace

std::vector<GradCase> primitive_gradient_checks(int cases, std::uint64_t seed) {
  std::vector<GradCase> out;
  std::uint64_t salt = 0;
  for (const auto& spec : primitive_specs()) {
    GradCase result{spec.name, 0.0, cases};
    for (int c = 0; c < cases; ++c) {
      std::seed_seq seq{seed, salt, static_cast<std::uint64_t>(c)};
      std::mt19937_64 rng(seq);
      result.worst_rel_err = std::max(result.worst_rel_err, spec.run(rng));
    }
    out.push_back(result);
    ++salt;
  }
  return out;
}

std::vector<GradCase> composite_gradient_checks(int cases, std::uint64_t seed) {
  wdlab::MLPSpec plain{{3, 8, 8, 3}};
  wdlab::MLPSpec residual{{3, 6, 6, 6, 3}};
  residual.normalization = wdlab::Normalization::non_affine;
  residual.skip_connections = true;
  wdlab::MLPSpec logistic{{3, 8, 8, 1}};
  logistic.loss = wdlab::LossKind::logistic_xent;
  logistic = wdlab::make_scale_invariant(logistic);

  const std::vector<std::pair<std::string, wdlab::MLPSpec>> models{
      {"mlp softmax", plain}, {"residual normalized mlp", residual}, {"scale-invariant logistic mlp", logistic}};

  std::vector<GradCase> out;
  std::uint64_t salt = 100;
  for (const auto& [name, spec] : models) {
    GradCase result{name, 0.0, cases};
    for (int c = 0; c < cases; ++c) {
      std::seed_seq seq{seed, salt, static_cast<std::uint64_t>(c)};
      std::mt19937_64 rng(seq);
      const auto built = wdlab::build_mlp(spec, rng());
      FlatVector w = built.params.flatten();
      std::normal_distribution<double> normal(0.0, 0.1);
      for (Index i = 0; i < w.size(); ++i) w(i) += normal(rng);  // nonzero biases
      const int classes = spec.loss == wdlab::LossKind::logistic_xent ? 2 : static_cast<int>(spec.layer_widths.back());
      const DataBatch batch = random_batch(7, spec.layer_widths.front(), classes, rng);
      const auto params = built.params.with_values(w);
      const FlatVector g = wdlab::loss_and_gradient(built.model, params, batch).grad;
      const RowMatrix& fixed = built.model.fixed_last_layer();
      const FlatVector fd = fd_gradient([&](const FlatVector& x) { return mlp_loss(spec, fixed, x, batch); }, w);
      result.worst_rel_err = std::max(result.worst_rel_err, rel_err(g, fd, 1e-8));
    }
    out.push_back(result);
    ++salt;
  }
  return out;
}

}  // namespace oracle
