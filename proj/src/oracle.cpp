#include "mnet/oracle.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "mnet/eval.hpp"

namespace mnet {

double gradcheck(const LossFn& loss, const std::vector<Tensor*>& wrt, double h) {
  for (Tensor* t : wrt) t->zero_grad();
  {
    Tape tape;
    Tensor& l = loss(tape);
    tape.backward(l);
  }
  double worst = 0.0;
  for (Tensor* t : wrt) {
    const std::vector<double> analytic(t->grad().begin(), t->grad().end());
    double diff2 = 0.0, ref2 = 0.0;
    for (std::size_t i = 0; i < t->size(); ++i) {
      const double keep = (*t)[i];
      (*t)[i] = keep + h;
      double up;
      {
        Tape tape(false);
        up = loss(tape).item();
      }
      (*t)[i] = keep - h;
      double down;
      {
        Tape tape(false);
        down = loss(tape).item();
      }
      (*t)[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      diff2 += (analytic[i] - fd) * (analytic[i] - fd);
      ref2 += fd * fd;
    }
    const double err = ref2 > 1e-16 ? std::sqrt(diff2 / ref2) : std::sqrt(diff2);
    worst = std::max(worst, err);
  }
  return worst;
}

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  return Tensor::uniform(std::move(shape), lo, hi, rng);
}

std::vector<OpCheck> op_gradient_suite(std::uint64_t seed) {
  std::vector<OpCheck> out;
  std::uint64_t s = seed * 1000;
  auto rnd = [&](Shape shape, double lo = -1.0, double hi = 1.0) { return random_tensor(std::move(shape), ++s, lo, hi); };
  auto grad = [](std::initializer_list<Tensor*> ts) {
    for (Tensor* t : ts) t->set_requires_grad(true);
  };

  {
    Tensor x = rnd({2, 2, 6, 6}), k = rnd({3, 2, 3, 3}), b = rnd({3}), w = rnd({2, 3, 6, 6});
    grad({&x, &k, &b});
    out.push_back({"conv2d_same",
                   gradcheck([&](Tape& t) -> Tensor& { return weighted_sum(t, conv2d(t, x, k, &b), w); }, {&x, &k, &b})});
  }
  {
    Tensor x = rnd({2, 3, 4, 32}), k = rnd({4, 3, 1, 7}), w = rnd({2, 4, 4, 32});
    grad({&x, &k});
    out.push_back({"conv2d_wide",
                   gradcheck([&](Tape& t) -> Tensor& { return weighted_sum(t, conv2d(t, x, k, nullptr), w); }, {&x, &k})});
  }
  {
    Tensor x = rnd({1, 2, 6, 7}), k = rnd({2, 2, 3, 5}), b = rnd({2}), w = rnd({1, 2, 4, 3});
    grad({&x, &k, &b});
    out.push_back({"conv2d_valid", gradcheck(
                                       [&](Tape& t) -> Tensor& {
                                         return weighted_sum(t, conv2d(t, x, k, &b, Padding::kValid), w);
                                       },
                                       {&x, &k, &b})});
  }
  {
    Tensor x = rnd({4, 6}), wt = rnd({5, 6}), b = rnd({5}), w = rnd({4, 5});
    grad({&x, &wt, &b});
    out.push_back(
        {"affine", gradcheck([&](Tape& t) -> Tensor& { return weighted_sum(t, affine(t, x, wt, &b), w); }, {&x, &wt, &b})});
  }
  {
    Tensor x = rnd({4, 3, 3, 4}), g = rnd({3}, 0.5, 1.5), b = rnd({3}), w = rnd({4, 3, 3, 4});
    Tensor rm({3}, 0.0), rv({3}, 1.0);
    grad({&x, &g, &b});
    out.push_back({"batch_norm_train", gradcheck(
                                           [&](Tape& t) -> Tensor& {
                                             return weighted_sum(t, batch_norm(t, x, g, b, rm, rv, Mode::kTrain), w);
                                           },
                                           {&x, &g, &b})});
    Tensor em = rnd({3}), ev = rnd({3}, 0.5, 2.0);
    out.push_back({"batch_norm_eval", gradcheck(
                                          [&](Tape& t) -> Tensor& {
                                            return weighted_sum(t, batch_norm(t, x, g, b, em, ev, Mode::kEval), w);
                                          },
                                          {&x, &g, &b})});
  }
  {
    Tensor x = rnd({3, 7}, -2.0, 2.0), w = rnd({3, 7});
    grad({&x});
    out.push_back({"tanh", gradcheck([&](Tape& t) -> Tensor& { return weighted_sum(t, mnet::tanh(t, x), w); }, {&x})});
    // Keep inputs off the kink at zero.
    for (double& v : x.data())
      if (std::abs(v) < 1e-3) v = 1e-3;
    out.push_back(
        {"leaky_relu", gradcheck([&](Tape& t) -> Tensor& { return weighted_sum(t, leaky_relu(t, x, 0.3), w); }, {&x})});
  }
  {
    Tensor x = rnd({2, 3, 4}), w = rnd({6, 4});
    grad({&x});
    out.push_back(
        {"reshape", gradcheck([&](Tape& t) -> Tensor& { return weighted_sum(t, reshape(t, x, {6, 4}), w); }, {&x})});
  }
  {
    Tensor a = rnd({3, 4}), b = rnd({3, 4}), w = rnd({3, 4});
    grad({&a, &b});
    out.push_back({"add", gradcheck([&](Tape& t) -> Tensor& { return weighted_sum(t, add(t, a, b), w); }, {&a, &b})});
  }
  {
    Tensor x = rnd({5, 3}), w = rnd({5, 3});
    grad({&x});
    out.push_back({"weighted_sum", gradcheck([&](Tape& t) -> Tensor& { return weighted_sum(t, x, w); }, {&x})});
  }
  {
    Tensor p = rnd({3, 5});
    const Tensor q = rnd({3, 5});
    grad({&p});
    out.push_back({"mse_loss", gradcheck([&](Tape& t) -> Tensor& { return mse_loss(t, p, q); }, {&p})});
  }
  return out;
}

PcaOracleResult pca_oracle_check(const PcaOracleOptions& o) {
  CodecConfig c;
  c.rows = 4;
  c.cols = 8;
  c.ratio = {1, 4};
  c.linear = true;
  const std::size_t k = o.samples, d = c.input_length(), keep = c.latent_length();

  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> g;
  const Eigen::MatrixXd basis = Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d),
                                                             [&] { return g(rng); });
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(basis).householderQ();
  Eigen::MatrixXd samples(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
  Tensor x({k, 2, c.rows, c.cols});
  for (std::size_t n = 0; n < k; ++n) {
    Eigen::VectorXd z(d);
    for (std::size_t i = 0; i < d; ++i)
      z[static_cast<Eigen::Index>(i)] = g(rng) * 0.5 * std::exp(-0.08 * static_cast<double>(i));
    const Eigen::VectorXd v = q * z;
    samples.row(static_cast<Eigen::Index>(n)) = v.transpose();
    std::copy(v.data(), v.data() + d, x.data().begin() + static_cast<std::ptrdiff_t>(n * d));
  }
  // No bias, so the best linear code spans the top eigenvectors of the
  // uncentred second moment.
  const Eigen::MatrixXd second = samples.transpose() * samples / static_cast<double>(k);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(second);
  PcaOracleResult r;
  for (std::size_t i = 0; i < d - keep; ++i) r.pca_error += eig.eigenvalues()[static_cast<Eigen::Index>(i)];

  CodecModel m = build_codec(c, o.seed);
  TrainOptions t;
  t.epochs = o.epochs;
  t.batch = o.batch;
  t.seed = o.seed;
  t.adam.learning_rate = o.learning_rate;
  r.trained_error = train_codec(m, x, x, t).final_loss;
  return r;
}

double identity_pipeline_check(const CsiSequence& data) {
  double worst = 0.0;
  for (bool spherical : {true, false}) {
    PipelineConfig pc;
    pc.slots = data.slots;
    pc.codec.rows = data.rows;
    pc.codec.cols = data.cols;
    pc.spherical = spherical;
    pc.exact_magnitude = true;
    MarkovNetPipeline p = identity_pipeline(pc, data.slots > 1 ? estimate_gamma(data).gamma_hat : 0.0);
    for (const Nmse& n : per_slot_nmse(run_pipeline(p, data))) worst = std::max(worst, n.linear);
  }
  return worst;
}

}  // namespace mnet
