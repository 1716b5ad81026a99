#include "scoresync/neural/gradient_suite.h"

#include <algorithm>
#include <array>
#include <functional>
#include <random>

#include "scoresync/neural/gradcheck.h"
#include "scoresync/neural/loss.h"
#include "scoresync/neural/models.h"
#include "scoresync/softdtw.h"

namespace scoresync::neural {

namespace {

using Vec = std::vector<double>;

constexpr double kStep = 1e-4;

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = u(rng);
  return t;
}

// Richardson-extrapolated central difference: (4 D(h/2) - D(h)) / 3 cancels
// the h^2 term, which otherwise dominates near-zero soft-DTW gradient
// components at small lambda.
Vec central_diff(const std::function<double(const Vec&)>& f, Vec x) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    auto diff = [&](double h) {
      x[i] = keep + h;
      const double up = f(x);
      x[i] = keep - h;
      const double down = f(x);
      x[i] = keep;
      return (up - down) / (2.0 * h);
    };
    g[i] = (4.0 * diff(kStep / 2) - diff(kStep)) / 3.0;
  }
  return g;
}

// Folds one instance's probes into the case.
void record(SuiteCase& c, const Vec& analytic, const Vec& numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) worst = std::max(worst, relative_error(analytic[i], numeric[i]));
  c.instances += 1;
  c.checked += analytic.size();
  c.instance_max_rel_err.push_back(worst);
  c.max_rel_err = std::max(c.max_rel_err, worst);
}

void record(SuiteCase& c, const GradCheckReport& r) {
  c.instances += 1;
  c.checked += r.checked;
  c.skipped_kinks += r.skipped_kinks;
  c.instance_max_rel_err.push_back(r.max_rel_err);
  c.max_rel_err = std::max(c.max_rel_err, r.max_rel_err);
}

Network single(std::unique_ptr<Layer> layer) {
  Network net;
  net.add(std::move(layer));
  return net;
}

std::vector<SuiteCase> softdtw_cases(const SuiteOptions& options, std::mt19937_64& rng) {
  SuiteCase sd{"soft_dtw_grad"}, st{"soft_dtw_grad_target"}, dv{"soft_dtw_divergence_grad"};
  std::uniform_int_distribution<std::size_t> len(3, 8);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  auto draw = [&](std::size_t n) {
    Vec v(n);
    for (auto& x : v) x = u(rng);
    return v;
  };
  for (std::size_t t = 0; t < options.softdtw_instances; ++t) {
    const double lambda = std::array{0.05, 0.1, 0.5}[t % 3];
    const Vec a = draw(len(rng));
    const Vec b = draw(len(rng));
    record(sd, soft_dtw_grad(a, b, lambda), central_diff([&](const Vec& x) { return soft_dtw(x, b, lambda); }, a));
    record(st, soft_dtw_grad_target(a, b, lambda),
           central_diff([&](const Vec& y) { return soft_dtw(a, y, lambda); }, b));
    record(dv, soft_dtw_divergence_grad(a, b, lambda),
           central_diff([&](const Vec& x) { return soft_dtw_divergence(x, b, lambda); }, a));
  }
  return {sd, st, dv};
}

SuiteCase loss_case(std::mt19937_64& rng) {
  SuiteCase c{"losses"};
  for (double d : {0.2, 0.7, 1.3}) {
    for (int label : {0, 1}) {
      const Vec at{d};
      record(c, {contrastive_loss_grad(d, label, 1.0)},
             central_diff([&](const Vec& x) { return contrastive_loss(x[0], label, 1.0); }, at));
    }
  }
  const Tensor e2 = random_tensor({5}, rng);
  const Tensor e1 = random_tensor({5}, rng);
  record(c, embedding_distance_grad(e1, e2).values(), central_diff([&](const Vec& x) {
           return embedding_distance(Tensor({5}, x), e2);
         }, e1.values()));
  const Vec target = {0.2, 0.6, 4.0, 4.0};
  const Vec pred = random_tensor({4}, rng).values();
  record(c, mse_padded_loss_grad(pred, target),
         central_diff([&](const Vec& x) { return mse_padded_loss(x, target, 4.0); }, pred));
  return c;
}

SuiteCase siamese_case(std::mt19937_64& rng) {
  SuiteCase c{"siamese_contrastive"};
  Network net;
  auto dense = std::make_unique<DenseLayer>(6, 4);
  dense->init(rng);
  net.add(std::move(dense));
  const Tensor x1 = random_tensor({6}, rng), x2 = random_tensor({6}, rng);
  for (int label : {0, 1}) {
    const double margin = 10.0;
    auto grads = net.zero_gradients();
    siamese_contrastive(net, x1, x2, label, margin, &grads);
    Vec analytic, numeric;
    for (std::size_t k = 0; k < 2; ++k) {
      auto& p = net.layer(0).params()[k];
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double keep = p[j];
        p[j] = keep + kStep;
        const double up = siamese_contrastive(net, x1, x2, label, margin);
        p[j] = keep - kStep;
        const double down = siamese_contrastive(net, x1, x2, label, margin);
        p[j] = keep;
        analytic.push_back(grads[0][k][j]);
        numeric.push_back((up - down) / (2.0 * kStep));
      }
    }
    record(c, analytic, numeric);
  }
  return c;
}

}  // namespace

std::vector<SuiteCase> run_gradient_suite(const SuiteOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::vector<SuiteCase> out = softdtw_cases(options, rng);

  {
    SuiteCase c{"dense"};
    auto dense = std::make_unique<DenseLayer>(12, 5);
    dense->init(rng);
    auto net = single(std::move(dense));
    record(c, finite_diff_check(net, random_tensor({3, 4}, rng), random_linear_objective(5, options.seed + 1)));
    out.push_back(std::move(c));
  }
  for (std::size_t d : {1, 2, 3}) {
    SuiteCase c{"conv2d_d" + std::to_string(d)};
    auto conv = std::make_unique<Conv2dLayer>(2, 3, 3, d);
    conv->init(rng);
    auto net = single(std::move(conv));
    const std::size_t out_size = 3 * (9 - 2 * d) * (10 - 2 * d);
    record(c, finite_diff_check(net, random_tensor({2, 9, 10}, rng), random_linear_objective(out_size, options.seed + d)));
    out.push_back(std::move(c));
  }
  {
    SuiteCase c{"sasa"};
    auto sasa = std::make_unique<SasaLayer>(8, 1);
    sasa->init(rng);
    auto net = single(std::move(sasa));
    record(c, finite_diff_check(net, random_tensor({8, 6, 6}, rng), random_linear_objective(8 * 36, options.seed + 4)));
    out.push_back(std::move(c));
  }
  {
    SuiteCase c{"pad_relu_pool_unpool"};
    Network net;
    net.add(std::make_unique<PadLayer>(1));
    auto conv = std::make_unique<Conv2dLayer>(1, 2, 3, 1);
    conv->init(rng);
    net.add(std::move(conv));
    net.add(std::make_unique<ReluLayer>());
    const auto pool = net.add(std::make_unique<MaxPoolLayer>());
    net.add(std::make_unique<MaxUnpoolLayer>(pool));
    net.add(std::make_unique<FlattenLayer>());
    record(c, finite_diff_check(net, random_tensor({1, 6, 6}, rng), random_linear_objective(72, options.seed + 5)));
    out.push_back(std::move(c));
  }
  out.push_back(loss_case(rng));
  out.push_back(siamese_case(rng));

  if (options.networks) {
    ToyConfig config;
    config.channels = 8;
    config.hidden = 16;
    config.grid = 16;
    GradCheckOptions gc;
    gc.samples_per_tensor = 24;
    gc.seed = options.seed;
    {
      SuiteCase c{"path_regressor_divergence"};
      c.tolerance = kNetworkGradTolerance;
      Network net = build_path_model(config, rng);
      const auto data = make_path_dataset(1, options.seed + 6, {16, 0.05, 4});
      const auto objective = [&](const Tensor& y, Tensor& g) {
        return task_loss(ToyTask::path, config, y, data[0].target, &g);
      };
      record(c, finite_diff_check(net, data[0].input, objective, gc));
      out.push_back(std::move(c));
    }
    {
      SuiteCase c{"inflection_regressor_mse"};
      c.tolerance = kNetworkGradTolerance;
      Network net = build_inflection_model(config, rng);
      const Vec target = {0.2, 0.3, 0.25, 0.1, 4, 4, 4, 4};
      const auto objective = [&](const Tensor& y, Tensor& g) {
        return task_loss(ToyTask::inflection, config, y, target, &g);
      };
      record(c, finite_diff_check(net, random_tensor({1, 16, 16}, rng), objective, gc));
      out.push_back(std::move(c));
    }
  }
  return out;
}

nlohmann::json to_json(const SuiteCase& c) {
  return {{"name", c.name},
          {"instances", c.instances},
          {"checked", c.checked},
          {"skipped_kinks", c.skipped_kinks},
          {"max_rel_err", c.max_rel_err},
          {"instance_max_rel_err", c.instance_max_rel_err},
          {"tolerance", c.tolerance},
          {"pass", c.pass()}};
}

}  // namespace scoresync::neural
