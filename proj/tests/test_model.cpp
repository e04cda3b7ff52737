#include "gnssr/network.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <vector>

#include "doctest.h"
#include "gnssr/trainer.hpp"
#include "testutil.hpp"

using namespace gnssr;
using nn::Network;
using nn::NetworkConfig;

namespace {

constexpr int kH = 17;
constexpr int kW = 11;

NetworkConfig tiny_config() {
  NetworkConfig cfg;
  cfg.channels = {2, 3};
  cfg.ancillary_inputs = 5;
  cfg.ancillary_dense = 6;
  cfg.head_dense = {8, 6};
  cfg.dropout = 0.0;
  cfg.init_seed = 11;
  return cfg;
}

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng,
                              double sd = 1.0) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0, sd);
  return m;
}

// Direct zero-padded 3x3 convolution over the 17x11 pixel grid, one nested
// loop per tap; structurally unrelated to the column-gather implementation.
Eigen::MatrixXd conv_reference(const Eigen::MatrixXd& x,
                               const Eigen::MatrixXd& weight,
                               const Eigen::MatrixXd& bias, int cin,
                               int cout) {
  const Eigen::Index b = x.cols() / (kH * kW);
  Eigen::MatrixXd y(cout, x.cols());
  for (Eigen::Index bb = 0; bb < b; ++bb) {
    for (int r = 0; r < kH; ++r) {
      for (int c = 0; c < kW; ++c) {
        for (int co = 0; co < cout; ++co) {
          double acc = bias(co, 0);
          for (int dr = -1; dr <= 1; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) {
              const int rr = r + dr;
              const int cc = c + dc;
              if (rr < 0 || rr >= kH || cc < 0 || cc >= kW) continue;
              const int tap = (dr + 1) * 3 + (dc + 1);
              for (int ci = 0; ci < cin; ++ci) {
                acc += weight(co, tap * cin + ci) *
                       x(ci, (bb * kH * kW) + rr * kW + cc);
              }
            }
          }
          y(co, bb * kH * kW + r * kW + c) = acc;
        }
      }
    }
  }
  return y;
}

double net_loss(Network& net, const Eigen::MatrixXd& ddm,
                const Eigen::MatrixXd& anc, const Eigen::VectorXd& tgt) {
  return nn::mse_loss(net.forward(ddm, anc), tgt);
}

void gradcheck(const NetworkConfig& cfg, int batch, std::uint64_t seed,
               int min_checked) {
  Network net(cfg);
  Rng rng(seed);
  Eigen::MatrixXd ddm =
      cfg.use_ddm_branch ? random_matrix(nn::kDdmPixels, batch, rng)
                         : Eigen::MatrixXd();
  Eigen::MatrixXd anc = cfg.ancillary_inputs > 0
                            ? random_matrix(cfg.ancillary_inputs, batch, rng)
                            : Eigen::MatrixXd(0, batch);
  Eigen::VectorXd tgt(batch);
  for (int i = 0; i < batch; ++i) tgt[i] = 0.05 + 0.4 * rng.uniform();

  const Eigen::VectorXd pred = net.forward(ddm, anc);
  net.zero_grads();
  net.backward(nn::mse_grad(pred, tgt));

  auto params = net.params();
  const double h = 1e-6;
  int checked = 0;
  for (auto& p : params) {
    // Spot-check a handful of coordinates per tensor.
    const Eigen::Index n = p.value->size();
    const Eigen::Index probes = std::min<Eigen::Index>(n, 12);
    for (Eigen::Index k = 0; k < probes; ++k) {
      const Eigen::Index i =
          (probes == n) ? k : static_cast<Eigen::Index>(rng.below(
                                  static_cast<std::uint64_t>(n)));
      double* w = p.value->data() + i;
      const double keep = *w;
      *w = keep + h;
      const double lp = net_loss(net, ddm, anc, tgt);
      *w = keep - h;
      const double lm = net_loss(net, ddm, anc, tgt);
      *w = keep;
      const double numeric = (lp - lm) / (2 * h);
      const double analytic = p.grad->data()[i];
      const double tol = 1e-5 * std::max({1.0, std::abs(numeric),
                                          std::abs(analytic)});
      INFO(p.name, "[", i, "] numeric=", numeric, " analytic=", analytic);
      CHECK(std::abs(numeric - analytic) < tol);
      ++checked;
    }
  }
  CHECK(checked >= min_checked);
}

}  // namespace

TEST_CASE("activation scalar functions") {
  CHECK(nn::leaky_relu(3.0, 0.01) == 3.0);
  CHECK(nn::leaky_relu(-2.0, 0.01) == doctest::Approx(-0.02));
  CHECK(nn::softplus(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(nn::softplus(800.0) == doctest::Approx(800.0));
  CHECK(nn::softplus(-700.0) > 0.0);
  CHECK(nn::softplus(-800.0) == 0.0);  // exp underflow, still well-defined
  CHECK(std::isfinite(nn::softplus(-800.0)));
  CHECK(nn::sigmoid(0.0) == doctest::Approx(0.5));
  CHECK(nn::sigmoid(-800.0) == doctest::Approx(0.0));
  CHECK(nn::sigmoid(800.0) == doctest::Approx(1.0));
  // softplus' = sigmoid at moderate arguments
  const double h = 1e-6;
  for (double x : {-3.0, -0.1, 0.0, 0.4, 5.0}) {
    const double num = (nn::softplus(x + h) - nn::softplus(x - h)) / (2 * h);
    CHECK(num == doctest::Approx(nn::sigmoid(x)).epsilon(1e-6));
  }
}

TEST_CASE("convolution matches a direct nested-loop reference") {
  Rng rng(5);
  nn::Conv2D conv(2, 3, rng);
  const Eigen::MatrixXd x = random_matrix(2, 3 * kH * kW, rng);
  const Eigen::MatrixXd& y = conv.forward(x);
  const Eigen::MatrixXd ref =
      conv_reference(x, conv.weight, conv.bias, 2, 3);
  CHECK(y.rows() == 3);
  CHECK(y.cols() == x.cols());
  CHECK((y - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("convolution with a centre-tap identity kernel is a no-op") {
  Rng rng(6);
  nn::Conv2D conv(1, 1, rng);
  conv.weight.setZero();
  conv.weight(0, 4) = 1.0;  // centre of the 3x3 window
  conv.bias.setZero();
  const Eigen::MatrixXd x = random_matrix(1, 2 * kH * kW, rng);
  CHECK((conv.forward(x) - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("max pooling keeps block maxima and routes gradient to them") {
  Eigen::MatrixXd x(1, kH * kW);
  for (int p = 0; p < kH * kW; ++p) x(0, p) = p;  // strictly increasing
  nn::MaxPool2 pool;
  const Eigen::MatrixXd& y = pool.forward(x);
  REQUIRE(y.cols() == 40);
  for (int orow = 0; orow < 8; ++orow) {
    for (int ocol = 0; ocol < 5; ++ocol) {
      const int expect = (2 * orow + 1) * kW + (2 * ocol + 1);
      CHECK(y(0, orow * 5 + ocol) == double(expect));
    }
  }
  Eigen::MatrixXd dy = Eigen::MatrixXd::Ones(1, 40);
  const Eigen::MatrixXd& dx = pool.backward(dy);
  REQUIRE(dx.cols() == kH * kW);
  double total = 0.0;
  for (int p = 0; p < kH * kW; ++p) {
    const int r = p / kW, c = p % kW;
    const bool is_max = (r % 2 == 1) && (c % 2 == 1) && r < 16 && c < 10;
    CHECK(dx(0, p) == (is_max ? 1.0 : 0.0));
    total += dx(0, p);
  }
  CHECK(total == 40.0);
}

TEST_CASE("residual block with zeroed convolutions reduces to its activation") {
  Rng rng(7);
  nn::ResidualBlock block(3, 0.01, rng);
  block.conv1.weight.setZero();
  block.conv1.bias.setZero();
  block.conv2.weight.setZero();
  block.conv2.bias.setZero();
  const Eigen::MatrixXd x = random_matrix(3, 2 * kH * kW, rng);
  const Eigen::MatrixXd& y = block.forward(x);
  const Eigen::MatrixXd want =
      x.unaryExpr([](double v) { return nn::leaky_relu(v, 0.01); });
  CHECK((y - want).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dropout is inverted, respects evaluation mode and needs an rng") {
  Rng rng(8);
  nn::Dropout drop(0.5);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(4, 50);
  const Eigen::MatrixXd& eval = drop.forward(x, false, nullptr);
  CHECK((eval - x).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(drop.forward(x, true, nullptr), std::invalid_argument);

  const Eigen::MatrixXd y = drop.forward(x, true, &rng);
  int zeros = 0, doubled = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y.data()[i] == 0.0)
      ++zeros;
    else if (y.data()[i] == doctest::Approx(2.0))
      ++doubled;
  }
  CHECK(zeros + doubled == y.size());
  CHECK(zeros > 40);    // ~100 expected of 200
  CHECK(doubled > 40);
  // Backward kills exactly the dropped entries.
  const Eigen::MatrixXd dx = drop.backward(Eigen::MatrixXd::Ones(4, 50));
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    CHECK((dx.data()[i] == 0.0) == (y.data()[i] == 0.0));
  }
  CHECK_THROWS_AS(nn::Dropout(1.0), std::invalid_argument);
  CHECK_THROWS_AS(nn::Dropout(-0.1), std::invalid_argument);
}

TEST_CASE("network gradients match central differences") {
  SUBCASE("both branches") { gradcheck(tiny_config(), 4, 21, 150); }
  SUBCASE("ancillary branch only") {
    NetworkConfig cfg = tiny_config();
    cfg.use_ddm_branch = false;
    gradcheck(cfg, 5, 22, 60);
  }
  SUBCASE("ddm branch only") {
    NetworkConfig cfg = tiny_config();
    cfg.ancillary_inputs = 0;
    gradcheck(cfg, 3, 23, 120);
  }
}

TEST_CASE("network output is always positive") {
  NetworkConfig cfg = tiny_config();
  cfg.output_bias_init = -8.0;  // push the head far negative
  Network net(cfg);
  Rng rng(31);
  const Eigen::MatrixXd ddm = random_matrix(nn::kDdmPixels, 64, rng, 3.0);
  const Eigen::MatrixXd anc = random_matrix(5, 64, rng, 3.0);
  const Eigen::VectorXd pred = net.forward(ddm, anc);
  CHECK(pred.minCoeff() > 0.0);
}

TEST_CASE("network construction and inference are deterministic") {
  const NetworkConfig cfg = tiny_config();
  Network a(cfg), b(cfg);
  CHECK(a.export_weights().content_hash() == b.export_weights().content_hash());

  NetworkConfig other = cfg;
  other.init_seed = 12;
  Network c(other);
  CHECK(a.export_weights().content_hash() !=
        c.export_weights().content_hash());
  // Same architecture, different seed: still importable.
  CHECK(cfg.config_hash() == other.config_hash());

  Rng rng(9);
  const Eigen::MatrixXd ddm = random_matrix(nn::kDdmPixels, 6, rng);
  const Eigen::MatrixXd anc = random_matrix(5, 6, rng);
  const Eigen::VectorXd p1 = a.forward(ddm, anc);
  const Eigen::VectorXd p2 = a.forward(ddm, anc);
  CHECK((p1 - p2).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::VectorXd p3 = b.forward(ddm, anc);
  CHECK((p1 - p3).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("architecture fingerprint tracks shape, not seed") {
  const NetworkConfig base = tiny_config();
  for (auto mutate : std::vector<std::function<void(NetworkConfig&)>>{
           [](NetworkConfig& c) { c.channels[0] += 1; },
           [](NetworkConfig& c) { c.head_dense[1] += 1; },
           [](NetworkConfig& c) { c.ancillary_inputs += 1; },
           [](NetworkConfig& c) { c.use_ddm_branch = false; },
           [](NetworkConfig& c) { c.dropout = 0.25; },
       }) {
    NetworkConfig m = base;
    mutate(m);
    CHECK(m.config_hash() != base.config_hash());
  }
}

TEST_CASE("weights survive a save/load/import round trip") {
  testutil::TempDir tmp("model");
  const NetworkConfig cfg = tiny_config();
  Network net(cfg);
  Rng rng(10);
  const Eigen::MatrixXd ddm = random_matrix(nn::kDdmPixels, 5, rng);
  const Eigen::MatrixXd anc = random_matrix(5, 5, rng);
  const Eigen::VectorXd before = net.forward(ddm, anc);

  nn::ModelWeights w = net.export_weights();
  w.meta["trained_on"] = "unit-test";
  const auto path = tmp / "weights.bin";
  w.save(path);
  const nn::ModelWeights r = nn::ModelWeights::load(path);
  CHECK(r.meta.at("trained_on") == "unit-test");
  CHECK(r.content_hash() == w.content_hash());
  CHECK(r.tensors.size() == w.tensors.size());

  Network back = Network::from_weights(r);
  const Eigen::VectorXd after = back.forward(ddm, anc);
  CHECK((before - after).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("weight import rejects mismatches by name") {
  const NetworkConfig cfg = tiny_config();
  Network net(cfg);
  nn::ModelWeights w = net.export_weights();

  SUBCASE("different architecture") {
    NetworkConfig other = cfg;
    other.channels[1] += 1;
    Network target(other);
    CHECK_THROWS_WITH_AS(target.import_weights(w),
                         "weight architecture does not match network",
                         std::runtime_error);
  }
  SUBCASE("renamed tensor") {
    w.tensors[0].name = "mystery";
    CHECK_THROWS_WITH_AS(net.import_weights(w),
                         "unexpected weight tensor 'mystery', want 'stem.w'",
                         std::runtime_error);
  }
  SUBCASE("missing tensor") {
    w.tensors.pop_back();
    CHECK_THROWS_AS(net.import_weights(w), std::runtime_error);
  }
  SUBCASE("wrong shape") {
    auto& t = w.tensors[2];  // block1.conv1.w
    REQUIRE(t.name == "block1.conv1.w");
    t.value.resize(1, 3);
    try {
      net.import_weights(w);
      FAIL("expected a shape error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("block1.conv1.w") !=
            std::string::npos);
    }
  }
}

TEST_CASE("parameter inventory is stable and counted") {
  Network net(tiny_config());
  auto ps = net.params();
  std::vector<std::string> names;
  for (auto& p : ps) names.push_back(p.name);
  const std::vector<std::string> want = {
      "stem.w",         "stem.b",         "block1.conv1.w", "block1.conv1.b",
      "block1.conv2.w", "block1.conv2.b", "transition.w",   "transition.b",
      "block2.conv1.w", "block2.conv1.b", "block2.conv2.w", "block2.conv2.b",
      "anc.w",          "anc.b",          "head1.w",        "head1.b",
      "head2.w",        "head2.b",        "out.w",          "out.b"};
  CHECK(names == want);
  std::size_t n = 0;
  for (auto& p : ps) n += static_cast<std::size_t>(p.value->size());
  CHECK(net.parameter_count() == n);
  CHECK(n > 0);
}

TEST_CASE("invalid network configurations are rejected") {
  NetworkConfig cfg = tiny_config();
  cfg.use_ddm_branch = false;
  cfg.ancillary_inputs = 0;
  CHECK_THROWS_AS(Network{cfg}, std::invalid_argument);
  cfg = tiny_config();
  cfg.dropout = 1.0;
  CHECK_THROWS_AS(Network{cfg}, std::invalid_argument);
  cfg = tiny_config();
  cfg.channels[0] = 0;
  CHECK_THROWS_AS(Network{cfg}, std::invalid_argument);
  cfg = tiny_config();
  cfg.leaky_slope = 0.0;
  CHECK_THROWS_AS(Network{cfg}, std::invalid_argument);
}

TEST_CASE("batch shape errors are reported") {
  Network net(tiny_config());
  Rng rng(12);
  const Eigen::MatrixXd ddm = random_matrix(nn::kDdmPixels, 4, rng);
  const Eigen::MatrixXd anc = random_matrix(5, 3, rng);
  CHECK_THROWS_AS(net.forward(ddm, anc), std::invalid_argument);
  const Eigen::MatrixXd bad = random_matrix(11, 4, rng);
  CHECK_THROWS_AS(net.forward(bad, anc), std::invalid_argument);
}
