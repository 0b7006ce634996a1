#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "recoverkit/approx/net.hpp"
#include "recoverkit/approx/optimizer.hpp"
#include "recoverkit/approx/serialize.hpp"
#include "recoverkit/rng.hpp"

using namespace recoverkit;
using namespace recoverkit::approx;

namespace {

// Central finite differences on J = upstream . net(x), the independent
// check every analytic gradient in the toolkit is held against.
double fd_scalar(const std::function<double(double)>& f, double v, double h) {
  return (f(v + h) - f(v - h)) / (2.0 * h);
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1e-6, std::abs(a), std::abs(b)});
}

double max_fd_param_err(const NetSpec& spec, const ParamVector& params,
                        const Eigen::VectorXd& x, const Eigen::VectorXd& up,
                        double h) {
  ParamVector g = grad_params(spec, params, x, up);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    ParamVector p = params;
    double fd = fd_scalar(
        [&](double v) {
          p[i] = v;
          return up.dot(forward(spec, p, x));
        },
        params[i], h);
    worst = std::max(worst, rel_err(g[i], fd));
  }
  return worst;
}

double max_fd_input_err(const NetSpec& spec, const ParamVector& params,
                        const Eigen::VectorXd& x, const Eigen::VectorXd& up,
                        double h) {
  Eigen::VectorXd g = grad_input(spec, params, x, up);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xx = x;
    double fd = fd_scalar(
        [&](double v) {
          xx[i] = v;
          return up.dot(forward(spec, params, xx));
        },
        x[i], h);
    worst = std::max(worst, rel_err(g[i], fd));
  }
  return worst;
}

}  // namespace

TEST_CASE("param count follows (fan_in+1)*fan_out per layer") {
  NetSpec s{5, {32, 32}, 1, OutputActivation::linear, 0};
  CHECK(param_count(s) == (5 + 1) * 32 + (32 + 1) * 32 + (32 + 1) * 1);
  NetSpec t{1, {1}, 1, OutputActivation::linear, 0};
  CHECK(param_count(t) == 4);
  NetSpec u{3, {}, 2, OutputActivation::linear, 0};
  CHECK(param_count(u) == 8);
}

TEST_CASE("hand-evaluated 1-1-1 forward") {
  NetSpec s{1, {1}, 1, OutputActivation::linear, 0};
  ParamVector p(4);
  p << 1.0, 0.0, 1.0, 0.0;  // w1, b1, w2, b2
  Eigen::VectorXd x(1);
  x << 0.5;
  double y = forward(s, p, x)[0];
  CHECK(y == doctest::Approx(std::tanh(0.5)).epsilon(1e-12));
  CHECK(y == doctest::Approx(0.46212).epsilon(1e-4));
}

TEST_CASE("tanh output head squashes") {
  NetSpec s{1, {1}, 1, OutputActivation::tanh_out, 0};
  ParamVector p(4);
  p << 1.0, 0.0, 1.0, 0.0;
  Eigen::VectorXd x(1);
  x << 0.5;
  CHECK(forward(s, p, x)[0] == doctest::Approx(std::tanh(std::tanh(0.5))).epsilon(1e-12));
}

TEST_CASE("gradients agree with central differences over random probes") {
  const double h = 1e-5;
  std::vector<NetSpec> shapes = {
      {1, {1}, 1, OutputActivation::linear, 11},
      {5, {32}, 4, OutputActivation::linear, 12},
      {5, {32, 32}, 1, OutputActivation::linear, 13},
      {5, {16, 16, 16}, 3, OutputActivation::tanh_out, 14},
      {4, {}, 2, OutputActivation::linear, 15},
  };
  RngStream rng = substream(99, "fd-probes");
  for (const auto& spec : shapes) {
    ParamVector params = init_params(spec);
    for (int probe = 0; probe < 20; ++probe) {
      Eigen::VectorXd x = rng.normal_vec(spec.input_dim);
      Eigen::VectorXd up = rng.normal_vec(spec.output_dim);
      CHECK(max_fd_param_err(spec, params, x, up, h) < 1e-4);
      CHECK(max_fd_input_err(spec, params, x, up, h) < 1e-4);
    }
  }
}

TEST_CASE("backprop trace path matches one-shot helpers") {
  NetSpec spec{3, {8, 8}, 2, OutputActivation::linear, 7};
  ParamVector params = init_params(spec);
  RngStream rng = substream(7, "trace");
  Eigen::VectorXd x = rng.normal_vec(3), up = rng.normal_vec(2);
  ForwardTrace trace;
  forward(spec, params, x, trace);
  ParamVector acc = ParamVector::Zero(params.size());
  Eigen::VectorXd gx(3);
  backprop(spec, params, trace, up, &acc, &gx);
  CHECK((acc - grad_params(spec, params, x, up)).norm() == doctest::Approx(0.0));
  CHECK((gx - grad_input(spec, params, x, up)).norm() == doctest::Approx(0.0));
}

TEST_CASE("init bounds and determinism") {
  NetSpec spec{5, {32}, 4, OutputActivation::linear, 21};
  ParamVector a = init_params(spec), b = init_params(spec);
  CHECK(a == b);
  // first layer weights within +-1/sqrt(5), biases zero
  double bound = 1.0 / std::sqrt(5.0);
  CHECK(a.head(5 * 32).minCoeff() >= -bound);
  CHECK(a.head(5 * 32).maxCoeff() <= bound);
  CHECK(a.segment(5 * 32, 32).cwiseAbs().maxCoeff() == 0.0);
  NetSpec other = spec;
  other.seed = 22;
  CHECK(init_params(other) != a);
}

TEST_CASE("sgd step") {
  auto opt = make_sgd(0.1);
  ParamVector p(1), g(1);
  p << 1.0;
  g << 2.0;
  optimizer_step(opt, p, g, false);
  CHECK(p[0] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("adam first step reduces to lr * sign(grad)") {
  auto opt = make_adam(0.01);
  ParamVector p(2), g(2);
  p << 1.0, -2.0;
  g << 0.3, -0.7;
  ParamVector before = p;
  optimizer_step(opt, p, g, false);
  // m_hat = g, v_hat = g^2 on step one, so the step is lr * g/(|g|+eps)
  for (int i = 0; i < 2; ++i) {
    double expect = before[i] - 0.01 * g[i] / (std::abs(g[i]) + 1e-8);
    CHECK(p[i] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("ascend flag is an exact sign flip") {
  for (auto kind : {0, 1}) {
    auto mk = [&] { return kind == 0 ? make_sgd(0.05) : make_adam(0.05); };
    auto opt_d = mk();
    auto opt_a = mk();
    RngStream rng = substream(3, "ascend");
    ParamVector g = rng.normal_vec(21);
    // from zero params the realized delta equals the computed step exactly
    ParamVector pd = ParamVector::Zero(21), pa = ParamVector::Zero(21);
    optimizer_step(opt_d, pd, g, false);
    optimizer_step(opt_a, pa, g, true);
    CHECK((pd + pa).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("non-finite gradient is rejected with state untouched") {
  auto opt = make_adam(0.01);
  ParamVector p(2), g(2);
  p << 1.0, 2.0;
  g << 1.0, std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(optimizer_step(opt, p, g, false), std::runtime_error);
  CHECK(p[0] == 1.0);
  CHECK(p[1] == 2.0);
  CHECK(opt.t == 0);
}

TEST_CASE("target sync") {
  ParamVector live(2), target(2);
  live << 2.0, -4.0;
  target << 0.0, 0.0;
  target_sync_polyak(live, target, 0.5);
  CHECK(target[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(target[1] == doctest::Approx(-2.0).epsilon(1e-15));
  target_sync_copy(live, target);
  CHECK(target == live);
}

TEST_CASE("dimension mismatches throw") {
  NetSpec spec{3, {4}, 1, OutputActivation::linear, 3};
  ParamVector params = init_params(spec);
  Eigen::VectorXd bad(2);
  bad << 1, 2;
  CHECK_THROWS_AS(forward(spec, params, bad), std::invalid_argument);
  ParamVector short_p(3);
  Eigen::VectorXd x(3);
  x << 1, 2, 3;
  CHECK_THROWS_AS(forward(spec, short_p, x), std::invalid_argument);
}

TEST_CASE("json round trip preserves every value exactly") {
  NetSpec spec{5, {32, 32}, 3, OutputActivation::tanh_out, 77};
  ParamVector params = init_params(spec);
  // perturb with awkward values
  params[0] = 1.0 / 3.0;
  params[1] = 1e-17;
  params[2] = -0.1;
  const std::string path = (std::filesystem::temp_directory_path() /
                            "recoverkit_net_roundtrip.json").string();
  save_net(path, spec, params);
  auto [spec2, params2] = load_net(path);
  CHECK(spec2.input_dim == spec.input_dim);
  CHECK(spec2.hidden == spec.hidden);
  CHECK(spec2.output_dim == spec.output_dim);
  CHECK(spec2.output == spec.output);
  REQUIRE(params2.size() == params.size());
  for (Eigen::Index i = 0; i < params.size(); ++i) CHECK(params2[i] == params[i]);
  std::filesystem::remove(path);
}

TEST_CASE("malformed net files are refused") {
  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "recoverkit_net_bad.json").string();
  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("{\"format_version\": 999, \"spec\": {}, \"params\": []}", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_net(path), std::runtime_error);
  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("not json at all", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_net(path), std::runtime_error);
  fs::remove(path);
}
