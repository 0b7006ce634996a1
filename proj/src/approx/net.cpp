#include "recoverkit/approx/net.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "recoverkit/rng.hpp"

namespace recoverkit::approx {

namespace {

using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic,
                                                   Eigen::Dynamic, Eigen::RowMajor>>;
using RowMajorMutMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic,
                                                Eigen::Dynamic, Eigen::RowMajor>>;

void check_shapes(const NetSpec& spec, const ParamVector& params,
                  const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (spec.input_dim <= 0 || spec.output_dim <= 0)
    throw std::invalid_argument("net: spec dims must be positive");
  for (int h : spec.hidden)
    if (h <= 0) throw std::invalid_argument("net: hidden width must be positive");
  if (x.size() != spec.input_dim)
    throw std::invalid_argument("net: input size " + std::to_string(x.size()) +
                                " != spec input_dim " + std::to_string(spec.input_dim));
  if (params.size() != param_count(spec))
    throw std::invalid_argument("net: param vector size " + std::to_string(params.size()) +
                                " != expected " + std::to_string(param_count(spec)));
}

}  // namespace

std::vector<int> layer_dims(const NetSpec& spec) {
  std::vector<int> dims;
  dims.reserve(spec.hidden.size() + 2);
  dims.push_back(spec.input_dim);
  for (int h : spec.hidden) dims.push_back(h);
  dims.push_back(spec.output_dim);
  return dims;
}

int param_count(const NetSpec& spec) {
  auto dims = layer_dims(spec);
  int n = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l)
    n += (dims[l] + 1) * dims[l + 1];
  return n;
}

ParamVector init_params(const NetSpec& spec) {
  auto dims = layer_dims(spec);
  ParamVector p(param_count(spec));
  RngStream rng = substream(spec.seed, "net-init");
  int off = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l], fan_out = dims[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (int i = 0; i < fan_out * fan_in; ++i)
      p[off + i] = rng.uniform(-bound, bound);
    off += fan_out * fan_in;
    for (int i = 0; i < fan_out; ++i) p[off + i] = 0.0;
    off += fan_out;
  }
  return p;
}

Eigen::VectorXd forward(const NetSpec& spec, const ParamVector& params,
                        const Eigen::Ref<const Eigen::VectorXd>& x) {
  ForwardTrace trace;
  return forward(spec, params, x, trace);
}

Eigen::VectorXd forward(const NetSpec& spec, const ParamVector& params,
                        const Eigen::Ref<const Eigen::VectorXd>& x,
                        ForwardTrace& trace) {
  check_shapes(spec, params, x);
  auto dims = layer_dims(spec);
  const std::size_t L = dims.size() - 1;
  trace.pre.resize(L);
  trace.post.resize(L + 1);
  trace.post[0] = x;
  int off = 0;
  for (std::size_t l = 0; l < L; ++l) {
    const int in = dims[l], out = dims[l + 1];
    RowMajorMap W(params.data() + off, out, in);
    Eigen::Map<const Eigen::VectorXd> b(params.data() + off + out * in, out);
    off += (in + 1) * out;
    trace.pre[l].noalias() = W * trace.post[l];
    trace.pre[l] += b;
    const bool is_last = (l + 1 == L);
    if (!is_last || spec.output == OutputActivation::tanh_out)
      trace.post[l + 1] = trace.pre[l].array().tanh();
    else
      trace.post[l + 1] = trace.pre[l];
    if (!trace.post[l + 1].allFinite())
      throw std::runtime_error("net: non-finite activation in layer " + std::to_string(l));
  }
  return trace.post[L];
}

void backprop(const NetSpec& spec, const ParamVector& params,
              const ForwardTrace& trace,
              const Eigen::Ref<const Eigen::VectorXd>& upstream,
              ParamVector* param_acc, Eigen::VectorXd* input_grad) {
  auto dims = layer_dims(spec);
  const std::size_t L = dims.size() - 1;
  if (upstream.size() != spec.output_dim)
    throw std::invalid_argument("net: upstream size != output_dim");
  if (param_acc && param_acc->size() != params.size())
    throw std::invalid_argument("net: gradient accumulator size mismatch");

  // layer offsets into the flat vector
  std::vector<int> offs(L);
  {
    int off = 0;
    for (std::size_t l = 0; l < L; ++l) {
      offs[l] = off;
      off += (dims[l] + 1) * dims[l + 1];
    }
  }

  Eigen::VectorXd delta;
  if (spec.output == OutputActivation::tanh_out)
    delta = upstream.array() * (1.0 - trace.post[L].array().square());
  else
    delta = upstream;

  for (std::size_t li = L; li-- > 0;) {
    const int in = dims[li], out = dims[li + 1];
    RowMajorMap W(params.data() + offs[li], out, in);
    if (param_acc) {
      RowMajorMutMap gW(param_acc->data() + offs[li], out, in);
      gW.noalias() += delta * trace.post[li].transpose();
      Eigen::Map<Eigen::VectorXd> gb(param_acc->data() + offs[li] + out * in, out);
      gb += delta;
    }
    if (li > 0) {
      Eigen::VectorXd back = W.transpose() * delta;
      delta = back.array() * (1.0 - trace.post[li].array().square());
    } else if (input_grad) {
      input_grad->noalias() = W.transpose() * delta;
    }
  }
}

ParamVector grad_params(const NetSpec& spec, const ParamVector& params,
                        const Eigen::Ref<const Eigen::VectorXd>& x,
                        const Eigen::Ref<const Eigen::VectorXd>& upstream) {
  ForwardTrace trace;
  forward(spec, params, x, trace);
  ParamVector g = ParamVector::Zero(params.size());
  backprop(spec, params, trace, upstream, &g, nullptr);
  return g;
}

Eigen::VectorXd grad_input(const NetSpec& spec, const ParamVector& params,
                           const Eigen::Ref<const Eigen::VectorXd>& x,
                           const Eigen::Ref<const Eigen::VectorXd>& upstream) {
  ForwardTrace trace;
  forward(spec, params, x, trace);
  Eigen::VectorXd gx(spec.input_dim);
  backprop(spec, params, trace, upstream, nullptr, &gx);
  return gx;
}

}  // namespace recoverkit::approx
