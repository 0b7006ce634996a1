#ifndef RECOVERKIT_APPROX_NET_HPP
#define RECOVERKIT_APPROX_NET_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace recoverkit::approx {

enum class OutputActivation { linear, tanh_out };

// Fully connected net: tanh hidden layers, linear or tanh output.
struct NetSpec {
  int input_dim = 0;
  std::vector<int> hidden;
  int output_dim = 0;
  OutputActivation output = OutputActivation::linear;
  std::uint64_t seed = 0;
};

// Flat parameter layout, layer-major: for each layer, the weight matrix
// (row-major, out x in) followed by the bias vector.
using ParamVector = Eigen::VectorXd;

std::vector<int> layer_dims(const NetSpec& spec);  // [in, hidden..., out]
int param_count(const NetSpec& spec);

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) per layer, driven by spec.seed.
ParamVector init_params(const NetSpec& spec);

// Cached activations for one input; reusable across calls to avoid churn.
struct ForwardTrace {
  std::vector<Eigen::VectorXd> pre;   // pre-activation, one per layer
  std::vector<Eigen::VectorXd> post;  // post-activation; post[0] is the input
};

Eigen::VectorXd forward(const NetSpec& spec, const ParamVector& params,
                        const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd forward(const NetSpec& spec, const ParamVector& params,
                        const Eigen::Ref<const Eigen::VectorXd>& x,
                        ForwardTrace& trace);

// Gradient of upstream . output w.r.t. params (same flat layout).
ParamVector grad_params(const NetSpec& spec, const ParamVector& params,
                        const Eigen::Ref<const Eigen::VectorXd>& x,
                        const Eigen::Ref<const Eigen::VectorXd>& upstream);

// Gradient of upstream . output w.r.t. the input vector.
Eigen::VectorXd grad_input(const NetSpec& spec, const ParamVector& params,
                           const Eigen::Ref<const Eigen::VectorXd>& x,
                           const Eigen::Ref<const Eigen::VectorXd>& upstream);

// One reverse pass over a cached trace. Accumulates into param_acc when
// given; writes the input gradient when given. Used by every trainer.
void backprop(const NetSpec& spec, const ParamVector& params,
              const ForwardTrace& trace,
              const Eigen::Ref<const Eigen::VectorXd>& upstream,
              ParamVector* param_acc, Eigen::VectorXd* input_grad);

}  // namespace recoverkit::approx

#endif
