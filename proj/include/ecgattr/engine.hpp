#pragma once
// Reverse-mode differentiation over the fixed layer set, with selectable
// backward rules for the attribution methods that modify backpropagation.

#include <vector>

#include "ecgattr/network.hpp"
#include "ecgattr/tensor.hpp"

namespace ecgattr {

enum class BackwardRule {
    Standard,
    GuidedRelu,
    DeepliftRescale,  // requires a tape recorded with a reference input
    LrpEpsilon,       // seed d_logits with onehot(c) * logit_c
};

// Recorded forward pass. values[0] is the input; values[i+1] is layer i's
// output. Batchnorm layers in training mode save their batch statistics.
struct Tape {
    bool recorded = false;
    bool training = false;
    std::vector<Tensor> values;
    std::vector<Tensor> ref_values;  // reference-input activations (DeepLIFT)
    std::vector<std::vector<float>> bn_mean;
    std::vector<std::vector<float>> bn_inv_std;
    int logits_value = -1;
};

struct ParamGrads {
    Tensor w, b, gamma, beta;
};

struct BackwardResult {
    Tensor d_x;
    std::vector<ParamGrads> d_params;  // empty unless requested
};

// Runs the graph up to the logits (a trailing softmax layer is not applied).
// Input is [channels, length] or [batch, channels, length]; logits come back
// with the matching rank. With `tape` null, intermediate values are freed as
// soon as their last consumer has run. `training` switches batchnorm to batch
// statistics and updates the running ones.
Tensor forward(Network& net, const Tensor& x, Tape* tape = nullptr, bool training = false);
Tensor forward(const Network& net, const Tensor& x, Tape* tape = nullptr);

// Forward on x that additionally records reference activations for the
// DeepLIFT rescale rule.
Tensor forward_with_reference(const Network& net, const Tensor& x, const Tensor& reference,
                              Tape& tape);

// Reverse walk from d_logits. For LrpEpsilon the "gradient" is the relevance
// and d_params stays empty regardless of want_param_grads. When
// capture_value >= 0, the gradient arriving at that value index is copied to
// *captured (used by Grad-CAM for activation-map gradients).
BackwardResult backward(const Network& net, const Tape& tape, const Tensor& d_logits,
                        BackwardRule rule = BackwardRule::Standard, bool want_param_grads = false,
                        double lrp_epsilon = 1e-6, int capture_value = -1,
                        Tensor* captured = nullptr);

// Max over classes and input coordinates of
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8), with the numeric
// side a central difference of a double-precision evaluation of the same
// parameters (inference-mode batchnorm).
double grad_check(const Network& net, const Tensor& x, double epsilon);

// Double-precision inference-mode logits; the numeric half of grad_check.
std::vector<double> forward_f64(const Network& net, const std::vector<double>& x);

// Rowwise softmax with f64 accumulation.
std::vector<float> softmax(const std::vector<float>& logits);

}  // namespace ecgattr
