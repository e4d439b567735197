#pragma once

#include <vector>

#include "pmvc/rng.hpp"
#include "pmvc/tape.hpp"

namespace pmvc::nn {

enum class Act { kNone, kRelu, kTanh, kSigmoid };
enum class BnMode { kTrain, kInfer };

// "Same" zero padding everywhere: output spatial extents are
// ceil(input / stride), with the extra pad row/column placed at the
// bottom/right when the total is odd.

// x (h,w,cin), w (kh,kw,cin,cout), optional bias (cout).
TValue conv2d_raw(Tape& T, const TValue& x, const TValue& w, const TValue* bias,
                  int stride, int dilation = 1);

// Transposed convolution, exact adjoint of conv2d_raw at the same stride:
// x (h,w,cin), w (kh,kw,cout,cin), output (h*stride, w*stride, cout).
TValue deconv2d_raw(Tape& T, const TValue& x, const TValue& w, const TValue* bias,
                    int stride);

// Per-channel batch norm over spatial positions. Train mode normalizes with
// the sample's own statistics and folds them into the running buffers
// (running = momentum * running + (1-momentum) * batch); infer mode uses the
// frozen buffers only.
TValue batchnorm(Tape& T, const TValue& x, const TValue& gamma, const TValue& beta,
                 Tensor& running_mean, Tensor& running_var, BnMode mode,
                 float momentum = 0.9f, float eps = 1e-5f);

TValue relu(Tape& T, const TValue& x);
TValue tanh_op(Tape& T, const TValue& x);
TValue sigmoid_op(Tape& T, const TValue& x);
TValue activate(Tape& T, const TValue& x, Act act);

TValue add(Tape& T, const TValue& a, const TValue& b);
TValue sub(Tape& T, const TValue& a, const TValue& b);
TValue mul(Tape& T, const TValue& a, const TValue& b);
TValue scale(Tape& T, const TValue& x, float s);

TValue concat_ch(Tape& T, const std::vector<TValue>& parts);
TValue slice_ch(Tape& T, const TValue& x, int c0, int c1);  // channels [c0, c1)
TValue crop(Tape& T, const TValue& x, int y0, int x0, int h, int w);

// Average pooling with same padding; border windows average over the in-bounds
// samples only, so constant inputs stay constant.
TValue avg_pool(Tape& T, const TValue& x, int size, int stride);

// Scalar {1}: mean over all elements of (a - b)^2.
TValue mse(Tape& T, const TValue& a, const TValue& b);

// Elements must lie in [-1, 1]. Stochastic mode maps c to +1 with probability
// (1+c)/2 and to -1 otherwise (unbiased); deterministic mode is sign(c) with
// sign(0) = +1. Gradient is passed straight through either way.
TValue binarize(Tape& T, const TValue& x, bool stochastic, Rng* rng);

struct LstmState {
  TValue h, c;
};

// Convolutional LSTM step; gates come from one conv over concat(x, h) with
// bias. w is (kh, kw, cin + hidden, 4*hidden) with gate order i, f, o, g.
LstmState conv_lstm_step(Tape& T, const TValue& x, const LstmState& prev,
                         const TValue& w, const TValue& b);
LstmState lstm_zero_state(Tape& T, int h, int w, int hidden);

// Inference-side clamp to [-1, 1] (not differentiated).
Tensor clamp_unit(const Tensor& x);

double mse_value(const Tensor& a, const Tensor& b);

}  // namespace pmvc::nn
