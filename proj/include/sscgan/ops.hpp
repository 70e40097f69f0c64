#pragma once

#include <vector>

#include "sscgan/tape.hpp"

// Differentiable operations on 5-D volumes [N, C, X, Y, Z] and small dense
// tensors. Every op records its backward closure on the tape.
namespace sscgan::nn {

struct ConvGeometry {
  int stride = 1;
  int padding = 0;
  int dilation = 1;
};

enum class NormMode { kBatch, kInstance };

// x [N,Ci,X,Y,Z], weight [Co,Ci,k,k,k], bias [Co].
template <class T>
Var conv3d(Tape<T>& tape, Var x, Var weight, Var bias, ConvGeometry geom);

inline int conv_output_size(int in, int kernel, ConvGeometry g) {
  return (in + 2 * g.padding - g.dilation * (kernel - 1) - 1) / g.stride + 1;
}

template <class T>
Var relu(Tape<T>& tape, Var x);

template <class T>
Var leaky_relu(Tape<T>& tape, Var x, T slope);

template <class T>
Var sigmoid(Tape<T>& tape, Var x);

template <class T>
Var add(Tape<T>& tape, Var a, Var b);

template <class T>
Var scale(Tape<T>& tape, Var x, T factor);

// Concatenates [N,Ci,...] tensors along axis 1.
template <class T>
Var concat_channels(Tape<T>& tape, const std::vector<Var>& parts);

// Normalizes over spatial axes per (n, c) (instance) or over batch and
// spatial axes per c (batch, always with batch statistics), then applies a
// per-channel affine transform.
template <class T>
Var normalize(Tape<T>& tape, Var x, Var gamma, Var beta, NormMode mode, T eps = T(1e-5));

// Softmax across axis 1 for every (n, spatial) position.
template <class T>
Var softmax_channels(Tape<T>& tape, Var x);

// x [N,F], weight [O,F], bias [O] -> [N,O].
template <class T>
Var linear(Tape<T>& tape, Var x, Var weight, Var bias);

template <class T>
Var reshape(Tape<T>& tape, Var x, Shape shape);

// Linear interpolation along one axis with half-pixel centers
// (src = (o + 0.5) / factor - 0.5, clamped at the borders).
template <class T>
Var upsample_linear_axis(Tape<T>& tape, Var x, int axis, int factor);

// Separable trilinear upsampling of axes 2, 3, 4.
template <class T>
Var upsample_trilinear(Tape<T>& tape, Var x, int factor);

// -sum(target * ln(max(prob, clamp))) over every element. Scalar output.
template <class T>
Var mce_sum(Tape<T>& tape, Var prob, const Tensor<T>& target, T clamp);

// Mean over elements of -[z ln p + (1-z) ln(1-p)], p clamped to [clamp, 1-clamp].
template <class T>
Var bce_mean(Tape<T>& tape, Var pred, T target, T clamp);

// Mean of all elements. Scalar output.
template <class T>
Var mean_all(Tape<T>& tape, Var x);

}  // namespace sscgan::nn
