#pragma once

#include <vector>

#include "edl/tensor.hpp"

namespace edl {

// Elementwise arithmetic with numpy-style broadcasting over trailing axes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double b) { return add(a, Tensor::scalar(b)); }
inline Tensor operator-(const Tensor& a, double b) { return sub(a, Tensor::scalar(b)); }
inline Tensor operator*(const Tensor& a, double b) { return mul(a, Tensor::scalar(b)); }
inline Tensor operator/(const Tensor& a, double b) { return div(a, Tensor::scalar(b)); }
inline Tensor operator+(double a, const Tensor& b) { return add(Tensor::scalar(a), b); }
inline Tensor operator-(double a, const Tensor& b) { return sub(Tensor::scalar(a), b); }
inline Tensor operator*(double a, const Tensor& b) { return mul(Tensor::scalar(a), b); }
inline Tensor operator/(double a, const Tensor& b) { return div(Tensor::scalar(a), b); }

// Elementwise functions.
Tensor relu(const Tensor& x);
Tensor softplus(const Tensor& x);  // log(1 + e^x), numerically stable
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
Tensor min_const(const Tensor& x, double cap);  // min(x, cap)
Tensor lgamma(const Tensor& x);   // derivative: digamma
Tensor digamma(const Tensor& x);  // derivative: trigamma

// Copy of x detached from the graph (identity value, blocked gradient).
Tensor detach(const Tensor& x);

// [M,K] x [K,N] -> [M,N]
Tensor matmul(const Tensor& a, const Tensor& b);

enum class Padding { Valid, Same };

// input [N,Cin,H,W], kernel [Cout,Cin,kh,kw], stride 1 -> [N,Cout,H',W']
Tensor conv2d(const Tensor& input, const Tensor& kernel, Padding pad);

// [N,C,H,W] with even H and W -> [N,C,H/2,W/2]
Tensor maxpool2x2(const Tensor& x);

// Reductions.
Tensor sum(const Tensor& x);   // -> scalar
Tensor mean(const Tensor& x);  // -> scalar
// sum over the last axis, keeping it as an axis of extent 1: [...,K] -> [...,1]
Tensor sum_last(const Tensor& x);

// softmax over the last axis, computed with max subtraction
Tensor softmax(const Tensor& x);

// y[i] = x[i, labels[i]] for x of shape [N,K]
Tensor gather_rows(const Tensor& x, const std::vector<int>& labels);

// Same data, new shape (sizes must agree).
Tensor reshape(const Tensor& x, Shape new_shape);

}  // namespace edl
