#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace k2v::nn {

inline constexpr double kNormFloor = 1e-12;

/// u.v / (|u| |v|), clamped to [-1, 1]. Throws DegenerateVectorError if
/// either norm is below kNormFloor and DimensionError on length mismatch.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// Cosine distance 1 - cos(u, v), in [0, 2].
double cosine_distance(std::span<const double> u, std::span<const double> v);

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

/// log(sum(exp(logits))) - logits[target], via log-sum-exp.
double softmax_cross_entropy(std::span<const double> logits, std::size_t target);

std::size_t argmax(std::span<const double> values);

}  // namespace k2v::nn
