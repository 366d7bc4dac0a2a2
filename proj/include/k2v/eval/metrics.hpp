#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "k2v/error.hpp"

namespace k2v::eval {

class UndefinedCorrelationError : public Error {
 public:
  explicit UndefinedCorrelationError(const std::string& msg) : Error("undefined_correlation", msg) {}
};

/// Sample correlation. Throws UndefinedCorrelationError for a constant
/// input and InvalidArgument for fewer than two points or unequal lengths.
double pearson(std::span<const double> x, std::span<const double> y);
/// Pearson of mid-ranks (ties share the average rank).
double spearman(std::span<const double> x, std::span<const double> y);
/// 1-based fractional ranks, ascending.
std::vector<double> mid_ranks(std::span<const double> x);

/// Fraction of tasks whose oracle-best model (any model tied for the best
/// accuracy) is among the first k entries of the task's ranking.
/// `rankings[t]` lists model indices best first; `oracle[t][j]` is the
/// accuracy of model j on task t. Throws InvalidArgument if k is outside
/// [1, m] or the shapes disagree.
double recall_at_k(const std::vector<std::vector<std::size_t>>& rankings,
                   const std::vector<std::vector<double>>& oracle, std::size_t k);

}  // namespace k2v::eval
