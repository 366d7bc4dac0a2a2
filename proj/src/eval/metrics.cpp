#include "k2v/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace k2v::eval {

namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("correlation inputs differ in length");
  if (x.size() < 2) throw InvalidArgument("correlation needs at least two points");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw NonFiniteError("correlation input is not finite");
  }
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelationError("correlation with a constant input is undefined");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> mid_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const auto rx = mid_ranks(x);
  const auto ry = mid_ranks(y);
  return pearson(rx, ry);
}

double recall_at_k(const std::vector<std::vector<std::size_t>>& rankings, const std::vector<std::vector<double>>& oracle,
                   std::size_t k) {
  if (rankings.empty()) throw InvalidArgument("recall_at_k: no tasks");
  if (rankings.size() != oracle.size()) throw InvalidArgument("recall_at_k: rankings and oracle differ in task count");
  const std::size_t m = oracle.front().size();
  if (k < 1 || k > m) throw InvalidArgument("recall_at_k: k=" + std::to_string(k) + " outside [1, " + std::to_string(m) + "]");
  std::size_t hits = 0;
  for (std::size_t t = 0; t < rankings.size(); ++t) {
    const auto& acc = oracle[t];
    if (acc.size() != m) throw InvalidArgument("recall_at_k: ragged oracle table");
    if (rankings[t].size() < k) throw InvalidArgument("recall_at_k: ranking shorter than k");
    const double best = *std::max_element(acc.begin(), acc.end());
    bool hit = false;
    for (std::size_t r = 0; r < k; ++r) {
      if (rankings[t][r] >= m) throw IndexError("recall_at_k: model index out of range");
      hit = hit || acc[rankings[t][r]] == best;
    }
    hits += hit;
  }
  return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

}  // namespace k2v::eval
