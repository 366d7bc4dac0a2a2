#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace k2v {

/// The only view of a candidate classifier that probing and encoding code
/// may use: an identifier, its category count, and class probabilities.
class BlackBoxModel {
 public:
  virtual ~BlackBoxModel() = default;

  virtual const std::string& model_id() const = 0;
  virtual std::size_t category_count() const = 0;
  /// Softmax output of length category_count(); entries sum to 1.
  /// Throws DimensionError if `x` has the wrong length.
  virtual std::vector<double> predict_proba(std::span<const double> x) const = 0;
};

}  // namespace k2v
