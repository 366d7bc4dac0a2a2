#pragma once

#include "k2v/zoo/zoo.hpp"

namespace k2v::testing {

// One default-config zoo per test binary; building it is the slow part.
inline const zoo::Zoo& shared_zoo() {
  static const zoo::Zoo instance = zoo::build_zoo(zoo::ZooConfig{});
  return instance;
}

inline zoo::DomainData shared_domain(std::size_t i) { return zoo::generate_domain(shared_zoo().entries.at(i).domain); }

}  // namespace k2v::testing
