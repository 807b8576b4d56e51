#pragma once

#include <cstddef>
#include <vector>

namespace qpburst {

/// Sampled scalar signal; t ascending, same length as y.
struct TimeSeries {
  std::vector<double> t;
  std::vector<double> y;

  std::size_t size() const { return t.size(); }
  bool empty() const { return t.empty(); }
};

}  // namespace qpburst
