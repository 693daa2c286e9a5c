#pragma once

// Label agreement scores.

#include <vector>

namespace hqsat {

/// Adjusted Rand index between two labelings of the same samples.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace hqsat
