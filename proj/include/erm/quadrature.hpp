#pragma once

#include <utility>
#include <vector>

namespace erm {

// Gauss-Legendre nodes and weights on [a, b]. Node tables are cached per count.
std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int count, double a, double b);

}  // namespace erm
