#include "hpgm/types.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace hpgm {

bool AdjacencyMatrix::is_valid() const {
  const std::size_t n = rooms();
  if (values.rank() != 2 || values.dim(1) != n) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (values[i * n + i] != 0.0) return false;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = values[i * n + j];
      if ((v != 0.0 && v != 1.0) || v != values[j * n + i]) return false;
    }
  }
  return true;
}

namespace {
int argmax(const std::vector<double>& v) {
  return v.empty() ? -1 : static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}
}  // namespace

int TextureCondition::material() const { return argmax(p); }
int TextureCondition::colour() const { return argmax(q); }

}  // namespace hpgm

namespace hpgm {

std::pair<double, double> position_anchor(std::string_view name) {
  static constexpr double lo = 1.0 / 6.0, mid = 0.5, hi = 5.0 / 6.0;
  if (name == "center") return {mid, mid};
  if (name == "north") return {mid, lo};
  if (name == "northeast") return {hi, lo};
  if (name == "east") return {hi, mid};
  if (name == "southeast") return {hi, hi};
  if (name == "south") return {mid, hi};
  if (name == "southwest") return {lo, hi};
  if (name == "west") return {lo, mid};
  if (name == "northwest") return {lo, lo};
  throw std::invalid_argument("no canvas anchor for position \"" + std::string(name) + "\"");
}

}  // namespace hpgm
