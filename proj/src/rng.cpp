#include "socsim/rng.hpp"

#include <sstream>

#include "socsim/errors.hpp"

namespace socsim {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ArgumentError("Rng::below requires n > 0");
  // Rejection sampling on the largest multiple of n.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next();
  } while (x >= limit);
  return x % n;
}

std::string Rng::state() const {
  std::ostringstream out;
  out << engine_;
  return out.str();
}

void Rng::restore(std::string_view state) {
  std::istringstream in{std::string(state)};
  in >> engine_;
  if (!in) throw DataError("invalid rng state");
}

}  // namespace socsim
