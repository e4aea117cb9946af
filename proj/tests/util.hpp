#ifndef BLENDSA_TESTS_UTIL_HPP
#define BLENDSA_TESTS_UTIL_HPP

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "blendsa/rng.hpp"
#include "blendsa/table.hpp"

namespace testutil {

inline blendsa::Column col_cont(std::vector<double> values,
                                std::vector<std::uint8_t> mask = {}) {
  blendsa::Column c;
  c.kind = blendsa::ColumnKind::Continuous;
  c.values = std::move(values);
  c.mask = mask.empty() ? std::vector<std::uint8_t>(c.values.size(), 1)
                        : std::move(mask);
  return c;
}

inline blendsa::Column col_bin(std::vector<double> values,
                               std::vector<std::uint8_t> mask = {}) {
  blendsa::Column c;
  c.kind = blendsa::ColumnKind::Binary;
  c.values = std::move(values);
  c.mask = mask.empty() ? std::vector<std::uint8_t>(c.values.size(), 1)
                        : std::move(mask);
  return c;
}

inline blendsa::Column col_cat(std::vector<double> indices,
                               std::vector<std::string> levels,
                               std::vector<std::uint8_t> mask = {},
                               std::size_t baseline = 0) {
  blendsa::Column c;
  c.kind = blendsa::ColumnKind::Categorical;
  c.values = std::move(indices);
  c.mask = mask.empty() ? std::vector<std::uint8_t>(c.values.size(), 1)
                        : std::move(mask);
  c.levels = std::move(levels);
  c.baseline = baseline;
  return c;
}

inline double runif(blendsa::Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double rnorm(blendsa::Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace testutil

#endif
