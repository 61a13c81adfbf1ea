/*
 * Copyright 2026 The splitfss Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "splitfss/stats.h"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <stdexcept>

namespace splitfss {
namespace {

double upper_tail(double stat, double dof) {
  if (dof <= 0) return 1.0;
  return boost::math::cdf(
      boost::math::complement(boost::math::chi_squared(dof), stat));
}

}  // namespace

ChiSquare chi_square_uniform(std::span<const uint64_t> counts) {
  if (counts.size() < 2) throw std::invalid_argument("need at least two bins");
  double total = 0;
  for (uint64_t c : counts) total += static_cast<double>(c);
  ChiSquare out;
  if (total == 0) return out;
  const double expected = total / static_cast<double>(counts.size());
  for (uint64_t c : counts) {
    const double d = static_cast<double>(c) - expected;
    out.statistic += d * d / expected;
  }
  out.dof = static_cast<double>(counts.size() - 1);
  out.p_value = upper_tail(out.statistic, out.dof);
  return out;
}

ChiSquare chi_square_two_sample(std::span<const uint64_t> a,
                                std::span<const uint64_t> b) {
  if (a.size() != b.size()) throw std::invalid_argument("bin counts differ");
  double na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    na += static_cast<double>(a[i]);
    nb += static_cast<double>(b[i]);
  }
  ChiSquare out;
  if (na == 0 || nb == 0) return out;
  const double total = na + nb;
  size_t used = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double col = static_cast<double>(a[i] + b[i]);
    if (col == 0) continue;
    ++used;
    const double ea = col * na / total, eb = col * nb / total;
    out.statistic += (a[i] - ea) * (a[i] - ea) / ea + (b[i] - eb) * (b[i] - eb) / eb;
  }
  out.dof = used > 0 ? static_cast<double>(used - 1) : 0;
  out.p_value = upper_tail(out.statistic, out.dof);
  return out;
}

double binomial_std_error(double p, uint64_t trials) {
  if (trials == 0) return 0;
  return std::sqrt(p * (1 - p) / static_cast<double>(trials));
}

}  // namespace splitfss
