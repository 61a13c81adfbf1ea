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

// Chi-square tests used by the privacy audits and the statistical tests.

#ifndef SPLITFSS_STATS_H_
#define SPLITFSS_STATS_H_

#include <cstdint>
#include <span>

namespace splitfss {

struct ChiSquare {
  double statistic = 0;
  double dof = 0;
  double p_value = 1;
};

// Goodness of fit of `counts` against the uniform distribution.
ChiSquare chi_square_uniform(std::span<const uint64_t> counts);

// Homogeneity of two histograms over the same bins (2 x k contingency
// table). Bins empty in both samples are skipped.
ChiSquare chi_square_two_sample(std::span<const uint64_t> a,
                                std::span<const uint64_t> b);

// Binomial standard error of a proportion estimated from `trials` samples.
double binomial_std_error(double p, uint64_t trials);

}  // namespace splitfss

#endif  // SPLITFSS_STATS_H_
