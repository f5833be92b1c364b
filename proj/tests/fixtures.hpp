#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mjd/optimizer.hpp"
#include "reference.hpp"

namespace fixture {

inline const std::vector<double> kGain = {0.50, 0.30, 0.45, 0.65, 0.25, 0.60, 0.40, 0.70};
inline const std::vector<double> kRate = {612, 524, 623, 139, 451, 409, 909, 401};
inline const std::vector<double> kCost = {1.91, 8.17, 4.23, 3.86, 7.16, 6.05, 0.82, 1.30};

inline mjd::ProblemSpec table1(double epsilon = 1.25, double delta = 3224.0) {
  mjd::ProblemSpec spec;
  spec.noise = {1.0, 100};
  for (std::size_t k = 0; k < kGain.size(); ++k) {
    spec.subchannels.push_back({kGain[k], kRate[k], kCost[k], 0.1, 0.5});
  }
  mjd::PrimaryUserGroup group;
  group.members.resize(kGain.size());
  std::iota(group.members.begin(), group.members.end(), std::size_t{0});
  group.epsilon = epsilon;
  spec.groups = {group};
  spec.delta = delta;
  return spec;
}

inline std::vector<ref::Band> bands_of(const mjd::ProblemSpec& spec) {
  std::vector<ref::Band> out;
  for (const auto& s : spec.subchannels) out.push_back({s.gain_power, s.rate, s.cost, s.alpha, s.beta});
  return out;
}

inline ref::Model model_of(const mjd::ProblemSpec& spec) {
  return {spec.noise.sigma_v2, static_cast<double>(spec.noise.samples_m)};
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({1e-300, std::abs(a), std::abs(b)});
}

}  // namespace fixture
