#pragma once

// Scenario documents (JSON) and solution serialization.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "json.hpp"
#include "mjd/optimizer.hpp"
#include "mjd/signal_sim.hpp"

namespace mjd {

/// Malformed document, wrong field type, or unreadable file.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

struct SimulationSettings {
  std::size_t trials = 100000;
  std::uint64_t seed = 1;
  OccupancyVector occupancy;  ///< empty means every band occupied
  unsigned threads = 1;
};

struct Scenario {
  ProblemSpec spec;
  SolverOptions solver;
  SimulationSettings simulation;
};

/// Throws ParseError for syntax/type problems and DomainError when the
/// content violates a problem invariant.
[[nodiscard]] Scenario parse_scenario(std::string_view text);
[[nodiscard]] Scenario load_scenario(const std::filesystem::path& path);

[[nodiscard]] nlohmann::ordered_json scenario_to_json(const Scenario& scenario);
[[nodiscard]] std::string emit_scenario(const Scenario& scenario);

[[nodiscard]] nlohmann::ordered_json solution_to_json(const Solution& solution);

/// Threshold vector from a JSON array or from an object with a "gamma" array
/// (as written by solution_to_json).
[[nodiscard]] ThresholdVector parse_threshold_vector(std::string_view text);

[[nodiscard]] bool operator==(const ProblemSpec& a, const ProblemSpec& b);

}  // namespace mjd
