#include "mjd/scenario.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace mjd {

namespace {

using Json = nlohmann::json;

const Json& require(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(where + ": missing field '" + key + "'");
  }
  return obj.at(key);
}

double number(const Json& v, const std::string& where) {
  if (!v.is_number()) {
    throw ParseError(where + ": expected a number");
  }
  return v.get<double>();
}

std::vector<double> number_array(const Json& v, const std::string& where) {
  if (!v.is_array()) {
    throw ParseError(where + ": expected an array of numbers");
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(number(v[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::uint64_t unsigned_integer(const Json& v, const std::string& where) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    throw ParseError(where + ": expected a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

Scenario from_json(const Json& doc) {
  if (!doc.is_object()) {
    throw ParseError("scenario: top level must be an object");
  }
  Scenario sc;
  const Json& noise = require(doc, "noise", "scenario");
  sc.spec.noise.sigma_v2 = number(require(noise, "sigma_v2", "noise"), "noise.sigma_v2");
  const std::uint64_t m = unsigned_integer(require(noise, "samples_m", "noise"), "noise.samples_m");
  if (m > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
    throw ParseError("noise.samples_m: value too large");
  }
  sc.spec.noise.samples_m = static_cast<int>(m);

  const Json& subs = require(doc, "subchannels", "scenario");
  const auto gain = number_array(require(subs, "gain_power", "subchannels"), "subchannels.gain_power");
  const auto rate = number_array(require(subs, "rate", "subchannels"), "subchannels.rate");
  const auto cost = number_array(require(subs, "cost", "subchannels"), "subchannels.cost");
  const auto alpha = number_array(require(subs, "alpha", "subchannels"), "subchannels.alpha");
  const auto beta = number_array(require(subs, "beta", "subchannels"), "subchannels.beta");
  const std::size_t k = gain.size();
  for (const auto* arr : {&rate, &cost, &alpha, &beta}) {
    if (arr->size() != k) {
      throw DomainError("subchannels: arrays gain_power, rate, cost, alpha, beta must share length " +
                        std::to_string(k));
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    sc.spec.subchannels.push_back({gain[i], rate[i], cost[i], alpha[i], beta[i]});
  }

  const Json& groups = require(doc, "groups", "scenario");
  if (!groups.is_array()) {
    throw ParseError("groups: expected an array");
  }
  for (std::size_t j = 0; j < groups.size(); ++j) {
    const std::string where = "groups[" + std::to_string(j) + "]";
    PrimaryUserGroup g;
    const Json& members = require(groups[j], "members", where);
    if (!members.is_array()) {
      throw ParseError(where + ".members: expected an array");
    }
    for (std::size_t i = 0; i < members.size(); ++i) {
      g.members.push_back(unsigned_integer(members[i], where + ".members[" + std::to_string(i) + "]"));
    }
    g.epsilon = number(require(groups[j], "epsilon", where), where + ".epsilon");
    sc.spec.groups.push_back(std::move(g));
  }
  if (doc.contains("delta")) {
    sc.spec.delta = number(doc.at("delta"), "delta");
  }

  if (doc.contains("solver")) {
    const Json& s = doc.at("solver");
    if (s.contains("feasibility_tol")) sc.solver.feasibility_tol = number(s.at("feasibility_tol"), "solver.feasibility_tol");
    if (s.contains("kkt_tol")) sc.solver.kkt_tol = number(s.at("kkt_tol"), "solver.kkt_tol");
    if (s.contains("max_iterations")) {
      sc.solver.max_iterations = static_cast<int>(unsigned_integer(s.at("max_iterations"), "solver.max_iterations"));
    }
  }
  if (doc.contains("simulation")) {
    const Json& s = doc.at("simulation");
    if (s.contains("trials")) sc.simulation.trials = unsigned_integer(s.at("trials"), "simulation.trials");
    if (s.contains("seed")) sc.simulation.seed = unsigned_integer(s.at("seed"), "simulation.seed");
    if (s.contains("threads")) {
      sc.simulation.threads = static_cast<unsigned>(unsigned_integer(s.at("threads"), "simulation.threads"));
    }
    if (s.contains("occupancy")) {
      const Json& occ = s.at("occupancy");
      if (!occ.is_array()) throw ParseError("simulation.occupancy: expected an array of booleans");
      for (const Json& b : occ) {
        if (!b.is_boolean()) throw ParseError("simulation.occupancy: expected booleans");
        sc.simulation.occupancy.push_back(b.get<bool>());
      }
      if (sc.simulation.occupancy.size() != k) {
        throw DomainError("simulation.occupancy: length must equal the number of subchannels");
      }
    }
  }
  validate(sc.spec);
  if (sc.simulation.trials < 1) {
    throw DomainError("simulation.trials must be at least 1");
  }
  return sc;
}

}  // namespace

Scenario parse_scenario(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
  try {
    return from_json(doc);
  } catch (const Json::exception& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open scenario file " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

nlohmann::ordered_json scenario_to_json(const Scenario& sc) {
  nlohmann::ordered_json doc;
  doc["noise"] = {{"sigma_v2", sc.spec.noise.sigma_v2}, {"samples_m", sc.spec.noise.samples_m}};
  std::vector<double> gain, rate, cost, alpha, beta;
  for (const SubchannelParams& s : sc.spec.subchannels) {
    gain.push_back(s.gain_power);
    rate.push_back(s.rate);
    cost.push_back(s.cost);
    alpha.push_back(s.alpha);
    beta.push_back(s.beta);
  }
  doc["subchannels"] = {{"gain_power", gain}, {"rate", rate}, {"cost", cost}, {"alpha", alpha}, {"beta", beta}};
  doc["groups"] = nlohmann::ordered_json::array();
  for (const PrimaryUserGroup& g : sc.spec.groups) {
    doc["groups"].push_back({{"members", g.members}, {"epsilon", g.epsilon}});
  }
  doc["delta"] = sc.spec.delta;
  doc["solver"] = {{"feasibility_tol", sc.solver.feasibility_tol},
                   {"kkt_tol", sc.solver.kkt_tol},
                   {"max_iterations", sc.solver.max_iterations}};
  doc["simulation"] = {{"trials", sc.simulation.trials}, {"seed", sc.simulation.seed}, {"threads", sc.simulation.threads}};
  if (!sc.simulation.occupancy.empty()) {
    std::vector<bool> occ(sc.simulation.occupancy.begin(), sc.simulation.occupancy.end());
    doc["simulation"]["occupancy"] = occ;
  }
  return doc;
}

std::string emit_scenario(const Scenario& scenario) {
  return scenario_to_json(scenario).dump(2) + "\n";
}

nlohmann::ordered_json solution_to_json(const Solution& s) {
  nlohmann::ordered_json doc;
  auto finite_or_null = [](double v) -> nlohmann::ordered_json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  doc["problem"] = std::string(to_string(s.problem));
  doc["status"] = std::string(to_string(s.status));
  doc["objective"] = finite_or_null(s.objective);
  doc["throughput"] = finite_or_null(s.throughput);
  doc["interference"] = finite_or_null(s.interference);
  doc["gamma"] = s.gamma.gamma;
  doc["pf"] = s.pf;
  doc["pm"] = s.pm;
  doc["group_interference"] = s.group_interference;
  doc["slacks"] = s.slacks;
  doc["multipliers"] = s.multipliers;
  doc["kkt_residual"] = finite_or_null(s.kkt_residual);
  doc["iterations"] = s.iterations;
  if (!s.message.empty()) doc["message"] = s.message;
  return doc;
}

ThresholdVector parse_threshold_vector(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("threshold file: ") + e.what());
  }
  const Json& arr = doc.is_object() ? require(doc, "gamma", "threshold file") : doc;
  return ThresholdVector{number_array(arr, "gamma")};
}

bool operator==(const ProblemSpec& a, const ProblemSpec& b) {
  if (a.noise.sigma_v2 != b.noise.sigma_v2 || a.noise.samples_m != b.noise.samples_m ||
      a.delta != b.delta || a.subchannels.size() != b.subchannels.size() ||
      a.groups.size() != b.groups.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.subchannels.size(); ++i) {
    const SubchannelParams& x = a.subchannels[i];
    const SubchannelParams& y = b.subchannels[i];
    if (x.gain_power != y.gain_power || x.rate != y.rate || x.cost != y.cost ||
        x.alpha != y.alpha || x.beta != y.beta) {
      return false;
    }
  }
  for (std::size_t j = 0; j < a.groups.size(); ++j) {
    if (a.groups[j].members != b.groups[j].members || a.groups[j].epsilon != b.groups[j].epsilon) {
      return false;
    }
  }
  return true;
}

}  // namespace mjd
