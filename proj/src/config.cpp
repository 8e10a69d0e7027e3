#include "downscale/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace downscale {

namespace {

const std::set<std::string>& knownKeys() {
  static const std::set<std::string> keys{
      "observations", "covariate", "population", "mesh_file", "output_dir",
      "transform", "varying_intercept", "pollutant",
      "mesh.max_edge_inner", "mesh.max_edge_outer", "mesh.buffer_width",
      "mesh.cutoff", "mesh.min_angle_deg",
      "prior.sigma_eps_u", "prior.sigma_eps_alpha", "prior.sigma_omega_u",
      "prior.sigma_omega_alpha", "prior.range_r0", "prior.range_alpha",
      "prior.rho_p_positive", "prior.kappa_interpretation", "prior.kappa0",
      "prior.kappa_alpha",
      "inference.strategy", "inference.grid_step", "inference.prune_logdrop",
      "inference.grad_tol", "inference.step_tol", "inference.max_iter",
      "predict.n_samples", "predict.seed", "predict.thresholds",
      "predict.include_noise", "predict.times", "predict.locations_file",
      "predict.diff_times", "predict.write_cube",
      "cv.n_splits", "cv.train_fraction", "cv.strata",
      "sim.domain", "sim.grid_cols", "sim.grid_rows", "sim.n_sites",
      "sim.n_time",
      "sim.n_datasets", "sim.beta0", "sim.beta1", "sim.kappa0",
      "sim.sigma2_0", "sim.kappa1", "sim.sigma2_1", "sim.rho0", "sim.rho1",
      "sim.sigma2_eps", "sim.mesh_n",
      "seed",
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig RunConfig::parse(std::istream& is, const std::string& origin) {
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                               ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!knownKeys().count(key))
      throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                               ": unknown config key '" + key + "'");
    cfg.entries_.push_back({key, value});
  }
  return cfg;
}

RunConfig RunConfig::parseFile(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  return parse(f, path);
}

bool RunConfig::has(const std::string& key) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == key; });
}

std::string RunConfig::get(const std::string& key) const {
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
    if (it->first == key) return it->second;
  throw std::runtime_error("missing required config key '" + key + "'");
}

std::string RunConfig::get(const std::string& key,
                           const std::string& fallback) const {
  return has(key) ? get(key) : fallback;
}

double RunConfig::getDouble(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  try {
    return std::stod(get(key));
  } catch (const std::exception&) {
    throw std::runtime_error("config key '" + key + "' is not a number: " +
                             get(key));
  }
}

int RunConfig::getInt(const std::string& key, int fallback) const {
  if (!has(key)) return fallback;
  try {
    return std::stoi(get(key));
  } catch (const std::exception&) {
    throw std::runtime_error("config key '" + key + "' is not an integer: " +
                             get(key));
  }
}

bool RunConfig::getBool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::runtime_error("config key '" + key + "' is not a boolean: " + v);
}

std::vector<std::string> RunConfig::getAll(const std::string& key) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries_)
    if (k == key) out.push_back(v);
  return out;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
    if (it->first == key) {
      it->second = value;
      return;
    }
  entries_.push_back({key, value});
}

void RunConfig::write(std::ostream& os) const {
  for (const auto& [k, v] : entries_) os << k << " = " << v << "\n";
}

}  // namespace downscale
