#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "ssmamp/mamp_engine.hpp"
#include "ssmamp/state_evolution.hpp"

namespace ssmamp {

/// Column order shared by engine and state evolution CSVs.
inline constexpr const char* kCsvHeader =
    "source,t,mse_phi,mse_gamma,v_gamma_t,v_phi_t,lband_dev_gamma,lband_dev_phi,orth_max,zeta_last";

/// One row per executed iteration; `source` is the run mode.
void write_csv(const RunReport& rep, std::ostream& os);

/// Source "se". The MSE columns hold the predicted variances and the audit
/// columns are empty.
void write_csv(const SETrajectory& traj, std::ostream& os);

nlohmann::json to_json(const RunReport& rep);
nlohmann::json to_json(const SETrajectory& traj);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace ssmamp
