#pragma once

#include <span>
#include <string>
#include <vector>

#include "pvctl/data_ingest.hpp"
#include "pvctl/series_matrix.hpp"

namespace pvctl {

/// First-order array model: DC output linear in irradiance, scaled by a
/// derate and the inverter efficiency, clipped at the AC limit.
struct PvArrayConfig {
  double rated_dc_kw = 470.0;  // at 1000 W/m^2
  double derate = 0.9;
  double inverter_efficiency = 0.96;
  double ac_limit_kw = 470.0;

  /// Throws ConfigError unless every field is positive and the two ratios are <= 1.
  void validate() const;
};

/// min(g/1000 * rated * derate * efficiency, ac_limit). Throws DomainError for g < 0.
double irradiance_to_ac_power(double irradiance_wm2, const PvArrayConfig& cfg);

/// Ground-truth available AC power, [timestep x inverter]. Inverter i reads
/// sensor column i. Throws ConfigError on a count mismatch.
SeriesMatrix plant_true_mpp(const IrradianceDataset& dataset, std::span<const PvArrayConfig> configs);

}  // namespace pvctl
