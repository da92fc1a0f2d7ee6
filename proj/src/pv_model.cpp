#include "pvctl/pv_model.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "pvctl/error.hpp"

namespace pvctl {

void PvArrayConfig::validate() const {
  if (!(rated_dc_kw > 0.0)) throw ConfigError("rated_dc_kw must be positive");
  if (!(derate > 0.0 && derate <= 1.0)) throw ConfigError("derate must lie in (0, 1]");
  if (!(inverter_efficiency > 0.0 && inverter_efficiency <= 1.0))
    throw ConfigError("inverter_efficiency must lie in (0, 1]");
  if (!(ac_limit_kw > 0.0)) throw ConfigError("ac_limit_kw must be positive");
}

double irradiance_to_ac_power(double irradiance_wm2, const PvArrayConfig& cfg) {
  if (!(irradiance_wm2 >= 0.0))
    throw DomainError(fmt::format("irradiance must be non-negative, got {}", irradiance_wm2));
  const double ac = irradiance_wm2 / 1000.0 * cfg.rated_dc_kw * cfg.derate * cfg.inverter_efficiency;
  return std::min(ac, cfg.ac_limit_kw);
}

SeriesMatrix plant_true_mpp(const IrradianceDataset& dataset, std::span<const PvArrayConfig> configs) {
  if (configs.size() != dataset.sensors.size())
    throw ConfigError(fmt::format("{} inverter configs for {} irradiance sensors", configs.size(),
                                  dataset.sensors.size()));
  SeriesMatrix out(dataset.steps(), configs.size());
  for (std::size_t r = 0; r < dataset.steps(); ++r) {
    const auto g = dataset.values.row(r);
    auto p = out.row(r);
    for (std::size_t i = 0; i < configs.size(); ++i) p[i] = irradiance_to_ac_power(g[i], configs[i]);
  }
  return out;
}

}  // namespace pvctl
