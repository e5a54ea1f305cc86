#pragma once

#include "json.hpp"
#include "richness/fit.hpp"
#include "richness/growth.hpp"
#include "richness/selection.hpp"
#include "richness/simulate.hpp"

namespace richness::report {

inline constexpr int kSchemaVersion = 1;

using Json = nlohmann::ordered_json;

Json theta_json(const Theta& theta);
Json matrix_json(const Eigen::MatrixXd& m);
Json fit_json(const FitResult& fit);
Json trace_json(const SelectionTrace& trace);
Json metrics_json(const EstimatorMetrics& m);
Json sim_json(const SimReport& report, bool per_replicate);
Json growth_json(const std::vector<GrowthRow>& rows);
Json curve_json(const GrowthCurve& curve);

}  // namespace richness::report
