#pragma once

#include <map>
#include <vector>

#include "aircal/core_data.hpp"
#include "aircal/dataset.hpp"
#include "aircal/errors.hpp"
#include "aircal/metrics.hpp"
#include "aircal/neuralnet.hpp"

namespace aircal {

/// Reference/prediction pairs ready for metric computation, optionally
/// aggregated to calendar hours.
struct EvalSeries {
  std::vector<Timestamp> ts;
  std::vector<double> reference;
  std::vector<double> predicted;
};

/// Predict every pair of the dataset (eval mode, physical units) and pair
/// the predictions with the reference targets. At hourly resolution both
/// series pass through the identical hourly aggregation, keyed by the
/// target timestamps, before comparison.
inline EvalSeries eval_series(const LstmModel& model, const WindowedDataset& data,
                              Resolution resolution) {
  if (data.size() == 0) throw InsufficientDataError("evaluate: empty dataset");
  EvalSeries out;
  out.ts = data.target_ts;
  out.reference = data.targets;
  out.predicted = predict_all(model, data);

  if (resolution == Resolution::hourly) {
    std::vector<TimedValue> ref_tv(out.ts.size()), pred_tv(out.ts.size());
    for (std::size_t i = 0; i < out.ts.size(); ++i) {
      ref_tv[i] = {out.ts[i], out.reference[i]};
      pred_tv[i] = {out.ts[i], out.predicted[i]};
    }
    const auto ref_hourly = hourly_average(ref_tv);
    const auto pred_hourly = hourly_average(pred_tv);

    // Both sides aggregate over identical slot sets, so the kept hours
    // match; join defensively by timestamp anyway.
    std::map<std::int64_t, double> pred_by_hour;
    for (const auto& tv : pred_hourly) pred_by_hour[tv.ts.secs] = tv.value;
    EvalSeries hourly;
    for (const auto& tv : ref_hourly) {
      const auto it = pred_by_hour.find(tv.ts.secs);
      if (it == pred_by_hour.end()) continue;
      hourly.ts.push_back(tv.ts);
      hourly.reference.push_back(tv.value);
      hourly.predicted.push_back(it->second);
    }
    if (hourly.ts.size() < 2) {
      throw InsufficientDataError("evaluate: fewer than 2 complete hours for hourly metrics");
    }
    return hourly;
  }
  return out;
}

/// MetricSet of the model on a dataset at the requested resolution.
inline MetricSet evaluate(const LstmModel& model, const WindowedDataset& data,
                          Resolution resolution) {
  const EvalSeries series = eval_series(model, data, resolution);
  return compute_metrics(series.reference, series.predicted, resolution);
}

}  // namespace aircal
