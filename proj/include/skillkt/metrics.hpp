#pragma once

#include <cstdint>
#include <span>

namespace skillkt {

/**
 * ROC AUC as the Mann-Whitney statistic with average ranks for tied scores:
 * (R₊ − n₊(n₊+1)/2) / (n₊·n₋). Throws UndefinedMetricError unless both classes
 * are present.
 */
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

} // namespace skillkt
