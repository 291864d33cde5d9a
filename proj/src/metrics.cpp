#include "skillkt/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "skillkt/errors.hpp"

namespace skillkt {

double auc(std::span<const double> scores, std::span<const std::uint8_t> labels)
{
    if (scores.size() != labels.size()) {
        throw ShapeError("auc: " + std::to_string(scores.size()) + " scores for " + std::to_string(labels.size())
                         + " labels");
    }
    const auto n = scores.size();
    const auto n_pos = static_cast<double>(std::count_if(labels.begin(), labels.end(), [](auto l) { return l != 0; }));
    const auto n_neg = static_cast<double>(n) - n_pos;
    if (n_pos == 0 || n_neg == 0) throw UndefinedMetricError("AUC undefined: labels contain a single class");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        // 1-based ranks i+1..j+1 share their average
        const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]]) rank_sum += avg_rank;
        }
        i = j + 1;
    }
    return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

} // namespace skillkt
