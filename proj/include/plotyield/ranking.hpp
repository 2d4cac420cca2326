#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "plotyield/error.hpp"

namespace plotyield {

// The ceil(fraction * n) plots with the largest values; ties broken by
// ascending plot id.
inline std::set<std::string> select_top(const std::map<std::string, double>& values,
                                        double fraction) {
    require(!values.empty(), "select_empty", "selection requires at least one plot");
    require(fraction > 0.0 && fraction <= 1.0, "select_fraction",
            "selection fraction must be in (0, 1]");
    std::vector<std::pair<std::string, double>> order(values.begin(), values.end());
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    size_t k = static_cast<size_t>(
        std::ceil(fraction * static_cast<double>(order.size())));
    k = std::min(k, order.size());
    std::set<std::string> out;
    for (size_t i = 0; i < k; ++i) out.insert(order[i].first);
    return out;
}

struct ConfusionCounts {
    int64_t tp = 0;
    int64_t tn = 0;
    int64_t fp = 0;
    int64_t fn = 0;

    int64_t population() const { return tp + tn + fp + fn; }
};

inline ConfusionCounts confusion(const std::set<std::string>& truth_selected,
                                 const std::set<std::string>& predicted_selected,
                                 const std::set<std::string>& population) {
    for (const auto& id : truth_selected)
        require(population.count(id) > 0, "confusion_subset",
                "truth selection contains '" + id + "' which is not in the population");
    for (const auto& id : predicted_selected)
        require(population.count(id) > 0, "confusion_subset",
                "prediction contains '" + id + "' which is not in the population");
    ConfusionCounts c;
    for (const auto& id : population) {
        bool t = truth_selected.count(id) > 0;
        bool p = predicted_selected.count(id) > 0;
        if (t && p) ++c.tp;
        else if (t && !p) ++c.fn;
        else if (!t && p) ++c.fp;
        else ++c.tn;
    }
    return c;
}

struct SelectionScores {
    std::optional<double> accuracy;
    std::optional<double> sensitivity;  // tp / (tp + fn)
    std::optional<double> specificity;  // tn / (tn + fp)
};

inline SelectionScores scores(const ConfusionCounts& c) {
    require(c.tp >= 0 && c.tn >= 0 && c.fp >= 0 && c.fn >= 0, "confusion_negative",
            "confusion counts must be non-negative");
    require(c.population() > 0, "confusion_empty", "confusion population must be positive");
    SelectionScores s;
    s.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.population());
    if (c.tp + c.fn > 0)
        s.sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    if (c.tn + c.fp > 0)
        s.specificity = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
    return s;
}

// One threshold's selection outcome, including the set overlaps that back the
// Venn-style output.
struct SelectionReport {
    double threshold = 0;
    ConfusionCounts counts;
    SelectionScores selection_scores;
    std::set<std::string> both;        // selected by truth and prediction
    std::set<std::string> truth_only;  // missed by the prediction
    std::set<std::string> pred_only;   // falsely advanced
};

inline SelectionReport evaluate_selection(const std::map<std::string, double>& truth_values,
                                          const std::map<std::string, double>& predicted_values,
                                          double fraction) {
    require(truth_values.size() == predicted_values.size(), "rank_population",
            "truth and predicted value maps must cover the same plots");
    std::set<std::string> population;
    for (const auto& [id, v] : truth_values) population.insert(id);
    for (const auto& [id, v] : predicted_values)
        require(population.count(id) > 0, "rank_population",
                "predicted values contain unknown plot '" + id + "'");

    SelectionReport rep;
    rep.threshold = fraction;
    auto truth_sel = select_top(truth_values, fraction);
    auto pred_sel = select_top(predicted_values, fraction);
    rep.counts = confusion(truth_sel, pred_sel, population);
    rep.selection_scores = scores(rep.counts);
    std::set_intersection(truth_sel.begin(), truth_sel.end(), pred_sel.begin(), pred_sel.end(),
                          std::inserter(rep.both, rep.both.end()));
    std::set_difference(truth_sel.begin(), truth_sel.end(), pred_sel.begin(), pred_sel.end(),
                        std::inserter(rep.truth_only, rep.truth_only.end()));
    std::set_difference(pred_sel.begin(), pred_sel.end(), truth_sel.begin(), truth_sel.end(),
                        std::inserter(rep.pred_only, rep.pred_only.end()));
    return rep;
}

}  // namespace plotyield
