#pragma once

#include <cstdint>

#include <json.hpp>

namespace dshgt {

struct Metrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;

    static Metrics from_counts(std::int64_t tp, std::int64_t fp, std::int64_t tn,
                               std::int64_t fn) {
        Metrics m;
        m.tp = tp;
        m.fp = fp;
        m.tn = tn;
        m.fn = fn;
        const std::int64_t total = tp + fp + tn + fn;
        m.accuracy = total ? double(tp + tn) / double(total) : 0.0;
        m.precision = (tp + fp) ? double(tp) / double(tp + fp) : 0.0;
        m.recall = (tp + fn) ? double(tp) / double(tp + fn) : 0.0;
        m.f1 = (m.precision + m.recall) > 0.0
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
        return m;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["accuracy"] = accuracy;
        j["precision"] = precision;
        j["recall"] = recall;
        j["f1"] = f1;
        j["tp"] = tp;
        j["fp"] = fp;
        j["tn"] = tn;
        j["fn"] = fn;
        return j;
    }
};

}  // namespace dshgt
