#pragma once

// Multilabel scoring of predicted against injected error types, and latency
// statistics over a run log.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gazecoach/error_type.hpp"
#include "gazecoach/errors.hpp"

namespace gazecoach {

struct LabelMatrix {
    std::vector<std::string> cases;
    std::vector<ErrorType> labels{kErrorLabels.begin(), kErrorLabels.end()};
    std::vector<std::vector<std::uint8_t>> y_true;
    std::vector<std::vector<std::uint8_t>> y_pred;

    std::size_t rows() const { return cases.size(); }

    void validate() const {
        if (y_true.size() != cases.size() || y_pred.size() != cases.size())
            throw std::invalid_argument("label matrix row count mismatch");
        for (std::size_t i = 0; i < cases.size(); ++i) {
            if (y_true[i].size() != labels.size() || y_pred[i].size() != labels.size())
                throw std::invalid_argument("label matrix row " + std::to_string(i) + " has wrong width");
            for (std::size_t j = 0; j < labels.size(); ++j)
                if (y_true[i][j] > 1 || y_pred[i][j] > 1) throw std::invalid_argument("label matrix entry not in {0,1}");
        }
    }
};

/// A case's predicted error types alongside its ground truth.
struct LabeledCase {
    std::string case_id;
    std::vector<ErrorType> predicted;
    std::vector<ErrorType> truth;
};

inline std::vector<std::uint8_t> indicator_row(const std::vector<ErrorType>& types) {
    std::vector<std::uint8_t> row(kErrorLabels.size(), 0);
    for (auto t : types)
        for (std::size_t j = 0; j < kErrorLabels.size(); ++j)
            if (kErrorLabels[j] == t) row[j] = 1;
    return row;
}

inline LabelMatrix build_matrix(const std::vector<LabeledCase>& cases) {
    LabelMatrix m;
    for (const auto& c : cases) {
        m.cases.push_back(c.case_id);
        m.y_true.push_back(indicator_row(c.truth));
        m.y_pred.push_back(indicator_row(c.predicted));
    }
    return m;
}

/// Error types from a report's consolidated_error_types.
inline std::vector<ErrorType> predicted_types(const nlohmann::json& report) {
    std::vector<ErrorType> out;
    const auto& arr = report.at("consolidated_error_types");
    for (std::size_t i = 0; i < arr.size(); ++i) {
        auto t = parse_error_type(arr[i].get<std::string>());
        if (!t || *t == ErrorType::none)
            throw ValidationError("consolidated_error_types[" + std::to_string(i) + "]", "unknown error type");
        out.push_back(*t);
    }
    return out;
}

/// Error types from a truth.json `injected` list.
inline std::vector<ErrorType> truth_types(const nlohmann::json& truth) {
    std::vector<ErrorType> out;
    const auto& arr = truth.at("injected");
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string s = arr[i].at("error_type").get<std::string>();
        auto t = parse_error_type(s);
        if (!t || *t == ErrorType::none)
            throw ValidationError("injected[" + std::to_string(i) + "].error_type", "unknown label \"" + s + "\"");
        out.push_back(*t);
    }
    return out;
}

struct LabelScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct LatencySummary {
    double mean_ms = 0.0;
    double p50_ms = 0.0;
    double p95_ms = 0.0;
    std::size_t n_calls = 0;
    std::size_t n_cases = 0;
};

struct MetricsReport {
    std::size_t n_cases = 0;
    double subset_accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    double hamming_loss = 0.0;
    std::vector<std::pair<ErrorType, LabelScore>> per_label;
    std::optional<LatencySummary> latency;
};

/// Subset accuracy, macro P/R/F1 (0/0 taken as 0) and Hamming loss.
inline MetricsReport score(const LabelMatrix& m) {
    m.validate();
    if (m.rows() == 0) throw std::invalid_argument("cannot score an empty label matrix");
    const std::size_t n = m.rows(), L = m.labels.size();

    MetricsReport r;
    r.n_cases = n;
    std::size_t exact = 0, wrong_cells = 0;
    std::vector<std::size_t> tp(L, 0), fp(L, 0), fn(L, 0);
    for (std::size_t i = 0; i < n; ++i) {
        exact += m.y_true[i] == m.y_pred[i];
        for (std::size_t j = 0; j < L; ++j) {
            const bool t = m.y_true[i][j], p = m.y_pred[i][j];
            wrong_cells += t != p;
            tp[j] += t && p;
            fp[j] += !t && p;
            fn[j] += t && !p;
        }
    }
    r.subset_accuracy = static_cast<double>(exact) / static_cast<double>(n);
    r.hamming_loss = static_cast<double>(wrong_cells) / static_cast<double>(n * L);

    auto ratio = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
    for (std::size_t j = 0; j < L; ++j) {
        LabelScore s;
        s.precision = ratio(tp[j], tp[j] + fp[j]);
        s.recall = ratio(tp[j], tp[j] + fn[j]);
        s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
        s.support = tp[j] + fn[j];
        r.macro_precision += s.precision;
        r.macro_recall += s.recall;
        r.macro_f1 += s.f1;
        r.per_label.emplace_back(m.labels[j], s);
    }
    r.macro_precision /= static_cast<double>(L);
    r.macro_recall /= static_cast<double>(L);
    r.macro_f1 /= static_cast<double>(L);
    return r;
}

/// Nearest-rank percentile of an ascending, nonempty sample.
inline double nearest_rank(const std::vector<double>& sorted, double pct) {
    const auto n = static_cast<double>(sorted.size());
    auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * n));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

/// Per-case time is the sum of the case's call latencies plus the local time
/// recorded for it. Records without a case key form one group.
inline LatencySummary time_stats(const std::vector<nlohmann::json>& run_log) {
    LatencySummary s;
    std::map<std::string, double> per_case;
    for (const auto& rec : run_log) {
        const std::string kind = rec.value("kind", "call");
        const std::string key = rec.value("case_key", "");
        if (kind == "call") {
            ++s.n_calls;
            per_case[key] += rec.value("latency_ms", 0.0);
        } else if (kind == "case") {
            per_case[key] += rec.value("local_ms", 0.0);
        }
    }
    if (per_case.empty()) return s;
    std::vector<double> times;
    for (const auto& [_, t] : per_case) times.push_back(t);
    std::sort(times.begin(), times.end());
    double total = 0.0;
    for (double t : times) total += t;
    s.n_cases = times.size();
    s.mean_ms = total / static_cast<double>(times.size());
    s.p50_ms = nearest_rank(times, 50.0);
    s.p95_ms = nearest_rank(times, 95.0);
    return s;
}

inline nlohmann::ordered_json to_json(const MetricsReport& r) {
    nlohmann::ordered_json per = nlohmann::ordered_json::object();
    for (const auto& [label, s] : r.per_label)
        per[to_string(label)] = {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
    nlohmann::ordered_json j = {{"n_cases", r.n_cases},
                                {"subset_accuracy", r.subset_accuracy},
                                {"macro_precision", r.macro_precision},
                                {"macro_recall", r.macro_recall},
                                {"macro_f1", r.macro_f1},
                                {"hamming_loss", r.hamming_loss},
                                {"per_label", std::move(per)}};
    if (r.latency)
        j["latency"] = {{"mean_ms", r.latency->mean_ms},
                        {"p50_ms", r.latency->p50_ms},
                        {"p95_ms", r.latency->p95_ms},
                        {"n_calls", r.latency->n_calls},
                        {"n_cases", r.latency->n_cases}};
    return j;
}

/// Plain-text table: accuracy, precision, recall and F1 in percent, Hamming
/// loss as a fraction.
inline std::string to_text_table(const MetricsReport& r) {
    std::ostringstream os;
    os << std::fixed;
    os << std::left << std::setw(18) << "" << std::right << std::setw(10) << "Accuracy" << std::setw(11)
       << "Precision" << std::setw(8) << "Recall" << std::setw(10) << "F1 Score" << std::setw(14) << "Hamming Loss"
       << '\n';
    auto pct = [](double v) { return v * 100.0; };
    os << std::left << std::setw(18) << "macro" << std::right << std::setprecision(2) << std::setw(10)
       << pct(r.subset_accuracy) << std::setw(11) << pct(r.macro_precision) << std::setw(8) << pct(r.macro_recall)
       << std::setw(10) << pct(r.macro_f1) << std::setw(14) << r.hamming_loss << '\n';
    for (const auto& [label, s] : r.per_label)
        os << std::left << std::setw(18) << to_string(label) << std::right << std::setw(10) << "-" << std::setw(11)
           << pct(s.precision) << std::setw(8) << pct(s.recall) << std::setw(10) << pct(s.f1) << std::setw(14) << "-"
           << '\n';
    os << "cases: " << r.n_cases << '\n';
    if (r.latency)
        os << std::setprecision(1) << "latency per case: mean " << r.latency->mean_ms << " ms, p50 "
           << r.latency->p50_ms << " ms, p95 " << r.latency->p95_ms << " ms over " << r.latency->n_calls
           << " call(s)\n";
    return os.str();
}

} // namespace gazecoach
