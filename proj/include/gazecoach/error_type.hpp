#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace gazecoach {

/// Perceptual error causes. `none` means "no verdict".
enum class ErrorType { missed_fixation, brief_fixation, knowledge_gap, none };

/// The classification label space, in matrix column order.
inline constexpr std::array<ErrorType, 3> kErrorLabels = {ErrorType::missed_fixation, ErrorType::brief_fixation,
                                                          ErrorType::knowledge_gap};

inline std::string to_string(ErrorType t) {
    switch (t) {
    case ErrorType::missed_fixation: return "missed_fixation";
    case ErrorType::brief_fixation: return "brief_fixation";
    case ErrorType::knowledge_gap: return "knowledge_gap";
    case ErrorType::none: break;
    }
    return "none";
}

inline std::optional<ErrorType> parse_error_type(std::string_view s) {
    if (s == "missed_fixation") return ErrorType::missed_fixation;
    if (s == "brief_fixation") return ErrorType::brief_fixation;
    if (s == "knowledge_gap") return ErrorType::knowledge_gap;
    if (s == "none") return ErrorType::none;
    return std::nullopt;
}

} // namespace gazecoach
