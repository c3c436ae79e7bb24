#pragma once

#include <functional>
#include <string_view>

namespace trapscore {

// Receives non-fatal warnings (skipped rows, degenerate groups, fallbacks).
// An empty sink discards them.
using WarningSink = std::function<void(std::string_view)>;

inline void warn(const WarningSink& sink, std::string_view message) {
    if (sink) sink(message);
}

}  // namespace trapscore
