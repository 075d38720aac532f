#pragma once

#include <array>
#include <string_view>

namespace iamm {

enum class Role : int { kSpeaker = 0, kListener = 1 };

inline constexpr int kNumEmotions = 32;
inline constexpr int kNumRelations = 5;

// Commonsense relation types in storage order.
inline constexpr std::array<std::string_view, kNumRelations> kRelations = {"xEffect", "xReact", "xIntent", "xNeed",
                                                                           "xWant"};

}  // namespace iamm
