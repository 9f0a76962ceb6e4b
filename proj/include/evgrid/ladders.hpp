#pragma once

#include <array>

// Standard equipment size ladders. Upgrade sizing and the synthetic feeder
// generator both draw from these so planned replacements land on real sizes.
namespace evgrid::ladders {

inline constexpr std::array<double, 8> xfmr_1ph_kva{10, 15, 25, 37.5, 50, 75, 100, 167};
inline constexpr std::array<double, 9> xfmr_3ph_kva{75, 150, 225, 300, 500, 750, 1000, 1500, 2500};
inline constexpr std::array<double, 7> capacitor_kvar{50, 100, 150, 300, 600, 900, 1200};
inline constexpr std::array<double, 8> line_ampacity_a{90, 140, 180, 230, 340, 530, 730, 900};

} // namespace evgrid::ladders
