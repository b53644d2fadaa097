#pragma once

#include <array>
#include <string>
#include <vector>

namespace ssnf {

// Scene classes. Vehicles are the transient category.
enum SceneClass : uint8_t {
  kGround = 0,
  kWater = 1,
  kVegetation = 2,
  kBuildings = 3,
  kVehicles = 4,
};
inline constexpr int kNumClasses = 5;

inline const std::vector<std::string>& class_names() {
  static const std::vector<std::string> names{"Ground", "Water", "Vegetation", "Buildings",
                                              "Vehicles"};
  return names;
}

inline const std::vector<std::array<uint8_t, 3>>& class_palette() {
  static const std::vector<std::array<uint8_t, 3>> palette{
      {{181, 158, 120}},  // Ground
      {{58, 102, 179}},   // Water
      {{58, 148, 74}},    // Vegetation
      {{140, 140, 148}},  // Buildings
      {{217, 48, 48}},    // Vehicles
  };
  return palette;
}

inline std::vector<std::array<double, 3>> class_palette_f() {
  std::vector<std::array<double, 3>> out;
  for (const auto& c : class_palette())
    out.push_back({c[0] / 255.0, c[1] / 255.0, c[2] / 255.0});
  return out;
}

}  // namespace ssnf
