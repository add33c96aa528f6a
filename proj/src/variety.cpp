#include "graindeck/variety.hpp"

#include <string>

#include "graindeck/error.hpp"

namespace graindeck {

namespace {

constexpr std::array<std::string_view, kNumVarieties> kNames = {
    "AliKazemi", "AnbarBoo", "Hashemi", "Khazar", "SadreeDomSiahe", "SadreeDomZard", "Shirodi",
};

}  // namespace

std::string_view name_of(RiceVariety v) noexcept { return kNames[static_cast<std::size_t>(v)]; }

RiceVariety variety_from_index(int index) {
  if (index < 0 || index >= static_cast<int>(kNumVarieties)) {
    throw ConfigError("variety index out of range: " + std::to_string(index));
  }
  return static_cast<RiceVariety>(index);
}

std::optional<RiceVariety> parse_variety(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<RiceVariety>(i);
  }
  return std::nullopt;
}

RiceVariety variety_from_name(std::string_view name) {
  if (auto v = parse_variety(name)) return *v;
  throw DataError("unknown rice variety '" + std::string(name) + "'");
}

}  // namespace graindeck
