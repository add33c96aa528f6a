#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace graindeck {

/// The seven rice varieties. The enumerator order is the canonical class
/// order used by every probability vector and confusion matrix.
enum class RiceVariety : int {
  AliKazemi = 0,
  AnbarBoo = 1,
  Hashemi = 2,
  Khazar = 3,
  SadreeDomSiahe = 4,
  SadreeDomZard = 5,
  Shirodi = 6,
};

inline constexpr std::size_t kNumVarieties = 7;

inline constexpr std::array<RiceVariety, kNumVarieties> kAllVarieties = {
    RiceVariety::AliKazemi,      RiceVariety::AnbarBoo,      RiceVariety::Hashemi,
    RiceVariety::Khazar,         RiceVariety::SadreeDomSiahe, RiceVariety::SadreeDomZard,
    RiceVariety::Shirodi,
};

constexpr int index_of(RiceVariety v) noexcept { return static_cast<int>(v); }

std::string_view name_of(RiceVariety v) noexcept;

/// Throws ConfigError when `index` is outside 0..6.
RiceVariety variety_from_index(int index);

std::optional<RiceVariety> parse_variety(std::string_view name) noexcept;

/// Like parse_variety, but throws DataError naming the bad value.
RiceVariety variety_from_name(std::string_view name);

}  // namespace graindeck
