#include "graindeck/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "graindeck/error.hpp"
#include "graindeck/fileutil.hpp"
#include "graindeck/rng.hpp"
#include "json.hpp"

namespace graindeck::synth {

void GrainStyle::validate() const {
  if (!(minor_axis > 0.0 && major_axis > minor_axis)) {
    throw ConfigError("style " + std::string(name_of(variety)) +
                      ": need major_axis > minor_axis > 0");
  }
  if (!(speckle_density >= 0.0 && speckle_density <= 1.0)) {
    throw ConfigError("style " + std::string(name_of(variety)) +
                      ": speckle_density must lie in [0, 1]");
  }
  if (!(std::abs(curvature) <= 1.0)) {
    throw ConfigError("style " + std::string(name_of(variety)) + ": |curvature| must be <= 1");
  }
}

void StyleSet::validate() const {
  for (std::size_t i = 0; i < kNumVarieties; ++i) {
    if (styles[i].variety != kAllVarieties[i]) {
      throw ConfigError("styles must be listed in canonical variety order");
    }
    styles[i].validate();
  }
  if (background_noise < 0 || background_noise > 64) {
    throw ConfigError("background_noise must lie in [0, 64]");
  }
}

const StyleSet& default_styles() {
  static const StyleSet kDefaults = [] {
    StyleSet s;
    s.styles = {{
        {RiceVariety::AliKazemi, 26.0, 9.0, {236, 226, 196}, 0.04, 0.06},
        {RiceVariety::AnbarBoo, 19.0, 11.0, {222, 198, 128}, 0.08, 0.00},
        {RiceVariety::Hashemi, 30.0, 7.5, {246, 244, 236}, 0.02, 0.10},
        {RiceVariety::Khazar, 23.0, 10.0, {188, 146, 104}, 0.12, 0.03},
        {RiceVariety::SadreeDomSiahe, 28.0, 8.0, {206, 196, 176}, 0.30, 0.04},
        {RiceVariety::SadreeDomZard, 27.0, 8.5, {232, 186, 72}, 0.06, 0.08},
        {RiceVariety::Shirodi, 22.0, 9.5, {214, 160, 164}, 0.05, 0.14},
    }};
    s.background = {58, 62, 72};
    s.background_noise = 10;
    s.separation = {20.0, 0.3};
    return s;
  }();
  return kDefaults;
}

StyleSet styles_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("style manifest: ") + e.what());
  }
  StyleSet s;
  try {
    if (j.at("version").get<int>() != 1) throw ConfigError("unsupported style manifest version");
    const auto bg = j.at("background").get<std::array<int, 3>>();
    for (int c = 0; c < 3; ++c) s.background[c] = static_cast<std::uint8_t>(std::clamp(bg[c], 0, 255));
    s.background_noise = j.at("background_noise").get<int>();
    s.separation.mean_color = j.at("separation_floor").at("mean_color").get<double>();
    s.separation.axis_ratio = j.at("separation_floor").at("axis_ratio").get<double>();
    const auto& styles = j.at("styles");
    if (!styles.is_array() || styles.size() != kNumVarieties) {
      throw ConfigError("style manifest must list exactly 7 styles");
    }
    for (std::size_t i = 0; i < kNumVarieties; ++i) {
      const auto& e = styles[i];
      GrainStyle& g = s.styles[i];
      const auto v = parse_variety(e.at("variety").get<std::string>());
      if (!v) throw ConfigError("style manifest: unknown variety");
      g.variety = *v;
      g.major_axis = e.at("major_axis").get<double>();
      g.minor_axis = e.at("minor_axis").get<double>();
      const auto col = e.at("base_color").get<std::array<int, 3>>();
      for (int c = 0; c < 3; ++c) g.base_color[c] = static_cast<std::uint8_t>(std::clamp(col[c], 0, 255));
      g.speckle_density = e.at("speckle_density").get<double>();
      g.curvature = e.at("curvature").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("style manifest: ") + e.what());
  }
  s.validate();
  return s;
}

std::string styles_to_json(const StyleSet& set) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["background"] = {set.background[0], set.background[1], set.background[2]};
  j["background_noise"] = set.background_noise;
  j["separation_floor"] = {{"mean_color", set.separation.mean_color},
                           {"axis_ratio", set.separation.axis_ratio}};
  j["styles"] = nlohmann::ordered_json::array();
  for (const auto& g : set.styles) {
    nlohmann::ordered_json e;
    e["variety"] = std::string(name_of(g.variety));
    e["major_axis"] = g.major_axis;
    e["minor_axis"] = g.minor_axis;
    e["base_color"] = {g.base_color[0], g.base_color[1], g.base_color[2]};
    e["speckle_density"] = g.speckle_density;
    e["curvature"] = g.curvature;
    j["styles"].push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

StyleSet load_styles(const std::filesystem::path& path) { return styles_from_json(read_file(path)); }

namespace {

// Geometry of one grain instance: rotated, bent ellipse.
struct GrainShape {
  double half_major;
  double half_minor;
  double cos_a;
  double sin_a;
  double curvature;

  double extent() const { return half_major * (1.0 + std::abs(curvature)) + 1.0; }

  // Normalised radius² at offset (dy, dx) from the centre; <= 1 is inside.
  double radius2(double dy, double dx) const {
    const double u = dx * cos_a + dy * sin_a;
    double v = -dx * sin_a + dy * cos_a;
    v -= curvature * u * u / half_major;
    const double nu = u / half_major;
    const double nv = v / half_minor;
    return nu * nu + nv * nv;
  }
};

GrainShape draw_shape(const GrainStyle& style, Rng& rng) {
  const double angle = rng.uniform(0.0, std::numbers::pi);
  const double jmaj = rng.uniform(0.95, 1.05);
  const double jmin = rng.uniform(0.95, 1.05);
  return {style.major_axis * jmaj / 2.0, style.minor_axis * jmin / 2.0, std::cos(angle),
          std::sin(angle), style.curvature};
}

struct Offset {
  int dr;
  int dc;
  double r2;
};

// Pixel offsets (relative to the integer centre, with a sub-pixel shift)
// covered by the shape.
std::vector<Offset> footprint(const GrainShape& shape, double frac_r, double frac_c) {
  std::vector<Offset> out;
  const int e = static_cast<int>(std::ceil(shape.extent()));
  for (int dr = -e; dr <= e; ++dr) {
    for (int dc = -e; dc <= e; ++dc) {
      const double r2 = shape.radius2(dr - frac_r, dc - frac_c);
      if (r2 <= 1.0) out.push_back({dr, dc, r2});
    }
  }
  return out;
}

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

void fill_background(Image& image, const StyleSet& set, Rng& rng) {
  const int amp = set.background_noise;
  for (int r = 0; r < image.height(); ++r) {
    for (int c = 0; c < image.width(); ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        image.at(r, c, ch) = to_u8(set.background[ch] + rng.uniform(-amp, amp));
      }
    }
  }
}

void paint(Image& image, Mask& mask, const GrainStyle& style, const std::vector<Offset>& fp,
           int cr, int cc, Rng& rng) {
  for (const Offset& o : fp) {
    const int r = cr + o.dr;
    const int c = cc + o.dc;
    if (r < 0 || c < 0 || r >= image.height() || c >= image.width()) continue;
    const double shade = 1.0 - 0.18 * o.r2;
    const double jitter = rng.uniform(-6.0, 6.0);
    const bool speck = rng.bernoulli(style.speckle_density);
    const double speck_gain = speck ? 0.45 : 1.0;
    for (int ch = 0; ch < 3; ++ch) {
      image.at(r, c, ch) = to_u8(style.base_color[ch] * shade * speck_gain + jitter);
    }
    mask.at(r, c) = 1;
  }
}

}  // namespace

RenderedGrain render_grain(const GrainStyle& style, std::uint64_t seed, const StyleSet& set) {
  style.validate();
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(index_of(style.variety)) + 101));
  const GrainShape shape = draw_shape(style, rng);
  const double frac_r = rng.uniform(-0.5, 0.5);
  const double frac_c = rng.uniform(-0.5, 0.5);
  const auto fp = footprint(shape, frac_r, frac_c);

  int r0 = 0, r1 = 0, c0 = 0, c1 = 0;
  for (const Offset& o : fp) {
    r0 = std::min(r0, o.dr);
    r1 = std::max(r1, o.dr);
    c0 = std::min(c0, o.dc);
    c1 = std::max(c1, o.dc);
  }
  const int margin = 3 + static_cast<int>(rng.index(4));
  const int side = std::max(corpus::kMinImageSide,
                            std::max(r1 - r0 + 1, c1 - c0 + 1) + 2 * margin);
  // Centre the footprint's bounding box, then jitter by up to 2 px where the
  // canvas leaves room.
  const int base_r = (side - (r1 - r0 + 1)) / 2 - r0;
  const int base_c = (side - (c1 - c0 + 1)) / 2 - c0;
  const int jr = static_cast<int>(rng.index(5)) - 2;
  const int jc = static_cast<int>(rng.index(5)) - 2;
  const int slack_r = (side - (r1 - r0 + 1)) / 2;
  const int slack_c = (side - (c1 - c0 + 1)) / 2;
  const int cr = base_r + std::clamp(jr, -slack_r, slack_r);
  const int cc = base_c + std::clamp(jc, -slack_c, slack_c);

  RenderedGrain out;
  out.image.pixels = Image(side, side);
  out.coverage = Mask(side, side);
  fill_background(out.image.pixels, set, rng);
  paint(out.image.pixels, out.coverage, style, fp, cr, cc, rng);
  out.image.label = style.variety;
  out.image.source_id = std::string(name_of(style.variety)) + "-" + std::to_string(seed);
  return out;
}

LabeledImage gen_grain(const GrainStyle& style, std::uint64_t seed, const StyleSet& set) {
  return render_grain(style, seed, set).image;
}

void SceneSpec::validate() const {
  if (height < 128 || width < 128) throw ConfigError("scene canvas must be at least 128x128");
  for (const auto& [v, n] : counts) {
    if (n < 0) throw ConfigError("scene counts must be non-negative");
  }
  if (total() < 1) throw ConfigError("scene must contain at least one grain");
  if (min_gap < 1) throw ConfigError("min_gap must be at least 1");
  if (max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
}

int SceneSpec::total() const {
  int t = 0;
  for (const auto& [v, n] : counts) t += n;
  return t;
}

BulkSample gen_bulk_scene(const SceneSpec& spec, const StyleSet& set) {
  spec.validate();
  set.validate();

  double nominal_area = 0.0;
  std::vector<RiceVariety> order;
  for (const auto& [v, n] : spec.counts) {
    const GrainStyle& st = set.of(v);
    nominal_area += n * std::numbers::pi * st.major_axis * st.minor_axis / 4.0;
    order.insert(order.end(), static_cast<std::size_t>(n), v);
  }
  const double canvas_area = static_cast<double>(spec.height) * spec.width;
  if (!spec.allow_touching && nominal_area > 0.5 * canvas_area) {
    throw CapacityError("grains cover " + std::to_string(static_cast<int>(nominal_area)) +
                        " px, more than half of the " + shape_string(spec.height, spec.width) +
                        " canvas");
  }

  Rng rng(mix_seed(spec.seed, 0x5CE7E));
  rng.shuffle(std::span<RiceVariety>(order));

  BulkSample out;
  out.pixels = Image(spec.height, spec.width);
  out.mask = Mask(spec.height, spec.width);
  out.composition = spec.counts;
  out.source_id = "scene-" + std::to_string(spec.seed);
  fill_background(out.pixels, set, rng);

  // Cells within min_gap of an already placed grain.
  Mask blocked(spec.height, spec.width);
  const int g = spec.min_gap;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const GrainStyle& style = set.of(order[k]);
    const GrainShape shape = draw_shape(style, rng);
    const auto fp = footprint(shape, 0.0, 0.0);
    const int e = static_cast<int>(std::ceil(shape.extent()));
    const int lo_r = e + 1, hi_r = spec.height - e - 2;
    const int lo_c = e + 1, hi_c = spec.width - e - 2;
    if (hi_r < lo_r || hi_c < lo_c) throw CapacityError("grain larger than the canvas");

    bool placed = false;
    for (int attempt = 0; attempt < spec.max_attempts && !placed; ++attempt) {
      const int cr = lo_r + static_cast<int>(rng.index(static_cast<std::size_t>(hi_r - lo_r + 1)));
      const int cc = lo_c + static_cast<int>(rng.index(static_cast<std::size_t>(hi_c - lo_c + 1)));
      if (!spec.allow_touching) {
        const bool clash = std::any_of(fp.begin(), fp.end(), [&](const Offset& o) {
          return blocked.at(cr + o.dr, cc + o.dc) != 0;
        });
        if (clash) continue;
      }
      paint(out.pixels, out.mask, style, fp, cr, cc, rng);
      if (!spec.allow_touching) {
        for (const Offset& o : fp) {
          for (int dr = -g; dr <= g; ++dr) {
            for (int dc = -g; dc <= g; ++dc) {
              const int r = cr + o.dr + dr;
              const int c = cc + o.dc + dc;
              if (r >= 0 && c >= 0 && r < spec.height && c < spec.width) blocked.at(r, c) = 1;
            }
          }
        }
      }
      placed = true;
    }
    if (!placed) {
      throw CapacityError("could not place grain " + std::to_string(k + 1) + " of " +
                          std::to_string(order.size()) + " after " +
                          std::to_string(spec.max_attempts) + " attempts");
    }
  }
  return out;
}

void SceneMix::validate() const {
  if (min_grains < 1 || max_grains < min_grains) throw ConfigError("invalid grains-per-scene range");
  if (min_varieties < 1 || max_varieties < min_varieties || max_varieties > static_cast<int>(kNumVarieties)) {
    throw ConfigError("invalid varieties-per-scene range");
  }
  if (min_grains < min_varieties) {
    throw ConfigError("min_grains must be at least min_varieties");
  }
}

CompositionCounts random_composition(const SceneMix& mix, std::uint64_t seed) {
  mix.validate();
  Rng rng(mix_seed(seed, 0xC0));
  const int kinds = mix.min_varieties +
                    static_cast<int>(rng.index(static_cast<std::size_t>(mix.max_varieties - mix.min_varieties + 1)));
  const int lo = std::max(mix.min_grains, kinds);
  const int hi = std::max(mix.max_grains, lo);
  const int total = lo + static_cast<int>(rng.index(static_cast<std::size_t>(hi - lo + 1)));
  std::array<int, kNumVarieties> pool{};
  for (int i = 0; i < static_cast<int>(kNumVarieties); ++i) pool[static_cast<std::size_t>(i)] = i;
  rng.shuffle(std::span<int>(pool));
  std::vector<int> chosen(pool.begin(), pool.begin() + kinds);
  std::sort(chosen.begin(), chosen.end());
  CompositionCounts counts;
  for (int v : chosen) counts[variety_from_index(v)] = 1;
  for (int k = kinds; k < total; ++k) {
    ++counts[variety_from_index(chosen[rng.index(chosen.size())])];
  }
  return counts;
}

BulkSample gen_random_scene(const SceneMix& mix, int height, int width, bool allow_touching,
                            std::uint64_t seed, const StyleSet& set) {
  constexpr int kRetries = 8;
  SceneSpec spec;
  spec.height = height;
  spec.width = width;
  spec.allow_touching = allow_touching;
  spec.counts = random_composition(mix, seed);
  for (int attempt = 0;; ++attempt) {
    spec.seed = mix_seed(seed, 0x9A + static_cast<std::uint64_t>(attempt));
    try {
      return gen_bulk_scene(spec, set);
    } catch (const CapacityError&) {
      if (attempt + 1 >= kRetries) throw;
    }
  }
}

}  // namespace graindeck::synth
