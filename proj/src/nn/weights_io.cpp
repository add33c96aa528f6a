#include "graindeck/nn/weights_io.hpp"

#include <bit>
#include <cstring>
#include <map>

#include "graindeck/error.hpp"
#include "graindeck/fileutil.hpp"

namespace graindeck::nn {

static_assert(std::endian::native == std::endian::little,
              "weight files are little-endian; add byte swapping for this platform");
static_assert(sizeof(float) == 4);

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, bytes_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void floats(float* dst, std::size_t n) {
    need(n * 4);
    std::memcpy(dst, bytes_.data() + pos_, n * 4);
    pos_ += n * 4;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("weight file truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_weights(const std::vector<NamedTensor>& tensors) {
  std::string out = "GDWT";
  put_u32(out, kWeightsVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    for (int d : t.tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    out.append(reinterpret_cast<const char*>(t.tensor.data()), t.tensor.size() * 4);
  }
  return out;
}

std::vector<NamedTensor> decode_weights(const std::string& bytes) {
  Reader in(bytes);
  if (in.str(4) != "GDWT") throw DataError("not a weight file (bad magic)");
  const std::uint32_t version = in.u32();
  if (version != kWeightsVersion) {
    throw DataError("unsupported weight file version " + std::to_string(version));
  }
  const std::uint32_t count = in.u32();
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = in.str(in.u32());
    Tensor<float>::Shape shape;
    for (int& d : shape) {
      const std::uint32_t v = in.u32();
      if (v > (1u << 24)) throw DataError("implausible dimension in weight file");
      d = static_cast<int>(v);
    }
    t.tensor = Tensor<float>(shape);
    in.floats(t.tensor.data(), t.tensor.size());
    out.push_back(std::move(t));
  }
  if (!in.done()) throw DataError("trailing bytes in weight file");
  return out;
}

void save_weights(const std::filesystem::path& path, const std::vector<StateRef<float>>& state) {
  std::vector<NamedTensor> tensors;
  tensors.reserve(state.size());
  for (const auto& s : state) tensors.push_back({s.name, *s.tensor});
  write_file_atomic(path, encode_weights(tensors));
}

void load_weights(const std::filesystem::path& path, const std::vector<StateRef<float>>& state) {
  auto tensors = decode_weights(read_file(path));
  std::map<std::string, Tensor<float>*> by_name;
  for (auto& t : tensors) by_name[t.name] = &t.tensor;
  if (tensors.size() != state.size()) {
    throw DataError("weight file holds " + std::to_string(tensors.size()) + " tensors, model has " +
                    std::to_string(state.size()));
  }
  for (const auto& s : state) {
    auto it = by_name.find(s.name);
    if (it == by_name.end()) throw DataError("weight file lacks tensor '" + s.name + "'");
    if (it->second->shape() != s.tensor->shape()) {
      throw DataError("tensor '" + s.name + "' has shape " + shape_string(it->second->shape()) +
                      ", model expects " + shape_string(s.tensor->shape()));
    }
    *s.tensor = std::move(*it->second);
  }
}

}  // namespace graindeck::nn
