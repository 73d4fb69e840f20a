#include "seaclear/weights.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "seaclear/error.hpp"

namespace seaclear {

namespace {

constexpr char kMagic[4] = {'D', 'S', 'O', 'W'};

template <typename T>
void put(std::string& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                   std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}

  template <typename T>
  T get(const char* what) {
    if (bytes_.size() - pos_ < sizeof(T)) throw IoError(origin_ + ": truncated while reading " + what);
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    if constexpr (sizeof(T) == 8) {
      return std::bit_cast<T>(bits);
    } else {
      return static_cast<T>(bits);
    }
  }

  std::string take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) throw IoError(origin_ + ": truncated while reading " + what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  const std::string& origin_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_weights(const TensorList& tensors) {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kWeightsVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const TensorRef& t : tensors) {
    if (t.name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw ParameterError("encode_weights: tensor name too long");
    }
    if (t.dims.size() > std::numeric_limits<std::uint8_t>::max()) {
      throw ParameterError("encode_weights: rank too large for " + t.name);
    }
    std::size_t n = 1;
    for (int d : t.dims) n *= static_cast<std::size_t>(d);
    if (n != t.values->size()) {
      throw DimensionError("encode_weights: " + t.name + " dims hold " + std::to_string(n) +
                           " values but the tensor has " + std::to_string(t.values->size()));
    }
    put<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out += t.name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dims.size()));
    for (int d : t.dims) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (double v : *t.values) put<double>(out, v);
  }
  return out;
}

std::vector<StoredTensor> decode_weights(const std::string& bytes, const std::string& origin) {
  Reader in(bytes, origin);
  if (in.take(4, "magic") != std::string(kMagic, 4)) throw IoError(origin + ": not a DSOW weights file");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kWeightsVersion) {
    throw IoError(origin + ": unsupported weights version " + std::to_string(version));
  }
  const auto count = in.get<std::uint32_t>("tensor count");
  std::vector<StoredTensor> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    StoredTensor t;
    t.name = in.take(in.get<std::uint16_t>("name length"), "name");
    const auto rank = in.get<std::uint8_t>("rank");
    std::uint64_t n = 1;
    for (int r = 0; r < rank; ++r) {
      t.dims.push_back(in.get<std::uint32_t>("dims"));
      n *= t.dims.back();
      if (n > bytes.size()) throw IoError(origin + ": tensor " + t.name + " larger than the file");
    }
    t.values.resize(n);
    for (double& v : t.values) v = in.get<double>("values");
    out.push_back(std::move(t));
  }
  if (!in.done()) throw IoError(origin + ": trailing bytes after the last tensor");
  return out;
}

void save_weights(const std::string& path, const TensorList& tensors) {
  const std::string bytes = encode_weights(tensors);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(path + ": cannot open for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError(path + ": write failed");
}

std::vector<StoredTensor> read_weights(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(path + ": cannot open for reading");
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_weights(ss.str(), path);
}

void load_weights(const std::string& path, const TensorList& tensors) {
  const std::vector<StoredTensor> stored = read_weights(path);
  if (stored.size() != tensors.size()) {
    throw DimensionError(path + ": " + std::to_string(stored.size()) + " tensors, model has " +
                         std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < stored.size(); ++i) {
    const TensorRef& t = tensors[i];
    const std::vector<std::uint32_t> dims(t.dims.begin(), t.dims.end());
    if (stored[i].name != t.name || stored[i].dims != dims) {
      throw DimensionError(path + ": tensor " + std::to_string(i) + " is '" + stored[i].name +
                           "', model expects '" + t.name + "' with matching dims");
    }
  }
  for (std::size_t i = 0; i < stored.size(); ++i) *tensors[i].values = stored[i].values;
}

}  // namespace seaclear
