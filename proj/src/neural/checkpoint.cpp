#include "fbsde/neural/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "fbsde/core/errors.hpp"

namespace fbsde {

namespace {

constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<std::uint8_t>((value >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw InvalidArgument("checkpoint is truncated");
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      value |= static_cast<T>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return value;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

OutputShape shape_from(std::uint32_t d, std::uint32_t rows, std::uint32_t cols) {
  if (rows == 1 && cols == 1) return OutputShape::scalar;
  if (rows == 1 && cols == d) return OutputShape::row;
  if (rows == d && cols == d) return OutputShape::matrix;
  throw InvalidArgument("checkpoint has an unsupported output shape");
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Network& net) {
  const Architecture& a = net.architecture();
  std::vector<std::uint8_t> out{'F', 'B', 'N', 'N'};
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(a.input_dim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(a.out_rows()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(a.out_cols()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(a.hidden_layers()));
  for (std::size_t w : a.widths) put<std::uint32_t>(out, static_cast<std::uint32_t>(w));
  put<std::uint32_t>(out, (a.layer_norm ? 1u : 0u) | (a.norm_before_activation ? 2u : 0u));
  const Vector flat = net.flatten();
  put<std::uint64_t>(out, static_cast<std::uint64_t>(flat.size()));
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &flat(i), sizeof bits);
    put<std::uint64_t>(out, bits);
  }
  return out;
}

Network decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "FBNN", 4) != 0)
    throw InvalidArgument("not a network checkpoint");
  std::vector<std::uint8_t> body(bytes.begin() + 4, bytes.end());
  Reader r(body);
  if (r.get<std::uint32_t>() != kVersion) throw InvalidArgument("unsupported checkpoint version");
  Architecture a;
  const auto d = r.get<std::uint32_t>();
  const auto rows = r.get<std::uint32_t>();
  const auto cols = r.get<std::uint32_t>();
  a.input_dim = d;
  a.shape = shape_from(d, rows, cols);
  const auto L = r.get<std::uint32_t>();
  for (std::uint32_t l = 0; l < L; ++l) a.widths.push_back(r.get<std::uint32_t>());
  const auto flags = r.get<std::uint32_t>();
  a.layer_norm = flags & 1u;
  a.norm_before_activation = flags & 2u;
  Network net(a);
  const auto count = r.get<std::uint64_t>();
  if (count != net.parameter_count())
    throw InvalidArgument("checkpoint parameter count does not match its header");
  Vector flat(static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    const auto bits = r.get<std::uint64_t>();
    std::memcpy(&flat(i), &bits, sizeof bits);
  }
  if (!r.done()) throw InvalidArgument("trailing bytes after checkpoint payload");
  net.assign(flat);
  return net;
}

void save_checkpoint(const Network& net, const std::string& path) {
  const auto bytes = encode_checkpoint(net);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidArgument("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Network load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidArgument("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace fbsde
