#include "k2v/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "k2v/error.hpp"

namespace k2v::nn {

namespace {

constexpr std::string_view kMagic = "K2V1";

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  bool done() const { return pos_ == bytes_.size(); }

  template <typename T>
  T get_le() {
    need(sizeof(T));
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return value;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("K2V1: truncated payload");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_k2v1(const std::vector<NamedTensor>& tensors) {
  std::string out(kMagic);
  for (const auto& [name, t] : tensors) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t dim : t.shape()) put_le<std::uint64_t>(out, dim);
    for (double v : t.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

std::vector<NamedTensor> decode_k2v1(std::string_view bytes) {
  if (bytes.substr(0, kMagic.size()) != kMagic) throw FormatError("K2V1: bad magic");
  Reader in(bytes.substr(kMagic.size()));
  std::vector<NamedTensor> out;
  while (!in.done()) {
    const auto name_len = in.get_le<std::uint32_t>();
    std::string name(in.take(name_len));
    const auto rank = in.get_le<std::uint32_t>();
    if (rank > 8) throw FormatError("K2V1: implausible rank " + std::to_string(rank) + " for '" + name + "'");
    Shape shape(rank);
    for (auto& dim : shape) dim = in.get_le<std::uint64_t>();
    std::vector<double> data(shape_size(shape));
    for (double& v : data) v = std::bit_cast<double>(in.get_le<std::uint64_t>());
    out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void write_k2v1(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  write_file(path, encode_k2v1(tensors));
}

std::vector<NamedTensor> read_k2v1(const std::filesystem::path& path) { return decode_k2v1(read_file(path)); }

std::vector<NamedTensor> to_named_tensors(const ParameterSet& params) {
  std::vector<NamedTensor> out;
  for (const auto& [name, p] : params.entries()) out.emplace_back(name, p.value);
  return out;
}

void save_parameters(const std::filesystem::path& path, const ParameterSet& params) {
  write_k2v1(path, to_named_tensors(params));
}

ParameterSet load_parameters(const std::filesystem::path& path, std::uint64_t seed) {
  ParameterSet params(seed);
  for (auto& [name, t] : read_k2v1(path)) params.add(name, std::move(t));
  return params;
}

void write_with_header(const std::filesystem::path& path, const std::string& json_header,
                       const std::vector<NamedTensor>& tensors) {
  if (json_header.find('\n') != std::string::npos) throw FormatError("header must be a single line");
  write_file(path, json_header + "\n" + encode_k2v1(tensors));
}

std::pair<std::string, std::vector<NamedTensor>> read_with_header(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw FormatError(path.string() + ": missing header line");
  return {bytes.substr(0, nl), decode_k2v1(std::string_view(bytes).substr(nl + 1))};
}

const Tensor& find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name) {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw FormatError("missing tensor '" + name + "'");
}

}  // namespace k2v::nn
