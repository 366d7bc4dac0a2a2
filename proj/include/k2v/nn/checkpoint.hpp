#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "k2v/nn/parameters.hpp"
#include "k2v/nn/tensor.hpp"

namespace k2v::nn {

using NamedTensor = std::pair<std::string, Tensor>;

/// K2V1 container layout (all integers little-endian):
///
///   "K2V1"
///   repeated until end of data:
///     u32 name length, name bytes (UTF-8)
///     u32 rank, rank x u64 dimensions
///     product(dims) x f64 payload
std::string encode_k2v1(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> decode_k2v1(std::string_view bytes);

void write_k2v1(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_k2v1(const std::filesystem::path& path);

std::vector<NamedTensor> to_named_tensors(const ParameterSet& params);
void save_parameters(const std::filesystem::path& path, const ParameterSet& params);
ParameterSet load_parameters(const std::filesystem::path& path, std::uint64_t seed = 0);

/// Files that carry a one-line JSON header followed by a K2V1 payload.
void write_with_header(const std::filesystem::path& path, const std::string& json_header,
                       const std::vector<NamedTensor>& tensors);
std::pair<std::string, std::vector<NamedTensor>> read_with_header(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

/// Finds a tensor by name or throws FormatError.
const Tensor& find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name);

}  // namespace k2v::nn
