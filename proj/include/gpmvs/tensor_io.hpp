#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace gpmvs {

/// Dense row-major float32 tensor as stored on disk.
struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t rank() const { return dims.size(); }
  std::size_t element_count() const;
};

/// "GPMV" magic, u32 rank, rank x u32 dims, then row-major float32 values, all
/// little-endian.
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

}  // namespace gpmvs
