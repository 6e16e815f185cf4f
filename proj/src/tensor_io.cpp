#include "gpmvs/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "gpmvs/error.hpp"

namespace gpmvs {
namespace {

constexpr std::array<char, 4> kMagic{'G', 'P', 'M', 'V'};

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  if (!in) throw Error(ErrorCode::Format, "tensor header is truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void write_tensor(std::ostream& out, const Tensor& t) {
  if (t.data.size() != t.element_count())
    throw Error(ErrorCode::DimensionMismatch, "tensor data size does not match its dims");
  out.write(kMagic.data(), 4);
  put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
  for (auto d : t.dims) put_u32(out, d);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  } else {
    for (float f : t.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing tensor");
}

Tensor read_tensor(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (!in || magic != kMagic) throw Error(ErrorCode::Format, "missing GPMV magic bytes");
  Tensor t;
  const std::uint32_t rank = get_u32(in);
  if (rank > 16) throw Error(ErrorCode::Format, "implausible tensor rank");
  t.dims.resize(rank);
  std::size_t count = 1;
  for (auto& d : t.dims) {
    d = get_u32(in);
    if (d != 0 && count > std::numeric_limits<std::uint32_t>::max() / d)
      throw Error(ErrorCode::Format, "tensor too large");
    count *= d;
  }
  t.data.resize(count);
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (!in) throw Error(ErrorCode::Format, "tensor payload is truncated");
  } else {
    for (auto& f : t.data) f = std::bit_cast<float>(get_u32(in));
  }
  return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  write_tensor(out, t);
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  Tensor t = read_tensor(in);
  if (in.peek() != std::char_traits<char>::eof())
    throw Error(ErrorCode::Format, path.string() + " has trailing bytes");
  return t;
}

}  // namespace gpmvs
