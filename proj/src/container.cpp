#include "athv/container.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>

namespace athv {
namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename U>
void put(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(std::uint8_t((std::uint64_t(v) >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= std::uint64_t(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return U(v);
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n)
      throw Error(ErrorCode::Corrupt, std::string("truncated container while reading ") + what);
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::size_t element_size(DType d) {
  switch (d) {
    case DType::U8: return 1;
    case DType::F32: return 4;
    case DType::F64: return 8;
  }
  throw Error(ErrorCode::Corrupt, "unknown dtype code");
}

/// Host-order element bytes to little-endian, in place (no-op on LE hosts).
void to_little_endian(std::vector<std::uint8_t>& bytes, std::size_t width) {
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i + width <= bytes.size(); i += width) std::reverse(bytes.begin() + i, bytes.begin() + i + width);
  } else {
    (void)bytes;
    (void)width;
  }
}

}  // namespace

template <typename T>
ContainerEntry ContainerEntry::from_tensor(std::string name, const Tensor<T>& t) {
  ContainerEntry e;
  e.name = std::move(name);
  e.dtype = dtype_of<T>();
  for (std::size_t d : t.shape()) {
    require(d <= 0xFFFFFFFFu, ErrorCode::InvalidArgument, "tensor extent exceeds u32");
    e.dims.push_back(std::uint32_t(d));
  }
  e.payload.resize(t.size() * sizeof(T));
  std::memcpy(e.payload.data(), t.ptr(), e.payload.size());
  to_little_endian(e.payload, sizeof(T));
  return e;
}

ContainerEntry ContainerEntry::from_text(std::string name, const std::string& text) {
  ContainerEntry e;
  e.name = std::move(name);
  e.dtype = DType::U8;
  e.dims = {std::uint32_t(text.size())};
  e.payload.assign(text.begin(), text.end());
  return e;
}

template <typename T>
Tensor<T> ContainerEntry::to_tensor() const {
  require(dtype == DType::F32 || dtype == DType::F64, ErrorCode::InvalidArgument,
          "entry '" + name + "' does not hold floating-point data");
  Shape shape(dims.begin(), dims.end());
  const std::size_t n = numel(shape);
  std::vector<std::uint8_t> bytes = payload;
  to_little_endian(bytes, element_size(dtype));  // LE -> host is the same swap
  Buffer<T> data(n);
  if (dtype == DType::F32) {
    std::vector<float> tmp(n);
    std::memcpy(tmp.data(), bytes.data(), n * 4);
    std::copy(tmp.begin(), tmp.end(), data.begin());
  } else {
    std::vector<double> tmp(n);
    std::memcpy(tmp.data(), bytes.data(), n * 8);
    std::transform(tmp.begin(), tmp.end(), data.begin(), [](double v) { return T(v); });
  }
  return Tensor<T>(std::move(shape), std::move(data));
}

std::string ContainerEntry::text() const {
  require(dtype == DType::U8, ErrorCode::InvalidArgument, "entry '" + name + "' is not text");
  return std::string(payload.begin(), payload.end());
}

std::vector<std::uint8_t> container_write(const std::vector<ContainerEntry>& entries) {
  std::set<std::string> names;
  std::vector<std::uint8_t> out = {'A', 'T', 'H', 'V'};
  put<std::uint16_t>(out, kContainerVersion);
  put<std::uint32_t>(out, std::uint32_t(entries.size()));
  for (const auto& e : entries) {
    require(names.insert(e.name).second, ErrorCode::InvalidArgument, "duplicate entry name '" + e.name + "'");
    require(e.name.size() <= 0xFFFF, ErrorCode::InvalidArgument, "entry name too long");
    require(e.dims.size() <= 0xFF, ErrorCode::InvalidArgument, "entry rank too large");
    std::size_t n = 1;
    for (auto d : e.dims) n *= d;
    require(n * element_size(e.dtype) == e.payload.size(), ErrorCode::InvalidArgument,
            "entry '" + e.name + "' payload does not match its dims");
    put<std::uint16_t>(out, std::uint16_t(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    put<std::uint8_t>(out, std::uint8_t(e.dtype));
    put<std::uint8_t>(out, std::uint8_t(e.dims.size()));
    for (auto d : e.dims) put<std::uint32_t>(out, d);
    out.insert(out.end(), e.payload.begin(), e.payload.end());
  }
  return out;
}

std::vector<ContainerEntry> container_read(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), "ATHV", 4) != 0) throw Error(ErrorCode::Corrupt, "bad magic bytes");
  const auto version = r.get<std::uint16_t>("version");
  if (version != kContainerVersion)
    throw Error(ErrorCode::Corrupt, "unsupported container version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>("entry count");
  std::vector<ContainerEntry> entries;
  std::set<std::string> names;
  for (std::uint32_t i = 0; i < count; ++i) {
    ContainerEntry e;
    const auto len = r.get<std::uint16_t>("name length");
    const auto name = r.take(len, "name");
    e.name.assign(name.begin(), name.end());
    if (!names.insert(e.name).second) throw Error(ErrorCode::Corrupt, "duplicate entry name '" + e.name + "'");
    const auto code = r.get<std::uint8_t>("dtype");
    if (code > 2) throw Error(ErrorCode::Corrupt, "unknown dtype code " + std::to_string(code));
    e.dtype = DType(code);
    const auto rank = r.get<std::uint8_t>("rank");
    std::uint64_t n = 1;
    for (std::uint8_t k = 0; k < rank; ++k) {
      e.dims.push_back(r.get<std::uint32_t>("dims"));
      n *= e.dims.back();
    }
    const auto payload = r.take(std::size_t(n * element_size(e.dtype)), "payload");
    e.payload.assign(payload.begin(), payload.end());
    entries.push_back(std::move(e));
  }
  if (!r.done()) throw Error(ErrorCode::Corrupt, "trailing bytes after last entry");
  return entries;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

void write_container_file(const std::filesystem::path& path, const std::vector<ContainerEntry>& entries) {
  write_file_bytes(path, container_write(entries));
}

std::vector<ContainerEntry> read_container_file(const std::filesystem::path& path) {
  return container_read(read_file_bytes(path));
}

const ContainerEntry& find_entry(const std::vector<ContainerEntry>& entries, const std::string& name) {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw Error(ErrorCode::Corrupt, "container has no entry '" + name + "'");
}

template ContainerEntry ContainerEntry::from_tensor(std::string, const Tensor<float>&);
template ContainerEntry ContainerEntry::from_tensor(std::string, const Tensor<double>&);
template Tensor<float> ContainerEntry::to_tensor() const;
template Tensor<double> ContainerEntry::to_tensor() const;

}  // namespace athv
