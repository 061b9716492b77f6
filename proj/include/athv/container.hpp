#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "athv/tensor.hpp"

namespace athv {

// Byte layout (all integers little-endian):
//   "ATHV" | u16 version | u32 entry count
//   per entry: u16 name length | name bytes | u8 dtype | u8 rank | u32 dims[rank] | payload
// dtype codes: 0 = u8, 1 = f32, 2 = f64. Payload is product(dims) elements.
inline constexpr std::uint16_t kContainerVersion = 1;
inline constexpr std::size_t kContainerHeaderBytes = 10;

struct ContainerEntry {
  std::string name;
  DType dtype = DType::F32;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;  // little-endian element bytes

  template <typename T>
  static ContainerEntry from_tensor(std::string name, const Tensor<T>& t);
  static ContainerEntry from_text(std::string name, const std::string& text);

  /// Decodes a float entry, converting between f32 and f64 when asked.
  template <typename T>
  Tensor<T> to_tensor() const;
  std::string text() const;

  friend bool operator==(const ContainerEntry&, const ContainerEntry&) = default;
};

std::vector<std::uint8_t> container_write(const std::vector<ContainerEntry>& entries);
/// Rejects bad magic or version, truncated payloads and duplicate names.
std::vector<ContainerEntry> container_read(std::span<const std::uint8_t> bytes);

void write_container_file(const std::filesystem::path& path, const std::vector<ContainerEntry>& entries);
std::vector<ContainerEntry> read_container_file(const std::filesystem::path& path);

const ContainerEntry& find_entry(const std::vector<ContainerEntry>& entries, const std::string& name);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace athv
