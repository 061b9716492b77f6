#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "athv/tensor.hpp"

namespace athv::cli {

/// Runs one command line (arguments after the program name). Returns the
/// exit status. Failures print a single `error: <code>: <message>` line on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// $ATHV_OUT when set, else the working directory.
std::filesystem::path output_root();
/// Relative paths are taken relative to output_root().
std::filesystem::path resolve(const std::filesystem::path& p);

struct Gray16 {
  std::size_t height = 0, width = 0;
  std::vector<std::uint16_t> pixels;  // row-major

  friend bool operator==(const Gray16&, const Gray16&) = default;
};

/// Binary portable graymap, maxval 65535, big-endian samples.
std::vector<std::uint8_t> encode_pgm(const Gray16& image);
Gray16 decode_pgm(std::span<const std::uint8_t> bytes);

/// v / scale clipped to [0, 1] and quantized to 16 bits. Needs a 2-D image.
Gray16 to_gray(const Tensor<double>& image, double scale);

/// clip(3 |x - xhat| / max |x - xhat|, 0, 1); all zeros when the images agree.
Tensor<double> error_map(const Tensor<double>& x, const Tensor<double>& xhat);

struct CropBox {
  std::size_t top = 0, left = 0, height = 0, width = 0;
};

/// "top,left,height,width".
CropBox parse_crop(const std::string& text);
/// The box cut out of a 2-D image and enlarged by nearest-neighbour repetition.
Tensor<double> crop_zoom(const Tensor<double>& image, const CropBox& box, std::size_t zoom);

}  // namespace athv::cli
