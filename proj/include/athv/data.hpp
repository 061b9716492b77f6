#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "athv/kspace.hpp"

namespace athv {

struct PhantomSpec {
  std::size_t size = 64;  // 32, 64, 128 or 256
  std::size_t n_ellipses = 10;
  double intensity_min = 0.1;
  double intensity_max = 0.6;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Sum of random filled ellipses (center, semi-axes, rotation, additive
/// intensity), clipped to [0,1]. Deterministic in the spec.
template <typename T>
Tensor<T> make_phantom(const PhantomSpec& spec);

/// Coil i: Gaussian magnitude centered on the image border at angle 2 pi i / n,
/// times a gentle linear phase ramp; then normalized to unit root-sum-of-squares.
template <typename T>
SensitivityMaps<T> make_coil_maps(std::size_t n_coils, std::size_t h, std::size_t w);

/// fft2c(S_i x) per coil plus i.i.d. N(0, sigma^2) noise on both planes.
template <typename T>
KSpace<T> simulate_acquisition(const Tensor<T>& x, const SensitivityMaps<T>& maps, double noise_sigma,
                               std::uint64_t seed);

enum class Split { Train, Test };
std::string to_string(Split s);
Split parse_split(const std::string& s);

struct ManifestEntry {
  std::string sample_id;
  std::string path;  // relative to the manifest's directory
  Split split = Split::Train;
  std::size_t coils = 1;
  std::uint64_t mask_seed = 0;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> subset(Split s) const;
  std::size_t count(Split s) const;

  /// Header line `sample_id,path,split,coils,mask_seed`, then one row per sample.
  std::string to_text() const;
  static DatasetManifest from_text(const std::string& text);

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// round(ratio * N) entries, picked by a seeded shuffle, become train; the
/// rest test. Entry order is kept.
DatasetManifest split_dataset(const DatasetManifest& manifest, double ratio, std::uint64_t seed);

struct DataSpec {
  std::size_t count = 20;
  std::size_t size = 64;
  std::size_t coils = 4;
  std::size_t n_ellipses = 10;
  double noise_sigma = 0.002;
  double train_ratio = 0.8;
  std::uint64_t seed = 0;
};

/// Fully sampled data of one phantom; stored as f32 entries "image", "maps", "kspace".
struct Sample {
  Tensor<float> image;   // [H,W]
  Tensor<float> maps;    // [N,2,H,W]
  Tensor<float> kspace;  // [N,2,H,W]
};

Sample make_sample(const DataSpec& spec, std::size_t index);
void write_sample(const std::filesystem::path& path, const Sample& s);
Sample read_sample(const std::filesystem::path& path);

/// Writes sample_XXXX.athv files and manifest.txt into `dir`.
DatasetManifest generate_dataset(const DataSpec& spec, const std::filesystem::path& dir);
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Mask pattern as a u8 [H,W] container entry "mask", with a `<path>.meta`
/// key = value sidecar carrying kind, accel, center fraction and seed.
void write_mask(const std::filesystem::path& path, const Mask& mask);
Mask read_mask(const std::filesystem::path& path);

}  // namespace athv
