#include "athv/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "athv/container.hpp"
#include "athv/kvtext.hpp"
#include "athv/masks.hpp"
#include "athv/rng.hpp"

namespace athv {

void PhantomSpec::validate() const {
  require(size == 32 || size == 64 || size == 128 || size == 256, ErrorCode::InvalidArgument,
          "phantom size must be 32, 64, 128 or 256, got " + std::to_string(size));
  require(0.0 <= intensity_min && intensity_min <= intensity_max && intensity_max <= 1.0, ErrorCode::InvalidArgument,
          "phantom intensities must satisfy 0 <= min <= max <= 1");
}

template <typename T>
Tensor<T> make_phantom(const PhantomSpec& spec) {
  spec.validate();
  const std::size_t n = spec.size;
  std::vector<double> acc(n * n, 0.0);
  Rng rng(spec.seed);
  for (std::size_t e = 0; e < spec.n_ellipses; ++e) {
    // The first ellipse is a large outline so every phantom has a body.
    const bool outline = e == 0;
    const double cx = outline ? rng.uniform(-0.05, 0.05) : rng.uniform(-0.35, 0.35);
    const double cy = outline ? rng.uniform(-0.05, 0.05) : rng.uniform(-0.35, 0.35);
    const double a = outline ? rng.uniform(0.55, 0.75) : rng.uniform(0.05, 0.3);
    const double b = outline ? rng.uniform(0.55, 0.75) : rng.uniform(0.05, 0.3);
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const double value = rng.uniform(spec.intensity_min, spec.intensity_max);
    const double c = std::cos(theta), s = std::sin(theta);
    for (std::size_t i = 0; i < n; ++i) {
      const double y = (2.0 * double(i) + 1.0) / double(n) - 1.0 - cy;
      for (std::size_t j = 0; j < n; ++j) {
        const double x = (2.0 * double(j) + 1.0) / double(n) - 1.0 - cx;
        const double u = (x * c + y * s) / a, v = (-x * s + y * c) / b;
        if (u * u + v * v <= 1.0) acc[i * n + j] += value;
      }
    }
  }
  Tensor<T> out(Shape{n, n});
  for (std::size_t p = 0; p < acc.size(); ++p) out[p] = T(std::clamp(acc[p], 0.0, 1.0));
  return out;
}

template <typename T>
SensitivityMaps<T> make_coil_maps(std::size_t n_coils, std::size_t h, std::size_t w) {
  require(n_coils >= 1, ErrorCode::InvalidArgument, "need at least one coil");
  require(h >= 1 && w >= 1, ErrorCode::InvalidArgument, "coil maps need a non-empty grid");
  const std::size_t hw = h * w;
  std::vector<double> re(n_coils * hw), im(n_coils * hw), energy(hw, 0.0);
  const double sigma = 0.5 * double(std::min(h, w));
  for (std::size_t c = 0; c < n_coils; ++c) {
    const double angle = 2.0 * std::numbers::pi * double(c) / double(n_coils);
    const double ca = std::cos(angle), sa = std::sin(angle);
    const double py = 0.5 * double(h) * (1.0 + sa), px = 0.5 * double(w) * (1.0 + ca);
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        const double dy = double(i) + 0.5 - py, dx = double(j) + 0.5 - px;
        const double mag = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        const double ny = (2.0 * double(i) + 1.0) / double(h) - 1.0;
        const double nx = (2.0 * double(j) + 1.0) / double(w) - 1.0;
        const double phase = 0.5 * std::numbers::pi * (nx * ca + ny * sa);
        const std::size_t p = c * hw + i * w + j;
        re[p] = mag * std::cos(phase);
        im[p] = mag * std::sin(phase);
        energy[i * w + j] += mag * mag;
      }
  }
  Tensor<T> maps(Shape{n_coils, 2, h, w});
  for (std::size_t c = 0; c < n_coils; ++c)
    for (std::size_t p = 0; p < hw; ++p) {
      const double inv = 1.0 / std::sqrt(energy[p]);
      maps[(2 * c) * hw + p] = T(re[c * hw + p] * inv);
      maps[(2 * c + 1) * hw + p] = T(im[c * hw + p] * inv);
    }
  return SensitivityMaps<T>(std::move(maps));
}

template <typename T>
KSpace<T> simulate_acquisition(const Tensor<T>& x, const SensitivityMaps<T>& maps, double noise_sigma,
                               std::uint64_t seed) {
  require(noise_sigma >= 0.0 && std::isfinite(noise_sigma), ErrorCode::InvalidArgument,
          "noise sigma must be finite and non-negative");
  require(x.rank() == 2 && x.dim(0) == maps.maps.dim(2) && x.dim(1) == maps.maps.dim(3), ErrorCode::ShapeMismatch,
          "image " + shape_str(x.shape()) + " does not match maps " + shape_str(maps.maps.shape()));
  const std::size_t h = x.dim(0), w = x.dim(1);
  Tensor<T> complex_x(Shape{2, h, w});
  std::copy(x.data().begin(), x.data().end(), complex_x.data().begin());
  Tensor<T> k = fft2c(expand(ComplexImage<T>(std::move(complex_x)), maps));
  if (noise_sigma > 0.0) {
    Rng rng(seed);
    for (auto& v : k.data()) v = T(double(v) + noise_sigma * rng.normal());
  }
  return KSpace<T>(std::move(k));
}

std::string to_string(Split s) { return s == Split::Train ? "train" : "test"; }

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  throw Error(ErrorCode::Parse, "unknown split '" + s + "'");
}

std::vector<ManifestEntry> DatasetManifest::subset(Split s) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.split == s) out.push_back(e);
  return out;
}

std::size_t DatasetManifest::count(Split s) const {
  return std::size_t(std::count_if(entries.begin(), entries.end(), [&](const auto& e) { return e.split == s; }));
}

std::string DatasetManifest::to_text() const {
  std::ostringstream os;
  os << "sample_id,path,split,coils,mask_seed\n";
  for (const auto& e : entries)
    os << e.sample_id << ',' << e.path << ',' << to_string(e.split) << ',' << e.coils << ',' << e.mask_seed << '\n';
  return os.str();
}

DatasetManifest DatasetManifest::from_text(const std::string& text) {
  DatasetManifest m;
  std::istringstream is(text);
  std::string line;
  bool header = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      require(line == "sample_id,path,split,coils,mask_seed", ErrorCode::Parse, "unexpected manifest header '" + line + "'");
      header = false;
      continue;
    }
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    require(f.size() == 5, ErrorCode::Parse, "manifest row needs 5 fields: '" + line + "'");
    ManifestEntry e;
    e.sample_id = f[0];
    e.path = f[1];
    e.split = parse_split(f[2]);
    try {
      e.coils = std::stoul(f[3]);
      e.mask_seed = std::stoull(f[4]);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::Parse, "bad number in manifest row '" + line + "'");
    }
    for (const auto& other : m.entries)
      require(other.sample_id != e.sample_id, ErrorCode::Parse, "duplicate sample id " + e.sample_id);
    m.entries.push_back(std::move(e));
  }
  require(!header, ErrorCode::Parse, "empty manifest");
  return m;
}

DatasetManifest split_dataset(const DatasetManifest& manifest, double ratio, std::uint64_t seed) {
  require(!manifest.entries.empty(), ErrorCode::InvalidArgument, "cannot split an empty dataset");
  require(ratio > 0.0 && ratio < 1.0, ErrorCode::InvalidArgument, "split ratio must lie in (0, 1)");
  const std::size_t n = manifest.entries.size();
  const std::size_t n_train = std::size_t(round_half_away(ratio * double(n)));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(order);
  DatasetManifest out = manifest;
  for (std::size_t r = 0; r < n; ++r) out.entries[order[r]].split = r < n_train ? Split::Train : Split::Test;
  return out;
}

Sample make_sample(const DataSpec& spec, std::size_t index) {
  const std::string tag = "sample/" + std::to_string(index);
  PhantomSpec ps;
  ps.size = spec.size;
  ps.n_ellipses = spec.n_ellipses;
  ps.seed = derive_seed(spec.seed, tag + "/phantom");
  Sample s;
  s.image = make_phantom<float>(ps);
  const SensitivityMaps<float> maps = make_coil_maps<float>(spec.coils, spec.size, spec.size);
  s.kspace = simulate_acquisition(s.image, maps, spec.noise_sigma, derive_seed(spec.seed, tag + "/noise")).data;
  s.maps = maps.maps;
  return s;
}

void write_sample(const std::filesystem::path& path, const Sample& s) {
  write_container_file(path, {ContainerEntry::from_tensor("image", s.image), ContainerEntry::from_tensor("maps", s.maps),
                              ContainerEntry::from_tensor("kspace", s.kspace)});
}

Sample read_sample(const std::filesystem::path& path) {
  const auto entries = read_container_file(path);
  Sample s;
  s.image = find_entry(entries, "image").to_tensor<float>();
  s.maps = find_entry(entries, "maps").to_tensor<float>();
  s.kspace = find_entry(entries, "kspace").to_tensor<float>();
  require(s.image.rank() == 2 && s.kspace.rank() == 4 && s.kspace.shape() == s.maps.shape() &&
              s.kspace.dim(2) == s.image.dim(0) && s.kspace.dim(3) == s.image.dim(1),
          ErrorCode::Corrupt, "sample " + path.string() + " has inconsistent shapes");
  return s;
}

DatasetManifest generate_dataset(const DataSpec& spec, const std::filesystem::path& dir) {
  require(spec.count >= 1, ErrorCode::InvalidArgument, "dataset needs at least one sample");
  DatasetManifest m;
  for (std::size_t i = 0; i < spec.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "sample_%04zu", i);
    ManifestEntry e;
    e.sample_id = name;
    e.path = std::string(name) + ".athv";
    e.coils = spec.coils;
    e.mask_seed = derive_seed(spec.seed, "mask/" + std::to_string(i));
    write_sample(dir / e.path, make_sample(spec, i));
    m.entries.push_back(std::move(e));
  }
  m = split_dataset(m, spec.train_ratio, spec.seed);
  const std::string text = m.to_text();
  write_file_bytes(dir / "manifest.txt", std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  return m;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return DatasetManifest::from_text(std::string(bytes.begin(), bytes.end()));
}

void write_mask(const std::filesystem::path& path, const Mask& mask) {
  ContainerEntry e;
  e.name = "mask";
  e.dtype = DType::U8;
  e.dims = {std::uint32_t(mask.height), std::uint32_t(mask.width)};
  e.payload = mask.pattern;
  write_container_file(path, {e});
  const KeyValues meta{
      {"kind", to_string(mask.kind)},
      {"accel", format_double(mask.accel)},
      {"center_fraction", format_double(mask.center_fraction)},
      {"seed", std::to_string(mask.seed)},
      {"height", std::to_string(mask.height)},
      {"width", std::to_string(mask.width)},
      {"sampled", std::to_string(mask.sampled())},
      {"sampled_columns", std::to_string(mask.sampled_columns())},
      {"center_row0", std::to_string(mask.center.row0)},
      {"center_rows", std::to_string(mask.center.rows)},
      {"center_col0", std::to_string(mask.center.col0)},
      {"center_cols", std::to_string(mask.center.cols)},
  };
  const std::string text = format_key_values(meta);
  write_file_bytes(path.string() + ".meta",
                   std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Mask read_mask(const std::filesystem::path& path) {
  const auto entries = read_container_file(path);
  const ContainerEntry& e = find_entry(entries, "mask");
  require(e.dtype == DType::U8 && e.dims.size() == 2, ErrorCode::Corrupt, "mask entry must be a u8 [H,W] array");
  const auto meta_bytes = read_file_bytes(path.string() + ".meta");
  const KeyValues meta = parse_key_values(std::string(meta_bytes.begin(), meta_bytes.end()));
  Mask m;
  m.height = e.dims[0];
  m.width = e.dims[1];
  m.pattern = e.payload;
  for (auto v : m.pattern) require(v <= 1, ErrorCode::Corrupt, "mask values must be 0 or 1");
  require(kv_size(meta, "height", m.height) == m.height && kv_size(meta, "width", m.width) == m.width,
          ErrorCode::Corrupt, "mask sidecar disagrees with the mask shape");
  m.kind = parse_mask_kind(kv_string(meta, "kind", "random"));
  m.accel = kv_double(meta, "accel", 1.0);
  m.center_fraction = kv_double(meta, "center_fraction", 0.0);
  m.seed = std::stoull(kv_string(meta, "seed", "0"));
  m.center = {kv_size(meta, "center_row0", 0), kv_size(meta, "center_rows", 0), kv_size(meta, "center_col0", 0),
              kv_size(meta, "center_cols", 0)};
  require(m.center.row0 + m.center.rows <= m.height && m.center.col0 + m.center.cols <= m.width, ErrorCode::Corrupt,
          "mask calibration region lies outside the grid");
  return m;
}

template Tensor<float> make_phantom(const PhantomSpec&);
template Tensor<double> make_phantom(const PhantomSpec&);
template SensitivityMaps<float> make_coil_maps(std::size_t, std::size_t, std::size_t);
template SensitivityMaps<double> make_coil_maps(std::size_t, std::size_t, std::size_t);
template KSpace<float> simulate_acquisition(const Tensor<float>&, const SensitivityMaps<float>&, double, std::uint64_t);
template KSpace<double> simulate_acquisition(const Tensor<double>&, const SensitivityMaps<double>&, double,
                                             std::uint64_t);

}  // namespace athv
