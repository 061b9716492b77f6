#include "athv/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <sstream>

#include "athv/container.hpp"
#include "athv/data.hpp"
#include "athv/kvtext.hpp"
#include "athv/masks.hpp"
#include "athv/metrics.hpp"
#include "athv/train.hpp"
#include "athv/varnet.hpp"

namespace athv::cli {

std::filesystem::path output_root() {
  const char* env = std::getenv("ATHV_OUT");
  if (env && *env) return std::filesystem::path(env);
  return std::filesystem::current_path();
}

std::filesystem::path resolve(const std::filesystem::path& p) {
  if (p.empty() || p.is_absolute()) return p;
  return output_root() / p;
}

std::vector<std::uint8_t> encode_pgm(const Gray16& image) {
  require(image.pixels.size() == image.height * image.width && image.height > 0 && image.width > 0,
          ErrorCode::InvalidArgument, "image pixel count does not match its extents");
  const std::string header =
      "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n65535\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.reserve(bytes.size() + 2 * image.pixels.size());
  for (std::uint16_t v : image.pixels) {
    bytes.push_back(std::uint8_t(v >> 8));
    bytes.push_back(std::uint8_t(v & 0xff));
  }
  return bytes;
}

Gray16 decode_pgm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t += char(bytes[pos++]);
    return t;
  };
  require(token() == "P5", ErrorCode::Corrupt, "not a binary graymap");
  Gray16 g;
  try {
    g.width = std::stoul(token());
    g.height = std::stoul(token());
    require(std::stoul(token()) == 65535, ErrorCode::Corrupt, "only 16-bit graymaps are supported");
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::Corrupt, "malformed graymap header");
  }
  ++pos;  // single whitespace before the raster
  require(bytes.size() == pos + 2 * g.width * g.height, ErrorCode::Corrupt, "graymap raster has the wrong size");
  g.pixels.resize(g.width * g.height);
  for (std::size_t i = 0; i < g.pixels.size(); ++i)
    g.pixels[i] = std::uint16_t((bytes[pos + 2 * i] << 8) | bytes[pos + 2 * i + 1]);
  return g;
}

Gray16 to_gray(const Tensor<double>& image, double scale) {
  require(image.rank() == 2, ErrorCode::ShapeMismatch, "images must be [H,W], got " + shape_str(image.shape()));
  require(scale > 0 && std::isfinite(scale), ErrorCode::InvalidArgument, "image scale must be positive");
  Gray16 g{image.dim(0), image.dim(1), {}};
  g.pixels.reserve(image.size());
  for (double v : image.data()) {
    const double u = std::clamp(v / scale, 0.0, 1.0);
    g.pixels.push_back(std::uint16_t(std::lround(u * 65535.0)));
  }
  return g;
}

Tensor<double> error_map(const Tensor<double>& x, const Tensor<double>& xhat) {
  require(x.shape() == xhat.shape(), ErrorCode::ShapeMismatch,
          "error map of " + shape_str(x.shape()) + " vs " + shape_str(xhat.shape()));
  Tensor<double> e(x.shape());
  double peak = 0;
  for (std::size_t i = 0; i < x.size(); ++i) peak = std::max(peak, e[i] = std::abs(x[i] - xhat[i]));
  if (peak == 0) return e;
  for (auto& v : e.data()) v = std::clamp(3.0 * v / peak, 0.0, 1.0);
  return e;
}

CropBox parse_crop(const std::string& text) {
  std::vector<std::size_t> v;
  std::stringstream ss(text);
  std::string cell;
  try {
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      const long n = std::stol(cell, &used);
      require(used == cell.size() && n >= 0, ErrorCode::Parse, "");
      v.push_back(std::size_t(n));
    }
  } catch (const std::exception&) {
    throw Error(ErrorCode::Parse, "crop box must be 'top,left,height,width', got '" + text + "'");
  }
  require(v.size() == 4 && v[2] > 0 && v[3] > 0, ErrorCode::Parse,
          "crop box must be 'top,left,height,width' with positive extents, got '" + text + "'");
  return {v[0], v[1], v[2], v[3]};
}

Tensor<double> crop_zoom(const Tensor<double>& image, const CropBox& box, std::size_t zoom) {
  require(image.rank() == 2, ErrorCode::ShapeMismatch, "crop needs an [H,W] image");
  require(zoom >= 1, ErrorCode::InvalidArgument, "zoom must be >= 1");
  require(box.top + box.height <= image.dim(0) && box.left + box.width <= image.dim(1), ErrorCode::InvalidArgument,
          "crop box exceeds the " + shape_str(image.shape()) + " image");
  Tensor<double> out(Shape{box.height * zoom, box.width * zoom});
  const std::size_t w = image.dim(1), ow = box.width * zoom;
  for (std::size_t i = 0; i < out.dim(0); ++i)
    for (std::size_t j = 0; j < ow; ++j) out[i * ow + j] = image[(box.top + i / zoom) * w + box.left + j / zoom];
  return out;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void write_pgm(const std::filesystem::path& path, const Gray16& g) { write_file_bytes(path, encode_pgm(g)); }

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

template <typename T>
Tensor<double> to_f64(const Tensor<T>& t) {
  return t.template cast<double>();
}

double max_of(const Tensor<double>& t) { return *std::max_element(t.data().begin(), t.data().end()); }

struct MaskFlags {
  std::string kind = "random";
  double accel = 4.0;
  double center_fraction = 0.08;
  double sigma_scale = 0.25;

  void add_to(CLI::App* app) {
    app->add_option("--kind", kind, "Mask kind: random, equispaced or gaussian")->capture_default_str();
    app->add_option("--accel", accel, "Acceleration factor")->capture_default_str();
    app->add_option("--cf", center_fraction, "Center fraction")->capture_default_str();
    app->add_option("--sigma-scale", sigma_scale, "Gaussian mask width relative to the grid")->capture_default_str();
  }
  MaskSpec spec() const {
    MaskSpec s;
    s.kind = parse_mask_kind(kind);
    s.accel = accel;
    s.center_fraction = center_fraction;
    s.sigma_scale = sigma_scale;
    return s;
  }
};

KeyValues mask_echo(const MaskSpec& m) {
  return {{"mask_kind", to_string(m.kind)},
          {"accel", format_double(m.accel)},
          {"center_fraction", format_double(m.center_fraction)},
          {"sigma_scale", format_double(m.sigma_scale)}};
}

// ---- make-data --------------------------------------------------------------

struct MakeDataArgs {
  std::string out;
  DataSpec spec;
};

void make_data(const MakeDataArgs& a, std::ostream& out) {
  const auto dir = resolve(a.out);
  std::filesystem::create_directories(dir);
  const DatasetManifest m = generate_dataset(a.spec, dir);
  const KeyValues echo{{"count", std::to_string(a.spec.count)},
                       {"size", std::to_string(a.spec.size)},
                       {"coils", std::to_string(a.spec.coils)},
                       {"ellipses", std::to_string(a.spec.n_ellipses)},
                       {"noise", format_double(a.spec.noise_sigma)},
                       {"ratio", format_double(a.spec.train_ratio)},
                       {"seed", std::to_string(a.spec.seed)}};
  write_text(dir / "make-data.txt", format_key_values(echo));
  out << "wrote " << m.entries.size() << " samples (" << m.count(Split::Train) << " train, " << m.count(Split::Test)
      << " test) to " << dir.string() << "\n";
}

// ---- make-mask --------------------------------------------------------------

struct MakeMaskArgs {
  std::string out = "mask.athv";
  std::size_t height = 0, width = 0;
  std::uint64_t seed = 0;
  bool pgm = false;
  MaskFlags mask;
};

void make_mask(const MakeMaskArgs& a, std::ostream& out) {
  const std::size_t h = a.height ? a.height : a.width;
  const Mask m = a.mask.spec().make(h, a.width, a.seed);
  const auto path = resolve(a.out);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_mask(path, m);
  if (a.pgm) {
    Tensor<double> img(Shape{m.height, m.width});
    for (std::size_t i = 0; i < m.pattern.size(); ++i) img[i] = m.pattern[i];
    write_pgm(path.string() + ".pgm", to_gray(img, 1.0));
  }
  out << "kind=" << to_string(m.kind) << " height=" << m.height << " width=" << m.width << " sampled=" << m.sampled()
      << " sampled_columns=" << m.sampled_columns() << " center_rows=" << m.center.rows
      << " center_cols=" << m.center.cols << "\n";
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::vector<std::string> overrides;
};

void train_cmd(const TrainArgs& a, std::ostream& out) {
  KeyValues kv = parse_key_values(read_text(resolve(a.config)));
  for (const auto& o : a.overrides) {
    const auto eq = o.find('=');
    require(eq != std::string::npos && eq > 0, ErrorCode::Parse, "--set expects key=value, got '" + o + "'");
    kv[o.substr(0, eq)] = o.substr(eq + 1);
  }
  TrainConfig cfg = TrainConfig::from_text(format_key_values(kv));
  cfg.data_dir = resolve(cfg.data_dir);
  cfg.out_dir = resolve(cfg.out_dir);
  cfg.resume = resolve(cfg.resume);
  const TrainResult r = cfg.f64 ? train<double>(cfg) : train<float>(cfg);
  out << "trained " << r.step_losses.size() << " steps";
  if (!r.step_losses.empty()) out << ", last loss " << format_double(r.step_losses.back());
  out << "; checkpoint " << r.final_checkpoint.string() << "\n";
}

// ---- reconstruct / evaluate -------------------------------------------------

struct DataFlags {
  std::string data;
  std::string split = "test";
  std::string dtype = "f32";
  MaskFlags mask;

  void add_to(CLI::App* app) {
    app->add_option("--data", data, "Dataset directory holding manifest.txt")->required();
    app->add_option("--split", split, "train or test")->capture_default_str();
    app->add_option("--dtype", dtype, "f32 or f64")->capture_default_str();
    mask.add_to(app);
  }
  bool f64() const {
    require(dtype == "f32" || dtype == "f64", ErrorCode::InvalidArgument, "dtype must be f32 or f64");
    return dtype == "f64";
  }
};

struct ReconstructArgs {
  std::string checkpoint, out;
  DataFlags data;
};

template <typename T>
void reconstruct_with(const ReconstructArgs& a, std::ostream& out) {
  const Model<T> model = load_model<T>(resolve(a.checkpoint));
  const MaskSpec spec = a.data.mask.spec();
  const auto samples = prepare_split<T>(resolve(a.data.data), parse_split(a.data.split), spec);
  const auto dir = resolve(a.out);
  std::filesystem::create_directories(dir);
  std::vector<ContainerEntry> entries;
  for (const auto& s : samples) {
    const auto r = forward_model(model, Var<T>::constant(s.k_masked), s.mask);
    entries.push_back(ContainerEntry::from_tensor(s.sample_id + "/intermediate", r.intermediate.value()));
    entries.push_back(ContainerEntry::from_tensor(s.sample_id + "/final", r.final.value()));
    const Tensor<double> target = to_f64(s.target), pred = to_f64(r.final.value());
    const double scale = max_of(target) > 0 ? max_of(target) : 1.0;
    write_pgm(dir / (s.sample_id + ".pgm"), to_gray(pred, scale));
    write_pgm(dir / (s.sample_id + "_error.pgm"), to_gray(error_map(target, pred), 1.0));
  }
  write_container_file(dir / "reconstructions.athv", entries);
  KeyValues echo = mask_echo(spec);
  echo["checkpoint"] = a.checkpoint;
  echo["data"] = a.data.data;
  echo["split"] = a.data.split;
  echo["dtype"] = a.data.dtype;
  write_text(dir / "reconstruct.txt", format_key_values(echo));
  out << "reconstructed " << samples.size() << " samples into " << dir.string() << "\n";
}

struct EvaluateArgs {
  std::string checkpoint, name, out;
  bool ground_truth = false;
  DataFlags data;
};

template <typename T>
void evaluate_with(const EvaluateArgs& a, std::ostream& out) {
  const auto samples = prepare_split<T>(resolve(a.data.data), parse_split(a.data.split), a.data.mask.spec());
  EvalTable table;
  if (a.ground_truth) {
    table = evaluate<T>(nullptr, a.name.empty() ? "ground-truth" : a.name, samples);
  } else {
    const Model<T> model = load_model<T>(resolve(a.checkpoint));
    table = evaluate(&model, a.name.empty() ? to_string(model.config.arch) : a.name, samples);
  }
  const std::string csv = table.to_csv();
  if (a.out.empty()) {
    out << csv;
  } else {
    const auto path = resolve(a.out);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    write_text(path, csv);
    out << "wrote " << table.rows.size() << " rows to " << path.string() << "\n";
  }
}

// ---- compare ----------------------------------------------------------------

struct CompareArgs {
  std::vector<std::string> models;  // name=checkpoint, in table order
  std::vector<double> accels{4.0};
  std::vector<double> cfs;
  std::string out = "compare";
  std::string sample;
  std::string crop;
  std::size_t zoom = 2;
  DataFlags data;
};

/// Tiles of possibly different sizes laid out on a zero background with a
/// 2-pixel gutter; every column is as wide as its widest tile.
Tensor<double> assemble_grid(const std::vector<std::vector<Tensor<double>>>& rows) {
  const std::size_t gap = 2, cols = rows.front().size();
  std::vector<std::size_t> col_w(cols, 0), row_h(rows.size(), 0);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      row_h[r] = std::max(row_h[r], rows[r][c].dim(0));
      col_w[c] = std::max(col_w[c], rows[r][c].dim(1));
    }
  std::size_t H = gap, W = gap;
  for (auto h : row_h) H += h + gap;
  for (auto w : col_w) W += w + gap;
  Tensor<double> grid(Shape{H, W});
  std::size_t y = gap;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::size_t x = gap;
    for (std::size_t c = 0; c < cols; ++c) {
      const Tensor<double>& t = rows[r][c];
      for (std::size_t i = 0; i < t.dim(0); ++i)
        for (std::size_t j = 0; j < t.dim(1); ++j) grid[(y + i) * W + x + j] = t[i * t.dim(1) + j];
      x += col_w[c] + gap;
    }
    y += row_h[r] + gap;
  }
  return grid;
}

void draw_box(Tensor<double>& img, const CropBox& b, double value) {
  const std::size_t w = img.dim(1);
  for (std::size_t j = b.left; j < b.left + b.width; ++j) {
    img[b.top * w + j] = value;
    img[(b.top + b.height - 1) * w + j] = value;
  }
  for (std::size_t i = b.top; i < b.top + b.height; ++i) {
    img[i * w + b.left] = value;
    img[i * w + b.left + b.width - 1] = value;
  }
}

std::string accel_tag(double accel) {
  std::string s = format_double(accel);
  return s + "x";
}

template <typename T>
void compare_with(const CompareArgs& a, std::ostream& out) {
  require(!a.models.empty(), ErrorCode::InvalidArgument, "compare needs at least one --model name=checkpoint");
  require(a.cfs.empty() || a.cfs.size() == a.accels.size(), ErrorCode::InvalidArgument,
          "--cf must be given once per --accel");
  std::vector<std::string> names;
  std::vector<Model<T>> models;
  for (const auto& m : a.models) {
    const auto eq = m.find('=');
    require(eq != std::string::npos && eq > 0 && eq + 1 < m.size(), ErrorCode::Parse,
            "--model expects name=checkpoint, got '" + m + "'");
    const std::string name = m.substr(0, eq);
    require(std::find(names.begin(), names.end(), name) == names.end() && name != "zero-filled",
            ErrorCode::InvalidArgument, "duplicate or reserved model name '" + name + "'");
    names.push_back(name);
    models.push_back(load_model<T>(resolve(m.substr(eq + 1))));
  }
  for (const auto& m : models)
    require(m.config.coils == models.front().config.coils, ErrorCode::InvalidArgument,
            "checkpoints disagree on the coil count");

  const auto dir = resolve(a.out);
  std::filesystem::create_directories(dir);
  std::vector<std::string> row_names = names;
  row_names.push_back("zero-filled");
  std::map<std::string, std::vector<std::string>> cells;
  std::string per_sample = "accel,sample_id,model,psnr,ssim,nrmse\n";
  KeyValues echo{{"data", a.data.data}, {"split", a.data.split}, {"dtype", a.data.dtype},
                 {"zoom", std::to_string(a.zoom)}, {"crop", a.crop}, {"sample", a.sample}};
  for (std::size_t i = 0; i < names.size(); ++i) echo["model." + std::to_string(i)] = a.models[i];

  std::string header = "model";
  for (std::size_t ai = 0; ai < a.accels.size(); ++ai) {
    MaskSpec spec = a.data.mask.spec();
    spec.accel = a.accels[ai];
    spec.center_fraction = a.cfs.empty() ? 0.32 / spec.accel : a.cfs[ai];
    const std::string tag = accel_tag(spec.accel);
    header += ",psnr_" + tag + ",ssim_" + tag;
    echo["accel." + std::to_string(ai)] = format_double(spec.accel);
    echo["center_fraction." + std::to_string(ai)] = format_double(spec.center_fraction);

    const auto samples = prepare_split<T>(resolve(a.data.data), parse_split(a.data.split), spec);
    require(!samples.empty(), ErrorCode::InvalidArgument, "split '" + a.data.split + "' is empty");
    for (const auto& s : samples)
      require(s.k_masked.dim(0) == models.front().config.coils, ErrorCode::InvalidArgument,
              "checkpoints expect " + std::to_string(models.front().config.coils) + " coils, sample " + s.sample_id +
                  " has " + std::to_string(s.k_masked.dim(0)));

    EvalTable table;
    for (std::size_t m = 0; m < models.size(); ++m) {
      const EvalTable t = evaluate(&models[m], names[m], samples, m + 1 == models.size());
      table.rows.insert(table.rows.end(), t.rows.begin(), t.rows.end());
    }
    for (const auto& r : table.rows)
      per_sample += format_double(spec.accel) + "," + r.sample_id + "," + r.model + "," + format_double(r.psnr) + "," +
                    format_double(r.ssim) + "," + format_double(r.nrmse) + "\n";
    for (const auto& name : row_names) {
      const EvalRow m = table.mean_of(name);
      cells[name].push_back(format_double(m.psnr));
      cells[name].push_back(format_double(m.ssim));
    }

    // Image grid: target, zero-filled, then each model; rows are images,
    // error maps and enlarged crops, all on the target's intensity scale.
    const PreparedSample<T>* pick = &samples.front();
    if (!a.sample.empty()) {
      pick = nullptr;
      for (const auto& s : samples)
        if (s.sample_id == a.sample) pick = &s;
      require(pick != nullptr, ErrorCode::InvalidArgument, "sample '" + a.sample + "' is not in the split");
    }
    const Tensor<double> target = to_f64(pick->target);
    const std::size_t h = target.dim(0), w = target.dim(1);
    const CropBox box = a.crop.empty() ? CropBox{h / 4, w / 4, h / 2, w / 2} : parse_crop(a.crop);
    const double scale = max_of(target) > 0 ? max_of(target) : 1.0;
    std::vector<Tensor<double>> images{target, to_f64(zero_filled_image(Var<T>::constant(pick->k_masked)).value())};
    for (const auto& m : models)
      images.push_back(to_f64(forward_model(m, Var<T>::constant(pick->k_masked), pick->mask).final.value()));
    std::vector<std::vector<Tensor<double>>> rows(3);
    for (std::size_t c = 0; c < images.size(); ++c) {
      Tensor<double> shown(images[c].shape());
      for (std::size_t i = 0; i < shown.size(); ++i) shown[i] = images[c][i] / scale;
      rows[2].push_back(crop_zoom(shown, box, a.zoom));
      rows[1].push_back(c == 0 ? Tensor<double>(Shape{h, w}) : error_map(target, images[c]));
      if (c == 0) draw_box(shown, box, 1.0);
      rows[0].push_back(std::move(shown));
    }
    write_pgm(dir / ("grid_" + tag + ".pgm"), to_gray(assemble_grid(rows), 1.0));
  }

  std::string csv = header + "\n";
  for (const auto& name : row_names) {
    csv += name;
    for (const auto& c : cells[name]) csv += "," + c;
    csv += "\n";
  }
  write_text(dir / "compare.csv", csv);
  write_text(dir / "compare_samples.csv", per_sample);
  write_text(dir / "compare.txt", format_key_values(echo));
  out << csv;
}

// ---- rank-score -------------------------------------------------------------

struct RankArgs {
  std::string file, out;
  std::vector<std::string> models;
};

void rank_score(const RankArgs& a, std::ostream& out) {
  const auto records = parse_ranking_file(read_text(resolve(a.file)));
  require(!records.empty(), ErrorCode::Parse, "ranking file has no records");
  std::vector<std::string> models = a.models;
  if (models.empty()) models = records.front().order;
  std::string csv = "model,raw_rank,priority_score\n";
  out << "model,raw_rank\n";
  for (const auto& m : models) out << m << "," << raw_rank_sum(records, m) << "\n";
  out << "\nmodel,priority_score\n";
  char buf[32];
  for (const auto& m : models) {
    const double s = priority_score(records, m);
    std::snprintf(buf, sizeof buf, "%.2f", s);
    out << m << "," << buf << "\n";
    csv += m + "," + std::to_string(raw_rank_sum(records, m)) + "," + format_double(s) + "\n";
  }
  if (!a.out.empty()) write_text(resolve(a.out), csv);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"athv: undersampled multi-coil MRI reconstruction toolkit", "athv"};
  app.require_subcommand(1);

  MakeDataArgs md;
  auto* c_data = app.add_subcommand("make-data", "Generate a synthetic multi-coil phantom dataset");
  c_data->add_option("--out", md.out, "Output directory")->required();
  c_data->add_option("--count", md.spec.count, "Number of phantoms")->capture_default_str();
  c_data->add_option("--size", md.spec.size, "Image side (32, 64, 128 or 256)")->capture_default_str();
  c_data->add_option("--coils", md.spec.coils, "Receiver coils")->capture_default_str();
  c_data->add_option("--ellipses", md.spec.n_ellipses, "Ellipses per phantom")->capture_default_str();
  c_data->add_option("--noise", md.spec.noise_sigma, "k-space noise standard deviation")->capture_default_str();
  c_data->add_option("--ratio", md.spec.train_ratio, "Training fraction")->capture_default_str();
  c_data->add_option("--seed", md.spec.seed, "Seed")->capture_default_str();

  MakeMaskArgs mm;
  auto* c_mask = app.add_subcommand("make-mask", "Write an undersampling mask and its .meta sidecar");
  c_mask->add_option("--out", mm.out, "Mask file")->capture_default_str();
  c_mask->add_option("--width", mm.width, "Width (phase-encode columns)")->required();
  c_mask->add_option("--height", mm.height, "Height; defaults to the width");
  c_mask->add_option("--seed", mm.seed, "Seed")->capture_default_str();
  c_mask->add_flag("--pgm", mm.pgm, "Also write <out>.pgm");
  mm.mask.add_to(c_mask);

  TrainArgs ta;
  auto* c_train = app.add_subcommand("train", "Train a model from a key = value config file");
  c_train->add_option("--config", ta.config, "Config file")->required();
  c_train->add_option("--set", ta.overrides, "Override a config entry (key=value)");

  ReconstructArgs ra;
  auto* c_recon = app.add_subcommand("reconstruct", "Reconstruct a dataset split with a checkpoint");
  c_recon->add_option("--checkpoint", ra.checkpoint, "Model checkpoint")->required();
  c_recon->add_option("--out", ra.out, "Output directory")->required();
  ra.data.add_to(c_recon);

  EvaluateArgs ea;
  auto* c_eval = app.add_subcommand("evaluate", "Score a checkpoint and zero-filling on a dataset split");
  auto* o_ckpt = c_eval->add_option("--checkpoint", ea.checkpoint, "Model checkpoint");
  auto* o_gt = c_eval->add_flag("--ground-truth", ea.ground_truth, "Score the ground truth itself");
  o_ckpt->excludes(o_gt);
  c_eval->add_option("--name", ea.name, "Model label in the table");
  c_eval->add_option("--out", ea.out, "CSV file (default: stdout)");
  ea.data.add_to(c_eval);

  CompareArgs ca;
  auto* c_cmp = app.add_subcommand("compare", "Tabulate and render several checkpoints over accelerations");
  c_cmp->add_option("--model", ca.models, "name=checkpoint; repeat, rows follow this order")->required();
  c_cmp->add_option("--accel", ca.accels, "Acceleration factors (repeatable)")->capture_default_str();
  c_cmp->add_option("--cf", ca.cfs, "Center fraction per acceleration (default 0.32 / accel)");
  c_cmp->add_option("--out", ca.out, "Output directory")->capture_default_str();
  c_cmp->add_option("--sample", ca.sample, "Sample shown in the image grids (default: first)");
  c_cmp->add_option("--crop", ca.crop, "Enlarged window top,left,height,width (default: central half)");
  c_cmp->add_option("--zoom", ca.zoom, "Enlargement factor of the crop")->capture_default_str();
  c_cmp->add_option("--data", ca.data.data, "Dataset directory holding manifest.txt")->required();
  c_cmp->add_option("--split", ca.data.split, "train or test")->capture_default_str();
  c_cmp->add_option("--dtype", ca.data.dtype, "f32 or f64")->capture_default_str();
  c_cmp->add_option("--kind", ca.data.mask.kind, "Mask kind")->capture_default_str();
  c_cmp->add_option("--sigma-scale", ca.data.mask.sigma_scale, "Gaussian mask width")->capture_default_str();

  RankArgs rk;
  auto* c_rank = app.add_subcommand("rank-score", "Raw rank sums and priority scores of a ranking study");
  c_rank->add_option("--file", rk.file, "Ranking file: slice_id,model=rank,...")->required();
  c_rank->add_option("--models", rk.models, "Report order (default: as listed in the first record)")->delimiter(',');
  c_rank->add_option("--out", rk.out, "Also write model,raw_rank,priority_score CSV");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: usage: " << msg << "\n";
    return 2;
  }

  try {
    if (*c_data) make_data(md, out);
    else if (*c_mask) make_mask(mm, out);
    else if (*c_train) train_cmd(ta, out);
    else if (*c_recon) ra.data.f64() ? reconstruct_with<double>(ra, out) : reconstruct_with<float>(ra, out);
    else if (*c_eval) {
      require(ea.ground_truth || !ea.checkpoint.empty(), ErrorCode::InvalidArgument,
              "evaluate needs --checkpoint or --ground-truth");
      ea.data.f64() ? evaluate_with<double>(ea, out) : evaluate_with<float>(ea, out);
    } else if (*c_cmp) ca.data.f64() ? compare_with<double>(ca, out) : compare_with<float>(ca, out);
    else if (*c_rank) rank_score(rk, out);
  } catch (const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: " << msg << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: io: " << msg << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: internal: " << msg << "\n";
    return 1;
  }
  return 0;
}

}  // namespace athv::cli
