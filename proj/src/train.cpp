#include "athv/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "athv/container.hpp"
#include "athv/kvtext.hpp"
#include "athv/metrics.hpp"
#include "athv/ops.hpp"
#include "athv/rng.hpp"
#include "athv/varnet.hpp"

namespace athv {

template <typename T>
void adam_step(ParamStore<T>& params, AdamState<T>& state) {
  for (const auto& [name, p] : params)
    require(p.grad().all_finite(), ErrorCode::NonFinite, "non-finite gradient in " + name);
  const AdamConfig& c = state.config;
  ++state.t;
  const double bc1 = 1.0 - std::pow(c.beta1, double(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, double(state.t));
  for (const auto& [name, p] : params) {
    const Tensor<T>& g = p.grad();
    auto [mit, m_new] = state.m.try_emplace(name, p.shape());
    auto [vit, v_new] = state.v.try_emplace(name, p.shape());
    Tensor<T>& m = mit->second;
    Tensor<T>& v = vit->second;
    require(m.shape() == p.shape() && v.shape() == p.shape(), ErrorCode::ShapeMismatch,
            "optimizer state for " + name + " does not match the parameter");
    Tensor<T> value = p.value();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double gi = g[i];
      const double mi = c.beta1 * double(m[i]) + (1.0 - c.beta1) * gi;
      const double vi = c.beta2 * double(v[i]) + (1.0 - c.beta2) * gi * gi;
      m[i] = T(mi);
      v[i] = T(vi);
      value[i] = T(double(value[i]) - c.lr * (mi / bc1) / (std::sqrt(vi / bc2) + c.eps));
    }
    Var<T>(p).assign(std::move(value));
  }
}

// ---- configuration ----------------------------------------------------------

void TrainConfig::validate() const {
  model.validate();
  require(epochs >= 1, ErrorCode::InvalidArgument, "epochs must be >= 1");
  require(batch_size >= 1, ErrorCode::InvalidArgument, "batch_size must be >= 1");
  require(eval_every >= 1, ErrorCode::InvalidArgument, "eval_every must be >= 1");
  require(lr >= 0.0 && std::isfinite(lr), ErrorCode::InvalidArgument, "lr must be finite and non-negative");
  require(!data_dir.empty(), ErrorCode::InvalidArgument, "data_dir is required");
  require(!out_dir.empty(), ErrorCode::InvalidArgument, "out_dir is required");
}

namespace {

const std::vector<std::string> kTrainKeys = {
    "data_dir", "out_dir", "epochs", "max_steps", "batch_size", "lr", "seed", "checkpoint_every", "eval_every",
    "dtype", "resume", "mask_kind", "accel", "center_fraction", "sigma_scale",
    // model keys
    "arch", "cascades", "coils", "alpha", "zero_init_residual", "unet_base", "unet_depth", "cascade_base",
    "cascade_depth", "sens_base", "sens_depth"};


}  // namespace

TrainConfig TrainConfig::from_text(const std::string& text) {
  const KeyValues kv = parse_key_values(text);
  for (const auto& [k, v] : kv)
    require(std::find(kTrainKeys.begin(), kTrainKeys.end(), k) != kTrainKeys.end(), ErrorCode::Parse,
            "unknown config key '" + k + "'");
  TrainConfig c;
  c.data_dir = kv_string(kv, "data_dir", "");
  c.out_dir = kv_string(kv, "out_dir", "");
  c.resume = kv_string(kv, "resume", "");
  c.epochs = kv_size(kv, "epochs", c.epochs);
  c.max_steps = kv_size(kv, "max_steps", c.max_steps);
  c.batch_size = kv_size(kv, "batch_size", c.batch_size);
  c.lr = kv_double(kv, "lr", c.lr);
  c.seed = kv_u64(kv, "seed", c.seed);
  c.checkpoint_every = kv_size(kv, "checkpoint_every", c.checkpoint_every);
  c.eval_every = kv_size(kv, "eval_every", c.eval_every);
  const std::string dtype = kv_string(kv, "dtype", "f32");
  require(dtype == "f32" || dtype == "f64", ErrorCode::Parse, "dtype must be f32 or f64");
  c.f64 = dtype == "f64";
  c.mask.kind = parse_mask_kind(kv_string(kv, "mask_kind", to_string(c.mask.kind)));
  c.mask.accel = kv_double(kv, "accel", c.mask.accel);
  c.mask.center_fraction = kv_double(kv, "center_fraction", c.mask.center_fraction);
  c.mask.sigma_scale = kv_double(kv, "sigma_scale", c.mask.sigma_scale);
  c.model.apply(kv);
  c.model = c.model.resolved();
  c.validate();
  return c;
}

std::string TrainConfig::to_text() const {
  KeyValues kv = parse_key_values(model.to_text());
  kv["data_dir"] = data_dir.string();
  kv["out_dir"] = out_dir.string();
  if (!resume.empty()) kv["resume"] = resume.string();
  kv["epochs"] = std::to_string(epochs);
  kv["max_steps"] = std::to_string(max_steps);
  kv["batch_size"] = std::to_string(batch_size);
  kv["lr"] = format_double(lr);
  kv["seed"] = std::to_string(seed);
  kv["checkpoint_every"] = std::to_string(checkpoint_every);
  kv["eval_every"] = std::to_string(eval_every);
  kv["dtype"] = f64 ? "f64" : "f32";
  kv["mask_kind"] = to_string(mask.kind);
  kv["accel"] = format_double(mask.accel);
  kv["center_fraction"] = format_double(mask.center_fraction);
  kv["sigma_scale"] = format_double(mask.sigma_scale);
  return format_key_values(kv);
}

// ---- data and scoring -------------------------------------------------------

template <typename T>
std::vector<PreparedSample<T>> prepare_split(const std::filesystem::path& data_dir, Split split, const MaskSpec& spec) {
  const DatasetManifest manifest = read_manifest(data_dir / "manifest.txt");
  std::vector<PreparedSample<T>> out;
  for (const auto& e : manifest.subset(split)) {
    const Sample s = read_sample(data_dir / e.path);
    require(s.kspace.dim(0) == e.coils, ErrorCode::Corrupt,
            "sample " + e.sample_id + " holds " + std::to_string(s.kspace.dim(0)) + " coils, manifest says " +
                std::to_string(e.coils));
    PreparedSample<T> p;
    p.sample_id = e.sample_id;
    p.mask = spec.make(s.image.dim(0), s.image.dim(1), e.mask_seed);
    p.target = s.image.cast<T>();
    p.k_masked = apply_mask(KSpace<T>(s.kspace.cast<T>()), p.mask).data;
    out.push_back(std::move(p));
  }
  return out;
}

template <typename T>
Var<T> sample_loss(const Model<T>& model, const PreparedSample<T>& s) {
  const ReconstructionOutput<T> out = forward_model(model, Var<T>::constant(s.k_masked), s.mask);
  if (model.config.arch == Arch::UNet) return nrmse_loss(s.target, out.final, kNrmseEps);
  return dual_loss(s.target, out.intermediate, out.final, model.config.alpha);
}

template <typename T>
EvalRow score(const std::string& sample_id, const std::string& model, const Tensor<T>& target, const Tensor<T>& pred) {
  const auto [x, xhat] = normalize_pair(target, pred);
  EvalRow r;
  r.sample_id = sample_id;
  r.model = model;
  r.psnr = psnr(x, xhat);
  r.ssim = ssim(x, xhat);
  r.nrmse = nrmse(x, xhat);
  return r;
}

template <typename T>
Tensor<T> reconstruct(const Model<T>& model, const PreparedSample<T>& s) {
  return forward_model(model, Var<T>::constant(s.k_masked), s.mask).final.value();
}

template <typename T>
EvalTable evaluate(const Model<T>* model, const std::string& name, const std::vector<PreparedSample<T>>& samples,
                   bool include_zero_filled) {
  EvalTable table;
  for (const auto& s : samples) {
    const Tensor<T> pred = model ? reconstruct(*model, s) : s.target;
    table.rows.push_back(score(s.sample_id, name, s.target, pred));
  }
  if (include_zero_filled)
    for (const auto& s : samples)
      table.rows.push_back(score(s.sample_id, "zero-filled", s.target, root_sum_squares(ifft2c(s.k_masked))));
  return table;
}

std::vector<EvalRow> EvalTable::means() const {
  std::vector<EvalRow> out;
  for (const auto& r : rows)
    if (std::none_of(out.begin(), out.end(), [&](const EvalRow& m) { return m.model == r.model; }))
      out.push_back(mean_of(r.model));
  return out;
}

EvalRow EvalTable::mean_of(const std::string& model) const {
  EvalRow m;
  m.sample_id = "mean";
  m.model = model;
  std::size_t n = 0;
  for (const auto& r : rows)
    if (r.model == model) {
      m.psnr += r.psnr;
      m.ssim += r.ssim;
      m.nrmse += r.nrmse;
      ++n;
    }
  require(n > 0, ErrorCode::InvalidArgument, "no rows for model " + model);
  m.psnr /= double(n);
  m.ssim /= double(n);
  m.nrmse /= double(n);
  return m;
}

std::string EvalTable::to_csv() const {
  std::ostringstream os;
  os << "sample_id,model,psnr,ssim,nrmse\n";
  auto line = [&](const EvalRow& r) {
    os << r.sample_id << ',' << r.model << ',' << format_double(r.psnr) << ',' << format_double(r.ssim) << ','
       << format_double(r.nrmse) << '\n';
  };
  for (const auto& r : rows) line(r);
  for (const auto& r : means()) line(r);
  return os.str();
}

// ---- training ---------------------------------------------------------------

namespace {

struct Progress {
  std::size_t step = 0;
  std::size_t epoch = 0;       // completed epochs
  std::size_t batch_done = 0;  // batches finished in the current epoch
  std::size_t row_start = 0;   // first step not yet covered by a metrics row
};

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string join_losses(const std::vector<double>& losses) {
  std::string s;
  for (double l : losses) s += format_double(l) + "\n";
  return s;
}

std::vector<double> split_losses(const std::string& text) {
  std::vector<double> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) out.push_back(std::stod(line));
  return out;
}

std::string steps_csv(const std::vector<double>& losses, std::size_t batches_per_epoch) {
  std::string s = "step,epoch,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i)
    s += std::to_string(i + 1) + "," + std::to_string(i / batches_per_epoch + 1) + "," + format_double(losses[i]) + "\n";
  return s;
}

template <typename T>
void save_training_checkpoint(const std::filesystem::path& path, const TrainConfig& cfg, const Model<T>& model,
                              const AdamState<T>& adam, const Progress& prog, const std::vector<double>& losses,
                              const std::string& metrics) {
  std::vector<ContainerEntry> entries;
  entries.push_back(ContainerEntry::from_text("config", model.config.to_text()));
  entries.push_back(ContainerEntry::from_text("train_config", cfg.to_text()));
  const KeyValues state{{"step", std::to_string(prog.step)},
                        {"epoch", std::to_string(prog.epoch)},
                        {"batch_done", std::to_string(prog.batch_done)},
                        {"row_start", std::to_string(prog.row_start)},
                        {"adam_t", std::to_string(adam.t)}};
  entries.push_back(ContainerEntry::from_text("state", format_key_values(state)));
  entries.push_back(ContainerEntry::from_text("history/loss", join_losses(losses)));
  entries.push_back(ContainerEntry::from_text("history/metrics", metrics));
  for (const auto& [name, v] : model.params) entries.push_back(ContainerEntry::from_tensor("param/" + name, v.value()));
  for (const auto& [name, m] : adam.m) entries.push_back(ContainerEntry::from_tensor("adam/m/" + name, m));
  for (const auto& [name, v] : adam.v) entries.push_back(ContainerEntry::from_tensor("adam/v/" + name, v));
  write_container_file(path, entries);
}

template <typename T>
void restore_training_checkpoint(const std::filesystem::path& path, Model<T>& model, AdamState<T>& adam,
                                 Progress& prog, std::vector<double>& losses, std::string& metrics) {
  const Model<T> loaded = load_model<T>(path);
  require(loaded.config == model.config, ErrorCode::InvalidArgument,
          "checkpoint " + path.string() + " was trained with a different model config");
  model = loaded;
  const auto entries = read_container_file(path);
  const KeyValues state = parse_key_values(find_entry(entries, "state").text());
  prog.step = kv_size(state, "step", 0);
  prog.epoch = kv_size(state, "epoch", 0);
  prog.batch_done = kv_size(state, "batch_done", 0);
  prog.row_start = kv_size(state, "row_start", 0);
  adam.t = kv_size(state, "adam_t", 0);
  losses = split_losses(find_entry(entries, "history/loss").text());
  metrics = find_entry(entries, "history/metrics").text();
  adam.m.clear();
  adam.v.clear();
  for (const auto& e : entries) {
    if (e.name.rfind("adam/m/", 0) == 0) adam.m.emplace(e.name.substr(7), e.to_tensor<T>());
    if (e.name.rfind("adam/v/", 0) == 0) adam.v.emplace(e.name.substr(7), e.to_tensor<T>());
  }
  require(losses.size() == prog.step, ErrorCode::Corrupt, "checkpoint loss history does not match its step count");
}

std::string metrics_row(std::size_t epoch, std::size_t step, const std::string& train_loss, const EvalTable* table,
                        const std::string& model) {
  std::string row = std::to_string(epoch) + "," + std::to_string(step) + "," + train_loss;
  if (table && !table->rows.empty()) {
    const EvalRow m = table->mean_of(model);
    row += "," + format_double(m.psnr) + "," + format_double(m.ssim) + "," + format_double(m.nrmse);
  } else {
    row += ",,,";
  }
  return row + "\n";
}

}  // namespace

template <typename T>
TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  const auto train_set = prepare_split<T>(cfg.data_dir, Split::Train, cfg.mask);
  const auto test_set = prepare_split<T>(cfg.data_dir, Split::Test, cfg.mask);
  require(!train_set.empty(), ErrorCode::InvalidArgument, "dataset has no training samples");
  for (const auto* set : {&train_set, &test_set})
    for (const auto& s : *set)
      require(s.k_masked.dim(0) == cfg.model.coils, ErrorCode::ShapeMismatch,
              "model expects " + std::to_string(cfg.model.coils) + " coils, sample " + s.sample_id + " has " +
                  std::to_string(s.k_masked.dim(0)));

  Model<T> model = build_model<T>(cfg.model, derive_seed(cfg.seed, "model"));
  AdamState<T> adam;
  adam.config.lr = cfg.lr;
  Progress prog;
  std::vector<double> losses;
  std::string metrics = std::string(kMetricsHeader) + "\n";
  const std::string name = to_string(model.config.arch);

  auto evaluate_rows = [&](std::size_t epoch, const std::string& train_loss) {
    const EvalTable table = evaluate(&model, name, test_set, false);
    metrics += metrics_row(epoch, prog.step, train_loss, &table, name);
  };
  auto pending_loss = [&]() {
    if (prog.row_start >= losses.size()) return std::string();
    double acc = 0;
    for (std::size_t i = prog.row_start; i < losses.size(); ++i) acc += losses[i];
    return format_double(acc / double(losses.size() - prog.row_start));
  };

  if (!cfg.resume.empty()) {
    restore_training_checkpoint(cfg.resume, model, adam, prog, losses, metrics);
    adam.config.lr = cfg.lr;
  } else {
    evaluate_rows(0, "");
  }

  std::filesystem::create_directories(cfg.out_dir);
  write_text_file(cfg.out_dir / "config.txt", cfg.to_text());

  const std::size_t n = train_set.size();
  const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  auto budget_left = [&] { return cfg.max_steps == 0 || prog.step < cfg.max_steps; };
  auto checkpoint_name = [&](std::size_t step) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "checkpoint_step%06zu.athv", step);
    return cfg.out_dir / buf;
  };

  while (prog.epoch < cfg.epochs && budget_left()) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(cfg.seed, "epoch/" + std::to_string(prog.epoch)));
    rng.shuffle(order);
    for (std::size_t b = prog.batch_done; b < batches && budget_left(); ++b) {
      const std::size_t lo = b * cfg.batch_size, hi = std::min(n, lo + cfg.batch_size);
      model.params.zero_grad();
      double batch_loss = 0;
      for (std::size_t i = lo; i < hi; ++i) {
        const Var<T> loss = sample_loss(model, train_set[order[i]]);
        const double value = loss.value()[0];
        require(std::isfinite(value), ErrorCode::NonFinite,
                "non-finite loss at step " + std::to_string(prog.step + 1) + " on " + train_set[order[i]].sample_id);
        batch_loss += value;
        backward(scale(loss, T(1.0 / double(hi - lo))));
      }
      adam_step(model.params, adam);
      losses.push_back(batch_loss / double(hi - lo));
      ++prog.step;
      prog.batch_done = b + 1;
      if (prog.batch_done == batches) {
        prog.batch_done = 0;
        ++prog.epoch;
        if (prog.epoch % cfg.eval_every == 0 || prog.epoch == cfg.epochs) {
          evaluate_rows(prog.epoch, pending_loss());
          prog.row_start = losses.size();
        }
      }
      if (cfg.checkpoint_every && prog.step % cfg.checkpoint_every == 0)
        save_training_checkpoint(checkpoint_name(prog.step), cfg, model, adam, prog, losses, metrics);
      if (prog.batch_done == 0) break;
    }
  }
  // A step budget can end training between evaluations; score the final state.
  if (prog.row_start < losses.size()) {
    evaluate_rows(prog.epoch + (prog.batch_done > 0 ? 1 : 0), pending_loss());
    prog.row_start = losses.size();
  }

  TrainResult result;
  result.step_losses = losses;
  result.metrics_csv = metrics;
  result.final_checkpoint = cfg.out_dir / "final.athv";
  save_training_checkpoint(result.final_checkpoint, cfg, model, adam, prog, losses, metrics);
  write_text_file(cfg.out_dir / "metrics.csv", metrics);
  write_text_file(cfg.out_dir / "steps.csv", steps_csv(losses, batches));
  return result;
}

#define ATHV_INSTANTIATE_TRAIN(T)                                                                             \
  template void adam_step(ParamStore<T>&, AdamState<T>&);                                                     \
  template std::vector<PreparedSample<T>> prepare_split(const std::filesystem::path&, Split, const MaskSpec&); \
  template Var<T> sample_loss(const Model<T>&, const PreparedSample<T>&);                                     \
  template EvalRow score(const std::string&, const std::string&, const Tensor<T>&, const Tensor<T>&);         \
  template Tensor<T> reconstruct(const Model<T>&, const PreparedSample<T>&);                                  \
  template EvalTable evaluate(const Model<T>*, const std::string&, const std::vector<PreparedSample<T>>&, bool); \
  template TrainResult train<T>(const TrainConfig&);

ATHV_INSTANTIATE_TRAIN(float)
ATHV_INSTANTIATE_TRAIN(double)

}  // namespace athv
