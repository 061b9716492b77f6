#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "athv/cli.hpp"
#include "athv/data.hpp"
#include "athv/masks.hpp"
#include "athv/metrics.hpp"
#include "athv/train.hpp"
#include "athv/varnet.hpp"

namespace py = pybind11;
using namespace athv;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor<double> from_numpy(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  Tensor<double> t(shape);
  std::copy(a.data(), a.data() + a.size(), t.data().begin());
  return t;
}

template <typename T>
Array to_numpy(const Tensor<T>& t) {
  Array a(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.data().begin(), t.data().end(), a.mutable_data());
  return a;
}

py::array_t<std::uint8_t> mask_pattern(const Mask& m) {
  py::array_t<std::uint8_t> a({py::ssize_t(m.height), py::ssize_t(m.width)});
  std::copy(m.pattern.begin(), m.pattern.end(), a.mutable_data());
  return a;
}

}  // namespace

PYBIND11_MODULE(athv_py, m) {
  m.doc() = "Undersampled multi-coil MRI reconstruction: k-space operators, masks, metrics and unrolled networks";

  py::register_exception<Error>(m, "AthvError", PyExc_RuntimeError);

  m.def("fft2c", [](const Array& x) { return to_numpy(fft2c(from_numpy(x))); }, py::arg("x"),
        "Centered orthonormal 2-D DFT over the last two axes of a [..., 2, H, W] array.");
  m.def("ifft2c", [](const Array& x) { return to_numpy(ifft2c(from_numpy(x))); }, py::arg("x"));
  m.def("root_sum_squares", [](const Array& x) { return to_numpy(root_sum_squares(from_numpy(x))); }, py::arg("x"));

  py::class_<Mask>(m, "Mask")
      .def_property_readonly("pattern", &mask_pattern)
      .def_property_readonly("kind", [](const Mask& k) { return to_string(k.kind); })
      .def_readonly("accel", &Mask::accel)
      .def_readonly("center_fraction", &Mask::center_fraction)
      .def_readonly("seed", &Mask::seed)
      .def("sampled", &Mask::sampled)
      .def("sampled_columns", &Mask::sampled_columns)
      .def_property_readonly("center", [](const Mask& k) {
        return py::make_tuple(k.center.row0, k.center.rows, k.center.col0, k.center.cols);
      });

  m.def(
      "make_mask",
      [](std::size_t h, std::size_t w, double accel, double center_fraction, const std::string& kind,
         double sigma_scale, std::uint64_t seed) {
        MaskSpec s;
        s.kind = parse_mask_kind(kind);
        s.accel = accel;
        s.center_fraction = center_fraction;
        s.sigma_scale = sigma_scale;
        return s.make(h, w, seed);
      },
      py::arg("height"), py::arg("width"), py::arg("accel") = 4.0, py::arg("center_fraction") = 0.08,
      py::arg("kind") = "random", py::arg("sigma_scale") = 0.25, py::arg("seed") = 0);
  m.def(
      "apply_mask",
      [](const Array& k, const Mask& mask) { return to_numpy(apply_mask(KSpace<double>(from_numpy(k)), mask).data); },
      py::arg("kspace"), py::arg("mask"));

  m.def(
      "make_phantom",
      [](std::size_t size, std::size_t n_ellipses, std::uint64_t seed) {
        PhantomSpec s;
        s.size = size;
        s.n_ellipses = n_ellipses;
        s.seed = seed;
        return to_numpy(make_phantom<double>(s));
      },
      py::arg("size") = 64, py::arg("n_ellipses") = 10, py::arg("seed") = 0);
  m.def("make_coil_maps",
        [](std::size_t n, std::size_t h, std::size_t w) { return to_numpy(make_coil_maps<double>(n, h, w).maps); },
        py::arg("coils"), py::arg("height"), py::arg("width"));
  m.def(
      "simulate_acquisition",
      [](const Array& x, const Array& maps, double sigma, std::uint64_t seed) {
        return to_numpy(
            simulate_acquisition(from_numpy(x), SensitivityMaps<double>(from_numpy(maps)), sigma, seed).data);
      },
      py::arg("image"), py::arg("maps"), py::arg("noise_sigma") = 0.0, py::arg("seed") = 0);
  m.def(
      "generate_dataset",
      [](const std::filesystem::path& dir, std::size_t count, std::size_t size, std::size_t coils,
         std::size_t n_ellipses, double noise_sigma, double train_ratio, std::uint64_t seed) {
        DataSpec s{count, size, coils, n_ellipses, noise_sigma, train_ratio, seed};
        std::filesystem::create_directories(dir);
        return generate_dataset(s, dir).count(Split::Train);
      },
      py::arg("directory"), py::arg("count") = 20, py::arg("size") = 64, py::arg("coils") = 4,
      py::arg("n_ellipses") = 10, py::arg("noise_sigma") = 0.002, py::arg("train_ratio") = 0.8, py::arg("seed") = 0,
      "Writes sample files and manifest.txt; returns the number of training samples.");

  m.def("nrmse", [](const Array& x, const Array& y) { return nrmse(from_numpy(x), from_numpy(y)); });
  m.def("psnr", [](const Array& x, const Array& y) { return psnr(from_numpy(x), from_numpy(y)); });
  m.def("ssim", [](const Array& x, const Array& y) { return ssim(from_numpy(x), from_numpy(y)); });
  m.def(
      "priority_scores",
      [](const std::string& text) {
        const auto records = parse_ranking_file(text);
        std::vector<std::pair<std::string, double>> out;
        if (!records.empty())
          for (const auto& name : records.front().order) out.emplace_back(name, priority_score(records, name));
        return out;
      },
      py::arg("ranking_text"), "Priority score per model for `slice_id,model=rank,...` lines.");

  py::class_<Model<double>>(m, "Model")
      .def_static("load", &load_model<double>, py::arg("path"))
      .def_static(
          "build",
          [](const std::string& config_text, std::uint64_t seed) {
            return build_model<double>(ModelConfig::from_text(config_text), seed);
          },
          py::arg("config_text"), py::arg("seed") = 0)
      .def("save", [](const Model<double>& self, const std::filesystem::path& p) { save_model(self, p); })
      .def_property_readonly("arch", [](const Model<double>& self) { return to_string(self.config.arch); })
      .def_property_readonly("config_text", [](const Model<double>& self) { return self.config.to_text(); })
      .def("parameter_count", [](const Model<double>& self) { return self.params.parameter_count(); })
      .def(
          "reconstruct",
          [](const Model<double>& self, const Array& k_masked, const Mask& mask) {
            const auto r = forward_model(self, Var<double>::constant(from_numpy(k_masked)), mask);
            return py::make_tuple(to_numpy(r.intermediate.value()), to_numpy(r.final.value()));
          },
          py::arg("k_masked"), py::arg("mask"), "Returns (intermediate, final) magnitude images.");

  m.def(
      "train",
      [](const std::string& config_text) {
        const TrainConfig cfg = TrainConfig::from_text(config_text);
        py::gil_scoped_release release;
        return cfg.f64 ? train<double>(cfg).step_losses : train<float>(cfg).step_losses;
      },
      py::arg("config_text"), "Runs training from `key = value` text; returns the per-step losses.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
