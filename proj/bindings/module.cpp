// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0
//
// Python bindings for the main operations: metrics, the closed-form degrader,
// corpus synthesis, checkpoint loading, restoration and parameter counting.
// Images cross the boundary as (H, W, 3) float64 arrays in [0, 1].

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <string>

#include <json.hpp>

#include "udc/checkpoint.hpp"
#include "udc/closed_loop.hpp"
#include "udc/config.hpp"
#include "udc/dataset.hpp"
#include "udc/error.hpp"
#include "udc/metrics.hpp"
#include "udc/nn/optim.hpp"
#include "udc/nn/tensor.hpp"
#include "udc/sgm.hpp"

namespace py = pybind11;

namespace {

udc::Image image_from_array(const py::array_t<double>& arr) {
  py::buffer_info info = arr.request();
  if (info.ndim != 3 || info.shape[2] != 3)
    throw udc::DimensionError("expected an (H, W, 3) float64 array");
  int h = static_cast<int>(info.shape[0]);
  int w = static_cast<int>(info.shape[1]);
  udc::Image img(h, w);
  auto view = arr.unchecked<3>();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = view(y, x, c);
  return img;
}

py::array_t<double> array_from_image(const udc::Image& img) {
  py::array_t<double> arr({img.height, img.width, 3});
  auto view = arr.mutable_unchecked<3>();
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) view(y, x, c) = img.at(y, x, c);
  return arr;
}

udc::SgmConfig sgm_from_json_str(const std::string& text) {
  return nlohmann::json::parse(text).get<udc::SgmConfig>();
}

class PyRestorer {
 public:
  explicit PyRestorer(const std::string& path) : restorer_(udc::load_restorer(path)) {
    if (!restorer_->frozen() && restorer_->stats_ready()) restorer_->freeze_bn();
  }
  PyRestorer(const std::string& config_json, uint64_t seed)
      : restorer_(std::make_unique<udc::Restorer>(
            nlohmann::json::parse(config_json).get<udc::RestorerConfig>(),
            udc::RngStream(seed))) {}

  py::array_t<double> restore(const py::array_t<double>& arr) {
    udc::Image img = image_from_array(arr);
    udc::nn::Tensor y = udc::nn::tensor_from_image(img);
    udc::nn::Tensor out = restorer_->restore(
        y, restorer_->frozen() ? udc::nn::NormMode::frozen
                               : udc::nn::NormMode::minibatch);
    return array_from_image(udc::nn::image_from_tensor(out, 0));
  }

  size_t count_params() const { return restorer_->count_params(); }
  long long count_macs(int h, int w) const { return restorer_->count_macs(h, w); }
  bool frozen() const { return restorer_->frozen(); }
  std::string config_json() const {
    return nlohmann::json(restorer_->config()).dump();
  }

 private:
  std::unique_ptr<udc::Restorer> restorer_;
};

class PyGenerator {
 public:
  explicit PyGenerator(const std::string& path) : gen_(udc::load_generator(path)) {}
  PyGenerator(const std::string& config_json, uint64_t seed)
      : gen_(std::make_unique<udc::Generator>(
            nlohmann::json::parse(config_json).get<udc::GenConfig>(),
            udc::RngStream(seed))) {}

  py::array_t<double> generate(const py::array_t<double>& arr, uint64_t seed) {
    udc::Image img = image_from_array(arr);
    udc::nn::Tensor x = udc::nn::tensor_from_image(img);
    udc::RngStream rng(seed);
    udc::nn::Tensor y = gen_->generate(x, rng);
    return array_from_image(udc::nn::image_from_tensor(y, 0));
  }

  size_t count_params() const { return gen_->params().scalar_count(); }
  std::string config_json() const { return nlohmann::json(gen_->config()).dump(); }

 private:
  std::unique_ptr<udc::Generator> gen_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "under-display camera degradation and restoration core";

  // Base goes first: translators run newest-first, so the specific kinds must
  // be registered after the catch-all.
  auto base = py::register_exception<udc::Error>(m, "UdcError");
  py::register_exception<udc::IntegrityError>(m, "IntegrityError", base.ptr());
  py::register_exception<udc::TrainingAbort>(m, "TrainingAbort", base.ptr());

  m.def("psnr",
        [](const py::array_t<double>& a, const py::array_t<double>& b) {
          return udc::psnr(image_from_array(a), image_from_array(b));
        },
        py::arg("image"), py::arg("reference"),
        "Peak signal-to-noise ratio in dB, capped at 99.");
  m.def("ssim",
        [](const py::array_t<double>& a, const py::array_t<double>& b) {
          return udc::ssim(image_from_array(a), image_from_array(b));
        },
        py::arg("image"), py::arg("reference"),
        "Mean structural similarity over an 11x11 Gaussian window.");

  m.def("sgm_degrade",
        [](const py::array_t<double>& img, const std::string& config_json,
           uint64_t seed) {
          udc::SgmConfig cfg = sgm_from_json_str(config_json);
          udc::RngStream rng(seed);
          return array_from_image(udc::sgm_degrade(image_from_array(img), cfg, rng));
        },
        py::arg("image"), py::arg("config_json"), py::arg("seed"),
        "Scale, convolve, add heteroscedastic noise and quantize.");

  m.def("oracle_preset_json",
        [](const std::string& name) {
          return nlohmann::json(udc::oracle_preset(name)).dump();
        },
        py::arg("name"), "Built-in degrader presets: poled, toled.");

  m.def("make_preset_psf", &udc::make_preset_psf, py::arg("size"),
        "Anisotropic two-lobe kernel, unit sum, row-major.");

  m.def("synth_clean_image",
        [](int height, int width, uint64_t seed) {
          udc::RngStream rng(seed);
          return array_from_image(udc::synth_clean_image(height, width, rng));
        },
        py::arg("height"), py::arg("width"), py::arg("seed"),
        "Procedural scene used by the desk experiments.");

  m.def("cosine_lr", &udc::nn::cosine_lr, py::arg("step"), py::arg("total"),
        py::arg("lr0"), py::arg("lr_min"),
        "Cosine decay from lr0 at step 0 to lr_min at step total.");

  m.def("count_restorer_params",
        [](const std::string& config_json) {
          udc::RestorerConfig cfg =
              nlohmann::json::parse(config_json).get<udc::RestorerConfig>();
          udc::Restorer r(cfg, udc::RngStream(0));
          return r.count_params();
        },
        py::arg("config_json") = "{}",
        "Trainable parameter count for a restorer architecture.");

  m.def("default_restorer_config_json",
        [] { return nlohmann::json(udc::RestorerConfig{}).dump(); });
  m.def("default_generator_config_json",
        [] { return nlohmann::json(udc::GenConfig{}).dump(); });

  py::class_<PyRestorer>(m, "Restorer")
      .def(py::init<const std::string&, uint64_t>(), py::arg("config_json") = "{}",
           py::arg("seed") = 0)
      .def_static("load", [](const std::string& p) { return new PyRestorer(p); },
                  py::arg("path"))
      .def("restore", &PyRestorer::restore, py::arg("image"))
      .def("count_params", &PyRestorer::count_params)
      .def("count_macs", &PyRestorer::count_macs, py::arg("height"), py::arg("width"))
      .def_property_readonly("frozen", &PyRestorer::frozen)
      .def("config_json", &PyRestorer::config_json);

  py::class_<PyGenerator>(m, "Generator")
      .def(py::init<const std::string&, uint64_t>(), py::arg("config_json") = "{}",
           py::arg("seed") = 0)
      .def_static("load", [](const std::string& p) { return new PyGenerator(p); },
                  py::arg("path"))
      .def("generate", &PyGenerator::generate, py::arg("image"), py::arg("seed"))
      .def("count_params", &PyGenerator::count_params)
      .def("config_json", &PyGenerator::config_json);
}
