#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "jse/config.hpp"
#include "jse/metrics.hpp"
#include "jse/pipelines.hpp"

namespace py = pybind11;
using namespace jse;

namespace {

using RealArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using ComplexArray = py::array_t<Complex, py::array::c_style | py::array::forcecast>;

/// [channels, samples]; 1-D input is one channel.
Signal to_signal(const RealArray& a) {
  if (a.ndim() == 1) {
    return Signal::mono(std::vector<double>(a.data(), a.data() + a.shape(0)));
  }
  if (a.ndim() != 2) throw InvalidInput("signal must be 1-D or [channels, samples]");
  Signal s(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), s.raw().begin());
  return s;
}

RealArray from_signal(const Signal& s) {
  RealArray a({s.channels(), s.samples()});
  std::copy(s.raw().begin(), s.raw().end(), a.mutable_data());
  return a;
}

/// [frames, bins, channels].
ComplexArray from_spectrogram(const Spectrogram& s) {
  ComplexArray a({s.frames(), s.bins(), s.channels()});
  std::copy(s.raw().begin(), s.raw().end(), a.mutable_data());
  return a;
}

Spectrogram to_spectrogram(const ComplexArray& a, const WindowSpec& w, double fs) {
  if (a.ndim() != 3) throw InvalidInput("spectrogram must be [frames, bins, channels]");
  Spectrogram s(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                static_cast<std::size_t>(a.shape(2)));
  s.window = w;
  s.sample_rate = fs;
  std::copy(a.data(), a.data() + a.size(), s.raw().begin());
  return s;
}

WindowSpec window_spec(const std::string& kind, std::size_t length, std::size_t hop) {
  if (kind == "hann") return WindowSpec::hann(length, hop);
  if (kind == "rectangular") return WindowSpec::rectangular(length, hop);
  throw InvalidInput("window must be 'hann' or 'rectangular'");
}

py::array_t<float> from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.dims.begin(), t.dims.end());
  py::array_t<float> a(shape);
  std::copy(t.data.begin(), t.data.end(), a.mutable_data());
  return a;
}

Tensor to_tensor(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  Tensor t;
  for (py::ssize_t i = 0; i < a.ndim(); ++i) t.dims.push_back(static_cast<std::uint32_t>(a.shape(i)));
  t.data.assign(a.data(), a.data() + a.size());
  return t;
}

py::dict metric_dict(const MetricValues& v) {
  py::dict d;
  for (std::size_t i = 0; i < 6; ++i) d[MetricValues::kNames[i]] = v[i];
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Joint echo cancellation, dereverberation and noise reduction";

  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<SingularSystem>(m, "SingularSystem", PyExc_RuntimeError);
  py::register_exception<NumericalFailure>(m, "NumericalFailure", PyExc_RuntimeError);

  m.def(
      "stft",
      [](const RealArray& x, std::size_t length, std::size_t hop, const std::string& window, double fs) {
        return from_spectrogram(stft(to_signal(x), window_spec(window, length, hop), fs));
      },
      py::arg("x"), py::arg("length") = 1024, py::arg("hop") = 256, py::arg("window") = "hann",
      py::arg("sample_rate") = 16000.0, "STFT of a [channels, samples] signal; returns [frames, bins, channels].");
  m.def(
      "istft",
      [](const ComplexArray& spec, std::size_t samples, std::size_t length, std::size_t hop, const std::string& window) {
        return from_signal(istft(to_spectrogram(spec, window_spec(window, length, hop), 16000.0), samples));
      },
      py::arg("spec"), py::arg("samples"), py::arg("length") = 1024, py::arg("hop") = 256, py::arg("window") = "hann");

  py::class_<RoomConfig>(m, "RoomConfig")
      .def(py::init<>())
      .def_readwrite("rt60", &RoomConfig::rt60)
      .def_readwrite("rir_length", &RoomConfig::rir_length)
      .def_readwrite("num_mics", &RoomConfig::num_mics)
      .def_readwrite("direct_delay", &RoomConfig::direct_delay)
      .def_readwrite("tail_gain", &RoomConfig::tail_gain)
      .def_readwrite("seed", &RoomConfig::seed);

  py::class_<SceneConfig>(m, "SceneConfig")
      .def(py::init<>())
      .def_readwrite("ser_db", &SceneConfig::ser_db)
      .def_readwrite("snr_db", &SceneConfig::snr_db)
      .def_readwrite("clip_level", &SceneConfig::clip_level)
      .def_readwrite("t_e", &SceneConfig::t_e)
      .def_readwrite("period_len", &SceneConfig::period_len)
      .def_readwrite("sample_rate", &SceneConfig::sample_rate)
      .def_readwrite("echo_rir_length", &SceneConfig::echo_rir_length)
      .def_readwrite("room", &SceneConfig::room)
      .def_readwrite("seed", &SceneConfig::seed)
      .def("validate", &SceneConfig::validate);

  py::class_<Scene>(m, "Scene")
      .def_property_readonly("x", [](const Scene& s) { return from_signal(s.x); })
      .def_property_readonly("u", [](const Scene& s) { return from_signal(s.u); })
      .def_property_readonly("s_e", [](const Scene& s) { return from_signal(s.s_e); })
      .def_property_readonly("s_l", [](const Scene& s) { return from_signal(s.s_l); })
      .def_property_readonly("y", [](const Scene& s) { return from_signal(s.y); })
      .def_property_readonly("b", [](const Scene& s) { return from_signal(s.b); })
      .def_property_readonly("d", [](const Scene& s) { return from_signal(s.d); })
      .def_readonly("config", &Scene::config)
      .def_property_readonly("periods", [](const Scene& s) {
        py::list out;
        for (const Period& p : s.periods) out.append(py::make_tuple(p.start, p.end, to_string(p.label)));
        return out;
      });

  m.def("synth_scene", &synth_scene, py::arg("config") = SceneConfig{});
  m.def("read_scene", &read_scene, py::arg("path"));
  m.def("write_scene", &write_scene, py::arg("scene"), py::arg("path"));
  m.def("measured_ser_db", &measured_ser_db);
  m.def("measured_snr_db", &measured_snr_db);

  m.def(
      "run_pipeline",
      [](const RealArray& d, const RealArray& x, const std::string& topology, const std::string& provider,
         const Scene* scene, int iterations, std::size_t echo_taps, std::size_t dereverb_taps, std::size_t delay,
         std::size_t window_length, std::size_t window_hop) {
        PipelineConfig cfg;
        cfg.topology = topology_from_string(topology);
        cfg.provider = ProviderSpec::parse(provider);
        cfg.iterations = iterations;
        cfg.echo_taps = echo_taps;
        cfg.dereverb_taps = dereverb_taps;
        cfg.delay = delay;
        cfg.window = WindowSpec::hann(window_length, window_hop);
        const Signal ds = to_signal(d), xs = to_signal(x);
        PipelineOutput out;
        {
          py::gil_scoped_release release;
          out = run_pipeline(ds, xs, cfg, scene, scene ? scene->config.sample_rate : 16000.0);
        }
        py::dict r;
        r["s_hat"] = from_signal(out.s_hat_wave);
        r["loglik"] = out.loglik;
        r["provider"] = out.provider;
        r["timings"] = out.timings;
        py::list sub;
        for (const auto& s : out.substeps) sub.append(py::make_tuple(s.iteration, s.step, s.value));
        r["substeps"] = sub;
        return r;
      },
      py::arg("d"), py::arg("x"), py::arg("topology") = "joint", py::arg("provider") = "oracle",
      py::arg("scene") = nullptr, py::arg("iterations") = 3, py::arg("echo_taps") = 10, py::arg("dereverb_taps") = 10,
      py::arg("delay") = 3, py::arg("window_length") = 1024, py::arg("window_hop") = 256,
      "Enhance d [M, T] given the far-end x. The oracle provider needs the scene.");

  m.def(
      "evaluate",
      [](const RealArray& s_hat, const Scene& scene) {
        const MetricsReport rep = evaluate(to_signal(s_hat), scene);
        py::dict out;
        out["average"] = metric_dict(rep.average);
        py::dict periods;
        for (const auto& p : rep.periods) periods[py::str(to_string(p.period.label))] = metric_dict(p.mean);
        out["periods"] = periods;
        return out;
      },
      py::arg("s_hat"), py::arg("scene"));

  m.def("kl_divergence", &kl_divergence, py::arg("target"), py::arg("predicted"));

  m.def(
      "read_archive",
      [](const std::filesystem::path& path) {
        py::dict out;
        for (const auto& [name, t] : read_archive(path)) out[py::str(name)] = from_tensor(t);
        return out;
      },
      py::arg("path"), "NNJT archive as an ordered {name: float32 array} dict.");
  m.def(
      "write_archive",
      [](const std::filesystem::path& path, const py::dict& tensors) {
        TensorArchive a;
        for (const auto& [k, v] : tensors) {
          a.emplace_back(py::cast<std::string>(k),
                         to_tensor(py::cast<py::array_t<float, py::array::c_style | py::array::forcecast>>(v)));
        }
        write_archive(path, a);
      },
      py::arg("path"), py::arg("tensors"));

  m.def(
      "lstm_forward",
      [](const py::dict& weights, const RealArray& features) {
        TensorArchive a;
        for (const auto& [k, v] : weights) {
          a.emplace_back(py::cast<std::string>(k),
                         to_tensor(py::cast<py::array_t<float, py::array::c_style | py::array::forcecast>>(v)));
        }
        if (features.ndim() != 2) throw InvalidInput("features must be [frames, width]");
        FeatureTensor f{static_cast<std::size_t>(features.shape(0)), 1, static_cast<std::size_t>(features.shape(1)),
                        std::vector<double>(features.data(), features.data() + features.size())};
        const FeatureTensor out = lstm_forward(LstmWeights::from_archive(a), f);
        RealArray r({out.frames, out.width});
        std::copy(out.values.begin(), out.values.end(), r.mutable_data());
        return r;
      },
      py::arg("weights"), py::arg("features"), "Two-layer LSTM with ReLU head on [frames, width] features.");
}
