#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "bnn/errors.hpp"
#include "bnn/harness.hpp"
#include "bnn/kernels.hpp"
#include "bnn/model_io.hpp"
#include "bnn/tensor_io.hpp"
#include "bnn/zoo.hpp"

namespace py = pybind11;
using namespace bnn;

namespace {

template <class T>
using Array = py::array_t<T, py::array::c_style | py::array::forcecast>;

Shape shape_of(const py::array& a) {
  if (a.ndim() != 4) throw DimensionError("expected a 4-d NHWC array, got " + std::to_string(a.ndim()) + "-d");
  return Shape{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
               static_cast<std::size_t>(a.shape(2)), static_cast<std::size_t>(a.shape(3))};
}

py::tuple shape_tuple(const Shape& s) { return py::make_tuple(s.n, s.h, s.w, s.c); }

template <class T>
std::vector<T> to_vector(const Array<T>& a) {
  return std::vector<T>(a.data(), a.data() + a.size());
}

template <class T>
py::array_t<T> to_array(const Shape& s, std::span<const T> data) {
  py::array_t<T> out({s.n, s.h, s.w, s.c});
  std::memcpy(out.mutable_data(), data.data(), data.size() * sizeof(T));
  return out;
}

ByteTensor image_from(const Array<std::uint8_t>& img) {
  return ByteTensor(shape_of(img), to_vector(img));
}

PackedVectorView<> view_of(const Array<std::uint64_t>& words, std::size_t len) {
  return PackedVectorView<>(std::span<const std::uint64_t>(words.data(), static_cast<std::size_t>(words.size())),
                            len);
}

py::array_t<std::uint64_t> words_of(const BitTensor& t) {
  py::array_t<std::uint64_t> out(static_cast<py::ssize_t>(t.words().size()));
  std::memcpy(out.mutable_data(), t.words().data(), t.words().size() * sizeof(std::uint64_t));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Packed binary neural network inference engine";

  auto base = py::register_exception<Error>(m, "BnnError", PyExc_RuntimeError);
  py::register_exception<InvalidValueError>(m, "InvalidValueError", base);
  py::register_exception<DimensionError>(m, "DimensionError", base);
  py::register_exception<InvalidParameterError>(m, "InvalidParameterError", base);
  py::register_exception<PrunableChannelError>(m, "PrunableChannelError", base);
  py::register_exception<GraphError>(m, "GraphError", base);
  py::register_exception<FormatError>(m, "FormatError", base);
  py::register_exception<IoError>(m, "IoError", base);

  py::class_<BitTensor>(m, "BitTensor")
      .def_property_readonly("shape", [](const BitTensor& t) { return shape_tuple(t.shape()); })
      .def_property_readonly("words_per_pixel", &BitTensor::words_per_pixel)
      .def_property_readonly("words", &words_of, "Copy of the packed 64-bit words")
      .def("bit", &BitTensor::bit, py::arg("n"), py::arg("h"), py::arg("w"), py::arg("c"))
      .def("__eq__", [](const BitTensor& a, const BitTensor& b) { return a == b; });

  m.def(
      "pack_channels",
      [](const Array<std::int8_t>& signs) {
        return pack_channels(SignTensor(shape_of(signs), to_vector(signs)));
      },
      py::arg("signs"), "Packs a +/-1 int8 NHWC array along channels (bit 0 = channel 0).");
  m.def(
      "unpack_channels",
      [](const BitTensor& t) { return to_array<std::int8_t>(t.shape(), unpack_channels(t).data()); },
      py::arg("packed"));
  m.def(
      "split_bitplanes",
      [](const Array<std::uint8_t>& img) {
        const auto planes = split_bitplanes(image_from(img));
        return std::vector<BitTensor>(planes.begin(), planes.end());
      },
      py::arg("image"), "Eight raw {0,1} planes; element i holds bit i of every byte.");
  m.def(
      "binary_dot",
      [](const Array<std::uint64_t>& a, const Array<std::uint64_t>& b, std::size_t len) {
        return binary_dot(view_of(a, len), view_of(b, len));
      },
      py::arg("a"), py::arg("b"), py::arg("length"));
  m.def(
      "plane_dot",
      [](const Array<std::uint64_t>& plane, const Array<std::uint64_t>& w, std::size_t len) {
        return plane_dot(view_of(plane, len), view_of(w, len));
      },
      py::arg("plane"), py::arg("weights"), py::arg("length"));

  py::class_<NetworkGraph>(m, "Model")
      .def_static(
          "load", [](const std::filesystem::path& p) { return load_model(p); }, py::arg("path"))
      .def_static(
          "from_bytes",
          [](const py::bytes& b) {
            const std::string s = b;
            return deserialize_model(std::span<const std::uint8_t>(
                reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
          },
          py::arg("data"))
      .def_static(
          "generate",
          [](const std::string& topology, std::size_t input_size, std::uint64_t seed) {
            const zoo::Topology t = zoo::by_name(topology, input_size, seed);
            return build(t.specs, t.input);
          },
          py::arg("topology"), py::arg("input_size") = 0, py::arg("seed") = 1,
          "Random-weight model: yolov2-tiny, alexnet, vgg16 or tiny.")
      .def("save", [](const NetworkGraph& g, const std::filesystem::path& p) { save_model(g, p); },
           py::arg("path"))
      .def("to_bytes",
           [](const NetworkGraph& g) {
             const auto bytes = serialize_model(g);
             return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
           })
      .def_property_readonly("input_shape", [](const NetworkGraph& g) { return shape_tuple(g.input_shape()); })
      .def_property_readonly("output_shape", [](const NetworkGraph& g) { return shape_tuple(g.final_shape()); })
      .def_property_readonly("layer_names",
                             [](const NetworkGraph& g) {
                               std::vector<std::string> names;
                               for (std::size_t i = 0; i < g.size(); ++i) names.push_back(g.layer_name(i));
                               return names;
                             })
      .def_property_readonly("layer_kinds",
                             [](const NetworkGraph& g) {
                               std::vector<std::string> kinds;
                               for (const auto& l : g.layers()) kinds.emplace_back(layer_kind_name(l));
                               return kinds;
                             })
      .def("__len__", &NetworkGraph::size)
      .def(
          "infer",
          [](const NetworkGraph& g, const Array<std::uint8_t>& img, std::size_t threads) {
            const ByteTensor input = image_from(img);
            FloatTensor out;
            {
              py::gil_scoped_release release;
              out = infer(g, input, Executor(threads)).output;
            }
            return to_array<float>(out.shape(), out.data());
          },
          py::arg("image"), py::arg("threads") = 1, "uint8 NHWC image in, float32 NHWC output.")
      .def(
          "verify",
          [](const NetworkGraph& g, std::size_t trials, std::uint64_t seed) {
            py::gil_scoped_release release;
            const VerifyReport r = verify_model(g, trials, seed);
            return std::make_pair(r.ok(), r.to_string());
          },
          py::arg("trials") = 20, py::arg("seed") = 0,
          "Returns (ok, report) after comparing every layer with the reference path.")
      .def(
          "bench_json",
          [](const NetworkGraph& g, std::size_t repeats, std::size_t threads, bool oracle_check) {
            py::gil_scoped_release release;
            return bench_model(g, repeats, Executor(threads), oracle_check).to_json();
          },
          py::arg("repeats") = 5, py::arg("threads") = 1, py::arg("oracle_check") = true);

  m.def(
      "write_image", [](const Array<std::uint8_t>& img, const std::filesystem::path& p) { save_image(image_from(img), p); },
      py::arg("image"), py::arg("path"));
  m.def(
      "read_image",
      [](const std::filesystem::path& p) {
        const ByteTensor t = load_image(p);
        return to_array<std::uint8_t>(t.shape(), t.data());
      },
      py::arg("path"));
  m.def(
      "read_float_tensor",
      [](const std::filesystem::path& p) {
        const FloatTensor t = load_float_tensor(p);
        return to_array<float>(t.shape(), t.data());
      },
      py::arg("path"));
}
