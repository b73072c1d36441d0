// Python bindings for the main numeric operations. Arrays cross the boundary
// as numpy float64; autodiff graphs stay on the C++ side.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sthar/attention.hpp"
#include "sthar/data.hpp"
#include "sthar/recurrent.hpp"
#include "sthar/tensor.hpp"
#include "sthar/vision.hpp"

namespace py = pybind11;
using sthar::Tensor;

namespace {

Tensor<double> from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    sthar::Shape shape(a.ndim());
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[i] = std::size_t(a.shape(i));
    std::vector<double> data(a.data(), a.data() + a.size());
    return Tensor<double>(shape, std::move(data));
}

py::array_t<double> to_array(const Tensor<double>& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> out(shape);
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

using Arr = py::array_t<double, py::array::c_style | py::array::forcecast>;

}  // namespace

PYBIND11_MODULE(_sthar, m) {
    m.doc() = "Core tensor ops, recurrent cells and attention of the action recognition library";
    m.attr("__version__") = "1.0.0";

    m.def("matmul", [](const Arr& a, const Arr& b) {
        return to_array(sthar::matmul(from_array(a), from_array(b)));
    });
    m.def("softmax_rows", [](const Arr& x) {
        return to_array(sthar::softmax_rows(from_array(x)));
    });
    m.def("layer_norm_rows", [](const Arr& x, const Arr& gain, const Arr& offset) {
        return to_array(sthar::layer_norm_rows(from_array(x), from_array(gain),
                                               from_array(offset)));
    });
    m.def("tanh", [](const Arr& x) {
        return to_array(sthar::activation(from_array(x), sthar::Act::Tanh));
    });
    m.def("sigmoid", [](const Arr& x) {
        return to_array(sthar::activation(from_array(x), sthar::Act::Sigmoid));
    });
    m.def("relu", [](const Arr& x) {
        return to_array(sthar::activation(from_array(x), sthar::Act::Relu));
    });
    m.def("elu", [](const Arr& x) {
        return to_array(sthar::activation(from_array(x), sthar::Act::Elu));
    });
    m.def(
        "conv2d",
        [](const Arr& input, const Arr& kernel, std::size_t stride, std::size_t pad) {
            return to_array(sthar::conv2d(from_array(input), from_array(kernel),
                                          Tensor<double>(), stride, pad));
        },
        py::arg("input"), py::arg("kernel"), py::arg("stride") = 1, py::arg("pad") = 0);
    m.def("maxpool2", [](const Arr& x) { return to_array(sthar::maxpool2(from_array(x))); });
    m.def("patchify", [](const Arr& x, std::size_t patch) {
        return to_array(sthar::patchify(from_array(x), patch));
    });

    m.def("rnn_step", [](const Arr& W, const Arr& U, const Arr& b, const Arr& h, const Arr& x) {
        sthar::RnnCellParams<double> p{from_array(W), from_array(U), from_array(b)};
        return to_array(sthar::vanilla_step(p, from_array(h), from_array(x)));
    });
    m.def("lstm_step",
          [](const py::dict& params, const Arr& h, const Arr& c, const Arr& x) {
              auto gate = [&](const char* name) {
                  py::dict g = params[name].cast<py::dict>();
                  return sthar::RnnCellParams<double>{from_array(g["W"].cast<Arr>()),
                                                      from_array(g["U"].cast<Arr>()),
                                                      from_array(g["b"].cast<Arr>())};
              };
              sthar::LstmParams<double> p{gate("f"), gate("i"), gate("c"), gate("o")};
              auto [h2, c2] = sthar::lstm_step(p, from_array(h), from_array(c), from_array(x));
              return py::make_tuple(to_array(h2), to_array(c2));
          });
    m.def("gru_step", [](const py::dict& params, const Arr& h, const Arr& x) {
        auto gate = [&](const char* name) {
            py::dict g = params[name].cast<py::dict>();
            return sthar::RnnCellParams<double>{from_array(g["W"].cast<Arr>()),
                                                from_array(g["U"].cast<Arr>()),
                                                from_array(g["b"].cast<Arr>())};
        };
        sthar::GruParams<double> p{gate("z"), gate("r"), gate("h")};
        return to_array(sthar::gru_step(p, from_array(h), from_array(x)));
    });

    m.def("scaled_dot_attention", [](const Arr& q, const Arr& k, const Arr& v) {
        auto [out, weights] = sthar::scaled_dot_attention(from_array(q), from_array(k),
                                                          from_array(v));
        return py::make_tuple(to_array(out), to_array(weights));
    });
    m.def("positional_table", [](std::size_t max_len, std::size_t d_model) {
        return to_array(sthar::make_positional_table<double>(max_len, d_model));
    });

    m.def(
        "synth_dataset",
        [](std::size_t clips_per_class, std::size_t clip_length, std::size_t height,
           std::size_t width, std::size_t subjects, std::uint64_t seed) {
            sthar::SyntheticSpec spec;
            spec.clips_per_class = clips_per_class;
            spec.clip_length = clip_length;
            spec.height = height;
            spec.width = width;
            spec.subjects = subjects;
            spec.seed = seed;
            sthar::Dataset ds = sthar::synth_generate(spec);
            py::list clips;
            for (const auto& clip : ds.clips) {
                py::array_t<std::uint8_t> frames(
                    {py::ssize_t(clip.frames), py::ssize_t(clip.channels),
                     py::ssize_t(clip.height), py::ssize_t(clip.width)});
                std::copy(clip.pixels.begin(), clip.pixels.end(), frames.mutable_data());
                py::dict d;
                d["frames"] = frames;
                d["label"] = clip.label;
                d["class_name"] = clip.class_name;
                d["subject"] = clip.subject;
                clips.append(d);
            }
            py::dict out;
            out["classes"] = ds.manifest.classes;
            out["clips"] = clips;
            return out;
        },
        py::arg("clips_per_class") = 4, py::arg("clip_length") = 32, py::arg("height") = 16,
        py::arg("width") = 16, py::arg("subjects") = 4, py::arg("seed") = 0);
}
