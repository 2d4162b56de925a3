#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "biolite/clahe.hpp"
#include "biolite/infer.hpp"
#include "biolite/metrics.hpp"
#include "biolite/optim.hpp"
#include "biolite/synth.hpp"
#include "biolite/version.hpp"
#include "biolite/weights.hpp"

namespace py = pybind11;
using namespace biolite;

namespace {

ImageU8 image_from_array(const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 3 || arr.shape(2) != 3) {
        throw py::value_error("image must be a (h, w, 3) uint8 array");
    }
    ImageU8 img(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
    std::copy(arr.data(), arr.data() + arr.size(), img.px.begin());
    return img;
}

py::array_t<uint8_t> image_to_array(const ImageU8& img) {
    py::array_t<uint8_t> arr({img.h, img.w, 3});
    std::copy(img.px.begin(), img.px.end(), arr.mutable_data());
    return arr;
}

Mask mask_from_array(const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2) throw py::value_error("mask must be a (h, w) uint8 array");
    Mask m(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
    std::copy(arr.data(), arr.data() + arr.size(), m.v.begin());
    return m;
}

py::array_t<uint8_t> mask_to_array(const Mask& m) {
    py::array_t<uint8_t> arr({m.h, m.w});
    std::copy(m.v.begin(), m.v.end(), arr.mutable_data());
    return arr;
}

Tensor4 tensor_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 4) throw py::value_error("tensor must be a (n, c, h, w) float32 array");
    Tensor4 t(Shape{static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)),
                    static_cast<int>(arr.shape(2)), static_cast<int>(arr.shape(3))});
    std::copy(arr.data(), arr.data() + arr.size(), t.flat().begin());
    return t;
}

py::array_t<float> tensor_to_array(const Tensor4& t) {
    const Shape& s = t.shape();
    py::array_t<float> arr({s.n, s.c, s.h, s.w});
    std::copy(t.flat().begin(), t.flat().end(), arr.mutable_data());
    return arr;
}

// Python-facing handle bundling weights and normalization constants.
struct PyModel {
    ModelParams params;
    NormConstants norm;
};

LabeledFrame frame_from_arrays(const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& image,
                               const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& mask,
                               const std::string& id) {
    LabeledFrame f;
    f.id = id;
    f.image = image_from_array(image);
    f.mask = mask_from_array(mask);
    if (f.image.h != f.mask.h || f.image.w != f.mask.w) {
        throw py::value_error("image and mask sizes differ for frame " + id);
    }
    return f;
}

py::dict report_to_dict(const EvalReport& r) {
    py::dict d;
    d["miou"] = r.miou;
    d["mean_dice"] = r.mean_dice;
    d["pixel_accuracy"] = r.pixel_accuracy;
    d["iou"] = std::vector<double>(r.iou.begin(), r.iou.end());
    d["dice"] = std::vector<double>(r.dice.begin(), r.dice.end());
    d["present"] = std::vector<bool>(r.present.begin(), r.present.end());
    return d;
}

} // namespace

PYBIND11_MODULE(_biolite, m) {
    m.doc() = "BioLite U-Net segmentation engine";
    m.attr("__version__") = kVersion;

    py::register_exception<ShapeError>(m, "BioliteShapeError", PyExc_ValueError);
    py::register_exception<DataError>(m, "BioliteDataError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "BioliteFormatError", PyExc_ValueError);

    py::class_<ArchConfig>(m, "ArchConfig")
        .def(py::init<>())
        .def_readwrite("in_channels", &ArchConfig::in_channels)
        .def_readwrite("num_classes", &ArchConfig::num_classes)
        .def_readwrite("enc_channels", &ArchConfig::enc_channels)
        .def_readwrite("bottleneck_channels", &ArchConfig::bottleneck_channels)
        .def_readwrite("dec_channels", &ArchConfig::dec_channels)
        .def("param_count", [](const ArchConfig& c) { return count_params(c); })
        .def("flops", [](const ArchConfig& c, int h, int w) { return count_flops(c, h, w); },
             py::arg("h") = 256, py::arg("w") = 256);

    py::class_<PyModel>(m, "Model")
        .def_static(
            "init",
            [](const ArchConfig& config, uint64_t seed) {
                return PyModel{build_params(config, seed), NormConstants{}};
            },
            py::arg("config") = ArchConfig{}, py::arg("seed") = 0)
        .def_static("load",
                    [](const std::string& path) {
                        LoadedModel lm = load_weights(path);
                        return PyModel{std::move(lm.params), lm.norm};
                    })
        .def("save",
             [](const PyModel& self, const std::string& path) {
                 save_weights(path, self.params, self.norm);
             })
        .def_property_readonly("config", [](const PyModel& self) { return self.params.config; })
        .def("param_count", [](const PyModel& self) { return count_params(self.params.config); })
        .def("describe",
             [](const PyModel& self, int size) {
                 return describe(self.params.config, size, size).to_text();
             },
             py::arg("size") = 256)
        .def("forward",
             [](const PyModel& self, const py::array_t<float, py::array::c_style |
                                                                  py::array::forcecast>& x) {
                 return tensor_to_array(model_forward(self.params, tensor_from_array(x)));
             },
             py::arg("x"), "Raw logits for a (n,3,h,w) float32 batch")
        .def("infer",
             [](const PyModel& self,
                const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& image,
                bool clahe_on, bool explicit_softmax) {
                 InferOptions opts;
                 opts.apply_clahe = clahe_on;
                 opts.explicit_softmax = explicit_softmax;
                 opts.norm = self.norm;
                 return mask_to_array(infer(image_from_array(image), self.params, opts));
             },
             py::arg("image"), py::arg("clahe") = true, py::arg("explicit_softmax") = false,
             "Segment an RGB uint8 image; returns a (h,w) class-index mask");

    m.def(
        "generate_dataset",
        [](int n, const std::string& difficulty, uint64_t seed, int size) {
            py::list out;
            for (auto& f : generate_dataset(n, difficulty_from_string(difficulty), seed, size,
                                            size)) {
                out.append(py::make_tuple(image_to_array(f.frame.image),
                                          mask_to_array(f.frame.mask), f.frame.id));
            }
            return out;
        },
        py::arg("n"), py::arg("difficulty") = "easy", py::arg("seed") = 0,
        py::arg("size") = 256, "Synthesize labeled frames: list of (image, mask, id)");

    m.def(
        "write_dataset",
        [](const std::string& out_dir, int n, const std::string& difficulty, uint64_t seed,
           int size) {
            write_dataset(out_dir,
                          generate_dataset(n, difficulty_from_string(difficulty), seed, size,
                                           size),
                          seed);
        },
        py::arg("out_dir"), py::arg("n"), py::arg("difficulty") = "easy", py::arg("seed") = 0,
        py::arg("size") = 256);

    m.def(
        "clahe",
        [](const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& image,
           int tiles_x, int tiles_y, double clip_limit) {
            return image_to_array(clahe(image_from_array(image), tiles_x, tiles_y, clip_limit));
        },
        py::arg("image"), py::arg("tiles_x") = 8, py::arg("tiles_y") = 8,
        py::arg("clip_limit") = 2.0);

    m.def(
        "evaluate",
        [](const std::vector<py::array_t<uint8_t, py::array::c_style | py::array::forcecast>>&
               pred,
           const std::vector<py::array_t<uint8_t, py::array::c_style | py::array::forcecast>>&
               truth) {
            if (pred.size() != truth.size() || pred.empty()) {
                throw py::value_error("evaluate: need equal, non-empty mask lists");
            }
            ConfusionMatrix cm;
            for (std::size_t i = 0; i < pred.size(); ++i) {
                cm.accumulate(mask_from_array(pred[i]), mask_from_array(truth[i]));
            }
            return report_to_dict(EvalReport::from_confusion(cm));
        },
        py::arg("pred_masks"), py::arg("true_masks"),
        "Dataset-level mIoU/Dice/pixel-accuracy over mask lists");

    m.def(
        "train",
        [](const std::vector<py::tuple>& train_frames,
           const std::vector<py::tuple>& val_frames, py::kwargs kwargs) {
            TrainConfig config;
            if (kwargs.contains("lr")) config.lr = kwargs["lr"].cast<float>();
            if (kwargs.contains("weight_decay"))
                config.weight_decay = kwargs["weight_decay"].cast<float>();
            if (kwargs.contains("batch_size"))
                config.batch_size = kwargs["batch_size"].cast<int>();
            if (kwargs.contains("max_epochs"))
                config.max_epochs = kwargs["max_epochs"].cast<int>();
            if (kwargs.contains("seed")) config.seed = kwargs["seed"].cast<uint64_t>();
            if (kwargs.contains("augment")) config.augment = kwargs["augment"].cast<bool>();
            if (kwargs.contains("clahe")) config.apply_clahe = kwargs["clahe"].cast<bool>();
            if (kwargs.contains("input_size"))
                config.input_size = kwargs["input_size"].cast<int>();

            auto to_frames = [](const std::vector<py::tuple>& tuples, const char* tag) {
                std::vector<LabeledFrame> frames;
                int i = 0;
                for (const auto& t : tuples) {
                    if (t.size() < 2) throw py::value_error("frames must be (image, mask) tuples");
                    frames.push_back(frame_from_arrays(
                        t[0].cast<py::array_t<uint8_t, py::array::c_style | py::array::forcecast>>(),
                        t[1].cast<py::array_t<uint8_t, py::array::c_style | py::array::forcecast>>(),
                        tag + std::to_string(i++)));
                }
                return frames;
            };
            auto tr = to_frames(train_frames, "train_");
            auto va = to_frames(val_frames, "val_");

            ModelParams model =
                build_params(ArchConfig{}, derive_seed(config.seed, "model-seed"));
            TrainResult result = train(tr, va, std::move(model), config);

            py::list log;
            for (const auto& e : result.log.epochs) {
                py::dict d;
                d["epoch"] = e.epoch;
                d["train_loss"] = e.train_loss;
                d["val_loss"] = e.val_loss;
                d["val_dice"] = e.val_dice;
                d["val_miou"] = e.val_miou;
                d["lr"] = e.lr;
                log.append(d);
            }
            return py::make_tuple(PyModel{std::move(result.best_params), NormConstants{}}, log);
        },
        py::arg("train_frames"), py::arg("val_frames"),
        "Train on (image, mask) tuples; returns (Model, epoch log)");
}
