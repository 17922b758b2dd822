#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <vector>

#include "ablate/container.hpp"
#include "ablate/dataset.hpp"
#include "ablate/descriptive.hpp"
#include "ablate/error.hpp"
#include "ablate/harness.hpp"
#include "ablate/network.hpp"
#include "ablate/perturb.hpp"
#include "ablate/rng.hpp"
#include "ablate/stats.hpp"
#include "ablate/train.hpp"

namespace py = pybind11;
using namespace ablate;

namespace {

Tensor tensor_from_array(const py::array& array) {
  const auto arr = py::array_t<float, py::array::c_style | py::array::forcecast>::ensure(array);
  if (!arr) throw ValidationError("expected a numeric array");
  std::vector<std::int64_t> shape(arr.ndim());
  for (py::ssize_t i = 0; i < arr.ndim(); ++i) shape[static_cast<std::size_t>(i)] = arr.shape(i);
  std::vector<float> data(arr.data(), arr.data() + arr.size());
  return Tensor(std::move(shape), std::move(data));
}

py::array_t<float> array_from_tensor(const Tensor& t) {
  py::array_t<float> out(t.shape);
  std::copy(t.data.begin(), t.data.end(), out.mutable_data());
  return out;
}

std::vector<int> labels_from_array(const py::array& array) {
  const auto arr = py::array_t<int, py::array::c_style | py::array::forcecast>::ensure(array);
  if (!arr || arr.ndim() != 1) throw ValidationError("labels must be a 1-d integer array");
  return std::vector<int>(arr.data(), arr.data() + arr.size());
}

Dataset dataset_from_arrays(const py::array& images, const py::array& labels, int class_count) {
  Dataset data;
  data.images = tensor_from_array(images);
  if (data.images.rank() != 4) throw ValidationError("images must be [N,C,H,W]");
  data.labels = labels_from_array(labels);
  if (static_cast<std::int64_t>(data.labels.size()) != data.images.dim(0))
    throw ValidationError("image/label counts disagree");
  if (class_count <= 0) {
    for (int label : data.labels) class_count = std::max(class_count, label + 1);
  }
  data.class_count = class_count;
  return data;
}

py::dict describe_dict(const DescriptiveStats& s) {
  py::dict out;
  out["size"] = s.size;
  out["mean"] = s.mean;
  out["median"] = s.median;
  out["min"] = s.min;
  out["max"] = s.max;
  out["sigma"] = s.sigma ? py::object(py::float_(*s.sigma)) : py::none();
  out["kurtosis"] = s.kurtosis ? py::object(py::float_(*s.kurtosis)) : py::none();
  out["skew"] = s.skew ? py::object(py::float_(*s.skew)) : py::none();
  return out;
}

py::dict receipt_dict(const PerturbationReceipt& r) {
  py::dict out;
  out["treatment"] = std::string(to_string(r.treatment));
  out["layer"] = r.layer;
  out["zeroed_weights"] = r.zeroed_weights;
  out["zeroed_biases"] = r.zeroed_biases;
  out["indices_hash"] = r.indices_hash;
  const auto deltas = [](const DeltaSummary& d) {
    py::dict s;
    s["mean"] = d.mean;
    s["std"] = d.stddev;
    s["degenerate_sigma"] = d.degenerate_sigma;
    return s;
  };
  out["weight_deltas"] = deltas(r.weight_deltas);
  out["bias_deltas"] = deltas(r.bias_deltas);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "CNN fault-injection toolkit: training, perturbation treatments, sweeps, statistics";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<RuntimeError>(m, "RuntimeError", PyExc_RuntimeError);

  py::class_<Network>(m, "Network")
      .def_property_readonly("class_count", [](const Network& n) { return n.class_count; })
      .def_property_readonly("layer_names",
                             [](const Network& n) {
                               std::vector<std::string> names;
                               for (const auto& spec : n.layers) names.push_back(spec.name);
                               return names;
                             })
      .def_property_readonly("parameterized_layers",
                             [](const Network& n) { return n.parameterized_layer_names(); })
      .def_property_readonly("parameter_count",
                             [](const Network& n) { return n.parameter_count(); })
      .def("manifest_json", [](const Network& n) { return manifest_json(n); })
      .def("get_weights",
           [](const Network& n, const std::string& layer) {
             return array_from_tensor(n.params_for(layer).weights);
           })
      .def("get_biases",
           [](const Network& n, const std::string& layer) {
             return array_from_tensor(n.params_for(layer).biases);
           })
      .def("__repr__", [](const Network& n) {
        return "<ablate.Network layers=" + std::to_string(n.layers.size()) +
               " parameters=" + std::to_string(n.parameter_count()) + ">";
      });

  m.def("build_network", &build_network, py::arg("manifest_json"), py::arg("seed"),
        "Validate a manifest and He-uniform-initialize a network");
  m.def("load", &load, py::arg("path"), "Load a model container");
  m.def("save", &save, py::arg("network"), py::arg("path"), "Write a model container");

  m.def(
      "predict",
      [](const Network& net, const py::array& batch) {
        return array_from_tensor(predict(net, tensor_from_array(batch)));
      },
      py::arg("network"), py::arg("batch"), "Eval-mode forward pass over [N,C,H,W] images");

  m.def(
      "train",
      [](Network& net, const py::array& images, const py::array& labels, int epochs,
         int batch_size, float learning_rate, float momentum, std::uint64_t seed) {
        const Dataset data = dataset_from_arrays(images, labels, net.class_count);
        TrainConfig cfg{epochs, batch_size, learning_rate, momentum, seed};
        const auto history = train(net, data, cfg);
        py::list out;
        for (const auto& epoch : history) {
          py::dict row;
          row["epoch"] = epoch.epoch;
          row["loss"] = epoch.mean_loss;
          row["train_top1"] = epoch.train_accuracy;
          out.append(row);
        }
        return out;
      },
      py::arg("network"), py::arg("images"), py::arg("labels"), py::arg("epochs") = 12,
      py::arg("batch_size") = 32, py::arg("learning_rate") = 0.05f, py::arg("momentum") = 0.9f,
      py::arg("seed") = 1, "In-place minibatch SGD; returns the per-epoch history");

  m.def(
      "evaluate_topk",
      [](const Network& net, const py::array& images, const py::array& labels, int k) {
        return evaluate_topk(net, dataset_from_arrays(images, labels, net.class_count), k);
      },
      py::arg("network"), py::arg("images"), py::arg("labels"), py::arg("k") = 5);

  m.def(
      "apply_perturbation",
      [](const Network& net, const std::string& treatment, const std::string& layer,
         double magnitude, std::uint64_t seed) {
        PerturbationSpec spec{treatment_from_string(treatment), layer, magnitude, seed};
        auto [copy, receipt] = perturbed(net, spec);
        return py::make_tuple(std::move(copy), receipt_dict(receipt));
      },
      py::arg("network"), py::arg("treatment"), py::arg("layer"), py::arg("magnitude"),
      py::arg("seed"),
      "Fresh perturbed copy plus its receipt; treatments: synapse_knockout, node_knockout, "
      "gaussian");

  m.def(
      "layer_param_stats",
      [](const Network& net, const std::string& layer) {
        const LayerParamStats stats = layer_param_stats(net, layer);
        py::dict out;
        out["weights"] = describe_dict(stats.weights);
        out["biases"] = describe_dict(stats.biases);
        return out;
      },
      py::arg("network"), py::arg("layer"));

  m.def(
      "describe",
      [](const py::array& values) {
        const auto arr =
            py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(values);
        if (!arr) throw ValidationError("expected a numeric array");
        return describe_dict(
            describe(std::span<const double>(arr.data(), static_cast<std::size_t>(arr.size()))));
      },
      py::arg("values"), "Population-style descriptive statistics");

  m.def(
      "top_k_accuracy",
      [](const py::array& logits, const py::array& labels, int k) {
        const Tensor scores = tensor_from_array(logits);
        const auto lab = labels_from_array(labels);
        return top_k_accuracy(scores, lab, k);
      },
      py::arg("logits"), py::arg("labels"), py::arg("k"));

  m.def(
      "wilcoxon_rank_sum",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const TestResult r = wilcoxon_rank_sum(a, b);
        py::dict out;
        out["statistic"] = r.statistic;
        out["p_value"] = r.p_value;
        out["method"] = std::string(to_string(r.method));
        return out;
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "linear_fit",
      [](const std::vector<double>& x, const std::vector<double>& y) {
        const FitResult fit = linear_fit(x, y);
        py::dict out;
        out["slope"] = fit.slope;
        out["intercept"] = fit.intercept;
        out["r_squared"] = fit.r_squared;
        return out;
      },
      py::arg("x"), py::arg("y"));

  m.def(
      "chance_level",
      [](const std::vector<double>& freq, int k) { return chance_level(freq, k); },
      py::arg("class_frequencies"), py::arg("k"));

  m.def("derive_seed", &derive_seed, py::arg("base"), py::arg("layer_index"),
        py::arg("magnitude_index"), py::arg("trial_index"));

  m.def(
      "synth_dataset",
      [](int classes, int per_class, int image_size, double noise, std::uint64_t seed) {
        SynthSpec spec;
        spec.classes = classes;
        spec.per_class = per_class;
        spec.image_size = image_size;
        spec.noise = noise;
        const Dataset data = synth_dataset(spec, seed);
        py::array_t<int> labels(static_cast<py::ssize_t>(data.labels.size()));
        std::copy(data.labels.begin(), data.labels.end(), labels.mutable_data());
        return py::make_tuple(array_from_tensor(data.images), labels);
      },
      py::arg("classes") = 10, py::arg("per_class") = 200, py::arg("image_size") = 16,
      py::arg("noise") = 0.1, py::arg("seed") = 7);

  m.def(
      "load_idx",
      [](const std::string& images_path, const std::string& labels_path) {
        const Dataset data = load_idx(images_path, labels_path);
        py::array_t<int> labels(static_cast<py::ssize_t>(data.labels.size()));
        std::copy(data.labels.begin(), data.labels.end(), labels.mutable_data());
        return py::make_tuple(array_from_tensor(data.images), labels);
      },
      py::arg("images_path"), py::arg("labels_path"));

  m.def(
      "write_idx",
      [](const py::array& images, const py::array& labels, const std::string& images_path,
         const std::string& labels_path) {
        write_idx(dataset_from_arrays(images, labels, 0), images_path, labels_path);
      },
      py::arg("images"), py::arg("labels"), py::arg("images_path"), py::arg("labels_path"));

  m.def(
      "normalize",
      [](const py::array& images, float mean, float std) {
        Dataset data;
        data.images = tensor_from_array(images);
        data.labels.assign(static_cast<std::size_t>(data.images.dim(0)), 0);
        data.class_count = 1;
        return array_from_tensor(normalize(data, mean, std).images);
      },
      py::arg("images"), py::arg("mean"), py::arg("std"), "Per-pixel (x - mean) / std");

  m.def(
      "split_train_test",
      [](const py::array& images, const py::array& labels, double test_fraction) {
        const Dataset data = dataset_from_arrays(images, labels, 0);
        auto [train_set, test_set] = split_train_test(data, test_fraction);
        const auto pack = [](const Dataset& d) {
          py::array_t<int> l(static_cast<py::ssize_t>(d.labels.size()));
          std::copy(d.labels.begin(), d.labels.end(), l.mutable_data());
          return py::make_tuple(array_from_tensor(d.images), l);
        };
        return py::make_tuple(pack(train_set), pack(test_set));
      },
      py::arg("images"), py::arg("labels"), py::arg("test_fraction") = 0.2,
      "Deterministic balanced split: per class, the trailing fraction goes to test");

  m.def(
      "run_sweep", [](const std::string& config_json) { return to_json(run_sweep(
                       sweep_config_from_json(config_json))); },
      py::arg("config_json"),
      "Run a sweep from a JSON config string; returns the result as a JSON string");

  m.def(
      "sweep_csv",
      [](const std::string& result_json) { return to_csv(sweep_result_from_json(result_json)); },
      py::arg("result_json"));

  m.def(
      "compare_cells",
      [](const std::string& result_json_a, const std::string& layer_a, double magnitude_a,
         const std::string& result_json_b, const std::string& layer_b, double magnitude_b) {
        const SweepResult a = sweep_result_from_json(result_json_a);
        const SweepResult b = sweep_result_from_json(result_json_b);
        const TestResult r = compare_cells(a, {layer_a, magnitude_a}, b, {layer_b, magnitude_b});
        py::dict out;
        out["statistic"] = r.statistic;
        out["p_value"] = r.p_value;
        out["method"] = std::string(to_string(r.method));
        return out;
      },
      py::arg("result_json_a"), py::arg("layer_a"), py::arg("magnitude_a"),
      py::arg("result_json_b"), py::arg("layer_b"), py::arg("magnitude_b"));

  m.def(
      "fit_falloff",
      [](const std::string& result_json, const std::string& layer) {
        const FitResult fit = fit_falloff(sweep_result_from_json(result_json), layer);
        py::dict out;
        out["slope"] = fit.slope;
        out["intercept"] = fit.intercept;
        out["r_squared"] = fit.r_squared;
        return out;
      },
      py::arg("result_json"), py::arg("layer"));
}
