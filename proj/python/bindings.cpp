#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <sstream>

#include "pvrnet/cli.hpp"
#include "pvrnet/config.hpp"
#include "pvrnet/encoders.hpp"
#include "pvrnet/errors.hpp"
#include "pvrnet/metrics.hpp"
#include "pvrnet/relation_fusion.hpp"
#include "pvrnet/synth.hpp"
#include "pvrnet/verify.hpp"

namespace py = pybind11;
using namespace pvr;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Labels = py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a, std::size_t cols = 0) {
  if (a.ndim() != 2 || (cols != 0 && static_cast<std::size_t>(a.shape(1)) != cols)) {
    throw InputError("expected a 2-d array" +
                     (cols ? " with " + std::to_string(cols) + " columns" : std::string()));
  }
  Matrix m(a.shape(0), a.shape(1));
  std::copy(a.data(), a.data() + a.size(), m.data.begin());
  return m;
}

Array to_array(const Matrix& m) {
  Array out({m.rows, m.cols});
  std::copy(m.data.begin(), m.data.end(), out.mutable_data());
  return out;
}

std::span<const std::uint32_t> span_of(const Labels& l) {
  if (l.ndim() != 1) throw InputError("expected a 1-d label array");
  return {l.data(), static_cast<std::size_t>(l.size())};
}

SynthConfig synth_from(const std::string& config_json) {
  return config_from_json(nlohmann::json::parse(config_json)).dataset;
}

}  // namespace

PYBIND11_MODULE(_pvrnet, m) {
  m.doc() = "Point-view relation fusion: data generation, metrics and the pvrf tool.";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const InputError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const DimensionError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const nlohmann::json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def(
      "default_config", [] { return to_json(ExperimentConfig{}).dump(); },
      "Default experiment configuration as a JSON string.");
  m.def(
      "normalize_config",
      [](const std::string& config_json) {
        return to_json(config_from_json(nlohmann::json::parse(config_json))).dump();
      },
      py::arg("config_json"),
      "Validates a partial configuration and returns it with every default filled in.");

  m.def(
      "family_name", [](std::size_t class_id) { return std::string(family_name(class_id)); },
      py::arg("class_id"));

  m.def(
      "generate_shape",
      [](std::size_t class_id, std::uint64_t seed, const std::string& config_json) {
        return to_array(generate_shape(class_id, seed, synth_from(config_json)));
      },
      py::arg("class_id"), py::arg("seed"), py::arg("config_json") = "{}",
      "Point cloud (N x 3) of one synthetic shape.");

  m.def(
      "render_views",
      [](const Array& points, const std::string& config_json) {
        const SynthConfig c = synth_from(config_json);
        const CameraRig rig = CameraRig::ring(c.views, c.elevation_deg, c.resolution);
        return to_array(render_views(to_matrix(points, 3), rig));
      },
      py::arg("points"), py::arg("config_json") = "{}",
      "View descriptors (V x Dv) of a point cloud seen from the camera ring.");

  m.def(
      "knn_graph",
      [](const Array& points, std::size_t k) {
        const Matrix pts = to_matrix(points, 3);
        const auto nbr = knn_graph(pts, k);
        py::array_t<std::uint32_t> out({pts.rows, k});
        std::copy(nbr.begin(), nbr.end(), out.mutable_data());
        return out;
      },
      py::arg("points"), py::arg("k"));

  m.def(
      "select_top_k",
      [](const Array& scores, std::size_t k) {
        if (scores.ndim() != 1) throw InputError("scores must be 1-d");
        return select_top_k({scores.data(), static_cast<std::size_t>(scores.size())}, k);
      },
      py::arg("scores"), py::arg("k"),
      "Indices of the k highest scores, descending; ties by ascending index.");

  m.def(
      "evaluate_classification",
      [](const Labels& predicted, const Labels& labels, std::size_t classes) {
        const ClassificationMetrics c =
            evaluate_classification(span_of(predicted), span_of(labels), classes);
        py::list per_class;
        for (const auto& a : c.per_class_acc) {
          per_class.append(a ? py::cast(*a) : py::none());
        }
        py::dict d;
        d["overall_acc"] = c.overall_acc;
        d["mean_class_acc"] = c.mean_class_acc;
        d["per_class_acc"] = per_class;
        d["excluded_classes"] = c.excluded_classes;
        return d;
      },
      py::arg("predicted"), py::arg("labels"), py::arg("classes"));

  m.def(
      "retrieval_map",
      [](const Array& embeddings, const Labels& labels) {
        const RetrievalResult r = retrieval_map(to_matrix(embeddings), span_of(labels));
        py::list curve;
        for (const auto& p : r.pr_curve) curve.append(py::make_tuple(p.recall, p.precision));
        py::dict d;
        d["map"] = r.map;
        d["pr_curve"] = curve;
        d["average_precision"] = py::array_t<double>(r.average_precision.size(),
                                                     r.average_precision.data());
        d["excluded_queries"] = r.excluded_queries;
        return d;
      },
      py::arg("embeddings"), py::arg("labels"),
      "Leave-one-out cosine retrieval: mean average precision and the 11-point PR curve.");

  m.def(
      "run_verification",
      [] {
        const VerifyReport r = run_verification();
        py::list checks;
        for (const auto& c : r.checks) {
          py::dict d;
          d["name"] = c.name;
          d["passed"] = c.passed;
          d["measured"] = c.measured;
          d["tolerance"] = c.tolerance;
          d["detail"] = c.detail;
          checks.append(d);
        }
        return py::make_tuple(checks, r.seconds);
      },
      "Runs the built-in property suite; returns (checks, seconds).");

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "pvrf");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one pvrf subcommand in-process; returns (exit_code, stdout, stderr).");
}
