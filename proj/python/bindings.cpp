#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cstring>

#include "scoresync/audio.h"
#include "scoresync/dtw.h"
#include "scoresync/error.h"
#include "scoresync/eval.h"
#include "scoresync/features.h"
#include "scoresync/neural/gradient_suite.h"
#include "scoresync/neural/layers.h"
#include "scoresync/neural/models.h"
#include "scoresync/softdtw.h"
#include "scoresync/structure.h"

namespace py = pybind11;
using namespace scoresync;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw InputError("expected a 2-D array, got " + std::to_string(a.ndim()) + " dimensions");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy_n(a.data(), m.data().size(), m.data().begin());
  return m;
}

Array to_array(const Matrix& m) {
  Array a({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), a.mutable_data());
  return a;
}

std::vector<double> to_vector(const Array& a) {
  if (a.ndim() != 1) throw InputError("expected a 1-D array");
  return {a.data(), a.data() + a.size()};
}

Array vector_array(const std::vector<double>& v) {
  Array a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

FeatureSequence to_features(const Array& data, double hop) {
  FeatureSequence seq;
  seq.data = to_matrix(data);
  seq.hop_seconds = hop;
  seq.validate();
  return seq;
}

InflectionPointSet to_inflections(const std::vector<std::pair<std::size_t, std::size_t>>& pts) {
  InflectionPointSet set;
  for (const auto& [a, b] : pts) set.points.push_back({a, b});
  return set;
}

py::dict path_dict(const AlignmentPath& path) {
  py::array_t<std::int64_t> pts({path.points.size(), std::size_t{2}});
  py::array_t<bool> jumps(static_cast<py::ssize_t>(path.points.size()));
  auto p = pts.mutable_unchecked<2>();
  auto j = jumps.mutable_unchecked<1>();
  for (std::size_t i = 0; i < path.points.size(); ++i) {
    p(i, 0) = static_cast<std::int64_t>(path.points[i].perf);
    p(i, 1) = static_cast<std::int64_t>(path.points[i].score);
    j(i) = path.points[i].jump;
  }
  py::dict d;
  d["points"] = pts;
  d["jump"] = jumps;
  d["total_cost"] = path.total_cost;
  return d;
}

}  // namespace

PYBIND11_MODULE(_scoresync, m) {
  m.doc() = "Performance-to-score alignment: features, (jump) DTW, soft-DTW and toy neural models";
  m.attr("__version__") = SCORESYNC_VERSION;

  auto input_error = py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<InvariantError>(m, "InvariantError", PyExc_RuntimeError);
  (void)input_error;

  m.def(
      "chromagram",
      [](const Array& samples, int sample_rate, int frame_length, int hop_length, const std::string& window) {
        AudioClip clip;
        clip.sample_rate = sample_rate;
        clip.samples = to_vector(samples);
        ChromaConfig cfg;
        cfg.frame_length = frame_length;
        cfg.hop_length = hop_length;
        if (window == "hann") {
          cfg.window = WindowKind::hann;
        } else if (window == "hamming") {
          cfg.window = WindowKind::hamming;
        } else {
          throw InputError("unknown window '" + window + "'");
        }
        const auto seq = chromagram(clip, cfg);
        return py::make_tuple(to_array(seq.data), seq.hop_seconds);
      },
      py::arg("samples"), py::arg("sample_rate"), py::arg("frame_length") = 2048, py::arg("hop_length") = 512,
      py::arg("window") = "hann", "12-bin chromagram; returns (frames x 12 array, hop_seconds).");

  m.def(
      "load_features_csv",
      [](const std::string& path) {
        const auto seq = load_features_csv(path);
        return py::make_tuple(to_array(seq.data), seq.hop_seconds, std::string(to_string(seq.origin)));
      },
      py::arg("path"), "Returns (data, hop_seconds, origin).");

  m.def(
      "cross_similarity",
      [](const Array& perf, const Array& score) {
        return to_array(cross_similarity(to_features(perf, 1.0), to_features(score, 1.0)));
      },
      py::arg("perf"), py::arg("score"), "Pairwise Euclidean distances; rows index the performance.");

  m.def(
      "dtw_align", [](const Array& cost) { return path_dict(dtw_align(to_matrix(cost))); }, py::arg("cost"));
  m.def(
      "dtw_brute_force", [](const Array& cost) { return path_dict(dtw_brute_force(to_matrix(cost))); },
      py::arg("cost"));
  m.def(
      "jump_dtw_align",
      [](const Array& cost, const std::vector<std::pair<std::size_t, std::size_t>>& inflections) {
        return path_dict(jump_dtw_align(to_matrix(cost), to_inflections(inflections)));
      },
      py::arg("cost"), py::arg("inflections"),
      "Jump DTW; inflections alternate subpath end and start as (perf, score) pairs.");

  m.def(
      "synth_perturb",
      [](const Array& features, double hop_seconds, int n_jumps, std::uint64_t seed, std::size_t min_segment) {
        const auto seq = to_features(features, hop_seconds);
        PerturbOptions opt;
        opt.min_segment = min_segment;
        const auto p = synth_perturb(seq, GroundTruthMap::identity(seq.frames(), hop_seconds, hop_seconds), n_jumps,
                                     seed, opt);
        py::list infl;
        for (const auto& pt : p.inflections.points) infl.append(py::make_tuple(pt.perf, pt.score));
        py::dict d;
        d["features"] = to_array(p.features.data);
        d["frame_map"] = p.frame_map;
        d["score_frames"] = p.score_frames;
        d["inflections"] = infl;
        return d;
      },
      py::arg("features"), py::arg("hop_seconds"), py::arg("n_jumps"), py::arg("seed"), py::arg("min_segment") = 10);

  m.def(
      "soft_dtw", [](const Array& a, const Array& b, double lam) { return soft_dtw(to_vector(a), to_vector(b), lam); },
      py::arg("pred"), py::arg("target"), py::arg("lam") = kDefaultSoftDtwLambda);
  m.def(
      "soft_dtw_grad",
      [](const Array& a, const Array& b, double lam) { return vector_array(soft_dtw_grad(to_vector(a), to_vector(b), lam)); },
      py::arg("pred"), py::arg("target"), py::arg("lam") = kDefaultSoftDtwLambda);
  m.def(
      "soft_dtw_divergence",
      [](const Array& a, const Array& b, double lam) { return soft_dtw_divergence(to_vector(a), to_vector(b), lam); },
      py::arg("pred"), py::arg("target"), py::arg("lam") = kDefaultSoftDtwLambda);
  m.def(
      "soft_dtw_divergence_grad",
      [](const Array& a, const Array& b, double lam) {
        return vector_array(soft_dtw_divergence_grad(to_vector(a), to_vector(b), lam));
      },
      py::arg("pred"), py::arg("target"), py::arg("lam") = kDefaultSoftDtwLambda);

  m.def(
      "accuracy_at_margins",
      [](const Array& errors_s) {
        const auto r = accuracy_at_margins(to_vector(errors_s));
        return std::vector<double>(r.accuracy_pct.begin(), r.accuracy_pct.end());
      },
      py::arg("errors_s"), "Percent of |error| strictly below 25, 50, 100 and 200 ms.");
  m.def(
      "diebold_mariano",
      [](const Array& a, const Array& b) {
        const auto va = to_vector(a), vb = to_vector(b);
        const auto r = diebold_mariano(va, vb);
        return py::make_tuple(r.statistic, r.p_value ? py::cast(*r.p_value) : py::none(), r.degenerate);
      },
      py::arg("errors_a"), py::arg("errors_b"), "Returns (statistic, p_value or None, degenerate).");

  m.def("effective_kernel_size", &neural::effective_kernel_size, py::arg("m"), py::arg("d"));

  m.def(
      "gradient_suite",
      [](std::uint64_t seed, bool networks) {
        neural::SuiteOptions opt;
        opt.seed = seed;
        opt.networks = networks;
        py::list out;
        for (const auto& c : neural::run_gradient_suite(opt)) {
          py::dict d;
          d["name"] = c.name;
          d["max_rel_err"] = c.max_rel_err;
          d["tolerance"] = c.tolerance;
          d["checked"] = c.checked;
          d["pass"] = c.pass();
          out.append(d);
        }
        return out;
      },
      py::arg("seed") = 0, py::arg("networks") = false);

  m.def(
      "train_toy",
      [](const std::string& task_name, std::size_t instances, std::uint64_t seed, std::size_t epochs, std::size_t grid,
         std::size_t hidden) {
        const auto task = neural::parse_task(task_name);
        auto cfg = neural::default_toy_config(task);
        cfg.seed = seed;
        cfg.epochs = epochs;
        cfg.grid = grid;
        cfg.hidden = hidden;
        neural::SyntheticOptions data;
        data.grid = grid;
        neural::ToyModel model;
        {
          py::gil_scoped_release release;
          const auto set = task == neural::ToyTask::inflection ? neural::make_inflection_dataset(instances, seed, data)
                                                               : neural::make_path_dataset(instances, seed, data);
          model = task == neural::ToyTask::inflection ? neural::train_inflection_regressor(set, cfg)
                                                      : neural::train_path_regressor(set, cfg);
        }
        py::dict d;
        d["validation_loss"] = model.report.validation_loss;
        d["validation_error"] = model.report.validation_error;
        d["final_validation_error"] = model.report.final_validation_error;
        d["best_epoch"] = model.report.best_epoch;
        return d;
      },
      py::arg("task"), py::arg("instances"), py::arg("seed") = 1, py::arg("epochs") = 40, py::arg("grid") = 64,
      py::arg("hidden") = 64, "Train a toy regressor on synthetic data and return its report.");
}
