#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hoi/errors.hpp"
#include "hoi/evaluation.hpp"
#include "hoi/geometry.hpp"
#include "hoi/io.hpp"
#include "hoi/pipeline.hpp"
#include "hoi/synth.hpp"
#include "hoi/tracklets.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;

namespace {

using BoxTuple = std::tuple<double, double, double, double>;

hoi::Box to_box(const BoxTuple& t) {
  return {std::get<0>(t), std::get<1>(t), std::get<2>(t), std::get<3>(t)};
}

BoxTuple from_box(const hoi::Box& b) { return {b.x, b.y, b.w, b.h}; }

hoi::PipelineConfig resolve(const std::vector<std::string>& overrides) {
  hoi::PipelineConfig cfg;
  for (const auto& o : overrides) hoi::apply_override(cfg, o);
  cfg.validate();
  return cfg;
}

py::dict metrics_dict(const hoi::Metrics& m) {
  py::dict d;
  for (const auto& [key, value] : hoi::report_rows(m)) d[py::str(key)] = value;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spatio-temporal human-object interaction detection";

  py::register_exception<hoi::ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<hoi::DataError>(m, "DataError", PyExc_RuntimeError);

  py::class_<hoi::Trajectory>(m, "Trajectory")
      .def(py::init([](int begin, const std::vector<BoxTuple>& boxes, int category, double score) {
             if (boxes.empty()) throw hoi::ValidationError("trajectory needs at least one box");
             std::vector<hoi::Box> bs;
             for (const auto& b : boxes) bs.push_back(to_box(b));
             const int end = begin + static_cast<int>(bs.size()) - 1;
             return hoi::make_trajectory({begin, end}, std::move(bs), category, score);
           }),
           py::arg("begin"), py::arg("boxes"), py::arg("category") = 0, py::arg("score") = 1.0)
      .def_property_readonly("begin", [](const hoi::Trajectory& t) { return t.span.begin; })
      .def_property_readonly("end", [](const hoi::Trajectory& t) { return t.span.end; })
      .def_property_readonly("boxes",
                             [](const hoi::Trajectory& t) {
                               std::vector<BoxTuple> out;
                               for (const auto& b : t.boxes) out.push_back(from_box(b));
                               return out;
                             })
      .def_readonly("category", &hoi::Trajectory::category)
      .def_readonly("score", &hoi::Trajectory::score)
      .def("__len__", &hoi::Trajectory::length)
      .def("__repr__", [](const hoi::Trajectory& t) {
        return "<Trajectory category=" + std::to_string(t.category) + " frames=[" +
               std::to_string(t.span.begin) + ", " + std::to_string(t.span.end) + "]>";
      });

  m.def("iou", [](const BoxTuple& a, const BoxTuple& b) { return hoi::iou(to_box(a), to_box(b)); },
        "Intersection over union of two (x, y, w, h) boxes.");
  m.def("trajectory_overlap", &hoi::trajectory_overlap, py::arg("a"), py::arg("b"), py::arg("beta") = 0.5,
        "Fraction of co-occurring frames whose box IoU exceeds beta.");
  m.def("viou", &hoi::viou, "Volumetric IoU of two trajectories.");
  m.def("average_precision",
        [](const std::vector<int>& hits, std::size_t num_gt) {
          std::vector<std::uint8_t> flags(hits.begin(), hits.end());
          return hoi::average_precision(flags, num_gt);
        },
        py::arg("hits"), py::arg("num_gt"));

  m.def("detect_trajectories",
        [](const std::vector<std::tuple<int, BoxTuple, int, double>>& detections, int num_frames,
           int segment_len, int segment_stride, double beta, double merge_threshold) {
          hoi::SegmentationConfig cfg{segment_len, segment_stride, beta, merge_threshold};
          cfg.validate();
          std::vector<hoi::Detection> dets;
          for (const auto& [frame, box, category, score] : detections)
            dets.push_back({frame, to_box(box), category, score});
          py::gil_scoped_release release;
          return hoi::detect_trajectories(dets, num_frames, cfg);
        },
        py::arg("detections"), py::arg("num_frames"), py::arg("segment_len") = 10,
        py::arg("segment_stride") = 5, py::arg("beta") = 0.5, py::arg("merge_threshold") = 0.5,
        "Trajectories from (frame, (x, y, w, h), category, score) detections.");

  m.def("synth",
        [](const fs::path& out, int videos, std::uint64_t seed, int min_frames, int max_frames, double jitter,
           double drop_rate, double false_positive_rate, double annotation_jitter, const std::string& prefix) {
          hoi::synth::SuiteConfig cfg;
          cfg.num_videos = videos;
          cfg.seed = seed;
          cfg.min_frames = min_frames;
          cfg.max_frames = max_frames;
          cfg.noise.jitter = jitter;
          cfg.noise.drop_rate = drop_rate;
          cfg.noise.false_positive_rate = false_positive_rate;
          cfg.annotation_jitter = annotation_jitter;
          cfg.prefix = prefix;
          py::gil_scoped_release release;
          const auto vocab = hoi::synth::default_vocabulary();
          return hoi::synth::write_suite(out, hoi::synth::random_suite(cfg, vocab), vocab, {});
        },
        py::arg("out"), py::arg("videos") = 20, py::arg("seed") = 1, py::arg("min_frames") = 150,
        py::arg("max_frames") = 200, py::arg("jitter") = 0.0, py::arg("drop_rate") = 0.0,
        py::arg("false_positive_rate") = 0.0, py::arg("annotation_jitter") = 0.0, py::arg("prefix") = "scene",
        "Writes a synthetic suite and returns its manifest path.");

  m.def("track",
        [](const fs::path& manifest, const fs::path& out, const std::vector<std::string>& overrides) {
          const auto cfg = resolve(overrides);
          py::gil_scoped_release release;
          const auto data = hoi::load_dataset(manifest);
          const auto report = hoi::run_track(data, cfg);
          hoi::io::save_trajectories(out, report.trajectories, data.labels);
          std::map<std::string, double> summary{{"frames", static_cast<double>(report.frames)},
                                                {"fps", report.fps}};
          if (report.detection_map) summary["detection_mAP"] = *report.detection_map;
          return summary;
        },
        py::arg("manifest"), py::arg("out"), py::arg("overrides") = std::vector<std::string>{});

  m.def("train",
        [](const fs::path& manifest, const fs::path& out, const std::vector<std::string>& overrides) {
          const auto cfg = resolve(overrides);
          py::gil_scoped_release release;
          const auto data = hoi::load_dataset(manifest);
          const auto result = hoi::run_train(data, cfg);
          hoi::io::save_model(out, result.model);
          return result.loss_curve;
        },
        py::arg("manifest"), py::arg("out"), py::arg("overrides") = std::vector<std::string>{},
        "Trains on annotated trajectories, saves the checkpoint, returns the loss curve.");

  m.def("detect",
        [](const fs::path& manifest, const fs::path& model_path, const fs::path& out,
           const std::vector<std::string>& overrides, bool gt_trajectories) {
          const auto cfg = resolve(overrides);
          py::gil_scoped_release release;
          const auto data = hoi::load_dataset(manifest);
          const auto model = hoi::io::load_model(model_path);
          const auto instances = hoi::run_detect(data, model, cfg, gt_trajectories);
          hoi::io::save_predictions(out, instances, data.labels);
          return instances.size();
        },
        py::arg("manifest"), py::arg("model"), py::arg("out"),
        py::arg("overrides") = std::vector<std::string>{}, py::arg("gt_trajectories") = false,
        "Writes predictions and returns the instance count.");

  m.def("evaluate",
        [](const fs::path& predictions, const fs::path& manifest, const std::vector<std::string>& overrides) {
          const auto cfg = resolve(overrides);
          hoi::Metrics metrics;
          {
            py::gil_scoped_release release;
            const auto data = hoi::load_dataset(manifest);
            const auto preds = hoi::io::load_predictions(predictions, data.labels);
            metrics = hoi::run_evaluate(preds, hoi::dataset_ground_truth(data), data.labels, cfg);
          }
          return metrics_dict(metrics);
        },
        py::arg("predictions"), py::arg("manifest"), py::arg("overrides") = std::vector<std::string>{},
        "Metrics keyed class_mAP, video_mAP, R@K, P@N.");

  m.def("config_dump", [](const std::vector<std::string>& overrides) { return hoi::dump_config(resolve(overrides)); },
        py::arg("overrides") = std::vector<std::string>{});
}
