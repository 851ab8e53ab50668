// Command-line front end: synth, track, train, detect, tag, evaluate, config.
// Exit status 0 on success, 1 on invalid arguments or configuration, 2 on
// unreadable or inconsistent data.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "CLI11.hpp"
#include "hoi/errors.hpp"
#include "hoi/io.hpp"
#include "hoi/pipeline.hpp"
#include "hoi/synth.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct ConfigArgs {
  std::string file;
  std::vector<std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "JSON configuration file");
    app->add_option("--set", overrides, "override, section.key=value (repeatable)");
  }

  hoi::PipelineConfig resolve() const {
    hoi::PipelineConfig cfg = file.empty() ? hoi::PipelineConfig{} : hoi::load_config(file);
    for (const auto& o : overrides) hoi::apply_override(cfg, o);
    cfg.validate();
    return cfg;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw hoi::DataError("cannot write '" + path.string() + "'");
  out << text;
}

hoi::synth::MotionModel parse_motion(const std::string& s) {
  if (s == "static") return hoi::synth::MotionModel::kStatic;
  if (s == "linear") return hoi::synth::MotionModel::kLinear;
  if (s == "sinusoidal") return hoi::synth::MotionModel::kSinusoidal;
  throw hoi::ValidationError("motion must be static, linear or sinusoidal");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatio-temporal human-object interaction detection"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic scene suite");
  std::string synth_out;
  hoi::synth::SuiteConfig suite;
  std::string motion = "sinusoidal";
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--videos", suite.num_videos, "number of scenes");
  synth->add_option("--seed", suite.seed, "suite seed");
  synth->add_option("--min-frames", suite.min_frames);
  synth->add_option("--max-frames", suite.max_frames);
  synth->add_option("--max-interacting", suite.max_interacting);
  synth->add_option("--max-distractors", suite.max_distractors);
  synth->add_option("--idle-rate", suite.idle_human_rate);
  synth->add_option("--jitter", suite.noise.jitter, "box jitter sigma in pixels");
  synth->add_option("--annotation-jitter", suite.annotation_jitter,
                    "box jitter sigma of the annotations themselves");
  synth->add_option("--drop-rate", suite.noise.drop_rate);
  synth->add_option("--fp-rate", suite.noise.false_positive_rate);
  synth->add_option("--motion", motion, "static | linear | sinusoidal");
  synth->add_option("--prefix", suite.prefix, "video id prefix");

  // track
  auto* track = app.add_subcommand("track", "detect trajectories");
  ConfigArgs track_cfg;
  std::string track_manifest, track_out;
  track_cfg.attach(track);
  track->add_option("--manifest", track_manifest)->required();
  track->add_option("--out", track_out, "trajectories (JSON lines)")->required();

  // train
  auto* train = app.add_subcommand("train", "train the interaction classifiers");
  ConfigArgs train_cfg;
  std::string train_manifest, train_out, loss_out;
  train_cfg.attach(train);
  train->add_option("--manifest", train_manifest)->required();
  train->add_option("--out", train_out, "model checkpoint")->required();
  train->add_option("--loss-curve", loss_out, "per-epoch training loss (text)");

  // detect
  auto* detect = app.add_subcommand("detect", "detect HOI instances");
  ConfigArgs detect_cfg;
  std::string detect_manifest, detect_model, detect_out;
  bool gt_trajectories = false;
  detect_cfg.attach(detect);
  detect->add_option("--manifest", detect_manifest)->required();
  detect->add_option("--model", detect_model)->required();
  detect->add_option("--out", detect_out, "predictions (JSON lines)")->required();
  detect->add_flag("--gt-trajectories", gt_trajectories, "use annotated trajectories");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score predictions against annotations");
  ConfigArgs eval_cfg;
  std::string eval_preds, eval_manifest, eval_out, eval_csv;
  eval_cfg.attach(evaluate);
  evaluate->add_option("--predictions", eval_preds)->required();
  evaluate->add_option("--manifest", eval_manifest, "manifest with annotations")->required();
  evaluate->add_option("--out", eval_out, "metrics report (JSON)");
  evaluate->add_option("--per-class", eval_csv, "per-class AP table (CSV)");

  // tag
  auto* tag = app.add_subcommand("tag", "rank HOI labels per video");
  std::string tag_preds, tag_manifest, tag_out;
  int tag_top = 10;
  tag->add_option("--predictions", tag_preds)->required();
  tag->add_option("--manifest", tag_manifest, "manifest naming the label space")->required();
  tag->add_option("--top", tag_top, "labels per video");
  tag->add_option("--out", tag_out, "tags (JSON lines); stdout when omitted");

  // config
  auto* config = app.add_subcommand("config", "print the effective configuration");
  ConfigArgs config_cfg;
  bool dump = false;
  config_cfg.attach(config);
  config->add_flag("--dump", dump, "print every field with its value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) {
      suite.motion = parse_motion(motion);
      const auto vocab = hoi::synth::default_vocabulary();
      const auto specs = hoi::synth::random_suite(suite, vocab);
      const auto manifest = hoi::synth::write_suite(synth_out, specs, vocab, {});
      std::cout << "wrote " << specs.size() << " scenes to " << manifest.string() << '\n';
    } else if (track->parsed()) {
      const auto cfg = track_cfg.resolve();
      const auto data = hoi::load_dataset(track_manifest);
      const auto report = hoi::run_track(data, cfg);
      hoi::io::save_trajectories(track_out, report.trajectories, data.labels);
      std::cout << std::fixed << std::setprecision(6) << "frames " << report.frames << '\n'
                << "fps " << report.fps << '\n';
      if (report.detection_map) std::cout << "detection_mAP " << *report.detection_map << '\n';
    } else if (train->parsed()) {
      const auto cfg = train_cfg.resolve();
      const auto data = hoi::load_dataset(train_manifest);
      const auto result = hoi::run_train(data, cfg);
      hoi::io::save_model(train_out, result.model);
      if (!loss_out.empty()) {
        std::ostringstream curve;
        curve << std::setprecision(17);
        for (std::size_t e = 0; e < result.loss_curve.size(); ++e) {
          curve << e + 1 << ' ' << result.loss_curve[e] << '\n';
        }
        write_text(loss_out, curve.str());
      }
      std::cout << std::fixed << std::setprecision(6) << "epochs " << result.loss_curve.size()
                << "\nfinal_loss " << (result.loss_curve.empty() ? 0.0 : result.loss_curve.back())
                << '\n';
    } else if (detect->parsed()) {
      const auto cfg = detect_cfg.resolve();
      const auto data = hoi::load_dataset(detect_manifest);
      const auto model = hoi::io::load_model(detect_model);
      const auto instances = hoi::run_detect(data, model, cfg, gt_trajectories);
      hoi::io::save_predictions(detect_out, instances, data.labels);
      std::cout << "instances " << instances.size() << '\n';
    } else if (evaluate->parsed()) {
      const auto cfg = eval_cfg.resolve();
      const auto data = hoi::load_dataset(eval_manifest);
      const auto preds = hoi::io::load_predictions(eval_preds, data.labels);
      const auto metrics =
          hoi::run_evaluate(preds, hoi::dataset_ground_truth(data), data.labels, cfg);
      std::cout << hoi::format_report(metrics);
      if (!eval_out.empty()) write_text(eval_out, hoi::report_json(metrics));
      if (!eval_csv.empty()) write_text(eval_csv, hoi::per_class_csv(metrics, data.labels));
    } else if (tag->parsed()) {
      const auto data = hoi::load_dataset(tag_manifest);
      const auto preds = hoi::io::load_predictions(tag_preds, data.labels);
      const auto tags = hoi::run_tag(preds, data.labels, tag_top);
      std::ostringstream out;
      for (const auto& [video, list] : tags) {
        nlohmann::ordered_json j;
        j["video"] = video;
        j["tags"] = nlohmann::ordered_json::array();
        for (const auto& t : list) {
          j["tags"].push_back({{"predicate", data.labels.predicates.at(t.label.predicate)},
                               {"object", data.labels.objects.at(t.label.object)},
                               {"score", t.score}});
        }
        out << j.dump() << '\n';
      }
      if (tag_out.empty()) {
        std::cout << out.str();
      } else {
        write_text(tag_out, out.str());
      }
    } else if (config->parsed()) {
      const auto cfg = config_cfg.resolve();
      (void)dump;
      std::cout << hoi::dump_config(cfg);
    }
  } catch (const hoi::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const hoi::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
