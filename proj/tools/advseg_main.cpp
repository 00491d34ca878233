#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "advseg/checkpoint.hpp"
#include "advseg/config.hpp"
#include "advseg/data.hpp"
#include "advseg/errors.hpp"
#include "advseg/metrics.hpp"
#include "advseg/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json report_json(const advseg::MetricReport& r) {
  return json{
      {"rho", r.params.rho},
      {"distance",
       r.params.distance == advseg::Distance::euclidean ? "euclidean"
                                                        : "chebyshev"},
      {"accuracy", r.accuracy},
      {"precision", r.precision},
      {"recall", r.recall},
      {"f1", r.f1},
      {"iou", r.iou},
      {"relaxed_precision", r.relaxed_precision},
      {"relaxed_recall", r.relaxed_recall},
      {"relaxed_f1", r.relaxed_f1},
      {"relaxed_iou", r.relaxed_iou},
      {"tp", r.counts.tp},
      {"tn", r.counts.tn},
      {"fp", r.counts.fp},
      {"fn", r.counts.fn},
  };
}

json logs_json(const std::vector<advseg::EpochLog>& logs) {
  json out = json::array();
  for (const advseg::EpochLog& log : logs) {
    json entry{{"epoch", log.epoch}, {"ce", log.mean_ce}};
    if (log.mean_adv_g) entry["adv_g"] = *log.mean_adv_g;
    if (log.mean_adv_d) entry["adv_d"] = *log.mean_adv_d;
    if (log.mean_d_real) entry["d_real"] = *log.mean_d_real;
    if (log.mean_d_fake) entry["d_fake"] = *log.mean_d_fake;
    if (log.validation) entry["validation"] = report_json(*log.validation);
    out.push_back(std::move(entry));
  }
  return out;
}

advseg::Dataset load_data_dir(const fs::path& dir, advseg::Split split) {
  return advseg::ingest_directory(dir / "images", dir / "masks", split);
}

int run_synth(const advseg::SynthConfig& cfg, const fs::path& out_dir) {
  advseg::Dataset ds = advseg::synth_dataset(cfg);
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "masks");
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "synth_%04zu", i);
    advseg::write_raster(out_dir / "images" / (std::string(name) + ".ppm"),
                         ds.samples[i].image);
    advseg::write_mask(out_dir / "masks" / (std::string(name) + ".pgm"),
                       ds.samples[i].mask);
  }
  std::cout << "wrote " << ds.samples.size() << " samples (" << cfg.size << "x"
            << cfg.size << ") to " << out_dir.string() << "\n";
  return 0;
}

int run_train(const fs::path& config_path, const std::string& data_dir,
              const std::string& val_dir, const fs::path& out_dir) {
  advseg::TrainConfig cfg = advseg::TrainConfig::from_file(config_path);
  if (!data_dir.empty()) {
    cfg.data_source = advseg::DataSource::directory;
    cfg.data_dir = data_dir;
  }
  if (!val_dir.empty()) cfg.val_dir = val_dir;
  cfg.validate();

  advseg::Dataset train_data;
  if (cfg.data_source == advseg::DataSource::synth) {
    train_data = advseg::synth_dataset(cfg.synth);
  } else {
    if (cfg.data_dir.empty())
      throw advseg::ConfigError("config: no data directory (set data.dir or --data)");
    train_data = load_data_dir(cfg.data_dir, advseg::Split::train);
  }
  advseg::Dataset val_data;
  const bool have_val = !cfg.val_dir.empty();
  if (have_val) val_data = load_data_dir(cfg.val_dir, advseg::Split::val);

  advseg::TrainResult result =
      advseg::train(cfg, train_data, have_val ? &val_data : nullptr, &std::cout);

  advseg::save_checkpoint(out_dir, result.checkpoint);
  {
    std::ofstream txt(out_dir / "train_log.txt");
    for (const advseg::EpochLog& log : result.logs)
      txt << advseg::epoch_log_line(log) << "\n";
  }
  {
    std::ofstream js(out_dir / "train_log.json");
    js << logs_json(result.logs).dump(2) << "\n";
  }
  std::cout << "checkpoint written to " << out_dir.string() << "\n";
  return 0;
}

int run_eval(const fs::path& ckpt_dir, const fs::path& data_dir, int rho,
             const std::string& distance, double threshold,
             const std::string& report_path) {
  advseg::Checkpoint ckpt = advseg::load_checkpoint(ckpt_dir);
  advseg::Dataset data = load_data_dir(data_dir, advseg::Split::test);
  advseg::RelaxedParams params;
  params.rho = rho;
  params.distance = distance == "chebyshev" ? advseg::Distance::chebyshev
                                            : advseg::Distance::euclidean;
  const advseg::MetricReport report =
      advseg::evaluate(ckpt, data, params, threshold);
  std::cout << advseg::report_text(report);
  if (!report_path.empty()) {
    std::ofstream js(report_path);
    if (!js) throw advseg::IoError("eval: cannot write " + report_path);
    js << report_json(report).dump(2) << "\n";
  }
  return 0;
}

int run_predict(const fs::path& ckpt_dir, const fs::path& image_path,
                const std::string& mask_path, const std::string& out_prefix,
                double threshold) {
  advseg::Checkpoint ckpt = advseg::load_checkpoint(ckpt_dir);
  const advseg::RasterImage image = advseg::read_raster(image_path);
  advseg::Mask gt;
  const bool have_gt = !mask_path.empty();
  if (have_gt) gt = advseg::read_mask(mask_path);
  const advseg::Prediction pred =
      advseg::predict(ckpt, image, have_gt ? &gt : nullptr, threshold);
  advseg::write_mask(out_prefix + ".pgm", pred.mask);
  std::cout << "mask written to " << out_prefix << ".pgm\n";
  if (pred.diff) {
    advseg::write_raster(out_prefix + "_diff.ppm", *pred.diff);
    std::cout << "diff written to " << out_prefix << "_diff.ppm\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial + cross-entropy segmentation lab"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "emit a synthetic dataset to disk");
  advseg::SynthConfig synth_cfg;
  std::string synth_out;
  long synth_seed = 0;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "rng seed");
  synth->add_option("--count", synth_cfg.count, "number of samples");
  synth->add_option("--size", synth_cfg.size, "canvas edge in pixels");
  synth->add_option("--min-buildings", synth_cfg.min_buildings);
  synth->add_option("--max-buildings", synth_cfg.max_buildings);
  synth->add_option("--min-building-size", synth_cfg.min_building_size);
  synth->add_option("--max-building-size", synth_cfg.max_building_size);
  synth->add_option("--noise", synth_cfg.noise, "uniform noise amplitude");
  synth->add_option("--background-level", synth_cfg.background_level);
  synth->add_option("--building-level", synth_cfg.building_level);

  // train
  auto* train = app.add_subcommand("train", "train from a config file");
  std::string train_config, train_data, train_val, train_out;
  train->add_option("--config", train_config, "config file")->required();
  train->add_option("--data", train_data, "dataset directory (images/ masks/)");
  train->add_option("--val", train_val, "validation directory");
  train->add_option("--out", train_out, "checkpoint output directory")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  std::string eval_ckpt, eval_data, eval_report, eval_distance = "euclidean";
  int eval_rho = 3;
  double eval_threshold = 0.5;
  eval->add_option("--ckpt", eval_ckpt, "checkpoint directory")->required();
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--rho", eval_rho, "relaxation radius");
  eval->add_option("--distance", eval_distance, "euclidean or chebyshev")
      ->check(CLI::IsMember({"euclidean", "chebyshev"}));
  eval->add_option("--threshold", eval_threshold, "binarization threshold");
  eval->add_option("--report", eval_report, "write machine-readable report here");

  // predict
  auto* predict = app.add_subcommand("predict", "segment one image");
  std::string pr_ckpt, pr_image, pr_mask, pr_out;
  double pr_threshold = 0.5;
  predict->add_option("--ckpt", pr_ckpt, "checkpoint directory")->required();
  predict->add_option("--image", pr_image, "input PPM image")->required();
  predict->add_option("--mask", pr_mask, "ground-truth PGM for the diff render");
  predict->add_option("--out", pr_out, "output prefix")->required();
  predict->add_option("--threshold", pr_threshold, "binarization threshold");

  try {
    app.parse(argc, argv);
    if (synth->parsed()) {
      synth_cfg.seed = static_cast<std::uint64_t>(synth_seed);
      return run_synth(synth_cfg, synth_out);
    }
    if (train->parsed())
      return run_train(train_config, train_data, train_val, train_out);
    if (eval->parsed())
      return run_eval(eval_ckpt, eval_data, eval_rho, eval_distance,
                      eval_threshold, eval_report);
    if (predict->parsed())
      return run_predict(pr_ckpt, pr_image, pr_mask, pr_out, pr_threshold);
    return 0;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const advseg::ConfigError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 3;
  } catch (const advseg::IoError& e) {
    std::cerr << "error: io: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: invalid: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: runtime: " << e.what() << "\n";
    return 6;
  }
}
