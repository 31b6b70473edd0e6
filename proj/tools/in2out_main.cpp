// Command-line front end: one binary, six subcommands.
//
//   make-synth    render a deterministic synthetic clip dataset
//   extract-out   write the band-only columns of a clip (debug aid)
//   rf-plan       exact receptive-field planner for conv stacks
//   train         adversarial fine-tuning from a JSON config
//   eval          PSNR/SSIM/Fréchet evaluation of a checkpoint
//   ablate        train+eval every requested discriminator design
//
// Failures exit nonzero after printing a one-line JSON error record to
// stderr; progress/log chatter also goes to stderr so stdout stays clean for
// report content.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "in2out/designs.hpp"
#include "in2out/discriminator.hpp"
#include "in2out/generator.hpp"
#include "in2out/masking.hpp"
#include "in2out/metrics.hpp"
#include "in2out/synth.hpp"
#include "in2out/tensorio.hpp"
#include "in2out/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace in2out;

namespace {

std::vector<std::int64_t> parse_int_list(const std::string& s, const std::string& flag) {
  std::vector<std::int64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stoll(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw std::runtime_error("--" + flag + ": '" + item + "' is not an integer");
    }
  }
  if (out.empty()) throw std::runtime_error("--" + flag + ": empty list");
  return out;
}

std::pair<std::int64_t, std::int64_t> parse_size(const std::string& s) {
  const auto x = s.find('x');
  if (x != std::string::npos) {
    try {
      return {std::stoll(s.substr(0, x)), std::stoll(s.substr(x + 1))};
    } catch (const std::exception&) {
    }
  }
  throw std::runtime_error("--size: expected WxH, e.g. 96x56, got '" + s + "'");
}

fs::path dataset_root_or_env(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  const char* env = std::getenv("IN2OUT_DATA_DIR");
  if (!env || !*env) throw std::runtime_error("no dataset: pass --data or set IN2OUT_DATA_DIR");
  return env;
}

// ---- make-synth ------------------------------------------------------------

void register_make_synth(CLI::App& app) {
  auto args = std::make_shared<std::pair<SynthSpec, std::string>>();
  auto size = std::make_shared<std::string>("96x56");
  auto out = std::make_shared<std::string>();
  CLI::App* c = app.add_subcommand("make-synth", "render a synthetic clip dataset");
  SynthSpec& spec = args->first;
  c->add_option("--out", *out, "output dataset directory")->required();
  c->add_option("--clips", spec.n_clips, "number of clips")->capture_default_str();
  c->add_option("--frames", spec.frames, "frames per clip")->capture_default_str();
  c->add_option("--size", *size, "frame size WxH")->capture_default_str();
  c->add_option("--shapes", spec.n_shapes, "moving shapes per clip")->capture_default_str();
  c->add_option("--velocity", spec.velocity_range, "max horizontal speed, px/frame")
      ->capture_default_str();
  c->add_option("--seed", spec.seed, "dataset seed")->capture_default_str();
  c->callback([args, size, out] {
    SynthSpec spec = args->first;
    std::tie(spec.width, spec.height) = parse_size(*size);
    const auto dirs = generate_dataset(spec, *out);
    std::cerr << "wrote " << dirs.size() << " clips under " << *out << "\n";
  });
}

// ---- extract-out -----------------------------------------------------------

void register_extract_out(CLI::App& app) {
  struct Args {
    std::string clip, out;
    double ratio = 0.25;
    std::uint64_t seed = 0;
  };
  auto a = std::make_shared<Args>();
  CLI::App* c = app.add_subcommand("extract-out", "write the band-only columns of a clip");
  c->add_option("--clip", a->clip, "input clip directory")->required();
  c->add_option("--ratio", a->ratio, "mask ratio m")->capture_default_str();
  c->add_option("--out", a->out, "output clip directory")->required();
  c->add_option("--seed", a->seed, "unused; accepted for uniformity");
  c->callback([a] {
    const VideoTensor<float> v = load_clip(a->clip);
    VideoTensor<float> bands(out_extract(v.data, a->ratio), Space::pixel);
    save_clip(a->out, bands, load_manifest(a->clip).clip_id + "_bands");
    std::cerr << "wrote band-only clip (" << bands.width() << " columns) to " << a->out << "\n";
  });
}

// ---- rf-plan ---------------------------------------------------------------

void register_rf_plan(CLI::App& app, int& exit_code) {
  struct Args {
    std::string kernels, strides;
    std::int64_t target = 0;
    std::uint64_t seed = 0;
  };
  auto a = std::make_shared<Args>();
  CLI::App* c = app.add_subcommand("rf-plan", "exact receptive-field planner");
  c->add_option("--kernels", a->kernels, "spatial kernel per layer, e.g. 7,7,7")->required();
  c->add_option("--strides", a->strides, "spatial stride per layer, e.g. 2,2,2")->required();
  c->add_option("--target", a->target, "band width the field should cover (0 = no check)");
  c->add_option("--seed", a->seed, "unused; accepted for uniformity");
  c->callback([a, &exit_code] {
    const auto kernels = parse_int_list(a->kernels, "kernels");
    const auto strides = parse_int_list(a->strides, "strides");
    if (kernels.size() != strides.size())
      throw std::runtime_error("--kernels and --strides must have the same length");
    std::vector<Conv3dSpec> specs;
    for (std::size_t i = 0; i < kernels.size(); ++i) {
      Conv3dSpec sp;
      sp.in_channels = sp.out_channels = 1;  // channels do not affect the field
      sp.kt = 3;
      sp.st = 1;
      sp.pt = 1;
      sp.kh = sp.kw = kernels[i];
      sp.sh = sp.sw = strides[i];
      sp.ph = sp.pw = kernels[i] / 2;
      sp.validate();
      specs.push_back(sp);
    }
    const auto rf = receptive_field(specs);
    for (std::size_t i = 0; i < rf.size(); ++i)
      std::cout << "layer " << i + 1 << ": k=" << kernels[i] << " s=" << strides[i]
                << " exact rf=" << rf[i].w << "\n";
    const std::int64_t exact = rf.back().w;
    const RfEntry heur = rf_heuristic(specs);
    std::cout << "exact receptive field: " << exact << "\n";
    std::cout << "heuristic k*prod(strides): " << heur.w
              << " (heuristic only; overestimates strided stacks — not used for the check)\n";
    if (a->target > 0) {
      const bool pass = exact >= a->target;
      std::cout << "target " << a->target << ": " << (pass ? "PASS" : "FAIL") << " (exact "
                << exact << (pass ? " >= " : " < ") << a->target << ")\n";
      if (!pass) exit_code = 1;
    }
  });
}

// ---- train -----------------------------------------------------------------

void register_train(CLI::App& app) {
  struct Args {
    std::string config, resume, data, out;
    std::int64_t seed = -1;
  };
  auto a = std::make_shared<Args>();
  CLI::App* c = app.add_subcommand("train", "adversarial fine-tuning from a JSON config");
  c->add_option("--config", a->config, "training config JSON")->required();
  c->add_option("--resume", a->resume, "checkpoint directory to resume from");
  c->add_option("--data", a->data, "dataset root override");
  c->add_option("--out", a->out, "output directory override");
  c->add_option("--seed", a->seed, "seed override");
  c->callback([a] {
    TrainConfig cfg = load_train_config(a->config);
    if (!a->data.empty()) cfg.data_dir = a->data;
    if (!a->out.empty()) cfg.out_dir = a->out;
    if (a->seed >= 0) cfg.seed = static_cast<std::uint64_t>(a->seed);

    Dataset data = Dataset::load(resolve_data_dir(cfg), cfg.resize_w, cfg.resize_h);
    Trainer trainer(cfg, std::move(data));
    if (!a->resume.empty()) trainer.restore_checkpoint(a->resume);

    fs::create_directories(cfg.out_dir);
    std::ofstream log(fs::path(cfg.out_dir) / "train_log.jsonl", std::ios::app);
    if (!log) throw std::runtime_error("cannot open training log in " + cfg.out_dir);
    const fs::path final_ckpt = trainer.fit(log);
    std::cerr << "finished " << trainer.iteration() << " iterations\n";
    std::cout << final_ckpt.string() << "\n";
  });
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string ckpt, data, report, metrics = "psnr,ssim,fvd";
  std::string region = "whole";
  std::string features_real, features_fake;
  double ratio = 0.25;
  std::int64_t window = 10;
  bool composite = false;
  bool identity = false;
  std::uint64_t seed = 0;
};

json eval_to_json(const MetricsReport& r, const EvalArgs& a, bool want_fvd) {
  json out;
  out["config"] = {{"ckpt", a.ckpt},
                   {"data", a.data},
                   {"ratio", a.ratio},
                   {"region", eval_region_name(r.region)},
                   {"window", a.window},
                   {"composite", a.composite},
                   {"identity", a.identity},
                   {"metrics", a.metrics}};
  out["per_clip"] = json::array();
  for (const auto& c : r.per_clip)
    out["per_clip"].push_back({{"clip_id", c.clip_id}, {"psnr", c.psnr}, {"ssim", c.ssim}});
  out["aggregate"] = {{"psnr", r.aggregate_psnr}, {"ssim", r.aggregate_ssim}};
  if (want_fvd) out["fvd"] = r.fvd;
  return out;
}

void run_eval(const EvalArgs& a) {
  const EvalRegion region = parse_eval_region(a.region);
  const bool want_fvd = a.metrics.find("fvd") != std::string::npos;

  std::unique_ptr<Generator<float>> gen;
  std::int64_t resize_w = 0, resize_h = 0;
  if (!a.identity) {
    if (a.ckpt.empty()) throw std::runtime_error("--ckpt is required unless --identity is given");
    const json meta = CheckpointIO<float>::load_meta(a.ckpt);
    const TrainConfig cfg = parse_train_config(meta.at("config"));
    resize_w = cfg.resize_w;
    resize_h = cfg.resize_h;
    gen = GeneratorRegistry<float>::instance().create(cfg.generator_kind,
                                                      derive_seed(cfg.seed, 0x6765));
    CheckpointIO<float>::restore_store(a.ckpt, meta, gen->params());
  }

  const fs::path data_root = dataset_root_or_env(a.data);
  std::vector<NamedClip> truth, produced;
  for (const fs::path& dir : list_clip_dirs(data_root)) {
    VideoTensor<float> gt = load_clip(dir);
    if (gen) gt = resize_nearest(gt, resize_w, resize_h);
    VideoTensor<float> yhat = a.identity ? gt : sliding_window_infer(*gen, gt, a.window, a.ratio);
    if (a.composite && !a.identity)
      yhat = paste_center(yhat, gt, OutBands::from(a.ratio, gt.width()));
    truth.push_back(NamedClip{load_manifest(dir).clip_id, std::move(gt)});
    produced.push_back(NamedClip{truth.back().clip_id, std::move(yhat)});
  }
  if (truth.empty()) throw std::runtime_error("dataset is empty: " + data_root.string());

  MetricsReport report;
  report.mask_ratio = a.ratio;
  report.region = region;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const Tensor<float>& gt = truth[i].video.data;
    const Tensor<float>& yh = produced[i].video.data;
    ClipMetrics cm;
    cm.clip_id = truth[i].clip_id;
    if (region == EvalRegion::whole) {
      cm.psnr = psnr(yh, gt);
      cm.ssim = ssim(yh, gt);
    } else {
      cm.psnr = psnr(out_extract(yh, a.ratio), out_extract(gt, a.ratio));
      cm.ssim = ssim(out_extract(yh, a.ratio), out_extract(gt, a.ratio));
    }
    report.per_clip.push_back(cm);
  }
  report.finalize_aggregates();

  if (want_fvd) {
    if (!a.features_real.empty() || !a.features_fake.empty()) {
      if (a.features_real.empty() || a.features_fake.empty())
        throw std::runtime_error("--features-real and --features-fake must be given together");
      report.fvd = frechet_distance(stats_from_features(load_feature_dump(a.features_real)),
                                    stats_from_features(load_feature_dump(a.features_fake)));
    } else {
      if (truth.size() < 2)
        throw std::runtime_error("fvd needs >= 2 clips; drop fvd from --metrics for single clips");
      const FeatureExtractor fx = default_feature_extractor();
      report.fvd =
          frechet_distance(video_feature_stats(fx, truth), video_feature_stats(fx, produced));
    }
  }

  std::ofstream f(a.report, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write report " + a.report);
  f << eval_to_json(report, a, want_fvd).dump(2) << "\n";
  std::cerr << "psnr " << report.aggregate_psnr << "  ssim " << report.aggregate_ssim;
  if (want_fvd) std::cerr << "  fvd " << report.fvd;
  std::cerr << "\n";
}

void register_eval(CLI::App& app) {
  auto a = std::make_shared<EvalArgs>();
  CLI::App* c = app.add_subcommand("eval", "score a checkpoint on a dataset");
  c->add_option("--ckpt", a->ckpt, "checkpoint directory (omit with --identity)");
  c->add_option("--data", a->data, "dataset root (default IN2OUT_DATA_DIR)");
  c->add_option("--ratio", a->ratio, "mask ratio m")->capture_default_str();
  c->add_option("--metrics", a->metrics, "comma list of psnr,ssim,fvd")->capture_default_str();
  c->add_option("--region", a->region, "whole|band")->capture_default_str();
  c->add_option("--report", a->report, "output report JSON path")->required();
  c->add_option("--window", a->window, "sliding-window size")->capture_default_str();
  c->add_flag("--composite", a->composite, "paste the known center over the output");
  c->add_flag("--identity", a->identity, "score ground truth against itself (no checkpoint)");
  c->add_option("--features-real", a->features_real,
                "external feature dump (.vten, clips x dims) for the real side");
  c->add_option("--features-fake", a->features_fake, "external feature dump for the generated side");
  c->add_option("--seed", a->seed, "unused; accepted for uniformity");
  c->callback([a] { run_eval(*a); });
}

// ---- ablate ----------------------------------------------------------------

struct AblateArgs {
  std::string config, designs = "all", out, data;
  double ratio = 0.25;
  std::int64_t seed = -1;
};

void run_ablate(const AblateArgs& a) {
  std::vector<DesignKind> designs;
  if (a.designs == "all") {
    designs = all_design_kinds();
  } else {
    std::stringstream ss(a.designs);
    std::string item;
    while (std::getline(ss, item, ',')) designs.push_back(parse_design_kind(item));
  }
  if (designs.empty()) throw std::runtime_error("--designs: empty list");
  for (std::size_t i = 0; i < designs.size(); ++i)
    for (std::size_t j = i + 1; j < designs.size(); ++j)
      if (designs[i] == designs[j])
        throw std::runtime_error("--designs: duplicate entry " + design_kind_name(designs[i]));
  // report rows follow the canonical table order regardless of flag order
  std::vector<DesignKind> ordered;
  for (DesignKind k : all_design_kinds())
    for (DesignKind d : designs)
      if (d == k) ordered.push_back(k);

  const TrainConfig base = load_train_config(a.config);
  fs::create_directories(a.out);

  json rows = json::array();
  for (DesignKind kind : ordered) {
    TrainConfig cfg = base;
    cfg.design = kind;
    if (!a.data.empty()) cfg.data_dir = a.data;
    if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
    cfg.out_dir = (fs::path(a.out) / design_kind_name(kind)).string();
    json row;
    row["design"] = design_kind_name(kind);
    row["label"] = design_kind_label(kind);
    try {
      Dataset data = Dataset::load(resolve_data_dir(cfg), cfg.resize_w, cfg.resize_h);
      Trainer trainer(cfg, std::move(data));
      fs::create_directories(cfg.out_dir);
      std::ofstream log(fs::path(cfg.out_dir) / "train_log.jsonl", std::ios::trunc);
      if (!log) throw std::runtime_error("cannot open training log in " + cfg.out_dir);
      trainer.fit(log);

      // score on the training set: relative comparison across designs
      std::vector<NamedClip> truth, produced;
      for (const fs::path& dir : list_clip_dirs(resolve_data_dir(cfg))) {
        VideoTensor<float> gt = resize_nearest(load_clip(dir), cfg.resize_w, cfg.resize_h);
        VideoTensor<float> yhat = sliding_window_infer(trainer.generator(), gt, 10, a.ratio);
        truth.push_back(NamedClip{load_manifest(dir).clip_id, std::move(gt)});
        produced.push_back(NamedClip{truth.back().clip_id, std::move(yhat)});
      }
      double p = 0, s = 0;
      for (std::size_t i = 0; i < truth.size(); ++i) {
        p += psnr(produced[i].video.data, truth[i].video.data);
        s += ssim(produced[i].video.data, truth[i].video.data);
      }
      row["psnr"] = p / static_cast<double>(truth.size());
      row["ssim"] = s / static_cast<double>(truth.size());
      if (truth.size() >= 2) {
        const FeatureExtractor fx = default_feature_extractor();
        row["fvd"] =
            frechet_distance(video_feature_stats(fx, truth), video_feature_stats(fx, produced));
      }
      row["status"] = "ok";
    } catch (const std::exception& e) {
      // a diverging design is a recorded outcome, not a harness failure
      row["status"] = "failed";
      row["error"] = e.what();
    }
    rows.push_back(row);
    std::cerr << "design " << design_kind_name(kind) << ": "
              << rows.back()["status"].get<std::string>() << "\n";
  }

  json report;
  report["config"] = train_config_json(base);
  report["eval_ratio"] = a.ratio;
  report["rows"] = rows;
  std::ofstream f(fs::path(a.out) / "ablation.json", std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write ablation report in " + a.out);
  f << report.dump(2) << "\n";

  // human-readable table, higher PSNR/SSIM better, lower FVD better
  std::cout << "design              PSNR^   SSIM^   FVD_v   status\n";
  for (const auto& row : rows) {
    char line[160];
    const std::string label = row["label"].get<std::string>();
    if (row["status"] == "ok") {
      std::snprintf(line, sizeof line, "%-18s %7.3f %7.4f %7.3f  ok", label.c_str(),
                    row["psnr"].get<double>(), row["ssim"].get<double>(),
                    row.contains("fvd") ? row["fvd"].get<double>() : 0.0);
    } else {
      std::snprintf(line, sizeof line, "%-18s %7s %7s %7s  failed", label.c_str(), "-", "-", "-");
    }
    std::cout << line << "\n";
  }
}

void register_ablate(CLI::App& app) {
  auto a = std::make_shared<AblateArgs>();
  CLI::App* c = app.add_subcommand("ablate", "train and score every requested design");
  c->add_option("--config", a->config, "shared training config JSON")->required();
  c->add_option("--designs", a->designs, "comma list of designs, or 'all'")->capture_default_str();
  c->add_option("--out", a->out, "output directory for logs and the report")->required();
  c->add_option("--data", a->data, "dataset root override");
  c->add_option("--ratio", a->ratio, "evaluation mask ratio")->capture_default_str();
  c->add_option("--seed", a->seed, "seed override");
  c->callback([a] { run_ablate(*a); });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"outpainting fine-tuning toolkit"};
  app.require_subcommand(1);
  int exit_code = 0;
  register_make_synth(app);
  register_extract_out(app);
  register_rf_plan(app, exit_code);
  register_train(app);
  register_eval(app);
  register_ablate(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints usage/help; nonzero on real errors
    if (code != 0) {
      json record;
      record["command"] = "in2out";
      record["error"] = std::string("usage: ") + e.what();
      std::cerr << record.dump() << "\n";
    }
    return code;
  } catch (const std::exception& e) {
    std::string command = "in2out";
    const auto subs = app.get_subcommands();
    if (!subs.empty()) command = subs.front()->get_name();
    json record;
    record["command"] = command;
    record["error"] = e.what();
    std::cerr << record.dump() << "\n";
    return 1;
  }
  return exit_code;
}
