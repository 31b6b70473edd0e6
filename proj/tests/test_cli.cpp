#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "helpers.hpp"
#include "in2out/masking.hpp"
#include "in2out/tensorio.hpp"
#include "in2out/trainer.hpp"

using namespace in2out;
using Catch::Matchers::ContainsSubstring;

namespace {

struct CmdResult {
  int code = -1;
  std::string out, err;
};

// Shared scratch space for every CLI invocation in this file; removed when
// the test binary exits.
testutil::TempDir& workspace() {
  static testutil::TempDir w("cli_ws");
  return w;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Run the installed binary through the shell, capturing both streams. An
// optional prefix sets or clears environment variables for the child only.
CmdResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  static int counter = 0;
  const fs::path out_file = workspace() / ("stdout_" + std::to_string(counter));
  const fs::path err_file = workspace() / ("stderr_" + std::to_string(counter));
  ++counter;
  std::string cmd;
  if (!env_prefix.empty()) cmd += env_prefix + " ";
  cmd += std::string(IN2OUT_CLI_PATH) + " " + args + " > " + out_file.string() + " 2> " +
         err_file.string();
  const int raw = std::system(cmd.c_str());
  CmdResult r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

// Failed commands end with a one-line JSON record on stderr.
json error_record(const CmdResult& r) {
  std::istringstream in(r.err);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  INFO("stderr: " << r.err);
  return json::parse(last);
}

fs::path make_dataset_once(const std::string& name, const std::string& flags) {
  const fs::path root = workspace() / name;
  if (!fs::exists(root)) {
    const CmdResult r = run_cli("make-synth --out " + root.string() + " " + flags);
    if (r.code != 0) throw std::runtime_error("fixture dataset failed: " + r.err);
  }
  return root;
}

// 2 clips x 8 frames. 24x8 trains with the stock mask range; 48x8 leaves a
// feature-resolution band at ratio 1/3 for the band-supervised designs.
fs::path data24() {
  return make_dataset_once("data24", "--clips 2 --frames 8 --size 24x16 --shapes 2 --velocity 2 --seed 7");
}
fs::path data48() {
  return make_dataset_once("data48", "--clips 2 --frames 8 --size 48x16 --shapes 2 --velocity 2 --seed 7");
}

fs::path write_json(const std::string& name, const json& j) {
  const fs::path p = workspace() / name;
  std::ofstream f(p, std::ios::trunc);
  f << j.dump(2) << "\n";
  return p;
}

json small_train_config(std::int64_t iters) {
  return json{{"iters", iters},        {"lr", 1e-4},
              {"resize", {24, 16}},     {"design", "global_tpatch"},
              {"seed", 4},             {"generator", {{"kind", "toy"}}}};
}

std::vector<std::string> non_empty_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("help lists every subcommand, bad usage leaves a record", "[cli]") {
  const CmdResult help = run_cli("--help");
  CHECK(help.code == 0);
  for (const char* sub : {"make-synth", "extract-out", "rf-plan", "train", "eval", "ablate"})
    CHECK_THAT(help.out, ContainsSubstring(sub));

  const CmdResult bare = run_cli("");
  CHECK(bare.code != 0);
  const json rec = error_record(bare);
  CHECK(rec.at("command") == "in2out");
  CHECK_THAT(rec.at("error").get<std::string>(), ContainsSubstring("usage:"));

  const CmdResult unknown = run_cli("rf-plan --bogus 1");
  CHECK(unknown.code != 0);
  CHECK_THAT(error_record(unknown).at("error").get<std::string>(), ContainsSubstring("usage:"));
}

TEST_CASE("make-synth renders a deterministic on-disk dataset", "[cli]") {
  const fs::path a = data48();
  REQUIRE(fs::exists(a / "clip_00000" / "manifest.json"));
  REQUIRE(fs::exists(a / "clip_00001" / "frames" / "00007.png"));
  CHECK(list_clip_dirs(a).size() == 2);

  // Same seed, fresh directory: byte-identical frames.
  const fs::path b = workspace() / "data48_again";
  const CmdResult r =
      run_cli("make-synth --out " + b.string() + " --clips 2 --frames 8 --size 48x16 --shapes 2 --velocity 2 --seed 7");
  REQUIRE(r.code == 0);
  CHECK_THAT(r.err, ContainsSubstring("wrote 2 clips"));
  const std::string pa = slurp(a / "clip_00001" / "frames" / "00004.png");
  const std::string pb = slurp(b / "clip_00001" / "frames" / "00004.png");
  REQUIRE(!pa.empty());
  CHECK(pa == pb);

  const CmdResult bad = run_cli("make-synth --out " + (workspace() / "x").string() + " --size 10x5");
  CHECK(bad.code == 1);
  const json rec = error_record(bad);
  CHECK(rec.at("command") == "make-synth");
  CHECK_THAT(rec.at("error").get<std::string>(), ContainsSubstring("width must be >= 24"));

  const CmdResult badsize =
      run_cli("make-synth --out " + (workspace() / "y").string() + " --size 96");
  CHECK_THAT(error_record(badsize).at("error").get<std::string>(),
             ContainsSubstring("expected WxH"));
}

TEST_CASE("extract-out writes exactly the band columns", "[cli]") {
  const fs::path src = data48() / "clip_00000";
  const fs::path dst = workspace() / "bands48";
  const CmdResult r = run_cli("extract-out --clip " + src.string() + " --ratio 0.25 --out " +
                              dst.string());
  REQUIRE(r.code == 0);

  const VideoTensor<float> full = load_clip(src);
  const VideoTensor<float> bands = load_clip(dst);
  CHECK(load_manifest(dst).clip_id == "clip_00000_bands");
  REQUIRE(bands.width() == 12);  // 2 * floor(0.25 * 48 / 2)
  const Tensor<float> expect = out_extract(full.data, 0.25);
  REQUIRE(bands.data.numel() == expect.numel());
  bool equal = true;
  for (std::int64_t i = 0; i < expect.numel(); ++i) equal = equal && bands.data[i] == expect[i];
  CHECK(equal);  // 8-bit frames re-encode losslessly

  const CmdResult bad = run_cli("extract-out --clip " + src.string() + " --ratio 0.01 --out " +
                                (workspace() / "bands_bad").string());
  CHECK(bad.code == 1);
  CHECK_THAT(error_record(bad).at("error").get<std::string>(), ContainsSubstring("empty band"));
}

TEST_CASE("rf-plan prints the exact field and flags misses", "[cli]") {
  const CmdResult full =
      run_cli("rf-plan --kernels 7,7,7,7,7,7 --strides 2,2,2,2,2,2 --target 32");
  REQUIRE(full.code == 0);
  CHECK_THAT(full.out, ContainsSubstring("layer 6:"));
  CHECK_THAT(full.out, ContainsSubstring("exact receptive field: 379"));
  CHECK_THAT(full.out, ContainsSubstring("heuristic k*prod(strides): 448"));
  CHECK_THAT(full.out, ContainsSubstring("target 32: PASS"));

  const CmdResult fem = run_cli("rf-plan --kernels 7,7,7 --strides 2,2,2");
  REQUIRE(fem.code == 0);
  CHECK_THAT(fem.out, ContainsSubstring("exact receptive field: 43"));
  CHECK_THAT(fem.out, ContainsSubstring("heuristic k*prod(strides): 56"));

  const CmdResult miss =
      run_cli("rf-plan --kernels 7,7,7,7,7,7 --strides 2,2,2,2,2,2 --target 380");
  CHECK(miss.code == 1);
  CHECK_THAT(miss.out, ContainsSubstring("target 380: FAIL (exact 379 < 380)"));

  const CmdResult junk = run_cli("rf-plan --kernels 7,x --strides 2,2");
  CHECK(junk.code == 1);
  CHECK_THAT(error_record(junk).at("error").get<std::string>(), ContainsSubstring("not an integer"));

  const CmdResult uneven = run_cli("rf-plan --kernels 7,7 --strides 2");
  CHECK_THAT(error_record(uneven).at("error").get<std::string>(),
             ContainsSubstring("same length"));
}

TEST_CASE("train runs a config end to end and resumes bitwise", "[cli]") {
  const fs::path cfg3 = write_json("train3.json", small_train_config(3));
  const fs::path cfg6 = write_json("train6.json", small_train_config(6));
  const fs::path run_a = workspace() / "runA";

  const CmdResult a = run_cli("train --config " + cfg3.string() + " --data " + data24().string() +
                              " --out " + run_a.string());
  REQUIRE(a.code == 0);
  CHECK_THAT(a.out, ContainsSubstring("ckpt_000003"));
  CHECK_THAT(a.err, ContainsSubstring("finished 3 iterations"));
  REQUIRE(fs::exists(run_a / "ckpt_000003" / "meta.json"));
  const auto log_a = non_empty_lines(slurp(run_a / "train_log.jsonl"));
  REQUIRE(log_a.size() == 3);
  CHECK(json::parse(log_a[0]).at("iter") == 1);

  // Budget raised to 6 (hash ignores it), resumed from iteration 3: the tail
  // must replay byte-for-byte what an uninterrupted 6-iteration run logs.
  const fs::path run_b = workspace() / "runB";
  const CmdResult b = run_cli("train --config " + cfg6.string() + " --data " + data24().string() +
                              " --out " + run_b.string() + " --resume " +
                              (run_a / "ckpt_000003").string());
  REQUIRE(b.code == 0);
  CHECK_THAT(b.out, ContainsSubstring("ckpt_000006"));
  const auto log_b = non_empty_lines(slurp(run_b / "train_log.jsonl"));
  REQUIRE(log_b.size() == 3);

  const fs::path run_c = workspace() / "runC";
  const CmdResult c = run_cli("train --config " + cfg6.string() + " --data " + data24().string() +
                              " --out " + run_c.string());
  REQUIRE(c.code == 0);
  const auto log_c = non_empty_lines(slurp(run_c / "train_log.jsonl"));
  REQUIRE(log_c.size() == 6);
  for (std::size_t i = 0; i < 3; ++i) {
    INFO("resumed line " << i);
    CHECK(log_b[i] == log_c[i + 3]);
  }

  // Dataset via environment instead of the flag.
  const CmdResult env_run =
      run_cli("train --config " + cfg3.string() + " --out " + (workspace() / "runEnv").string(),
              "IN2OUT_DATA_DIR=" + data24().string());
  CHECK(env_run.code == 0);

  const CmdResult nodata =
      run_cli("train --config " + cfg3.string() + " --out " + (workspace() / "runX").string(),
              "env -u IN2OUT_DATA_DIR");
  CHECK(nodata.code == 1);
  CHECK_THAT(error_record(nodata).at("error").get<std::string>(),
             ContainsSubstring("no data directory"));
}

TEST_CASE("train reports config problems as error records", "[cli]") {
  const CmdResult missing = run_cli("train --config " + (workspace() / "ghost.json").string() +
                                    " --data " + data24().string());
  CHECK(missing.code == 1);
  CHECK_THAT(error_record(missing).at("error").get<std::string>(),
             ContainsSubstring("cannot open config"));

  const fs::path mangled = workspace() / "mangled.json";
  std::ofstream(mangled) << "{iters:";
  const CmdResult parse = run_cli("train --config " + mangled.string());
  CHECK_THAT(error_record(parse).at("error").get<std::string>(),
             ContainsSubstring("config parse error"));

  json j = small_train_config(2);
  j["nope"] = true;
  const CmdResult unknown = run_cli("train --config " + write_json("unknown.json", j).string());
  const json rec = error_record(unknown);
  CHECK(rec.at("command") == "train");
  CHECK_THAT(rec.at("error").get<std::string>(),
             ContainsSubstring("config error at $.nope: unknown key"));

  // Stock mask range cannot keep a feature-space band at 24 px.
  json hier = small_train_config(2);
  hier["design"] = "hierarchical";
  const CmdResult band = run_cli("train --config " + write_json("hier24.json", hier).string() +
                                 " --data " + data24().string());
  CHECK(band.code == 1);
  CHECK_THAT(error_record(band).at("error").get<std::string>(),
             ContainsSubstring("empty band at feature width 3"));
}

TEST_CASE("eval scores identity runs and trained checkpoints", "[cli]") {
  const fs::path rep_i = workspace() / "report_identity.json";
  const CmdResult ident = run_cli("eval --identity --data " + data48().string() + " --report " +
                                  rep_i.string() + " --metrics psnr,ssim,fvd --ratio 0.25");
  REQUIRE(ident.code == 0);
  const json ri = json::parse(slurp(rep_i));
  CHECK(ri.at("aggregate").at("psnr").get<double>() == 100.0);  // capped at identical input
  CHECK(ri.at("aggregate").at("ssim").get<double>() == Catch::Approx(1.0));
  CHECK(ri.at("fvd").get<double>() == Catch::Approx(0.0).margin(1e-6));
  REQUIRE(ri.at("per_clip").size() == 2);
  CHECK(ri.at("per_clip")[0].at("clip_id") == "clip_00000");
  CHECK(ri.at("config").at("region") == "whole");

  const fs::path rep_band = workspace() / "report_band.json";
  const CmdResult band = run_cli("eval --identity --data " + data48().string() + " --report " +
                                 rep_band.string() + " --metrics psnr,ssim --region band");
  REQUIRE(band.code == 0);
  CHECK(json::parse(slurp(rep_band)).at("config").at("region") == "out_band");

  // An untrained toy checkpoint cannot reproduce ground truth.
  const fs::path cfg = write_json("eval_train.json", small_train_config(2));
  const fs::path run = workspace() / "eval_run";
  REQUIRE(run_cli("train --config " + cfg.string() + " --data " + data24().string() + " --out " +
                  run.string())
              .code == 0);
  const fs::path rep_c = workspace() / "report_ckpt.json";
  const CmdResult scored = run_cli("eval --ckpt " + (run / "ckpt_000002").string() + " --data " +
                                   data24().string() + " --report " + rep_c.string() +
                                   " --metrics psnr,ssim");
  REQUIRE(scored.code == 0);
  const json rc = json::parse(slurp(rep_c));
  const double p = rc.at("aggregate").at("psnr").get<double>();
  CHECK(p > 0.0);
  CHECK(p < 100.0);
  CHECK(rc.at("aggregate").at("ssim").get<double>() < 1.0);
  CHECK_FALSE(rc.contains("fvd"));
}

TEST_CASE("eval validates its argument combinations", "[cli]") {
  const CmdResult noreport = run_cli("eval --identity --data " + data48().string());
  CHECK(noreport.code != 0);
  CHECK_THAT(error_record(noreport).at("error").get<std::string>(), ContainsSubstring("usage:"));

  const CmdResult nockpt = run_cli("eval --data " + data48().string() + " --report " +
                                   (workspace() / "r1.json").string());
  CHECK(nockpt.code == 1);
  CHECK_THAT(error_record(nockpt).at("error").get<std::string>(),
             ContainsSubstring("--ckpt is required unless --identity"));

  const CmdResult region = run_cli("eval --identity --data " + data48().string() + " --report " +
                                   (workspace() / "r2.json").string() + " --region diagonal");
  CHECK(region.code == 1);
  CHECK_THAT(error_record(region).at("error").get<std::string>(),
             ContainsSubstring("unknown eval region 'diagonal'"));

  // External feature dumps: both sides or neither.
  Tensor<float> feats({3, 2});
  for (std::int64_t i = 0; i < 6; ++i) feats[i] = static_cast<float>(i) * 0.25f;
  save_fixture(workspace() / "fr.vten", feats);
  save_fixture(workspace() / "ff.vten", feats);
  const CmdResult half = run_cli("eval --identity --data " + data48().string() + " --report " +
                                 (workspace() / "r3.json").string() +
                                 " --metrics fvd --features-real " +
                                 (workspace() / "fr.vten").string());
  CHECK(half.code == 1);
  CHECK_THAT(error_record(half).at("error").get<std::string>(),
             ContainsSubstring("must be given together"));

  const fs::path rep = workspace() / "r4.json";
  const CmdResult dumps = run_cli(
      "eval --identity --data " + data48().string() + " --report " + rep.string() +
      " --metrics fvd --features-real " + (workspace() / "fr.vten").string() +
      " --features-fake " + (workspace() / "ff.vten").string());
  REQUIRE(dumps.code == 0);
  CHECK(json::parse(slurp(rep)).at("fvd").get<double>() == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("ablate trains each design and tabulates the results", "[cli]") {
  json cfg = small_train_config(2);
  cfg["resize"] = {48, 16};
  cfg["mask_ratio_range"] = {1.0 / 3.0, 1.0 / 3.0};  // feature band 1 at width 6
  cfg["seed"] = 2;
  const fs::path cfg_path = write_json("ablate.json", cfg);
  const fs::path out = workspace() / "ablation";

  // Flag order scrambled on purpose: rows come back in canonical table order.
  const CmdResult r = run_cli("ablate --config " + cfg_path.string() +
                              " --designs hierarchical,none,global_tpatch --out " + out.string() +
                              " --data " + data48().string() + " --ratio 0.25");
  REQUIRE(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("PSNR^"));
  CHECK_THAT(r.out, ContainsSubstring("Hierarchical"));

  const json report = json::parse(slurp(out / "ablation.json"));
  CHECK(report.at("eval_ratio").get<double>() == 0.25);
  CHECK(report.at("config").at("resize")[0].get<std::int64_t>() == 48);
  const auto& rows = report.at("rows");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].at("design") == "none");
  CHECK(rows[1].at("design") == "global_tpatch");
  CHECK(rows[2].at("design") == "hierarchical");
  for (const auto& row : rows) {
    INFO(row.dump());
    CHECK(row.at("status") == "ok");
    CHECK(std::isfinite(row.at("psnr").get<double>()));
    CHECK(std::isfinite(row.at("ssim").get<double>()));
    CHECK(std::isfinite(row.at("fvd").get<double>()));
  }
  CHECK(fs::exists(out / "none" / "train_log.jsonl"));
  CHECK(fs::exists(out / "hierarchical" / "ckpt_000002" / "meta.json"));

  const CmdResult dup = run_cli("ablate --config " + cfg_path.string() +
                                " --designs none,none --out " + (workspace() / "dup").string() +
                                " --data " + data48().string());
  CHECK(dup.code == 1);
  CHECK_THAT(error_record(dup).at("error").get<std::string>(),
             ContainsSubstring("duplicate entry none"));

  const CmdResult alien = run_cli("ablate --config " + cfg_path.string() +
                                  " --designs fancy --out " + (workspace() / "alien").string() +
                                  " --data " + data48().string());
  CHECK(alien.code == 1);
  CHECK_THAT(error_record(alien).at("error").get<std::string>(),
             ContainsSubstring("unknown discriminator design 'fancy'"));
}
