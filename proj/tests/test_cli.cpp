// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "f2net/cli.hpp"
#include "test_util.hpp"

using namespace f2net;
using namespace f2net::testing;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

const std::string kToy = std::string(F2NET_SOURCE_DIR) + "/configs/toy.json";

}  // namespace

TEST_CASE("help exits 0 and no subcommand is a usage error") {
  CHECK(cli({"--help"}).code == kExitOk);
  CHECK(cli({}).code == kExitUsage);
}

TEST_CASE("unknown flags and keys name the offending token") {
  Result r = cli({"selftest", "--bogus-flag"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("--bogus-flag") != std::string::npos);

  TempDir d("cli_key");
  r = cli({"--set", "afd.nonsense=3", "gradcheck", "--config", kToy, "--module", "tensor_core"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("afd.nonsense") != std::string::npos);
}

TEST_CASE("a violated invariant names both fields") {
  Result r = cli({"--set", "afd.groups=5", "gradcheck", "--config", kToy, "--module", "tensor_core"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("afd.groups") != std::string::npos);
  CHECK(r.err.find("afd.embed_dim") != std::string::npos);
}

TEST_CASE("a missing dataset is a usage error, a corrupt file a runtime failure") {
  TempDir d("cli_missing");
  Result r = cli({"eval", "--data", (d.path / "nope").string(), "--ckpt", (d.path / "x.ckpt").string(), "--report",
                  (d.path / "r.json").string()});
  CHECK(r.code == kExitUsage);

  std::ofstream(d.path / "bad.ckpt") << "not a checkpoint";
  std::ofstream(d.path / "bad.png") << "not an image";
  r = cli({"predict", "--image", (d.path / "bad.png").string(), "--ckpt", (d.path / "bad.ckpt").string(), "--out",
           (d.path / "p.png").string()});
  CHECK(r.code == kExitRuntime);
}

TEST_CASE("gen-data, train, eval, predict and decompose end to end") {
  TempDir d("cli_e2e");
  const std::string data = (d.path / "data").string();
  REQUIRE(cli({"gen-data", "--seed", "1", "--count", "8", "--size", "32", "--classes", "3", "--out", data}).code ==
          kExitOk);
  CHECK(std::filesystem::exists(d.path / "data" / "manifest.json"));
  CHECK(std::filesystem::exists(d.path / "data" / "gen-data.config.json"));

  const std::string ckpt = (d.path / "m.ckpt").string(), log = (d.path / "log.csv").string();
  Result tr = cli({"--set", "reference_size=32", "train", "--data", data, "--config", kToy, "--iters", "3",
                   "--out-ckpt", ckpt, "--log", log});
  REQUIRE_MESSAGE(tr.code == kExitOk, tr.err);
  CHECK(std::filesystem::exists(ckpt + ".config.json"));
  std::ifstream in(log);
  std::string header, line;
  std::getline(in, header);
  CHECK(header.rfind("step,ce,cfal,cfbl,total", 0) == 0);
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);

  // The echoed config reproduces the run bit-identically.
  const std::string ckpt2 = (d.path / "m2.ckpt").string(), log2 = (d.path / "log2.csv").string();
  REQUIRE(cli({"train", "--data", data, "--config", ckpt + ".config.json", "--iters", "3", "--out-ckpt", ckpt2,
               "--log", log2})
              .code == kExitOk);
  std::ifstream a(log), b(log2);
  CHECK(std::string(std::istreambuf_iterator<char>(a), {}) == std::string(std::istreambuf_iterator<char>(b), {}));

  const std::string report = (d.path / "report.json").string();
  Result ev = cli({"eval", "--data", data, "--ckpt", ckpt, "--report", report});
  REQUIRE_MESSAGE(ev.code == kExitOk, ev.err);
  std::ifstream rj(report);
  const nlohmann::json j = nlohmann::json::parse(rj);
  CHECK(j.at("miou").get<double>() >= 0.0);
  CHECK(j.at("split") == "val");

  const std::string image = (d.path / "data" / "train" / "images" / "0000.png").string();
  const std::string pred = (d.path / "pred.png").string();
  Result pr = cli({"predict", "--image", image, "--ckpt", ckpt, "--tile", "32", "--overlap", "8", "--out", pred,
                   "--heatmaps"});
  REQUIRE_MESSAGE(pr.code == kExitOk, pr.err);
  CHECK(std::filesystem::exists(pred));
  CHECK(std::filesystem::exists(d.path / "pred_heat_highfreq.png"));
  CHECK(std::filesystem::exists(d.path / "pred_heat_lowfreq.png"));

  const std::string dec = (d.path / "dec").string();
  Result de = cli({"decompose", "--image", image, "--config", kToy, "--out", dec});
  REQUIRE_MESSAGE(de.code == kExitOk, de.err);
  CHECK(std::filesystem::exists(d.path / "dec" / "0000_lf.png"));
  CHECK(std::filesystem::exists(d.path / "dec" / "0000_hf.png"));
  std::ifstream err_txt(d.path / "dec" / "0000_decompose.txt");
  CHECK(err_txt.good());
}

TEST_CASE("gradcheck on one module prints its error and passes") {
  Result r = cli({"gradcheck", "--module", "afd"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("afd") != std::string::npos);
}
