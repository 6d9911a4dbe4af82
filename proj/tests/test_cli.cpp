#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "test_util.hpp"
#include "tsgp/checkpoint.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int tsgp_cli(const std::string& args) {
  const std::string cmd = std::string(TSGP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct Workdir {
  fs::path path;
  explicit Workdir(const std::string& name) : path(tsgp::test::temp_path(name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Workdir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

const char* kSmallCorpus = "gen-corpus --problems 1 --pop 30 --gens 3 --m-sem 20";

}  // namespace

TEST_CASE("cli: usage errors exit 1") {
  Workdir w("cli_usage");
  CHECK(tsgp_cli("") == 1);
  CHECK(tsgp_cli("no-such-command") == 1);
  CHECK(tsgp_cli("search --bogus-flag --out " + (w / "x")) == 1);
  CHECK(tsgp_cli("gen-corpus --problems 0 --out " + (w / "c.jsonl")) == 1);
  CHECK(fs::is_empty(w.path));
  CHECK(tsgp_cli("--help") == 0);
}

TEST_CASE("cli: deterministic reruns are byte-identical and carry manifests") {
  Workdir w("cli_det");
  const std::string flags = " --deterministic --threads 1 --seed 11 ";
  REQUIRE(tsgp_cli(flags + kSmallCorpus + " --out " + (w / "a.jsonl")) == 0);
  REQUIRE(tsgp_cli(flags + kSmallCorpus + " --out " + (w / "b.jsonl")) == 0);
  CHECK(slurp(w / "a.jsonl") == slurp(w / "b.jsonl"));
  REQUIRE(fs::exists(w / "a.jsonl.manifest.json"));
  const json m = json::parse(slurp(w / "a.jsonl.manifest.json"));
  CHECK(m.at("subcommand") == "gen-corpus");
  CHECK(m.at("seed") == 11);
  CHECK(m.at("config").at("gen-corpus").at("problems") == 1);
  CHECK(m.contains("tool_version"));

  REQUIRE(tsgp_cli(flags + "mine-pairs --corpus " + (w / "a.jsonl") + " --out " +
                   (w / "p1.jsonl")) == 0);
  REQUIRE(tsgp_cli(flags + "mine-pairs --corpus " + (w / "a.jsonl") + " --out " +
                   (w / "p2.jsonl")) == 0);
  CHECK(slurp(w / "p1.jsonl") == slurp(w / "p2.jsonl"));
  const json pm = json::parse(slurp(w / "p1.jsonl.manifest.json"));
  REQUIRE(pm.at("inputs").size() >= 1);
  CHECK(pm.at("inputs")[0].at("sha256").get<std::string>().size() == 64);

  for (const char* dir : {"s1", "s2"}) {
    REQUIRE(tsgp_cli(flags + "search --method stdgp --synthetic --rows 40 --pop 20 --gens 3 --out " +
                     (w / dir)) == 0);
  }
  for (const char* f : {"trace.csv", "variations.csv", "results.csv"}) {
    CHECK(slurp(fs::path(w / "s1") / f) == slurp(fs::path(w / "s2") / f));
  }
  // Manifests differ only in the --out path.
  json m1 = json::parse(slurp(fs::path(w / "s1") / "manifest.json"));
  json m2 = json::parse(slurp(fs::path(w / "s2") / "manifest.json"));
  m1["config"]["search"].erase("out");
  m2["config"]["search"].erase("out");
  CHECK(m1 == m2);
}

TEST_CASE("cli: config file values apply and flags win") {
  Workdir w("cli_config");
  std::ofstream(w / "cfg.json") << R"({"seed": 5, "gen-corpus": {"problems": 2, "pop": 25, "gens": 2, "m-sem": 10}})";
  REQUIRE(tsgp_cli("--config " + (w / "cfg.json") + " gen-corpus --problems 1 --out " +
                   (w / "c.jsonl")) == 0);
  const json m = json::parse(slurp(w / "c.jsonl.manifest.json"));
  CHECK(m.at("seed") == 5);
  CHECK(m.at("config").at("gen-corpus").at("problems") == 1);
  CHECK(m.at("config").at("gen-corpus").at("pop") == 25);

  REQUIRE(tsgp_cli("--deterministic search --method stdgp --synthetic --rows 40 --pop 20 --gens 3 --out " +
                   (w / "r1")) == 0);
  REQUIRE(tsgp_cli("--config " + (w / "r1/manifest.json") + " search --out " + (w / "r2")) == 0);
  CHECK(slurp(w / "r1/trace.csv") == slurp(w / "r2/trace.csv"));

  std::ofstream(w / "bad.json") << "{ not json";
  CHECK(tsgp_cli("--config " + (w / "bad.json") + " gen-corpus --out " + (w / "d.jsonl")) == 1);
}

TEST_CASE("cli: train, search with the model, verify") {
  Workdir w("cli_train");
  REQUIRE(tsgp_cli(std::string(kSmallCorpus) + " --out " + (w / "c.jsonl")) == 0);
  REQUIRE(tsgp_cli("mine-pairs --corpus " + (w / "c.jsonl") + " --out " + (w / "p.jsonl")) == 0);
  REQUIRE(tsgp_cli("train --pairs " + (w / "p.jsonl") +
                   " --epochs 8 --lr 1e-3 --d-model 16 --heads 2 --enc-layers 1 --dec-layers 1"
                   " --batch-size 32 --max-steps 3 --out " +
                   (w / "model.tsgp")) == 0);
  const json h = tsgp::read_checkpoint_header(w / "model.tsgp");
  CHECK(h.at("hyperparams").at("lr").get<double>() == 0.001);
  CHECK(h.at("hyperparams").at("epochs").get<int>() == 8);
  CHECK(h.at("hyperparams").at("ffn_dim").get<int>() == 64);
  CHECK(fs::exists(w / "model.tsgp.curve.csv"));
  CHECK(fs::exists(w / "model.tsgp.manifest.json"));

  REQUIRE(tsgp_cli("search --method tsgp --model " + (w / "model.tsgp") +
                   " --synthetic --rows 40 --sdd 0.1 --pop 100 --gens 50 --out " + (w / "run")) == 0);
  std::ifstream trace(fs::path(w / "run") / "trace.csv");
  std::string line;
  int rows = 0;
  while (std::getline(trace, line)) ++rows;
  CHECK(rows == 1 + 51);
  const json sm = json::parse(slurp(fs::path(w / "run") / "manifest.json"));
  CHECK(sm.at("config").at("search").at("pop") == 100);
  CHECK(sm.at("config").at("search").at("gens") == 50);

  CHECK(tsgp_cli("verify-model --probes 20 --positions 5 --model " + (w / "model.tsgp")) == 0);
  CHECK(tsgp_cli("search --method tsgp --synthetic --out " + (w / "nomodel")) == 1);
  CHECK(tsgp_cli("verify-model --probes 20 --positions 5 --tolerance 1e-300 --model " +
                 (w / "model.tsgp")) == 3);
}

TEST_CASE("cli: data errors exit 2") {
  Workdir w("cli_data");
  std::ofstream(w / "d.csv") << "a,b\n1,2\n3,4\n";
  CHECK(tsgp_cli("search --method stdgp --data " + (w / "d.csv") + " --target y --out " +
                 (w / "r")) == 2);
  std::ofstream(w / "junk.tsgp") << "definitely not a checkpoint";
  CHECK(tsgp_cli("verify-model --model " + (w / "junk.tsgp")) == 2);
}
