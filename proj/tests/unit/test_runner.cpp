#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <unistd.h>

#include "certiprob/error.hpp"
#include "certiprob/runner.hpp"

using namespace certiprob;
namespace fs = std::filesystem;

namespace {

const char* kBlobs = R"(seed = 7
[data]
source = "blobs"
[data.blobs]
per_class = 60
test_per_class = 20
[model]
hidden = [16]
[train]
epochs = 4
batch_size = 32
[train.optimizer]
kind = "sgd"
lr = 0.2
[train.vicinity]
epsilon = 0.05
[certify]
w_max = 800
[attack]
kinds = ["fgsm", "pgd_linf"]
epsilon = 0.05
steps = 3
)";

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("certiprob_runner_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

RunConfig config_in(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path cfg = dir / (name + ".toml");
  spit(cfg, text);
  RunOptions o;
  o.config_path = cfg.string();
  o.out = (dir / name).string();
  return resolve_config(o);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CERTIPROB_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<nlohmann::json> read_lines(const fs::path& p) {
  std::vector<nlohmann::json> out;
  std::ifstream f(p);
  std::string line;
  while (std::getline(f, line)) out.push_back(nlohmann::json::parse(line));
  return out;
}

ErrorCode code_of(const std::function<void()>& fn, std::string* what = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (what) *what = e.what();
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kState;
}

}  // namespace

TEST_CASE("end-to-end blobs run is reproducible and recomputable") {
  TempDir tmp;
  const RunConfig c = config_in(tmp.path, "a", kBlobs);
  const fs::path run = c.out;
  cmd_train(c);
  cmd_eval(c, "");
  for (const char* f : {"config.resolved.toml", "train_log.jsonl", "model.cprb", "certify.jsonl", "certify.csv",
                        "summary.json", "summary.csv", "attack.jsonl", "report.txt", "report.json", "report.csv"})
    CHECK_MESSAGE(fs::exists(run / f), f);

  SUBCASE("artifacts carry the config hash") {
    for (const char* f : {"train_log.jsonl", "certify.jsonl", "attack.jsonl"}) {
      const auto lines = read_lines(run / f);
      REQUIRE(!lines.empty());
      CHECK(lines[0]["type"] == "header");
      CHECK(lines[0]["config_hash"] == c.hash());
      CHECK(lines[0]["seed"] == 7);
    }
  }

  SUBCASE("rerun gives identical bytes") {
    const RunConfig b = config_in(tmp.path, "b", kBlobs);
    cmd_train(b);
    cmd_certify(b, "");
    CHECK(slurp(run / "model.cprb") == slurp(fs::path(b.out) / "model.cprb"));
    CHECK(slurp(run / "certify.jsonl") == slurp(fs::path(b.out) / "certify.jsonl"));
  }

  SUBCASE("report recomputation is byte-identical") {
    const std::string txt = slurp(run / "report.txt"), js = slurp(run / "report.json"), csv = slurp(run / "report.csv");
    CHECK(cmd_report(run.string()) == txt);
    CHECK(slurp(run / "report.txt") == txt);
    CHECK(slurp(run / "report.json") == js);
    CHECK(slurp(run / "report.csv") == csv);
  }

  SUBCASE("report agrees with an independent fold over the logs") {
    std::size_t n = 0, cert = 0, cert_ok = 0, ok = 0;
    for (const auto& j : read_lines(run / "certify.jsonl")) {
      if (j["type"] != "record") continue;
      ++n;
      const bool c1 = j["verdict"] == "certified";
      const bool c2 = j["pred"] == j["label"];
      cert += c1;
      ok += c2;
      cert_ok += c1 && c2;
    }
    std::map<std::string, std::pair<int, int>> defence;
    for (const auto& j : read_lines(run / "attack.jsonl")) {
      if (j["type"] != "outcome") continue;
      auto& t = defence[j["kind"].get<std::string>() + "/" + j["inference"].get<std::string>()];
      t.first += j["pred"] == j["label"];
      t.second += 1;
    }
    const auto rep = nlohmann::json::parse(slurp(run / "report.json"))["summary"];
    REQUIRE(n == 40);
    CHECK(rep["count"] == n);
    CHECK(rep["certified_robustness_rate"].get<double>() == static_cast<double>(cert) / n);
    CHECK(rep["certified_robust_accuracy"].get<double>() == static_cast<double>(cert_ok) / n);
    CHECK(rep["standard_accuracy"].get<double>() == static_cast<double>(ok) / n);
    CHECK(rep["defence"].size() == defence.size());
    CHECK(defence.size() == 4);
    for (const auto& d : rep["defence"]) {
      const auto& t = defence.at(d["kind"].get<std::string>() + "/" + d["inference"].get<std::string>());
      CHECK(d["rate"].get<double>() == static_cast<double>(t.first) / t.second);
    }
  }

  SUBCASE("mixed hashes are refused") {
    const RunConfig other = config_in(tmp.path, "c", std::string(kBlobs) + "[certify.vicinity]\nepsilon = 0.2\n");
    fs::create_directories(other.out);
    fs::copy_file(run / "model.cprb", fs::path(other.out) / "model.cprb");
    cmd_certify(other, "");
    fs::copy_file(run / "attack.jsonl", fs::path(other.out) / "attack.jsonl");
    std::string what;
    CHECK(code_of([&] { cmd_report(other.out); }, &what) == ErrorCode::kState);
    CHECK(what.find("attack.jsonl") != std::string::npos);
  }

  SUBCASE("missing or corrupt artifacts are named") {
    std::string what;
    const fs::path d = tmp.path / "broken";
    fs::create_directories(d);
    CHECK(code_of([&] { cmd_report(d.string()); }, &what) == ErrorCode::kIo);
    CHECK(what.find("certify.jsonl") != std::string::npos);

    std::string text = slurp(run / "certify.jsonl");
    spit(d / "certify.jsonl", text.substr(0, text.size() - 25));
    CHECK(code_of([&] { cmd_report(d.string()); }, &what) == ErrorCode::kFormat);
    CHECK(what.find("certify.jsonl") != std::string::npos);

    spit(d / "certify.jsonl", "not json\n");
    CHECK(code_of([&] { cmd_report(d.string()); }, &what) == ErrorCode::kFormat);
  }

  SUBCASE("checkpoint mismatch is rejected") {
    const RunConfig three =
        config_in(tmp.path, "t", std::string(kBlobs) + "[data.blobs]\ncenters = [0.2, 0.2, 0.5, 0.8, 0.8, 0.2]\n");
    std::string what;
    CHECK(code_of([&] { cmd_certify(three, (run / "model.cprb").string()); }, &what) == ErrorCode::kShapeMismatch);
    CHECK(what.find("checkpoint/spec mismatch") != std::string::npos);
  }
}

TEST_CASE("tiny vicinity certifies everything and matches plain accuracy") {
  TempDir tmp;
  const RunConfig c = config_in(tmp.path, "e", std::string(kBlobs) + "[certify.vicinity]\nepsilon = 1e-12\n");
  cmd_train(c);
  cmd_certify(c, "");
  const auto s = nlohmann::json::parse(slurp(fs::path(c.out) / "summary.json"))["summary"];
  CHECK(s["certified_robustness_rate"] == 1.0);
  CHECK(s["standard_accuracy"] == s["plain_accuracy"]);
}

TEST_CASE("overrides") {
  TempDir tmp;
  spit(tmp.path / "c.toml", kBlobs);
  RunOptions o;
  o.config_path = (tmp.path / "c.toml").string();
  o.seed = 99;
  o.workers = 3;
  o.out = (tmp.path / "x").string();
  o.data_root = "/nowhere";
  const RunConfig c = resolve_config(o);
  CHECK(c.seed == 99);
  CHECK(c.train.seed == 99);
  CHECK(c.workers == 3);
  CHECK(c.out == o.out);
  CHECK(c.data.root == "/nowhere");
  o.seed.reset();
  o.workers = 1;
  o.out = (tmp.path / "y").string();
  RunOptions plain;
  plain.config_path = o.config_path;
  CHECK(resolve_config(o).hash() == resolve_config(plain).hash());
}

TEST_CASE("missing data names the key") {
  TempDir tmp;
  const RunConfig c = config_in(tmp.path, "m", "[data]\nroot = \"/nonexistent\"\n");
  std::string what;
  CHECK(code_of([&] { load_datasets(c); }, &what) == ErrorCode::kConfig);
  INFO(what);
  CHECK(what.find("data.images") != std::string::npos);
}

TEST_CASE("cli exit codes") {
  TempDir tmp;
  spit(tmp.path / "ok.toml", kBlobs);
  spit(tmp.path / "bad.toml", "[train]\nepochs = \"x\"\n");
  const std::string ok = (tmp.path / "ok.toml").string(), out = (tmp.path / "cli").string();
  CHECK(run_cli("--version") == 0);
  CHECK(run_cli("train --config " + ok + " --out " + out) == 0);
  CHECK(run_cli("eval --config " + ok + " --out " + out + " --workers 2") == 0);
  CHECK(run_cli("report " + out) == 0);
  CHECK(run_cli("train --config " + (tmp.path / "bad.toml").string()) == 1);
  CHECK(run_cli("frobnicate") == 1);
  CHECK(run_cli("certify --config " + ok + " --out " + (tmp.path / "none").string()) == 2);
  CHECK(run_cli("report " + (tmp.path / "nothing").string()) == 2);
}
