#include <doctest.h>

#include <string>

#include "certiprob/config.hpp"
#include "certiprob/error.hpp"

using namespace certiprob;

namespace {

const char* kSample = R"(# sample run
seed = 7
workers = 2
out = "runs/a"

[data]
source = "blobs"
root = "/tmp/x"

[data.blobs]
per_class = 50
centers = [0.2, 0.2, 0.8, 0.8]

[model]
name = "mlp"
hidden = [16, 8]

[train]
epochs = 3
lambda = 0.5
sample_size = 8   # n

[train.vicinity]
kind = "l2"
epsilon = 0.25

[train.optimizer]
kind = "sgd"
milestones = [2, 3]

[certify]
kappa = 0.05
w_max = 700

[attack]
kinds = ["fgsm", "pgd_linf"]
epsilon = 0.1
)";

std::string error_of(const std::string& text) {
  try {
    RunConfig::from_file(ConfigFile::parse(text, "cfg.toml"));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
    return e.what();
  }
  FAIL("expected a config error");
  return {};
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("parse sections and values") {
  const auto f = ConfigFile::parse(kSample);
  CHECK(f.get_int("seed", 0) == 7);
  CHECK(f.get_string("data.source", "") == "blobs");
  CHECK(f.get_int("train.sample_size", 0) == 8);
  CHECK(f.get_doubles("model.hidden", {}) == std::vector<double>{16, 8});
  CHECK(f.get_strings("attack.kinds", {}) == std::vector<std::string>{"fgsm", "pgd_linf"});
  CHECK(f.get_double("missing.key", 1.5) == 1.5);

  const RunConfig c = RunConfig::from_file(f);
  CHECK(c.seed == 7);
  CHECK(c.train.seed == 7);
  CHECK(c.workers == 2);
  CHECK(c.hidden == std::vector<std::size_t>{16, 8});
  CHECK(c.data.blobs_centers.size() == 2);
  CHECK(c.data.blobs_centers[1][0] == 0.8);
  CHECK(c.train.vicinity.kind == VicinityKind::kL2);
  CHECK(c.train.optimizer.kind == OptimizerKind::kSgd);
  CHECK(c.train.optimizer.lr == 0.01);
  CHECK(c.train.optimizer.milestones == std::vector<int>{2, 3});
  CHECK(c.certify.kappa == 0.05);
  CHECK(c.certify.vicinity.kind == VicinityKind::kL2);  // follows the training vicinity
  CHECK(c.certify.vicinity.epsilon == 0.25);
  REQUIRE(c.attacks.size() == 2);
  CHECK(c.attacks[0].kind == AttackKind::kFgsm);
  CHECK(c.attacks[1].epsilon == 0.1);
}

TEST_CASE("defaults") {
  const RunConfig c = RunConfig::from_file(ConfigFile::parse(""));
  CHECK(c.model == "mlp");
  CHECK(c.hidden == std::vector<std::size_t>{256});
  CHECK(c.train.optimizer.kind == OptimizerKind::kAdadelta);
  CHECK(c.train.optimizer.lr == 1.0);
  CHECK(c.certify.kappa == 0.01);
  CHECK(c.certify.alpha == 0.01);
  CHECK(c.data.ratio == 0.8);
  CHECK(c.attacks.empty());
}

TEST_CASE("syntax errors carry origin and line") {
  const auto msg = [](const std::string& text) {
    try {
      ConfigFile::parse(text, "f.toml");
    } catch (const Error& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(contains(msg("seed = 1\n[data\n"), "f.toml:2"));
  CHECK(contains(msg("seed\n"), "f.toml:1"));
  CHECK(contains(msg("seed = 1\nseed = 2\n"), "duplicate"));
}

TEST_CASE("typed errors name the key path") {
  CHECK(contains(error_of("[train]\nepochs = \"ten\"\n"), "cfg.toml:2: key 'train.epochs'"));
  CHECK(contains(error_of("[train.vicinity]\nepsilon = -1\n"), "train.vicinity"));
  CHECK(contains(error_of("[data]\nsource = 3\n"), "data.source"));
  CHECK(contains(error_of("[train.vicinity]\nkind = \"l7\"\n"), "train.vicinity.kind"));
  CHECK(contains(error_of("[certify]\nkappa = 2\n"), "kappa"));
  CHECK(contains(error_of("[attack]\nkinds = [\"pgd_linf\"]\nepsilon = 0\n"), "attack"));
  CHECK(contains(error_of("[train]\nclip = true\n"), "unknown config key 'train.clip'"));
}

TEST_CASE("resolved text round trips to the same hash") {
  const RunConfig a = RunConfig::from_file(ConfigFile::parse(kSample));
  const std::string text = a.resolved_text();
  const RunConfig b = RunConfig::from_file(ConfigFile::parse(text, "resolved"));
  CHECK(b.resolved_text() == text);
  CHECK(b.hash() == a.hash());
  CHECK(a.hash().size() == 16);
}

TEST_CASE("hash ignores placement keys only") {
  const std::string base = kSample;
  const auto hash_of = [](const std::string& t) { return RunConfig::from_file(ConfigFile::parse(t)).hash(); };
  const std::string h = hash_of(base);
  std::string moved = base;
  moved.replace(moved.find("workers = 2"), 11, "workers = 5");
  moved.replace(moved.find("\"runs/a\""), 8, "\"runs/b\"");
  moved.replace(moved.find("\"/tmp/x\""), 8, "\"/tmp/y\"");
  CHECK(hash_of(moved) == h);

  std::string reseeded = base;
  reseeded.replace(reseeded.find("seed = 7"), 8, "seed = 8");
  CHECK(hash_of(reseeded) != h);
  std::string relambda = base;
  relambda.replace(relambda.find("lambda = 0.5"), 12, "lambda = 0.6");
  CHECK(hash_of(relambda) != h);
}

TEST_CASE("reference lists every section") {
  const std::string ref = config_reference();
  for (const char* part : {"seed =", "[data]", "root =", "[train.vicinity]", "epsilon =", "[train.optimizer]",
                           "[certify]", "kappa =", "[certify.vicinity]", "[attack]", "kinds ="})
    CHECK(contains(ref, part));
}
