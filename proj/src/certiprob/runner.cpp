#include "certiprob/runner.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "certiprob/attacks.hpp"
#include "certiprob/certify.hpp"
#include "certiprob/error.hpp"
#include "certiprob/metrics.hpp"
#include "certiprob/vmtrain.hpp"

namespace certiprob {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

ojson header(const RunConfig& c, const std::string& artifact) {
  ojson j;
  j["type"] = "header";
  j["artifact"] = artifact;
  j["config_hash"] = c.hash();
  j["seed"] = c.seed;
  j["version"] = kVersion;
  return j;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), ErrorCode::kIo, "cannot write '" + path.string() + "'");
  return f;
}

void write_file(const fs::path& path, const std::string& text) {
  auto f = open_out(path);
  f << text;
  require(f.good(), ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

std::string data_path(const RunConfig& c, const std::string& key, const std::string& rel) {
  require(!rel.empty(), ErrorCode::kConfig, "key '" + key + "': empty path");
  fs::path p(rel);
  if (p.is_relative() && !c.data.root.empty()) p = fs::path(c.data.root) / p;
  require(fs::exists(p), ErrorCode::kConfig, "key '" + key + "': file not found: " + p.string());
  return p.string();
}

std::string provenance(const RunConfig& c) {
  ojson j;
  j["config_hash"] = c.hash();
  j["seed"] = c.seed;
  j["version"] = kVersion;
  return j.dump();
}

Checkpoint load_for(const RunConfig& config, std::string path, const Dataset& test) {
  if (path.empty()) path = (fs::path(config.out) / "model.cprb").string();
  require(fs::exists(path), ErrorCode::kIo, "checkpoint not found: " + path);
  Checkpoint ck = load_checkpoint(path);
  require(ck.spec.input_shape == test.sample_shape(), ErrorCode::kShapeMismatch,
          "checkpoint/spec mismatch: checkpoint expects input " + shape_str(ck.spec.input_shape) +
              ", data provides " + shape_str(test.sample_shape()));
  require(ck.spec.class_count >= test.class_count, ErrorCode::kShapeMismatch,
          "checkpoint/spec mismatch: checkpoint has " + std::to_string(ck.spec.class_count) +
              " classes, data has " + std::to_string(test.class_count));
  const ModelSpec expected = model_for(config, test);
  if (!(expected.to_json() == ck.spec.to_json()))
    std::cerr << "note: checkpoint architecture differs from [model] in the config; using the checkpoint\n";
  return ck;
}

std::string summary_json(const RunConfig& c, const Summary& s) {
  ojson j;
  j["config_hash"] = c.hash();
  j["seed"] = c.seed;
  j["version"] = kVersion;
  j["summary"] = ojson::parse(s.to_json());
  return j.dump(2) + "\n";
}

std::string summary_csv(const std::string& hash, std::uint64_t seed, const Summary& s) {
  return s.to_csv() + "config_hash," + hash + "\nseed," + std::to_string(seed) + "\nversion," + kVersion + "\n";
}

std::string fmt_rate(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// One parsed JSON-lines artifact: header plus body lines.
struct Artifact {
  fs::path path;
  ojson header;
  std::vector<ojson> lines;
};

Artifact read_artifact(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::kIo, "missing artifact: " + path.string());
  Artifact a;
  a.path = path;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    ojson j;
    try {
      j = ojson::parse(line);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kFormat,
                  "corrupt artifact " + path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
    if (lineno == 1) {
      require(j.is_object() && j.value("type", "") == "header" && j.contains("config_hash") && j.contains("seed"),
              ErrorCode::kFormat, "corrupt artifact " + path.string() + ": first line is not a header");
      a.header = std::move(j);
    } else {
      a.lines.push_back(std::move(j));
    }
  }
  require(!a.header.is_null(), ErrorCode::kFormat, "corrupt artifact " + path.string() + ": empty file");
  return a;
}

}  // namespace

RunConfig resolve_config(const RunOptions& opts) {
  ConfigFile file = opts.config_path.empty() ? ConfigFile::parse("", "<defaults>") : ConfigFile::load(opts.config_path);
  if (opts.seed) file.set("seed", std::to_string(*opts.seed));
  if (opts.workers) file.set("workers", std::to_string(*opts.workers));
  if (!opts.out.empty()) file.set("out", "\"" + opts.out + "\"");
  if (!opts.data_root.empty()) {
    file.set("data.root", "\"" + opts.data_root + "\"");
  } else if (const char* env = std::getenv("CERTIPROB_DATA"); env && *env) {
    file.set("data.root", "\"" + std::string(env) + "\"");
  }
  return RunConfig::from_file(file);
}

std::pair<Dataset, Dataset> load_datasets(const RunConfig& c) {
  const DataConfig& d = c.data;
  if (d.source == "blobs") {
    Dataset train = make_blobs(d.blobs_per_class, d.blobs_centers, d.blobs_spread, derive_seed(c.seed, 3));
    Dataset test = make_blobs(d.blobs_test_per_class, d.blobs_centers, d.blobs_spread, derive_seed(c.seed, 4));
    if (d.train_limit) train = train.head(d.train_limit);
    if (d.test_limit) test = test.head(d.test_limit);
    return {std::move(train), std::move(test)};
  }
  const std::string images = data_path(c, "data.images", d.images);
  Dataset full = load_idx(images, data_path(c, "data.labels", d.labels));
  if (d.train_limit) full = full.head(d.train_limit);
  Dataset train, val;
  if (d.ratio < 1.0) {
    std::tie(train, val) = split_train_val(full, d.ratio, derive_seed(c.seed, 3));
  } else {
    train = std::move(full);
  }
  Dataset test;
  if (!d.test_images.empty() || !d.test_labels.empty()) {
    test = load_idx(data_path(c, "data.test_images", d.test_images),
                    data_path(c, "data.test_labels", d.test_labels));
  } else {
    require(d.ratio < 1.0, ErrorCode::kConfig,
            "key 'data.test_images': no test files and data.ratio = 1 leaves no held-out data");
    test = std::move(val);
  }
  if (d.test_limit) test = test.head(d.test_limit);
  test.class_count = train.class_count = std::max(train.class_count, test.class_count);
  return {std::move(train), std::move(test)};
}

ModelSpec model_for(const RunConfig& c, const Dataset& data) {
  const Shape shape = data.sample_shape();
  if (c.model == "convnet_small") {
    require(shape.size() == 3, ErrorCode::kConfig,
            "key 'model.name': convnet_small needs [C,H,W] inputs, data provides " + shape_str(shape));
    return convnet_small_spec(shape[0], shape[1], shape[2], data.class_count);
  }
  return mlp_spec(shape, c.hidden, data.class_count);
}

void cmd_train(const RunConfig& config) {
  const fs::path out(config.out);
  fs::create_directories(out);
  const Dataset data = load_datasets(config).first;
  const ModelSpec spec = model_for(config, data);
  write_file(out / "config.resolved.toml", config.resolved_text());

  auto log = open_out(out / "train_log.jsonl");
  log << header(config, "train_log").dump() << '\n' << std::flush;
  std::cerr << "train: " << data.size() << " examples, model " << config.model << ", " << config.train.epochs
            << " epochs\n";
  const auto on_epoch = [&](const EpochLog& e, const Parameters& params) {
    ojson j;
    j["type"] = "epoch";
    const ojson fields = ojson::parse(e.to_json());
    for (auto it = fields.begin(); it != fields.end(); ++it) j[it.key()] = it.value();
    log << j.dump() << '\n' << std::flush;
    std::cerr << "epoch " << e.epoch << "/" << config.train.epochs << "  mu " << e.mean_mu << "  sigma "
              << e.mean_sigma << "  train_acc " << fmt_rate(e.train_acc) << "\n";
    if (config.checkpoint_every > 0 && e.epoch % config.checkpoint_every == 0 && e.epoch < config.train.epochs) {
      char name[32];
      std::snprintf(name, sizeof name, "model.epoch%03d.cprb", e.epoch);
      save_checkpoint((out / name).string(), {spec, params, provenance(config)});
    }
  };
  TrainResult result = train(spec, data, config.train, on_epoch);
  save_checkpoint((out / "model.cprb").string(), {spec, result.params, provenance(config)});
}

void cmd_certify(const RunConfig& config, const std::string& checkpoint_path) {
  const fs::path out(config.out);
  fs::create_directories(out);
  const Dataset test = load_datasets(config).second;
  const Checkpoint ck = load_for(config, checkpoint_path, test);
  std::cerr << "certify: " << test.size() << " inputs, " << vicinity_kind_name(config.certify.vicinity.kind)
            << " eps " << config.certify.vicinity.epsilon << "\n";
  const CertifyReport report = certify_set(ck.spec, ck.params, test, config.certify, config.workers);

  auto jl = open_out(out / "certify.jsonl");
  auto csv = open_out(out / "certify.csv");
  jl << header(config, "certify").dump() << '\n';
  csv << "id,label,pred,plain,verdict,w,v,p_left,p_right,correct\n";
  std::vector<EvalRecord> records;
  for (const auto& p : report.predictions) {
    ojson j;
    j["type"] = "record";
    j["id"] = p.id;
    j["label"] = p.label;
    j["pred"] = p.predicted_class;
    j["plain"] = p.plain_class;
    j["verdict"] = verdict_name(p.verdict);
    j["w"] = p.samples_used;
    j["v"] = p.majority_count;
    j["p_left"] = p.p_left;
    j["p_right"] = p.p_right;
    j["correct"] = p.correct();
    jl << j.dump() << '\n';
    csv << p.id << ',' << p.label << ',' << p.predicted_class << ',' << p.plain_class << ','
        << verdict_name(p.verdict) << ',' << p.samples_used << ',' << p.majority_count << ','
        << j["p_left"].dump() << ',' << j["p_right"].dump() << ',' << (p.correct() ? 1 : 0) << '\n';
    records.push_back(EvalRecord::from_prediction(p));
  }
  const Summary s = summarize(records, {});
  write_file(out / "summary.json", summary_json(config, s));
  write_file(out / "summary.csv", summary_csv(config.hash(), config.seed, s));
  std::cerr << "certified rate " << fmt_rate(s.certified_robustness_rate) << ", certified robust accuracy "
            << fmt_rate(s.certified_robust_accuracy) << ", accuracy " << fmt_rate(s.standard_accuracy) << "\n";
}

void cmd_attack(const RunConfig& config, const std::string& checkpoint_path) {
  require(!config.attacks.empty(), ErrorCode::kConfig, "key 'attack.kinds': no attacks configured");
  const fs::path out(config.out);
  fs::create_directories(out);
  const Dataset test = load_datasets(config).second;
  const Checkpoint ck = load_for(config, checkpoint_path, test);

  std::vector<InferenceMode> modes;
  if (config.attack_inference != "certified") modes.push_back(InferenceMode::kPlain);
  if (config.attack_inference != "plain") modes.push_back(InferenceMode::kCertified);

  auto jl = open_out(out / "attack.jsonl");
  jl << header(config, "attack").dump() << '\n';
  for (const auto& attack : config.attacks) {
    for (InferenceMode mode : modes) {
      const DefenceResult r =
          defence_success_rate(ck.spec, ck.params, test, attack, mode, &config.certify, config.workers);
      for (const auto& o : r.outcomes) {
        ojson j;
        j["type"] = "outcome";
        j["kind"] = attack_kind_name(attack.kind);
        j["epsilon"] = attack.epsilon;
        j["inference"] = inference_mode_name(mode);
        j["id"] = o.id;
        j["label"] = o.label;
        j["pred"] = o.prediction;
        jl << j.dump() << '\n';
      }
      std::cerr << attack_kind_name(attack.kind) << " eps " << attack.epsilon << " (" << inference_mode_name(mode)
                << "): defence success rate " << fmt_rate(r.rate) << "\n";
    }
  }
}

void cmd_eval(const RunConfig& config, const std::string& checkpoint_path) {
  cmd_certify(config, checkpoint_path);
  if (!config.attacks.empty()) cmd_attack(config, checkpoint_path);
  std::cout << cmd_report(config.out);
}

std::string cmd_report(const std::string& run_dir) {
  const fs::path dir(run_dir);
  require(fs::is_directory(dir), ErrorCode::kIo, "missing run directory: " + run_dir);

  std::vector<Artifact> artifacts;
  artifacts.push_back(read_artifact(dir / "certify.jsonl"));
  for (const char* optional : {"attack.jsonl", "train_log.jsonl"})
    if (fs::exists(dir / optional)) artifacts.push_back(read_artifact(dir / optional));
  const std::string hash = artifacts.front().header["config_hash"].get<std::string>();
  const std::uint64_t seed = artifacts.front().header["seed"].get<std::uint64_t>();
  for (const auto& a : artifacts)
    require(a.header["config_hash"].get<std::string>() == hash, ErrorCode::kState,
            "mixed config hashes in " + run_dir + ": " + a.path.filename().string() + " has " +
                a.header["config_hash"].get<std::string>() + ", certify.jsonl has " + hash);

  std::vector<EvalRecord> records;
  for (const auto& j : artifacts.front().lines) {
    try {
      if (j.value("type", "") != "record") continue;
      EvalRecord r;
      r.id = j.at("id").get<std::size_t>();
      r.ground_truth = j.at("label").get<int>();
      r.majority_pred = j.at("pred").get<int>();
      r.plain_pred = j.at("plain").get<int>();
      r.verdict = verdict_from_name(j.at("verdict").get<std::string>());
      r.samples_used = j.at("w").get<std::uint64_t>();
      records.push_back(r);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kFormat, "corrupt artifact " + artifacts.front().path.string() + ": " + e.what());
    }
  }
  require(!records.empty(), ErrorCode::kFormat, "corrupt artifact " + artifacts.front().path.string() + ": no records");

  // Defence rates, one per (kind, epsilon, inference) in order of first appearance.
  std::vector<AttackRate> rates;
  std::vector<std::pair<std::size_t, std::size_t>> tallies;  // correct, total
  if (artifacts.size() > 1 && artifacts[1].path.filename() == "attack.jsonl") {
    for (const auto& j : artifacts[1].lines) {
      try {
        if (j.value("type", "") != "outcome") continue;
        AttackRate key{j.at("kind").get<std::string>(), j.at("epsilon").get<double>(),
                       j.at("inference").get<std::string>(), 0.0};
        std::size_t k = 0;
        while (k < rates.size() &&
               !(rates[k].kind == key.kind && rates[k].epsilon == key.epsilon && rates[k].inference == key.inference))
          ++k;
        if (k == rates.size()) {
          rates.push_back(key);
          tallies.emplace_back(0, 0);
        }
        tallies[k].first += j.at("pred").get<int>() == j.at("label").get<int>() ? 1 : 0;
        tallies[k].second += 1;
      } catch (const std::exception& e) {
        throw Error(ErrorCode::kFormat, "corrupt artifact " + artifacts[1].path.string() + ": " + e.what());
      }
    }
    for (std::size_t k = 0; k < rates.size(); ++k)
      rates[k].rate = static_cast<double>(tallies[k].first) / static_cast<double>(tallies[k].second);
  }

  const Summary s = summarize(records, rates);
  const std::string version = artifacts.front().header.value("version", "");

  std::ostringstream text;
  text << "run        " << run_dir << "\n"
       << "config     " << hash << "\n"
       << "seed       " << seed << "\n"
       << "version    " << version << "\n\n";
  char row[160];
  const auto line = [&](const std::string& name, const std::string& value) {
    std::snprintf(row, sizeof row, "  %-40s %12s\n", name.c_str(), value.c_str());
    text << row;
  };
  line("metric", "value");
  line("inputs", std::to_string(s.count));
  line("standard accuracy (majority)", fmt_rate(s.standard_accuracy));
  line("standard accuracy (plain)", fmt_rate(s.plain_accuracy));
  line("certified robustness rate", fmt_rate(s.certified_robustness_rate));
  line("certified robust accuracy", fmt_rate(s.certified_robust_accuracy));
  line("mean samples", fmt_rate(s.mean_samples));
  line("median samples", fmt_rate(s.median_samples));
  for (const auto& a : s.defence)
    line("defence " + a.kind + " eps " + ojson(a.epsilon).dump() + " (" + a.inference + ")", fmt_rate(a.rate));

  ojson j;
  j["config_hash"] = hash;
  j["seed"] = seed;
  j["version"] = version;
  j["summary"] = ojson::parse(s.to_json());
  write_file(dir / "report.txt", text.str());
  write_file(dir / "report.json", j.dump(2) + "\n");
  write_file(dir / "report.csv", s.to_csv() + "config_hash," + hash + "\nseed," + std::to_string(seed) +
                                     "\nversion," + version + "\n");
  return text.str();
}

int exit_code_for(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e))
    if (err->code() == ErrorCode::kConfig || err->code() == ErrorCode::kInvalidArgument) return 1;
  return 2;
}

}  // namespace certiprob
