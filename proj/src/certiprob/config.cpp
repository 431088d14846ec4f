#include "certiprob/config.hpp"

#include <cctype>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <limits>
#include <sstream>

#include "certiprob/error.hpp"
#include "certiprob/hash.hpp"

namespace certiprob {
namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// Drops a trailing comment that is not inside a string.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string quote(const std::string& s) { return "\"" + s + "\""; }

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text, const std::string& origin) {
  ConfigFile cf;
  cf.origin_ = origin;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    auto bad = [&](const std::string& what) {
      throw Error(ErrorCode::kConfig, origin + ":" + std::to_string(lineno) + ": " + what);
    };
    if (line.front() == '[') {
      if (line.back() != ']') bad("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) bad("empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) bad("expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) bad("expected key = value");
    const std::string path = section.empty() ? key : section + "." + key;
    if (cf.values_.count(path)) bad("duplicate key '" + path + "'");
    cf.values_[path] = {value, lineno};
  }
  return cf;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), ErrorCode::kConfig, "cannot open config file '" + path + "'");
  return parse(std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>()), path);
}

std::set<std::string> ConfigFile::keys() const {
  std::set<std::string> k;
  for (const auto& [key, _] : values_) k.insert(key);
  return k;
}

void ConfigFile::fail(const std::string& key, const std::string& what) const {
  const auto it = values_.find(key);
  const std::string where = it != values_.end() && it->second.line > 0
                                ? origin_ + ":" + std::to_string(it->second.line) + ": "
                                : origin_ + ": ";
  throw Error(ErrorCode::kConfig, where + "key '" + key + "': " + what);
}

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& raw = it->second.raw;
  if (raw.size() < 2 || raw.front() != '"' || raw.back() != '"') fail(key, "expected a quoted string");
  return raw.substr(1, raw.size() - 2);
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::istringstream is(it->second.raw);
  double v;
  if (!(is >> v) || !is.eof()) fail(key, "expected a number, got '" + it->second.raw + "'");
  return v;
}

std::int64_t ConfigFile::get_int(const std::string& key, std::int64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::istringstream is(it->second.raw);
  std::int64_t v;
  if (!(is >> v) || !is.eof()) fail(key, "expected an integer, got '" + it->second.raw + "'");
  return v;
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second.raw == "true") return true;
  if (it->second.raw == "false") return false;
  fail(key, "expected true or false");
}

std::vector<std::string> ConfigFile::array_items(const std::string& key) const {
  const std::string& raw = values_.at(key).raw;
  if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']') fail(key, "expected an array");
  std::vector<std::string> items;
  std::string cur;
  bool quoted = false;
  for (char c : raw.substr(1, raw.size() - 2)) {
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) {
      items.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) items.push_back(trim(cur));
  return items;
}

std::vector<double> ConfigFile::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  if (!has(key)) return fallback;
  std::vector<double> out;
  for (const auto& item : array_items(key)) {
    std::istringstream is(item);
    double v;
    if (!(is >> v) || !is.eof()) fail(key, "expected numbers in array, got '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> ConfigFile::get_strings(const std::string& key,
                                                 const std::vector<std::string>& fallback) const {
  if (!has(key)) return fallback;
  std::vector<std::string> out;
  for (const auto& item : array_items(key)) {
    if (item.size() < 2 || item.front() != '"' || item.back() != '"') fail(key, "expected quoted strings in array");
    out.push_back(item.substr(1, item.size() - 2));
  }
  return out;
}

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> k = {
      "seed", "workers", "out",
      "data.source", "data.root", "data.images", "data.labels", "data.test_images", "data.test_labels",
      "data.ratio", "data.train_limit", "data.test_limit", "data.blobs.per_class", "data.blobs.test_per_class",
      "data.blobs.spread", "data.blobs.centers",
      "model.name", "model.hidden",
      "train.sample_size", "train.batch_size", "train.lambda", "train.epochs", "train.sigma_mode",
      "train.checkpoint_every", "train.vicinity.kind", "train.vicinity.epsilon", "train.vicinity.clip",
      "train.vicinity.translate", "train.vicinity.rotate", "train.vicinity.scale",
      "train.optimizer.kind", "train.optimizer.lr", "train.optimizer.weight_decay", "train.optimizer.milestones",
      "train.optimizer.decay_factor", "train.optimizer.rho", "train.optimizer.eps",
      "certify.kappa", "certify.alpha", "certify.w_min", "certify.w_max", "certify.test_every", "certify.chunk",
      "certify.vicinity.kind", "certify.vicinity.epsilon", "certify.vicinity.clip", "certify.vicinity.translate",
      "certify.vicinity.rotate", "certify.vicinity.scale",
      "attack.kinds", "attack.epsilon", "attack.steps", "attack.step_size", "attack.noise_std",
      "attack.random_start", "attack.inference"};
  return k;
}

VicinitySpec read_vicinity(const ConfigFile& f, const std::string& prefix, const VicinitySpec& def) {
  VicinitySpec v = def;
  try {
    v.kind = vicinity_kind_from_name(f.get_string(prefix + ".kind", vicinity_kind_name(def.kind)));
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, "key '" + prefix + ".kind': " + e.what());
  }
  v.epsilon = f.get_double(prefix + ".epsilon", def.epsilon);
  v.clip = f.get_bool(prefix + ".clip", def.clip);
  v.affine_translate = f.get_double(prefix + ".translate", def.affine_translate);
  v.affine_rotate = f.get_double(prefix + ".rotate", def.affine_rotate);
  v.affine_scale = f.get_double(prefix + ".scale", def.affine_scale);
  try {
    v.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, "section '" + prefix + "': " + e.what());
  }
  return v;
}

std::size_t nonneg(const ConfigFile& f, const std::string& key, std::int64_t def) {
  const std::int64_t v = f.get_int(key, def);
  require(v >= 0, ErrorCode::kConfig, "key '" + key + "': must be >= 0");
  return static_cast<std::size_t>(v);
}

void write_vicinity(std::ostream& os, const VicinitySpec& v) {
  os << "kind = " << quote(vicinity_kind_name(v.kind)) << '\n'
     << "epsilon = " << fmt(v.epsilon) << '\n'
     << "clip = " << (v.clip ? "true" : "false") << '\n'
     << "translate = " << fmt(v.affine_translate) << '\n'
     << "rotate = " << fmt(v.affine_rotate) << '\n'
     << "scale = " << fmt(v.affine_scale) << '\n';
}

}  // namespace

RunConfig RunConfig::from_file(const ConfigFile& f) {
  for (const auto& key : f.keys())
    require(known_keys().count(key) != 0, ErrorCode::kConfig, "unknown config key '" + key + "'");

  RunConfig c;
  const std::int64_t seed = f.get_int("seed", 0);
  c.seed = static_cast<std::uint64_t>(seed);
  c.workers = nonneg(f, "workers", 1);
  require(c.workers >= 1, ErrorCode::kConfig, "key 'workers': must be >= 1");
  c.out = f.get_string("out", c.out);

  DataConfig& d = c.data;
  d.source = f.get_string("data.source", d.source);
  require(d.source == "idx" || d.source == "blobs", ErrorCode::kConfig, "key 'data.source': expected idx or blobs");
  d.root = f.get_string("data.root", d.root);
  d.images = f.get_string("data.images", d.images);
  d.labels = f.get_string("data.labels", d.labels);
  d.test_images = f.get_string("data.test_images", d.test_images);
  d.test_labels = f.get_string("data.test_labels", d.test_labels);
  d.ratio = f.get_double("data.ratio", d.ratio);
  require(d.ratio > 0.0 && d.ratio <= 1.0, ErrorCode::kConfig, "key 'data.ratio': must lie in (0, 1]");
  d.train_limit = nonneg(f, "data.train_limit", 0);
  d.test_limit = nonneg(f, "data.test_limit", 0);
  d.blobs_per_class = nonneg(f, "data.blobs.per_class", static_cast<std::int64_t>(d.blobs_per_class));
  d.blobs_test_per_class = nonneg(f, "data.blobs.test_per_class", static_cast<std::int64_t>(d.blobs_test_per_class));
  d.blobs_spread = f.get_double("data.blobs.spread", d.blobs_spread);
  if (f.has("data.blobs.centers")) {
    const auto flat = f.get_doubles("data.blobs.centers", {});
    require(flat.size() >= 4 && flat.size() % 2 == 0, ErrorCode::kConfig,
            "key 'data.blobs.centers': expected a flat array of x,y pairs (at least two centers)");
    d.blobs_centers.clear();
    for (std::size_t i = 0; i < flat.size(); i += 2) d.blobs_centers.push_back({flat[i], flat[i + 1]});
  }

  c.model = f.get_string("model.name", c.model);
  require(c.model == "mlp" || c.model == "convnet_small", ErrorCode::kConfig,
          "key 'model.name': expected mlp or convnet_small");
  if (f.has("model.hidden")) {
    c.hidden.clear();
    for (double h : f.get_doubles("model.hidden", {})) {
      require(h >= 1 && h == static_cast<double>(static_cast<std::size_t>(h)), ErrorCode::kConfig,
              "key 'model.hidden': widths must be positive integers");
      c.hidden.push_back(static_cast<std::size_t>(h));
    }
  }

  TrainConfig& t = c.train;
  t.seed = c.seed;
  t.sample_size = nonneg(f, "train.sample_size", static_cast<std::int64_t>(t.sample_size));
  t.batch_size = nonneg(f, "train.batch_size", static_cast<std::int64_t>(t.batch_size));
  t.lambda = f.get_double("train.lambda", t.lambda);
  t.epochs = static_cast<int>(f.get_int("train.epochs", t.epochs));
  try {
    t.sigma_mode = sigma_mode_from_name(f.get_string("train.sigma_mode", sigma_mode_name(t.sigma_mode)));
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, std::string("key 'train.sigma_mode': ") + e.what());
  }
  c.checkpoint_every = static_cast<int>(nonneg(f, "train.checkpoint_every", 0));
  t.vicinity = read_vicinity(f, "train.vicinity", t.vicinity);
  const std::string opt = f.get_string("train.optimizer.kind", "adadelta");
  require(opt == "sgd" || opt == "adadelta", ErrorCode::kConfig, "key 'train.optimizer.kind': expected sgd or adadelta");
  t.optimizer.kind = opt == "sgd" ? OptimizerKind::kSgd : OptimizerKind::kAdadelta;
  t.optimizer.lr = f.get_double("train.optimizer.lr", opt == "sgd" ? 0.01 : 1.0);
  t.optimizer.weight_decay = f.get_double("train.optimizer.weight_decay", t.optimizer.weight_decay);
  if (f.has("train.optimizer.milestones")) {
    t.optimizer.milestones.clear();
    for (double m : f.get_doubles("train.optimizer.milestones", {})) t.optimizer.milestones.push_back(static_cast<int>(m));
  }
  t.optimizer.decay_factor = f.get_double("train.optimizer.decay_factor", t.optimizer.decay_factor);
  t.optimizer.rho = f.get_double("train.optimizer.rho", t.optimizer.rho);
  t.optimizer.eps = f.get_double("train.optimizer.eps", t.optimizer.eps);
  try {
    t.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, std::string("section 'train': ") + e.what());
  }

  CertifyConfig& cc = c.certify;
  cc.seed = derive_seed(c.seed, 101);
  cc.kappa = f.get_double("certify.kappa", cc.kappa);
  cc.alpha = f.get_double("certify.alpha", cc.alpha);
  cc.w_min = nonneg(f, "certify.w_min", static_cast<std::int64_t>(cc.w_min));
  cc.w_max = nonneg(f, "certify.w_max", static_cast<std::int64_t>(cc.w_max));
  cc.test_every = nonneg(f, "certify.test_every", static_cast<std::int64_t>(cc.test_every));
  cc.chunk = nonneg(f, "certify.chunk", static_cast<std::int64_t>(cc.chunk));
  VicinitySpec cert_default = t.vicinity;
  cc.vicinity = read_vicinity(f, "certify.vicinity", cert_default);
  try {
    cc.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, std::string("section 'certify': ") + e.what());
  }

  const auto kinds = f.get_strings("attack.kinds", {});
  for (const auto& k : kinds) {
    AttackConfig a;
    try {
      a.kind = attack_kind_from_name(k);
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfig, std::string("key 'attack.kinds': ") + e.what());
    }
    a.epsilon = f.get_double("attack.epsilon", a.epsilon);
    a.steps = static_cast<int>(f.get_int("attack.steps", a.steps));
    a.step_size = f.get_double("attack.step_size", a.step_size);
    a.noise_std = f.get_double("attack.noise_std", a.noise_std);
    a.random_start = f.get_bool("attack.random_start", a.random_start);
    a.seed = derive_seed(c.seed, 202);
    require(a.epsilon > 0.0, ErrorCode::kConfig, "key 'attack.epsilon': must be positive");
    try {
      a.validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfig, std::string("section 'attack': ") + e.what());
    }
    c.attacks.push_back(a);
  }
  c.attack_inference = f.get_string("attack.inference", c.attack_inference);
  require(c.attack_inference == "plain" || c.attack_inference == "certified" || c.attack_inference == "both",
          ErrorCode::kConfig, "key 'attack.inference': expected plain, certified or both");
  return c;
}

namespace {

// Snapshot text. Without `placement`, keys that only say where the run happens
// (workers, out, data.root) are left out; that form feeds the hash.
std::string config_text(const RunConfig& c, bool placement) {
  const auto& data = c.data;
  const auto& train = c.train;
  const auto& certify = c.certify;
  const auto& attacks = c.attacks;
  std::ostringstream os;
  os << "seed = " << c.seed << '\n';
  if (placement) os << "workers = " << c.workers << "\nout = " << quote(c.out) << '\n';
  os << "\n[data]\n"
     << "source = " << quote(data.source) << '\n';
  if (placement) os << "root = " << quote(data.root) << '\n';
  os << "images = " << quote(data.images) << '\n'
     << "labels = " << quote(data.labels) << '\n'
     << "test_images = " << quote(data.test_images) << '\n'
     << "test_labels = " << quote(data.test_labels) << '\n'
     << "ratio = " << fmt(data.ratio) << '\n'
     << "train_limit = " << data.train_limit << '\n'
     << "test_limit = " << data.test_limit << "\n\n[data.blobs]\n"
     << "per_class = " << data.blobs_per_class << '\n'
     << "test_per_class = " << data.blobs_test_per_class << '\n'
     << "spread = " << fmt(data.blobs_spread) << '\n'
     << "centers = [";
  for (std::size_t i = 0; i < data.blobs_centers.size(); ++i)
    os << (i ? ", " : "") << fmt(data.blobs_centers[i][0]) << ", " << fmt(data.blobs_centers[i][1]);
  os << "]\n\n[model]\nname = " << quote(c.model) << "\nhidden = [";
  for (std::size_t i = 0; i < c.hidden.size(); ++i) os << (i ? ", " : "") << c.hidden[i];
  os << "]\n\n[train]\n"
     << "sample_size = " << train.sample_size << '\n'
     << "batch_size = " << train.batch_size << '\n'
     << "lambda = " << fmt(train.lambda) << '\n'
     << "epochs = " << train.epochs << '\n'
     << "sigma_mode = " << quote(sigma_mode_name(train.sigma_mode)) << '\n'
     << "checkpoint_every = " << c.checkpoint_every << "\n\n[train.vicinity]\n";
  write_vicinity(os, train.vicinity);
  const auto& o = train.optimizer;
  os << "\n[train.optimizer]\n"
     << "kind = " << quote(o.kind == OptimizerKind::kSgd ? "sgd" : "adadelta") << '\n'
     << "lr = " << fmt(o.lr) << '\n'
     << "weight_decay = " << fmt(o.weight_decay) << '\n'
     << "milestones = [";
  for (std::size_t i = 0; i < o.milestones.size(); ++i) os << (i ? ", " : "") << o.milestones[i];
  os << "]\n"
     << "decay_factor = " << fmt(o.decay_factor) << '\n'
     << "rho = " << fmt(o.rho) << '\n'
     << "eps = " << fmt(o.eps) << "\n\n[certify]\n"
     << "kappa = " << fmt(certify.kappa) << '\n'
     << "alpha = " << fmt(certify.alpha) << '\n'
     << "w_min = " << certify.w_min << '\n'
     << "w_max = " << certify.w_max << '\n'
     << "test_every = " << certify.test_every << '\n'
     << "chunk = " << certify.chunk << "\n\n[certify.vicinity]\n";
  write_vicinity(os, certify.vicinity);
  os << "\n[attack]\nkinds = [";
  for (std::size_t i = 0; i < attacks.size(); ++i) os << (i ? ", " : "") << quote(attack_kind_name(attacks[i].kind));
  os << "]\n";
  if (!attacks.empty()) {
    const auto& a = attacks.front();
    os << "epsilon = " << fmt(a.epsilon) << '\n'
       << "steps = " << a.steps << '\n'
       << "step_size = " << fmt(a.step_size) << '\n'
       << "noise_std = " << fmt(a.noise_std) << '\n'
       << "random_start = " << (a.random_start ? "true" : "false") << '\n';
  }
  os << "inference = " << quote(c.attack_inference) << '\n';
  return os.str();
}

}  // namespace

std::string RunConfig::resolved_text() const { return config_text(*this, true); }

std::string RunConfig::hash() const { return hex64(fnv1a64(config_text(*this, false))); }

std::string config_reference() {
  return R"(Configuration keys (TOML-style; [section] headers, dotted sub-sections):

  seed = 0                          global seed recorded in every artifact (artifact choice)
  workers = 1                       worker threads for certification and attacks
  out = "run"                       output directory

  [data]
  source = "idx"                    idx | blobs
  root = ""                         base for relative paths; env CERTIPROB_DATA overrides
  images / labels                   training IDX files (mnist/train-*-ubyte)
  test_images / test_labels         held-out IDX files (mnist/test-*-ubyte)
  ratio = 0.8                       train share of the train/validation split (published 8:2 split)
  train_limit = 0, test_limit = 0   use only the first N samples (0 = all)
  [data.blobs] per_class = 200, test_per_class = 100, spread = 0.05, centers = [0.3, 0.3, 0.7, 0.7]

  [model]
  name = "mlp"                      mlp | convnet_small
  hidden = [256]                    MLP hidden widths

  [train]
  sample_size = 4                   perturbed samples per example (artifact choice)
  batch_size = 64                   minibatch size (artifact choice)
  lambda = 1.0                      weight of the loss spread (best value in the published ablation)
  epochs = 10                       fixed epoch budget
  sigma_mode = "paper_literal"      paper_literal: sqrt(sum_ab (u_a-u_b)^2 / n) | sample_sd
  checkpoint_every = 0              extra checkpoint every N epochs (0 = final only)
  [train.vicinity]
  kind = "linf"                     linf | l2 | translate | rotate | scale | affine
  epsilon = 0.3                     published MNIST L-inf bound (0.1 or 0.3)
  clip = true                       clamp perturbed inputs to [0, 1] (artifact choice)
  translate = 0.3, rotate = 35, scale = 0.3   affine component bounds (published transform bounds)
  [train.optimizer]
  kind = "adadelta"                 adadelta (published MNIST setting) | sgd
  lr = 1.0 (adadelta) / 0.01 (sgd)  published learning rates
  weight_decay = 3.5e-3             published SGD weight decay
  milestones = [55, 75, 90]         published SGD decay epochs
  decay_factor = 0.1                published SGD decay factor
  rho = 0.9, eps = 1e-6             standard Adadelta constants

  [certify]
  kappa = 0.01, alpha = 0.01        published certification setting
  w_min = 30                        samples before the first test (artifact choice)
  w_max = 10000                     sample cap; reaching it yields "undecided" (artifact choice)
  test_every = 1                    test cadence after w_min
  chunk = 64                        samples classified per forward pass
  [certify.vicinity]                defaults to [train.vicinity]

  [attack]
  kinds = []                        any of fgsm, pgd_linf, pgd_l2, gaussian
  epsilon = 0.1, steps = 10         attack budget
  step_size = 0                     0 selects 2.5 * epsilon / steps
  noise_std = 0.1                   published Gaussian-noise setting
  random_start = true               PGD random start inside the ball
  inference = "both"                plain | certified | both
)";
}

}  // namespace certiprob
