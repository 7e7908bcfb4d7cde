#include "sparsereg/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "sparsereg/error.hpp"

namespace sparsereg {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

struct Entry {
  std::string value;
  std::size_t line = 0;
};

class Fields {
 public:
  Fields(std::map<std::string, Entry> entries, std::string source)
      : entries_(std::move(entries)), source_(std::move(source)) {}

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    const auto it = entries_.find(key);
    const std::string where =
        it == entries_.end() ? source_ : source_ + ":" + std::to_string(it->second.line);
    throw FormatError(where + ": " + key + ": " + what);
  }

  // Runs `apply` on the raw value if present, converting library errors into
  // located format errors.
  void with(const std::string& key, const std::function<void(const std::string&)>& apply) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return;
    used_.push_back(key);
    try {
      apply(it->second.value);
    } catch (const FormatError& e) {
      fail(key, e.what());
    } catch (const DomainError& e) {
      fail(key, e.what());
    }
  }

  void real(const std::string& key, double& out) {
    with(key, [&](const std::string& v) {
      double x = 0.0;
      const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
      if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw FormatError("expected a real number, got '" + v + "'");
      }
      out = x;
    });
  }

  template <typename T>
  void count(const std::string& key, T& out) {
    with(key, [&](const std::string& v) {
      T x = 0;
      const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
      if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw FormatError("expected a nonnegative integer, got '" + v + "'");
      }
      out = x;
    });
  }

  void flag(const std::string& key, bool& out) {
    with(key, [&](const std::string& v) {
      if (v == "true") out = true;
      else if (v == "false") out = false;
      else throw FormatError("expected true or false, got '" + v + "'");
    });
  }

  void text(const std::string& key, std::string& out) {
    with(key, [&](const std::string& v) { out = v; });
  }

  void ensure_all_used() const {
    for (const auto& [key, entry] : entries_) {
      if (std::find(used_.begin(), used_.end(), key) == used_.end()) {
        throw FormatError(source_ + ":" + std::to_string(entry.line) + ": unknown key '" + key +
                          "'");
      }
    }
  }

 private:
  std::map<std::string, Entry> entries_;
  std::string source_;
  std::vector<std::string> used_;
};

template <typename Enum, std::size_t N>
Enum parse_enum(const std::string& v, const std::pair<std::string_view, Enum> (&table)[N]) {
  for (const auto& [name, value] : table) {
    if (name == v) return value;
  }
  std::string options;
  for (const auto& [name, value] : table) options += (options.empty() ? "" : ", ") + std::string(name);
  throw FormatError("unknown value '" + v + "' (expected one of: " + options + ")");
}

constexpr std::pair<std::string_view, DataSource> kSources[] = {
    {"blobs", DataSource::kBlobs}, {"idx", DataSource::kIdx}, {"csv", DataSource::kCsv}};
constexpr std::pair<std::string_view, Imbalance> kImbalances[] = {
    {"none", Imbalance::kNone}, {"long_tailed", Imbalance::kLongTailed}, {"step", Imbalance::kStep}};
constexpr std::pair<std::string_view, NoiseType> kNoiseTypes[] = {
    {"none", NoiseType::kNone},
    {"symmetric", NoiseType::kSymmetric},
    {"asymmetric", NoiseType::kAsymmetric}};

template <typename Enum, std::size_t N>
std::string_view enum_name(Enum value, const std::pair<std::string_view, Enum> (&table)[N]) {
  for (const auto& [name, v] : table) {
    if (v == value) return name;
  }
  return "?";
}

std::vector<std::size_t> parse_widths(const std::string& v) {
  std::vector<std::size_t> out;
  if (v.empty() || v == "none") return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    std::size_t w = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), w);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || w == 0) {
      throw FormatError("expected comma-separated positive widths, got '" + v + "'");
    }
    out.push_back(w);
  }
  return out;
}

}  // namespace

std::string_view to_string(DataSource source) { return enum_name(source, kSources); }
std::string_view to_string(Imbalance imbalance) { return enum_name(imbalance, kImbalances); }
std::string_view to_string(NoiseType type) { return enum_name(type, kNoiseTypes); }

void ExperimentConfig::validate() const {
  if (repeats == 0) throw DomainError("repeats must be at least 1");
  if (name.empty()) throw DomainError("name must not be empty");
  if (output_dir.empty()) throw DomainError("output_dir must not be empty");
  if (optim.epochs == 0) throw DomainError("optim.epochs must be at least 1");
  optim.validate();
  loss.validate();
  if (sr) sr->validate();

  const DatasetBlock& d = dataset;
  if (d.classes < 2) throw DomainError("dataset.classes must be at least 2");
  if (!(d.test_fraction > 0.0 && d.test_fraction < 1.0)) {
    throw DomainError("dataset.test_fraction must lie in (0, 1)");
  }
  switch (d.source) {
    case DataSource::kBlobs:
      if (d.per_class < 2) throw DomainError("dataset.per_class must be at least 2");
      if (d.dim < 2) throw DomainError("dataset.dim must be at least 2");
      if (!(d.separation >= 0.0)) throw DomainError("dataset.separation must be >= 0");
      break;
    case DataSource::kIdx:
      if (d.images.empty() || d.labels.empty()) {
        throw DomainError("idx source needs dataset.images and dataset.labels");
      }
      if (d.test_images.empty() != d.test_labels.empty()) {
        throw DomainError("dataset.test_images and dataset.test_labels go together");
      }
      break;
    case DataSource::kCsv:
      if (d.path.empty()) throw DomainError("csv source needs dataset.path");
      break;
  }
  if (d.imbalance != Imbalance::kNone && !(d.imbalance_ratio > 0.0 && d.imbalance_ratio <= 1.0)) {
    throw DomainError("dataset.imbalance_ratio must lie in (0, 1]");
  }
  if (d.imbalance == Imbalance::kStep &&
      !(d.minority_fraction > 0.0 && d.minority_fraction < 1.0)) {
    throw DomainError("dataset.minority_fraction must lie in (0, 1)");
  }

  switch (noise.type) {
    case NoiseType::kNone:
      if (noise.eta != 0.0) throw DomainError("noise.eta set but noise.type is none");
      break;
    case NoiseType::kSymmetric:
      if (!(noise.eta >= 0.0 && noise.eta < 1.0)) throw DomainError("noise.eta must lie in [0, 1)");
      break;
    case NoiseType::kAsymmetric:
      if (!(noise.eta >= 0.0 && noise.eta <= 0.5)) {
        throw DomainError("asymmetric noise.eta must lie in [0, 0.5]");
      }
      if (noise.preset.has_value() == !noise.map_file.empty()) {
        throw DomainError("asymmetric noise needs exactly one of noise.preset and noise.map_file");
      }
      break;
  }
}

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
  std::map<std::string, Entry> entries;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw FormatError(source + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw FormatError(source + ":" + std::to_string(number) + ": empty key");
    const auto [it, inserted] = entries.emplace(key, Entry{trim(t.substr(eq + 1)), number});
    if (!inserted) {
      throw FormatError(source + ":" + std::to_string(number) + ": " + key +
                        ": repeated (first set on line " + std::to_string(it->second.line) + ")");
    }
  }

  Fields f(std::move(entries), source);
  ExperimentConfig cfg;
  f.text("name", cfg.name);
  f.count("repeats", cfg.repeats);
  f.count("seed", cfg.seed);
  f.text("output_dir", cfg.output_dir);

  DatasetBlock& d = cfg.dataset;
  f.with("dataset.source", [&](const std::string& v) { d.source = parse_enum(v, kSources); });
  f.count("dataset.classes", d.classes);
  f.count("dataset.per_class", d.per_class);
  f.count("dataset.dim", d.dim);
  f.real("dataset.separation", d.separation);
  f.text("dataset.images", d.images);
  f.text("dataset.labels", d.labels);
  f.text("dataset.test_images", d.test_images);
  f.text("dataset.test_labels", d.test_labels);
  f.text("dataset.path", d.path);
  f.text("dataset.test_path", d.test_path);
  f.real("dataset.test_fraction", d.test_fraction);
  f.count("dataset.seed", d.seed);
  f.with("dataset.imbalance", [&](const std::string& v) { d.imbalance = parse_enum(v, kImbalances); });
  f.real("dataset.imbalance_ratio", d.imbalance_ratio);
  f.real("dataset.minority_fraction", d.minority_fraction);

  NoiseBlock& n = cfg.noise;
  f.with("noise.type", [&](const std::string& v) { n.type = parse_enum(v, kNoiseTypes); });
  f.real("noise.eta", n.eta);
  f.with("noise.preset", [&](const std::string& v) { n.preset = parse_flip_preset(v); });
  f.text("noise.map_file", n.map_file);

  // Loss: kind, then preset, then explicit parameters.
  f.with("loss.kind", [&](const std::string& v) { cfg.loss = LossSpec::of(parse_loss_kind(v)); });
  f.with("loss.preset", [&](const std::string& v) {
    const Benchmark b = parse_benchmark(v);
    if (cfg.loss.kind == LossKind::kSCE) cfg.loss = LossSpec::sce(b);
    else if (cfg.loss.kind == LossKind::kAPL) cfg.loss = LossSpec::apl(b);
    else throw FormatError("presets exist only for sce and apl");
  });
  f.real("loss.gamma", cfg.loss.focal_gamma);
  f.real("loss.q", cfg.loss.gce_q);
  f.real("loss.A", cfg.loss.rce_a);
  f.real("loss.alpha", cfg.loss.alpha);
  f.real("loss.beta", cfg.loss.beta);

  bool sr_enabled = false;
  f.flag("sr.enabled", sr_enabled);
  const char* sr_keys[] = {"sr.preset", "sr.tau", "sr.p", "sr.lambda0", "sr.rho", "sr.r",
                           "sr.l2_normalize"};
  if (sr_enabled) {
    SRConfig sr;
    f.with("sr.preset", [&](const std::string& v) {
      sr = SRConfig::preset(parse_benchmark(v), n.type != NoiseType::kAsymmetric);
    });
    f.real("sr.tau", sr.tau);
    f.real("sr.p", sr.p);
    f.real("sr.lambda0", sr.lambda0);
    f.real("sr.rho", sr.rho);
    f.count("sr.r", sr.r);
    f.flag("sr.l2_normalize", sr.l2_normalize_logits);
    cfg.sr = sr;
  } else {
    for (const char* key : sr_keys) {
      if (f.has(key)) f.fail(key, "set while sr.enabled is false");
    }
  }

  f.with("model.hidden", [&](const std::string& v) { cfg.hidden = parse_widths(v); });

  OptimizerConfig& o = cfg.optim;
  f.real("optim.lr", o.lr0);
  f.real("optim.momentum", o.momentum);
  f.real("optim.weight_decay", o.weight_decay);
  f.count("optim.epochs", o.epochs);
  f.count("optim.batch_size", o.batch_size);
  f.flag("optim.cosine", o.cosine_annealing);

  f.ensure_all_used();
  try {
    cfg.validate();
  } catch (const DomainError& e) {
    throw FormatError(source + ": " + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config '" + path.string() + "'");
  return parse_config(in, path.string());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  auto kv = [&](const std::string& key, const std::string& value) {
    out << key << " = " << value << "\n";
  };
  auto opt_text = [&](const std::string& key, const std::string& value) {
    if (!value.empty()) kv(key, value);
  };
  kv("name", cfg.name);
  kv("repeats", std::to_string(cfg.repeats));
  kv("seed", std::to_string(cfg.seed));
  kv("output_dir", cfg.output_dir);

  const DatasetBlock& d = cfg.dataset;
  kv("dataset.source", std::string(to_string(d.source)));
  kv("dataset.classes", std::to_string(d.classes));
  kv("dataset.per_class", std::to_string(d.per_class));
  kv("dataset.dim", std::to_string(d.dim));
  kv("dataset.separation", fmt(d.separation));
  opt_text("dataset.images", d.images);
  opt_text("dataset.labels", d.labels);
  opt_text("dataset.test_images", d.test_images);
  opt_text("dataset.test_labels", d.test_labels);
  opt_text("dataset.path", d.path);
  opt_text("dataset.test_path", d.test_path);
  kv("dataset.test_fraction", fmt(d.test_fraction));
  kv("dataset.seed", std::to_string(d.seed));
  kv("dataset.imbalance", std::string(to_string(d.imbalance)));
  kv("dataset.imbalance_ratio", fmt(d.imbalance_ratio));
  kv("dataset.minority_fraction", fmt(d.minority_fraction));

  kv("noise.type", std::string(to_string(cfg.noise.type)));
  kv("noise.eta", fmt(cfg.noise.eta));
  if (cfg.noise.preset) kv("noise.preset", std::string(to_string(*cfg.noise.preset)));
  opt_text("noise.map_file", cfg.noise.map_file);

  kv("loss.kind", std::string(to_string(cfg.loss.kind)));
  kv("loss.gamma", fmt(cfg.loss.focal_gamma));
  kv("loss.q", fmt(cfg.loss.gce_q));
  kv("loss.A", fmt(cfg.loss.rce_a));
  kv("loss.alpha", fmt(cfg.loss.alpha));
  kv("loss.beta", fmt(cfg.loss.beta));

  kv("sr.enabled", cfg.sr ? "true" : "false");
  if (cfg.sr) {
    kv("sr.tau", fmt(cfg.sr->tau));
    kv("sr.p", fmt(cfg.sr->p));
    kv("sr.lambda0", fmt(cfg.sr->lambda0));
    kv("sr.rho", fmt(cfg.sr->rho));
    kv("sr.r", std::to_string(cfg.sr->r));
    kv("sr.l2_normalize", cfg.sr->l2_normalize_logits ? "true" : "false");
  }

  std::string widths;
  for (std::size_t w : cfg.hidden) widths += (widths.empty() ? "" : ",") + std::to_string(w);
  kv("model.hidden", widths.empty() ? "none" : widths);

  const OptimizerConfig& o = cfg.optim;
  kv("optim.lr", fmt(o.lr0));
  kv("optim.momentum", fmt(o.momentum));
  kv("optim.weight_decay", fmt(o.weight_decay));
  kv("optim.epochs", std::to_string(o.epochs));
  kv("optim.batch_size", std::to_string(o.batch_size));
  kv("optim.cosine", o.cosine_annealing ? "true" : "false");
  return out.str();
}

}  // namespace sparsereg
