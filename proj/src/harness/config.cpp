#include "convat/harness/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>

#include "convat/netcore/errors.hpp"

namespace convat::harness {
namespace {

using nlohmann::json;
using Setter = std::function<void(RunConfig&, const json&)>;

std::string key_of(std::string_view raw) {
  std::string k(raw);
  while (!k.empty() && k.front() == '-') k.erase(k.begin());
  for (char& c : k) {
    if (c == '_') c = '-';
  }
  return k;
}

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  throw ConfigError("config key '" + key + "': " + why);
}

double as_real(const std::string& key, const json& v) {
  if (!v.is_number()) bad(key, "expected a number, got " + v.dump());
  const double x = v.get<double>();
  if (!std::isfinite(x)) bad(key, "must be finite");
  return x;
}

std::uint64_t as_count(const std::string& key, const json& v) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  bad(key, "expected a non-negative integer, got " + v.dump());
}

std::string as_text(const std::string& key, const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return v.dump();
  bad(key, "expected a string, got " + v.dump());
}

bool as_bool(const std::string& key, const json& v) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
  }
  if (v.is_number_integer()) return v.get<std::int64_t>() != 0;
  bad(key, "expected a boolean, got " + v.dump());
}

std::vector<std::size_t> as_count_list(const std::string& key, const json& v) {
  std::vector<std::size_t> out;
  if (v.is_array()) {
    for (const auto& e : v) out.push_back(as_count(key, e));
  } else if (v.is_string()) {
    std::stringstream ss(v.get<std::string>());
    std::string part;
    while (std::getline(ss, part, ',')) {
      try {
        std::size_t used = 0;
        const long n = std::stol(part, &used);
        if (used != part.size() || n < 0) throw std::invalid_argument(part);
        out.push_back(static_cast<std::size_t>(n));
      } catch (const std::exception&) {
        bad(key, "bad list element '" + part + "'");
      }
    }
  } else if (v.is_number()) {
    out.push_back(as_count(key, v));
  } else {
    bad(key, "expected a list of integers");
  }
  if (out.empty()) bad(key, "list must not be empty");
  return out;
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"dataset", [](RunConfig& c, const json& v) { c.dataset = as_text("dataset", v); }},
      {"dev", [](RunConfig& c, const json& v) { c.dev_path = as_text("dev", v); }},
      {"test", [](RunConfig& c, const json& v) { c.test_path = as_text("test", v); }},
      {"format",
       [](RunConfig& c, const json& v) {
         try {
           c.format = textdata::parse_format(as_text("format", v));
         } catch (const InvalidInputError& e) {
           bad("format", e.what());
         }
       }},
      {"num-classes", [](RunConfig& c, const json& v) { c.num_classes = as_count("num-classes", v); }},
      {"embeddings", [](RunConfig& c, const json& v) { c.embeddings_path = as_text("embeddings", v); }},
      {"min-freq", [](RunConfig& c, const json& v) { c.min_freq = as_count("min-freq", v); }},
      {"synth-examples",
       [](RunConfig& c, const json& v) { c.synthetic.num_examples = as_count("synth-examples", v); }},
      {"synth-classes",
       [](RunConfig& c, const json& v) { c.synthetic.num_classes = as_count("synth-classes", v); }},
      {"synth-vocab", [](RunConfig& c, const json& v) { c.synthetic.vocab_size = as_count("synth-vocab", v); }},
      {"synth-seed", [](RunConfig& c, const json& v) { c.synthetic.seed = as_count("synth-seed", v); }},
      {"synth-train-frac",
       [](RunConfig& c, const json& v) { c.synthetic.train_fraction = as_real("synth-train-frac", v); }},
      {"synth-dev-frac",
       [](RunConfig& c, const json& v) { c.synthetic.dev_fraction = as_real("synth-dev-frac", v); }},
      {"noise", [](RunConfig& c, const json& v) { c.noise = as_text("noise", v); }},
      {"noise-rate", [](RunConfig& c, const json& v) { c.noise_rate = as_real("noise-rate", v); }},
      {"noise-seed", [](RunConfig& c, const json& v) { c.noise_seed = as_count("noise-seed", v); }},
      {"regime",
       [](RunConfig& c, const json& v) {
         try {
           c.regime = parse_regime(as_text("regime", v));
         } catch (const InvalidInputError& e) {
           bad("regime", e.what());
         }
       }},
      {"epsilon", [](RunConfig& c, const json& v) { c.convat.epsilon = as_real("epsilon", v); }},
      {"xi", [](RunConfig& c, const json& v) { c.convat.xi = as_real("xi", v); }},
      {"lambda", [](RunConfig& c, const json& v) { c.convat.lambda = as_real("lambda", v); }},
      {"power-iters", [](RunConfig& c, const json& v) { c.convat.power_iters = as_count("power-iters", v); }},
      {"cls-scope",
       [](RunConfig& c, const json& v) {
         try {
           c.convat.cls_scope = reg::parse_cls_scope(as_text("cls-scope", v));
         } catch (const InvalidInputError& e) {
           bad("cls-scope", e.what());
         }
       }},
      {"optimizer",
       [](RunConfig& c, const json& v) {
         try {
           c.optimizer.kind = model::parse_optimizer(as_text("optimizer", v));
         } catch (const InvalidInputError& e) {
           bad("optimizer", e.what());
         }
       }},
      {"lr", [](RunConfig& c, const json& v) { c.optimizer.learning_rate = as_real("lr", v); }},
      {"batch-size", [](RunConfig& c, const json& v) { c.batch_size = as_count("batch-size", v); }},
      {"max-epochs", [](RunConfig& c, const json& v) { c.max_epochs = as_count("max-epochs", v); }},
      {"patience", [](RunConfig& c, const json& v) { c.patience = as_count("patience", v); }},
      {"embed-dim", [](RunConfig& c, const json& v) { c.embed_dim = as_count("embed-dim", v); }},
      {"windows", [](RunConfig& c, const json& v) { c.windows = as_count_list("windows", v); }},
      {"filters", [](RunConfig& c, const json& v) { c.filters = as_count("filters", v); }},
      {"depth", [](RunConfig& c, const json& v) { c.depth = as_count("depth", v); }},
      {"seed", [](RunConfig& c, const json& v) { c.seed = as_count("seed", v); }},
      {"out", [](RunConfig& c, const json& v) { c.out_dir = as_text("out", v); }},
      {"wall-clock-metrics",
       [](RunConfig& c, const json& v) { c.wall_clock_metrics = as_bool("wall-clock-metrics", v); }},
      {"jobs", [](RunConfig& c, const json& v) { c.jobs = as_count("jobs", v); }},
  };
  return table;
}

void apply_json_value(RunConfig& cfg, const std::string& key, const json& value) {
  const auto& table = setters();
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(cfg, value);
}

}  // namespace

Regime parse_regime(std::string_view name) {
  if (name == "ce") return Regime::Ce;
  if (name == "vat") return Regime::Vat;
  if (name == "convat") return Regime::Convat;
  throw InvalidInputError("unknown regime '" + std::string(name) + "'");
}

std::string_view regime_name(Regime r) {
  switch (r) {
    case Regime::Ce: return "ce";
    case Regime::Vat: return "vat";
    case Regime::Convat: return "convat";
  }
  return "ce";
}

void RunConfig::validate() const {
  if (format != textdata::DatasetFormat::Synthetic && dataset.empty()) {
    throw ConfigError("--dataset is required for format " + std::string(textdata::format_name(format)));
  }
  if (format == textdata::DatasetFormat::Tsv && num_classes < 2) {
    throw ConfigError("tsv datasets need --num-classes >= 2");
  }
  if (format == textdata::DatasetFormat::Synthetic) {
    if (synthetic.num_classes < 2) throw ConfigError("synthetic corpus needs >= 2 classes");
    if (synthetic.vocab_size < 10 * synthetic.num_classes) {
      throw ConfigError("synthetic vocab must be at least 10x the class count");
    }
    if (!(synthetic.train_fraction > 0.0) || !(synthetic.dev_fraction >= 0.0) ||
        synthetic.train_fraction + synthetic.dev_fraction > 1.0) {
      throw ConfigError("synthetic split fractions must be positive and sum to at most 1");
    }
  }
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) throw ConfigError("noise-rate must lie in [0,1]");
  if (noise != "uniform" && noise != "random" && noise.rfind("custom:", 0) != 0) {
    throw ConfigError("noise must be uniform, random or custom:<path>");
  }
  if (noise == "random" && noise_rate >= 1.0) throw ConfigError("random noise needs rate < 1");
  try {
    convat.validate();
  } catch (const InvalidInputError& e) {
    throw ConfigError(e.what());
  }
  if (!(optimizer.learning_rate > 0.0)) throw ConfigError("lr must be positive");
  if (batch_size == 0) throw ConfigError("batch-size must be >= 1");
  if (max_epochs == 0) throw ConfigError("max-epochs must be >= 1");
  if (embed_dim == 0 || filters == 0) throw ConfigError("embed-dim and filters must be >= 1");
  for (std::size_t h : windows) {
    if (h == 0) throw ConfigError("conv windows must be >= 1");
  }
}

void apply_config_json(RunConfig& cfg, const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (it.value().is_object()) throw ConfigError("config key '" + it.key() + "' must be a scalar or list");
    apply_json_value(cfg, key_of(it.key()), it.value());
  }
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_json(cfg, ss.str());
}

void apply_config_value(RunConfig& cfg, std::string_view key, const std::string& json_value) {
  json v;
  try {
    v = json::parse(json_value);
  } catch (const json::parse_error&) {
    v = json_value;  // bare words such as `convat` or `custom:phi.txt`
  }
  apply_json_value(cfg, key_of(key), v);
}

std::string to_json(const RunConfig& c) {
  json j;
  j["format"] = std::string(textdata::format_name(c.format));
  j["dataset"] = c.dataset;
  j["dev"] = c.dev_path;
  j["test"] = c.test_path;
  j["num-classes"] = c.num_classes;
  j["embeddings"] = c.embeddings_path;
  j["min-freq"] = c.min_freq;
  j["synth-examples"] = c.synthetic.num_examples;
  j["synth-classes"] = c.synthetic.num_classes;
  j["synth-vocab"] = c.synthetic.vocab_size;
  j["synth-seed"] = c.synthetic.seed;
  j["synth-train-frac"] = c.synthetic.train_fraction;
  j["synth-dev-frac"] = c.synthetic.dev_fraction;
  j["noise"] = c.noise;
  j["noise-rate"] = c.noise_rate;
  j["noise-seed"] = c.noise_seed;
  j["regime"] = std::string(regime_name(c.regime));
  j["epsilon"] = c.convat.epsilon;
  j["xi"] = c.convat.xi;
  j["lambda"] = c.convat.lambda;
  j["power-iters"] = c.convat.power_iters;
  j["cls-scope"] = std::string(reg::cls_scope_name(c.convat.cls_scope));
  j["optimizer"] = std::string(model::optimizer_name(c.optimizer.kind));
  j["lr"] = c.optimizer.learning_rate;
  j["batch-size"] = c.batch_size;
  j["max-epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["embed-dim"] = c.embed_dim;
  j["windows"] = c.windows;
  j["filters"] = c.filters;
  j["depth"] = c.depth;
  j["seed"] = c.seed;
  j["out"] = c.out_dir;
  j["wall-clock-metrics"] = c.wall_clock_metrics;
  j["jobs"] = c.jobs;
  return j.dump(2);
}

std::vector<double> make_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw ConfigError("grid needs step > 0 and hi >= lo");
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) {
    // Round to 1e-12 so 0.1*3 prints as 0.3.
    out.push_back(std::round((lo + static_cast<double>(i) * step) * 1e12) / 1e12);
  }
  return out;
}

}  // namespace convat::harness
