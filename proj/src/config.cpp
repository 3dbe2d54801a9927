// Copyright 2026 The fedmix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fedmix/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <sstream>

#include "fedmix/error.hpp"

namespace fedmix {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  if (value.empty()) return out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += ',';
    out += items[i];
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size() || !std::isfinite(v)) {
    throw ConfigError(key, "expected a finite number, got '" + value + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size() || value.empty()) {
    throw ConfigError(key, "expected a nonnegative integer, got '" + value + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + value + "'");
}

template <typename E>
struct EnumName {
  E value;
  const char* name;
};

constexpr EnumName<Scenario> kScenarios[] = {{Scenario::labels_at_client, "labels_at_client"},
                                             {Scenario::labels_at_server, "labels_at_server"}};
constexpr EnumName<Method> kMethods[] = {{Method::fedmix, "fedmix"},
                                         {Method::sl_fedavg, "sl_fedavg"},
                                         {Method::ssl_fedavg, "ssl_fedavg"},
                                         {Method::naive_decomposition, "naive_decomposition"}};
constexpr EnumName<AggregationRule> kRules[] = {{AggregationRule::fedavg, "fedavg"},
                                                {AggregationRule::fedfreq, "fedfreq"}};
constexpr EnumName<SelectionKind> kSelections[] = {{SelectionKind::uncertainty, "uncertainty"},
                                                   {SelectionKind::min_entropy, "min_entropy"},
                                                   {SelectionKind::random, "random"}};
constexpr EnumName<ConsistencyKind> kConsistency[] = {{ConsistencyKind::squared, "squared"},
                                                      {ConsistencyKind::kl, "kl"}};
constexpr EnumName<DatasetKind> kDatasets[] = {{DatasetKind::idx, "idx"},
                                               {DatasetKind::cifar_bin, "cifar_bin"},
                                               {DatasetKind::synthetic, "synthetic"}};
constexpr EnumName<AugmentMode> kAugment[] = {{AugmentMode::automatic, "auto"},
                                              {AugmentMode::image, "image"},
                                              {AugmentMode::noise, "noise"}};

template <typename E, std::size_t N>
E parse_enum(const std::string& key, const std::string& value, const EnumName<E> (&table)[N]) {
  for (const auto& e : table) {
    if (value == e.name) return e.value;
  }
  std::string allowed;
  for (const auto& e : table) allowed += std::string(allowed.empty() ? "" : ", ") + e.name;
  throw ConfigError(key, "unknown value '" + value + "' (expected one of: " + allowed + ")");
}

template <typename E, std::size_t N>
std::string enum_name(E v, const EnumName<E> (&table)[N]) {
  for (const auto& e : table) {
    if (e.value == v) return e.name;
  }
  return "?";
}

std::string resolve_path(const std::string& p) {
  if (p.empty()) return p;
  const std::filesystem::path path(p);
  if (path.is_absolute()) return p;
  if (const char* dir = std::getenv("FEDMIX_DATA_DIR"); dir != nullptr && *dir != '\0') {
    return (std::filesystem::path(dir) / path).string();
  }
  return p;
}

// One entry per key: how to read it into a config and how to print it back.
struct Field {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define FEDMIX_SIZE_FIELD(name)                                                                   \
  Field {                                                                                         \
    #name, [](ExperimentConfig& c, const std::string& k, const std::string& v) {                  \
      c.name = static_cast<std::size_t>(parse_u64(k, v));                                         \
    },                                                                                            \
        [](const ExperimentConfig& c) { return std::to_string(c.name); }                          \
  }
#define FEDMIX_DOUBLE_FIELD(name)                                                                                 \
  Field {                                                                                                         \
    #name, [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.name = parse_double(k, v); }, \
        [](const ExperimentConfig& c) { return fmt_double(c.name); }                                              \
  }
#define FEDMIX_ENUM_FIELD(name, table)                                                                             \
  Field {                                                                                                          \
    #name, [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.name = parse_enum(k, v, table); }, \
        [](const ExperimentConfig& c) { return enum_name(c.name, table); }                                         \
  }
#define FEDMIX_PATH_FIELD(name)                                                                                 \
  Field {                                                                                                       \
    #name, [](ExperimentConfig& c, const std::string&, const std::string& v) { c.name = resolve_path(v); }, \
        [](const ExperimentConfig& c) { return c.name; }                                                        \
  }
#define FEDMIX_PATH_LIST_FIELD(name)                                                   \
  Field {                                                                              \
    #name, [](ExperimentConfig& c, const std::string&, const std::string& v) {         \
      c.name.clear();                                                                  \
      for (const auto& p : split_list(v)) c.name.push_back(resolve_path(p));           \
    },                                                                                 \
        [](const ExperimentConfig& c) { return join(c.name); }                         \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      FEDMIX_ENUM_FIELD(scenario, kScenarios),
      FEDMIX_ENUM_FIELD(method, kMethods),
      FEDMIX_ENUM_FIELD(aggregation, kRules),
      FEDMIX_ENUM_FIELD(selection, kSelections),
      FEDMIX_ENUM_FIELD(consistency, kConsistency),
      FEDMIX_ENUM_FIELD(dataset, kDatasets),
      FEDMIX_PATH_FIELD(train_images),
      FEDMIX_PATH_FIELD(train_labels),
      FEDMIX_PATH_FIELD(test_images),
      FEDMIX_PATH_FIELD(test_labels),
      FEDMIX_PATH_LIST_FIELD(cifar_train),
      FEDMIX_PATH_LIST_FIELD(cifar_test),
      FEDMIX_SIZE_FIELD(syn_classes),
      FEDMIX_SIZE_FIELD(syn_dims),
      FEDMIX_SIZE_FIELD(syn_train),
      FEDMIX_SIZE_FIELD(syn_test),
      FEDMIX_DOUBLE_FIELD(syn_spread),
      FEDMIX_SIZE_FIELD(test_size),
      FEDMIX_SIZE_FIELD(n_labeled),
      FEDMIX_SIZE_FIELD(K),
      FEDMIX_DOUBLE_FIELD(F),
      FEDMIX_SIZE_FIELD(T),
      FEDMIX_SIZE_FIELD(A),
      FEDMIX_SIZE_FIELD(n),
      FEDMIX_SIZE_FIELD(B_u),
      FEDMIX_SIZE_FIELD(B_s),
      FEDMIX_SIZE_FIELD(E_u),
      FEDMIX_SIZE_FIELD(E_s),
      FEDMIX_DOUBLE_FIELD(eta),
      FEDMIX_DOUBLE_FIELD(lambda_s),
      FEDMIX_DOUBLE_FIELD(lambda_L2),
      FEDMIX_DOUBLE_FIELD(alpha),
      FEDMIX_DOUBLE_FIELD(beta),
      FEDMIX_DOUBLE_FIELD(gamma),
      Field{"mu",
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              if (v == "iid") {
                c.mu.reset();
              } else {
                c.mu = parse_double(k, v);
              }
            },
            [](const ExperimentConfig& c) { return c.mu ? fmt_double(*c.mu) : std::string("iid"); }},
      Field{"streaming",
            [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.streaming = parse_bool(k, v); },
            [](const ExperimentConfig& c) { return std::string(c.streaming ? "true" : "false"); }},
      Field{"seed", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.seed = parse_u64(k, v); },
            [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      Field{"hidden",
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.hidden.clear();
              for (const auto& item : split_list(v)) c.hidden.push_back(static_cast<std::size_t>(parse_u64(k, item)));
            },
            [](const ExperimentConfig& c) {
              std::vector<std::string> items;
              for (auto h : c.hidden) items.push_back(std::to_string(h));
              return join(items);
            }},
      FEDMIX_ENUM_FIELD(augment, kAugment),
      FEDMIX_DOUBLE_FIELD(aug_noise),
      Field{"record_timing",
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.record_timing = parse_bool(k, v);
            },
            [](const ExperimentConfig& c) { return std::string(c.record_timing ? "true" : "false"); }},
  };
  return table;
}

#undef FEDMIX_SIZE_FIELD
#undef FEDMIX_DOUBLE_FIELD
#undef FEDMIX_ENUM_FIELD
#undef FEDMIX_PATH_FIELD
#undef FEDMIX_PATH_LIST_FIELD

const Field& find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (key == f.key) return f;
  }
  throw ConfigError(key, "unknown key");
}

std::optional<std::string> lookup(const ConfigEntries& entries, const std::string& key) {
  std::optional<std::string> found;
  for (const auto& [k, v] : entries) {
    if (k == key) found = v;
  }
  return found;
}

void apply(ExperimentConfig& cfg, const ConfigEntries& entries) {
  for (const auto& [k, v] : entries) find_field(k).set(cfg, k, v);
}

}  // namespace

SslHyperparams ExperimentConfig::ssl_hyperparams() const {
  SslHyperparams hp;
  hp.lambda_s = lambda_s;
  hp.lambda_l2 = lambda_L2;
  hp.participation = F;
  hp.num_clients = K;
  hp.batch_size = B_u;
  hp.local_epochs = E_u;
  hp.consistency = consistency;
  return hp;
}

ExperimentConfig default_config(Scenario scenario) {
  ExperimentConfig cfg;
  cfg.scenario = scenario;
  if (scenario == Scenario::labels_at_server) {
    cfg.B_s = 64;
    cfg.eta = 1e-3;
    cfg.T = 150;
    cfg.n_labeled = 1000;
    cfg.A = 5;
  }
  return cfg;
}

ConfigEntries read_config_entries(const std::string& text) {
  ConfigEntries entries;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(t, "line " + std::to_string(lineno) + " is not key=value");
    }
    std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw ConfigError("", "line " + std::to_string(lineno) + " has an empty key");
    entries.emplace_back(std::move(key), trim(std::string_view(t).substr(eq + 1)));
  }
  return entries;
}

ExperimentConfig parse_config(const ConfigEntries& file, const ConfigEntries& overrides) {
  Scenario scenario = Scenario::labels_at_client;
  if (auto v = lookup(overrides, "scenario")) {
    scenario = parse_enum("scenario", *v, kScenarios);
  } else if (auto f = lookup(file, "scenario")) {
    scenario = parse_enum("scenario", *f, kScenarios);
  }
  ExperimentConfig cfg = default_config(scenario);
  apply(cfg, file);
  apply(cfg, overrides);
  cfg.scenario = scenario;
  validate(cfg);
  return cfg;
}

ExperimentConfig parse_config_text(const std::string& text, const ConfigEntries& overrides) {
  return parse_config(read_config_entries(text), overrides);
}

void validate(const ExperimentConfig& cfg) {
  auto require = [](bool ok, const char* key, const char* message) {
    if (!ok) throw ConfigError(key, message);
  };
  require(cfg.F > 0.0 && cfg.F <= 1.0, "F", "must be in (0, 1]");
  require(cfg.K >= 1, "K", "must be at least 1");
  require(cfg.A >= 1, "A", "must be at least 1");
  require(cfg.B_u >= 1, "B_u", "must be at least 1");
  require(cfg.B_s >= 1, "B_s", "must be at least 1");
  require(cfg.E_u >= 1, "E_u", "must be at least 1");
  require(cfg.eta >= 0.0, "eta", "must be nonnegative");
  require(cfg.lambda_s >= 0.0, "lambda_s", "must be nonnegative");
  require(cfg.lambda_L2 >= 0.0, "lambda_L2", "must be nonnegative");
  require(cfg.alpha >= 0.0, "alpha", "must be nonnegative");
  require(cfg.beta >= 0.0, "beta", "must be nonnegative");
  require(cfg.gamma >= 0.0, "gamma", "must be nonnegative");
  if (std::abs(cfg.alpha + cfg.beta + cfg.gamma - 1.0) > 1e-9) {
    throw ConfigError("alpha", "alpha + beta + gamma must equal 1");
  }
  require(!cfg.mu || *cfg.mu > 0.0, "mu", "must be positive or iid");
  require(cfg.aug_noise >= 0.0, "aug_noise", "must be nonnegative");
  require(std::ranges::none_of(cfg.hidden, [](std::size_t h) { return h == 0; }), "hidden",
          "layer widths must be positive");
  switch (cfg.dataset) {
    case DatasetKind::idx:
      require(!cfg.train_images.empty(), "train_images", "path required for idx dataset");
      require(!cfg.train_labels.empty(), "train_labels", "path required for idx dataset");
      require(!cfg.test_images.empty(), "test_images", "path required for idx dataset");
      require(!cfg.test_labels.empty(), "test_labels", "path required for idx dataset");
      break;
    case DatasetKind::cifar_bin:
      require(!cfg.cifar_train.empty(), "cifar_train", "path required for cifar_bin dataset");
      require(!cfg.cifar_test.empty(), "cifar_test", "path required for cifar_bin dataset");
      break;
    case DatasetKind::synthetic:
      require(cfg.syn_classes >= 2, "syn_classes", "must be at least 2");
      require(cfg.syn_dims >= 1, "syn_dims", "must be at least 1");
      require(cfg.syn_train >= 1, "syn_train", "must be at least 1");
      require(cfg.syn_test >= 1, "syn_test", "must be at least 1");
      require(cfg.syn_spread >= 0.0, "syn_spread", "must be nonnegative");
      break;
  }
}

ConfigEntries to_entries(const ExperimentConfig& cfg) {
  ConfigEntries out;
  for (const auto& f : fields()) out.emplace_back(f.key, f.get(cfg));
  return out;
}

std::string serialize(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : to_entries(cfg)) out += k + "=" + v + "\n";
  return out;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.emplace_back(f.key);
    return k;
  }();
  return keys;
}

std::string to_string(Scenario s) { return enum_name(s, kScenarios); }
std::string to_string(Method m) { return enum_name(m, kMethods); }
std::string to_string(AggregationRule a) { return enum_name(a, kRules); }
std::string to_string(SelectionKind k) { return enum_name(k, kSelections); }

}  // namespace fedmix
