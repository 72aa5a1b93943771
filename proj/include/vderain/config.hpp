#pragma once

// Strict JSON configuration: defaults < file < command-line overrides.
// Unknown keys and type mismatches are rejected with the offending dotted key.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vderain/dataset.hpp"
#include "vderain/training.hpp"

namespace vderain {

using Json = nlohmann::json;

inline constexpr int kConfigSchemaVersion = 1;

struct DataPaths {
  std::vector<std::string> labeled;     // clip dirs with rainy/ and clean/
  std::vector<std::string> unlabeled;   // clip dirs with rainy/
  std::vector<std::string> validation;  // clip dirs with rainy/ and clean/
  std::string output;                   // run directory
};

struct ConfigFile {
  int schema_version = kConfigSchemaVersion;
  DataPaths data;
  TrainConfig train;
  DatasetConfig dataset;
  std::uint64_t seed = 0;

  /// Copies the top-level seed into the sub-configs that consume it.
  void propagate_seed() {
    train.seed = seed;
    dataset.seed = seed;
  }
};

inline const char* to_string(TemporalPadding p) { return p == TemporalPadding::Zero ? "zero" : "replicate"; }

inline TemporalPadding parse_temporal_padding(const std::string& s) {
  if (s == "zero") return TemporalPadding::Zero;
  if (s == "replicate") return TemporalPadding::Replicate;
  throw ConfigError("unknown temporal padding '" + s + "' (expected zero or replicate)");
}

inline Json to_json(const ConfigFile& c) {
  const TrainConfig& t = c.train;
  const auto& d = t.derainer;
  const auto& tr = t.generator.transition;
  const auto& em = t.generator.emission;
  Json j;
  j["schema_version"] = c.schema_version;
  j["seed"] = c.seed;
  j["data"] = {{"labeled", c.data.labeled},
               {"unlabeled", c.data.unlabeled},
               {"validation", c.data.validation},
               {"output", c.data.output}};
  j["dataset"] = {{"patch", c.dataset.patch}, {"chunk_len", c.dataset.chunk_len}, {"batch_size", c.dataset.batch_size}};
  j["train"] = {{"mode", to_string(t.mode)},
                {"epochs", t.epochs},
                {"pretrain_epochs", t.pretrain_epochs},
                {"lr_transition", t.lr_transition},
                {"lr_emission", t.lr_emission},
                {"lr_derainer", t.lr_derainer},
                {"decay_every", t.decay_every},
                {"decay_factor", t.decay_factor},
                {"clip_norm", t.clip_norm}};
  j["prior"] = {{"rho", t.prior.rho},
                {"gamma", t.prior.gamma},
                {"eps0_sq", t.prior.eps0_sq},
                {"charbonnier_eps", t.prior.charbonnier_eps}};
  j["langevin"] = {{"delta", t.langevin.delta},
                   {"steps", t.langevin.steps},
                   {"sigma", t.langevin.sigma},
                   {"noise_enabled", t.langevin.noise_enabled}};
  j["derainer"] = {{"channels", d.channels},   {"shuffle", d.shuffle},         {"width", d.width},
                   {"blocks", d.blocks},       {"kernel_t", d.kernel_t},       {"kernel_s", d.kernel_s},
                   {"global_skip", d.global_skip}, {"zero_tail", d.zero_tail}, {"temporal_padding", to_string(d.temporal_padding)}};
  j["generator"]["transition"] = {
      {"state_dim", tr.state_dim}, {"noise_dim", tr.noise_dim}, {"appearance_dim", tr.appearance_dim}, {"hidden", tr.hidden}};
  j["generator"]["emission"] = {{"seed_size", em.seed_size},   {"seed_channels", em.seed_channels},
                                {"stage_channels", em.stage_channels}, {"out_channels", em.out_channels},
                                {"target_h", em.target_h},     {"target_w", em.target_w},
                                {"initial_level", em.initial_level}};
  return j;
}

namespace detail {

inline const char* json_kind(const Json& v) {
  if (v.is_boolean()) return "boolean";
  if (v.is_number_integer()) return "integer";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_array()) return "array";
  if (v.is_object()) return "object";
  return "null";
}

// Numbers may stand in for each other only in the int -> float direction.
inline bool same_kind(const Json& want, const Json& got) {
  if (want.is_boolean()) return got.is_boolean();
  if (want.is_number_integer()) return got.is_number_integer() && (want.is_number_unsigned() ? got >= 0 : true);
  if (want.is_number()) return got.is_number();
  if (want.is_string()) return got.is_string();
  if (want.is_array()) return got.is_array();
  if (want.is_object()) return got.is_object();
  return true;
}

inline void check_array(const std::string& key, const Json& want, const Json& got) {
  // Element kind comes from the defaults; empty default arrays hold strings.
  if (key == "prior.gamma" && got.size() != 3) throw ConfigError("config key '" + key + "' must have exactly 3 entries");
  for (std::size_t i = 0; i < got.size(); ++i) {
    const Json proto = want.empty() ? Json("") : want.front();
    if (!same_kind(proto, got[i]))
      throw ConfigError("config key '" + key + "[" + std::to_string(i) + "]' expects " + json_kind(proto) + ", got " +
                        json_kind(got[i]));
  }
}

/// Overlays `src` onto `dst`, recursing into objects. Keys must already exist
/// in `dst` with a compatible JSON type.
inline void merge_strict(Json& dst, const Json& src, const std::string& prefix) {
  if (!src.is_object()) throw ConfigError("config " + (prefix.empty() ? std::string("root") : "key '" + prefix + "'") + " must be an object");
  for (auto it = src.begin(); it != src.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!dst.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    Json& slot = dst[it.key()];
    if (slot.is_object()) {
      merge_strict(slot, it.value(), key);
      continue;
    }
    if (!same_kind(slot, it.value()))
      throw ConfigError("config key '" + key + "' expects " + json_kind(slot) + ", got " + json_kind(it.value()));
    if (slot.is_array()) check_array(key, slot, it.value());
    slot = it.value();
  }
}

template <class V>
void get_to(const Json& j, const char* key, V& out) {
  out = j.at(key).get<V>();
}

}  // namespace detail

inline ConfigFile from_json(const Json& j) {
  ConfigFile c;
  Json merged = to_json(c);
  detail::merge_strict(merged, j, "");
  const int version = merged.at("schema_version").get<int>();
  if (version != kConfigSchemaVersion)
    throw ConfigError("config schema_version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kConfigSchemaVersion) + ")");
  using detail::get_to;
  c.schema_version = version;
  get_to(merged, "seed", c.seed);
  const Json& d = merged.at("data");
  get_to(d, "labeled", c.data.labeled);
  get_to(d, "unlabeled", c.data.unlabeled);
  get_to(d, "validation", c.data.validation);
  get_to(d, "output", c.data.output);
  const Json& ds = merged.at("dataset");
  get_to(ds, "patch", c.dataset.patch);
  get_to(ds, "chunk_len", c.dataset.chunk_len);
  get_to(ds, "batch_size", c.dataset.batch_size);
  TrainConfig& t = c.train;
  const Json& tj = merged.at("train");
  t.mode = parse_train_mode(tj.at("mode").get<std::string>());
  get_to(tj, "epochs", t.epochs);
  get_to(tj, "pretrain_epochs", t.pretrain_epochs);
  get_to(tj, "lr_transition", t.lr_transition);
  get_to(tj, "lr_emission", t.lr_emission);
  get_to(tj, "lr_derainer", t.lr_derainer);
  get_to(tj, "decay_every", t.decay_every);
  get_to(tj, "decay_factor", t.decay_factor);
  get_to(tj, "clip_norm", t.clip_norm);
  const Json& pj = merged.at("prior");
  get_to(pj, "rho", t.prior.rho);
  get_to(pj, "gamma", t.prior.gamma);
  get_to(pj, "eps0_sq", t.prior.eps0_sq);
  get_to(pj, "charbonnier_eps", t.prior.charbonnier_eps);
  const Json& lj = merged.at("langevin");
  get_to(lj, "delta", t.langevin.delta);
  get_to(lj, "steps", t.langevin.steps);
  get_to(lj, "sigma", t.langevin.sigma);
  get_to(lj, "noise_enabled", t.langevin.noise_enabled);
  const Json& dj = merged.at("derainer");
  auto& dr = t.derainer;
  get_to(dj, "channels", dr.channels);
  get_to(dj, "shuffle", dr.shuffle);
  get_to(dj, "width", dr.width);
  get_to(dj, "blocks", dr.blocks);
  get_to(dj, "kernel_t", dr.kernel_t);
  get_to(dj, "kernel_s", dr.kernel_s);
  get_to(dj, "global_skip", dr.global_skip);
  get_to(dj, "zero_tail", dr.zero_tail);
  dr.temporal_padding = parse_temporal_padding(dj.at("temporal_padding").get<std::string>());
  const Json& trj = merged.at("generator").at("transition");
  auto& tr = t.generator.transition;
  get_to(trj, "state_dim", tr.state_dim);
  get_to(trj, "noise_dim", tr.noise_dim);
  get_to(trj, "appearance_dim", tr.appearance_dim);
  get_to(trj, "hidden", tr.hidden);
  const Json& emj = merged.at("generator").at("emission");
  auto& em = t.generator.emission;
  get_to(emj, "seed_size", em.seed_size);
  get_to(emj, "seed_channels", em.seed_channels);
  get_to(emj, "stage_channels", em.stage_channels);
  get_to(emj, "out_channels", em.out_channels);
  get_to(emj, "target_h", em.target_h);
  get_to(emj, "target_w", em.target_w);
  get_to(emj, "initial_level", em.initial_level);
  c.propagate_seed();
  try {
    t.validate();
  } catch (const ValueError& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  return c;
}

/// Parses "a.b.c=value" into a nested JSON object. The value is read as JSON
/// when it parses, otherwise taken as a plain string.
inline Json parse_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not of the form key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    parts.push_back(key.substr(start, dot - start));
    if (parts.back().empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  Json out = value;
  for (std::size_t i = parts.size(); i-- > 0;) out = Json{{parts[i], out}};
  return out;
}

inline void require_data_paths(const ConfigFile& c) {
  if (c.data.labeled.empty()) throw ConfigError("missing required path: data.labeled (at least one labeled clip dir)");
  if (c.data.output.empty()) throw ConfigError("missing required path: data.output");
}

/// Loads `path` (empty path = defaults only), applies overrides in order and
/// validates. Required data paths are checked when `require_data` is set.
inline ConfigFile load_config(const std::string& path, const std::vector<std::string>& overrides = {},
                              bool require_data = true) {
  Json doc = Json::object();
  if (!path.empty()) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    doc = Json::parse(f, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config file '" + path + "' is not valid JSON");
    if (!doc.is_object()) throw ConfigError("config file '" + path + "' must hold a JSON object");
  }
  // Fold overrides into the document so they get the same strict checks.
  Json defaults = to_json(ConfigFile{});
  detail::merge_strict(defaults, doc, "");
  for (const auto& o : overrides) detail::merge_strict(defaults, parse_override(o), "");
  ConfigFile c = from_json(defaults);
  if (require_data) require_data_paths(c);
  return c;
}

/// Writes the fully resolved configuration to `<output>/resolved_config.json`
/// and returns that path.
inline std::string echo_config(const ConfigFile& c, const std::string& output_dir) {
  std::filesystem::create_directories(output_dir);
  const std::string path = (std::filesystem::path(output_dir) / "resolved_config.json").string();
  std::ofstream f(path);
  if (!f) throw IoError("cannot write '" + path + "'");
  f << to_json(c).dump(2) << "\n";
  return path;
}

}  // namespace vderain
