#pragma once

// Training checkpoints: a stored zip holding one tensor container per named
// array plus manifest.json (entry dims, epoch, RNG scheme, config snapshot).

#include <map>
#include <set>
#include <string>
#include <vector>

#include "vderain/config.hpp"
#include "vderain/tensor_io.hpp"
#include "vderain/training.hpp"
#include "vderain/zip.hpp"

namespace vderain {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ConfigFile config;
  TrainState state;
};

namespace detail {

// Every RNG stream is derived from (seed, stream name, counter), so the seed
// plus the epoch counter is the complete RNG state.
inline const char* kRngScheme = "mt19937_64 streams keyed by splitmix(seed, fnv1a(name), counter)";

template <class P, class F>
void visit_named(const std::string& prefix, P& params, F&& f) {
  nn::for_each_param(params, [&](const std::string& name, auto& t) { f(prefix + name, t); });
}

template <class O, class F>
void visit_adam(const std::string& prefix, O& opt, F&& f) {
  visit_named(prefix + "/m/", opt.m, f);
  visit_named(prefix + "/v/", opt.v, f);
}

/// Calls f(name, tensor) for every array of the training state in a fixed order.
template <class S, class F>
void visit_state(S& st, F&& f) {
  visit_named("derainer/", st.derainer, f);
  visit_adam("derainer_adam", st.derainer_opt, f);
  for (std::size_t j = 0; j < st.batches.size(); ++j) {
    auto& b = st.batches[j];
    const std::string p = "batch" + std::to_string(j) + "/";
    visit_named(p + "generator/", b.generator, f);
    visit_adam(p + "transition_adam", b.transition_opt, f);
    visit_adam(p + "emission_adam", b.emission_opt, f);
    for (std::size_t k = 0; k < b.chains.size(); ++k) {
      const std::string c = p + "chain" + std::to_string(k) + "/";
      f(c + "s0", b.chains[k].latents.s0);
      f(c + "z", b.chains[k].latents.z);
      f(c + "m", b.chains[k].latents.m);
    }
  }
}

inline std::string entry_file(const std::string& name) { return "tensors/" + name + ".tensor"; }

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  const TrainState& st = ck.state;
  zip::Writer zw;
  Json entries = Json::array();
  detail::visit_state(st, [&](const std::string& name, const Tensor<float>& t) {
    entries.push_back({{"name", name}, {"file", detail::entry_file(name)}, {"dims", t.shape()}});
    zw.add(detail::entry_file(name), tensor_to_bytes(t));
  });
  Json batches = Json::array();
  for (const auto& b : st.batches) {
    Json ids = Json::array();
    for (const auto& c : b.chains) ids.push_back(c.clip_id);
    batches.push_back({{"labeled", b.labeled},
                       {"members", b.members},
                       {"clip_ids", ids},
                       {"transition_adam_step", b.transition_opt.step},
                       {"emission_adam_step", b.emission_opt.step}});
  }
  Json manifest = {{"format", "vderain-checkpoint"},
                   {"version", kCheckpointVersion},
                   {"epoch", st.epoch},
                   {"rng", {{"scheme", detail::kRngScheme}, {"seed", ck.config.seed}}},
                   {"derainer_adam_step", st.derainer_opt.step},
                   {"batches", batches},
                   {"entries", entries},
                   {"config", to_json(ck.config)}};
  zw.add("manifest.json", manifest.dump(1));
  zw.save(path);
}

namespace detail {

inline TrainState skeleton_state(const ConfigFile& cfg, const Json& manifest) {
  const TrainConfig& tc = cfg.train;
  TrainState st;
  st.derainer = init_params<float>(tc.derainer, 0);
  st.derainer_opt = AdamState<DerainerParams<float>>(st.derainer);
  st.derainer_opt.step = manifest.at("derainer_adam_step").get<std::uint64_t>();
  st.epoch = manifest.at("epoch").get<std::size_t>();
  for (const auto& bj : manifest.at("batches")) {
    BatchState b;
    b.labeled = bj.at("labeled").get<bool>();
    b.members = bj.at("members").get<std::vector<std::size_t>>();
    b.generator = init_params<float>(tc.generator, 0);
    b.transition_opt = AdamState<TransitionParams<float>>(b.generator.transition);
    b.emission_opt = AdamState<EmissionParams<float>>(b.generator.emission);
    b.transition_opt.step = bj.at("transition_adam_step").get<std::uint64_t>();
    b.emission_opt.step = bj.at("emission_adam_step").get<std::uint64_t>();
    for (const auto& id : bj.at("clip_ids")) b.chains.push_back({id.get<std::string>(), zero_latents<float>(tc.generator.transition, 1)});
    st.batches.push_back(std::move(b));
  }
  return st;
}

}  // namespace detail

inline Checkpoint load_checkpoint(const std::string& path) {
  const auto files = zip::read_file(path);
  const auto mit = files.find("manifest.json");
  if (mit == files.end()) throw IoError("checkpoint '" + path + "' has no manifest.json");
  const Json manifest = Json::parse(mit->second, nullptr, false);
  if (manifest.is_discarded() || !manifest.is_object()) throw IoError("checkpoint '" + path + "': manifest is not valid JSON");
  try {
    if (manifest.at("format") != "vderain-checkpoint" || manifest.at("version") != kCheckpointVersion)
      throw IoError("checkpoint '" + path + "': unsupported format or version");
    Checkpoint ck;
    ck.config = from_json(manifest.at("config"));
    ck.state = detail::skeleton_state(ck.config, manifest);

    std::map<std::string, const Json*> listed;
    for (const auto& e : manifest.at("entries")) listed[e.at("name").get<std::string>()] = &e;
    std::set<std::string> used;
    detail::visit_state(ck.state, [&](const std::string& name, Tensor<float>& t) {
      const auto lit = listed.find(name);
      if (lit == listed.end()) throw IoError("checkpoint '" + path + "': manifest has no entry '" + name + "'");
      const Json& e = *lit->second;
      const auto fit = files.find(e.at("file").get<std::string>());
      if (fit == files.end())
        throw IoError("checkpoint '" + path + "': entry '" + name + "' refers to missing file '" + e.at("file").get<std::string>() + "'");
      Tensor<float> loaded = tensor_from_bytes(fit->second);
      const Shape dims = e.at("dims").get<Shape>();
      if (loaded.shape() != dims)
        throw ShapeError("checkpoint '" + path + "': entry '" + name + "' has dims " + shape_str(loaded.shape()) +
                         " but the manifest says " + shape_str(dims));
      // Chains are variable length; everything else must match the config.
      const bool is_chain_z = name.size() > 2 && name.ends_with("/z") && name.find("/chain") != std::string::npos;
      const bool ok = is_chain_z ? loaded.rank() == 2 && loaded.dim(0) > 0 && loaded.dim(1) == t.dim(1) : loaded.shape() == t.shape();
      if (!ok)
        throw ShapeError("checkpoint '" + path + "': entry '" + name + "' has dims " + shape_str(loaded.shape()) +
                         ", configuration expects " + shape_str(t.shape()));
      t = std::move(loaded);
      used.insert(name);
    });
    for (const auto& [name, e] : listed)
      if (!used.count(name)) throw IoError("checkpoint '" + path + "': unexpected entry '" + name + "'");
    return ck;
  } catch (const Json::exception& e) {
    throw IoError("checkpoint '" + path + "': malformed manifest (" + e.what() + ")");
  }
}

}  // namespace vderain
