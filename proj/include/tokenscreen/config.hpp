#ifndef TOKENSCREEN_CONFIG_HPP
#define TOKENSCREEN_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <string>

#include <json.hpp>

#include "screening.hpp"
#include "skeleton.hpp"
#include "stopping.hpp"

namespace tokenscreen {

struct EntropySpec {
  std::string kind = "quadratic-binary";
  double alpha = 2.0;
};

struct TypeSpec {
  std::string kind = "uniform";
  double lo = 1.0;
  double hi = 2.0;
  Vec r, cdf;  // tabulated models only
};

struct GridSpec {
  double time_step = 1e-3;
  std::size_t type_count = 401;
  double horizon = -1.0;  // negative: pick automatically from the law builder
};

struct TolSpec {
  double eps_iso = 1e-7;
  double eps_cap = 1e-7;
  double eps_event = 1e-10;
  double quadrature = 1e-10;
};

// Everything a run needs, parsed from versioned JSON. Unknown keys are
// rejected with their dotted path so typos cannot silently fall back to
// defaults.
struct RunConfig {
  int schema_version = 1;
  EntropySpec entropy;
  Vec prior = {0.5, 0.5};
  double chi = 0.125;
  TypeSpec types;
  GridSpec grids;
  TolSpec tolerances;
  std::uint64_t seed = 1;
  std::string out_dir = ".";

  EntropyModel make_entropy() const {
    if (entropy.kind == "shannon") return EntropyModel::shannon();
    return EntropyModel::quadratic_binary(entropy.alpha);
  }
  Belief make_prior() const { return Belief(prior); }
  TypeModel make_types() const {
    if (types.kind == "tabulated") return TypeModel::tabulated(types.r, types.cdf);
    return TypeModel::uniform(types.lo, types.hi);
  }
  GreedySkeleton skeleton() const {
    SkeletonOpts opts;
    opts.eps_iso = tolerances.eps_iso;
    opts.eps_event = tolerances.eps_event;
    opts.max_step = grids.time_step;
    return build_skeleton(make_entropy(), make_prior(), chi, opts);
  }
  StoppingLaw law() const {
    LawOpts opts;
    opts.grid_step = grids.time_step;
    return stopping_law(skeleton(), grids.horizon, opts);
  }
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& j, const std::string& path,
                           std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) known = true;
    if (!known) throw config_error("unknown key at " + path + "." + item.key());
  }
}

inline const json* field(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

inline double num_field(const json& j, const std::string& path, const char* key,
                        double fallback) {
  const json* f = field(j, key);
  if (!f) return fallback;
  if (!f->is_number())
    throw config_error("config error at " + path + "." + key + ": expected a number");
  return f->get<double>();
}

inline std::string str_field(const json& j, const std::string& path, const char* key,
                             const std::string& fallback) {
  const json* f = field(j, key);
  if (!f) return fallback;
  if (!f->is_string())
    throw config_error("config error at " + path + "." + key + ": expected a string");
  return f->get<std::string>();
}

inline Vec vec_field(const json& j, const std::string& path, const char* key) {
  const json* f = field(j, key);
  if (!f || !f->is_array())
    throw config_error("config error at " + path + "." + key +
                       ": expected an array of numbers");
  Vec out;
  for (const auto& x : *f) {
    if (!x.is_number())
      throw config_error("config error at " + path + "." + key +
                         ": expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
  using detail::field;
  using detail::num_field;
  using detail::str_field;

  if (!j.is_object()) throw config_error("config error at root: expected an object");
  detail::reject_unknown(j, "root",
                         {"schema_version", "entropy", "prior", "chi", "types", "grids",
                          "tolerances", "seed", "output"});

  RunConfig cfg;
  const nlohmann::json* sv = field(j, "schema_version");
  if (!sv) throw config_error("config error at root: missing schema_version");
  if (!sv->is_number_integer() || sv->get<int>() != 1)
    throw config_error("config error at schema_version: unsupported version");

  if (const auto* e = field(j, "entropy")) {
    if (!e->is_object()) throw config_error("config error at entropy: expected an object");
    detail::reject_unknown(*e, "entropy", {"kind", "alpha"});
    cfg.entropy.kind = str_field(*e, "entropy", "kind", cfg.entropy.kind);
    if (cfg.entropy.kind != "shannon" && cfg.entropy.kind != "quadratic-binary")
      throw config_error("config error at entropy.kind: unknown entropy '" +
                         cfg.entropy.kind + "'");
    cfg.entropy.alpha = num_field(*e, "entropy", "alpha", cfg.entropy.alpha);
    if (!(cfg.entropy.alpha > 1.0))
      throw config_error("config error at entropy.alpha: must exceed 1");
  }

  if (field(j, "prior")) {
    cfg.prior = detail::vec_field(j, "root", "prior");
    if (cfg.prior.size() < 2)
      throw config_error("config error at prior: need at least two states");
    double total = 0.0;
    for (double p : cfg.prior) {
      if (!(p > 0.0))
        throw config_error("config error at prior: entries must be positive");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw config_error("config error at prior: entries must sum to 1");
  }

  cfg.chi = num_field(j, "root", "chi", cfg.chi);
  if (!(cfg.chi > 0.0)) throw config_error("config error at chi: must be positive");

  if (const auto* t = field(j, "types")) {
    if (!t->is_object()) throw config_error("config error at types: expected an object");
    detail::reject_unknown(*t, "types", {"kind", "lo", "hi", "r", "cdf"});
    cfg.types.kind = str_field(*t, "types", "kind", cfg.types.kind);
    if (cfg.types.kind == "uniform") {
      cfg.types.lo = num_field(*t, "types", "lo", cfg.types.lo);
      cfg.types.hi = num_field(*t, "types", "hi", cfg.types.hi);
      if (!(cfg.types.lo > 0.0) || !(cfg.types.lo < cfg.types.hi))
        throw config_error("config error at types: need 0 < lo < hi");
    } else if (cfg.types.kind == "tabulated") {
      cfg.types.r = detail::vec_field(*t, "types", "r");
      cfg.types.cdf = detail::vec_field(*t, "types", "cdf");
      if (cfg.types.r.size() != cfg.types.cdf.size() || cfg.types.r.size() < 2)
        throw config_error("config error at types: r and cdf need equal length >= 2");
    } else {
      throw config_error("config error at types.kind: unknown distribution '" +
                         cfg.types.kind + "'");
    }
  }

  if (const auto* g = field(j, "grids")) {
    if (!g->is_object()) throw config_error("config error at grids: expected an object");
    detail::reject_unknown(*g, "grids", {"time_step", "type_count", "horizon"});
    cfg.grids.time_step = num_field(*g, "grids", "time_step", cfg.grids.time_step);
    if (!(cfg.grids.time_step > 0.0))
      throw config_error("config error at grids.time_step: must be positive");
    double tc = num_field(*g, "grids", "type_count",
                          static_cast<double>(cfg.grids.type_count));
    if (tc < 3.0 || tc != std::floor(tc))
      throw config_error("config error at grids.type_count: need an integer >= 3");
    cfg.grids.type_count = static_cast<std::size_t>(tc);
    cfg.grids.horizon = num_field(*g, "grids", "horizon", cfg.grids.horizon);
    if (cfg.grids.horizon != -1.0 && !(cfg.grids.horizon > 0.0))
      throw config_error("config error at grids.horizon: use -1 for automatic or a positive time");
  }

  if (const auto* t = field(j, "tolerances")) {
    if (!t->is_object())
      throw config_error("config error at tolerances: expected an object");
    detail::reject_unknown(*t, "tolerances",
                           {"eps_iso", "eps_cap", "eps_event", "quadrature"});
    cfg.tolerances.eps_iso = num_field(*t, "tolerances", "eps_iso", cfg.tolerances.eps_iso);
    cfg.tolerances.eps_cap = num_field(*t, "tolerances", "eps_cap", cfg.tolerances.eps_cap);
    cfg.tolerances.eps_event =
        num_field(*t, "tolerances", "eps_event", cfg.tolerances.eps_event);
    cfg.tolerances.quadrature =
        num_field(*t, "tolerances", "quadrature", cfg.tolerances.quadrature);
    for (double tol : {cfg.tolerances.eps_iso, cfg.tolerances.eps_cap,
                       cfg.tolerances.eps_event, cfg.tolerances.quadrature})
      if (!(tol > 0.0))
        throw config_error("config error at tolerances: entries must be positive");
  }

  if (const auto* s = field(j, "seed")) {
    if (!s->is_number_integer() || s->get<long long>() < 0)
      throw config_error("config error at seed: expected a nonnegative integer");
    cfg.seed = s->get<std::uint64_t>();
  }

  if (const auto* o = field(j, "output")) {
    if (!o->is_object()) throw config_error("config error at output: expected an object");
    detail::reject_unknown(*o, "output", {"dir"});
    cfg.out_dir = str_field(*o, "output", "dir", cfg.out_dir);
  }

  // entropy models beyond two states need shannon; quadratic-binary is binary
  if (cfg.entropy.kind == "quadratic-binary" && cfg.prior.size() != 2)
    throw config_error("config error at prior: quadratic-binary entropy needs 2 states");

  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("config parse error in ") + path + ": " + e.what());
  }
  return parse_config(j);
}

}  // namespace tokenscreen

#endif
