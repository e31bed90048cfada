#ifndef PDL_HARNESS_HPP_
#define PDL_HARNESS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdl/bounds.hpp"
#include "pdl/dataio.hpp"
#include "pdl/diagnostics.hpp"
#include "pdl/errors.hpp"
#include "pdl/generators.hpp"
#include "pdl/netcore.hpp"
#include "pdl/optim.hpp"
#include "pdl/suites.hpp"

namespace pdl {

using json = nlohmann::json;

enum ExitCode : int { kExitOk = 0, kExitVerifyFailed = 1, kExitConfig = 2, kExitNumerical = 3 };

struct TaskConfig {
  enum class Kind { Synthetic, Idx };
  Kind kind = Kind::Synthetic;
  SyntheticTaskSpec synthetic;
  std::size_t samples = 1000;  // draws from the synthetic q used as training data
  std::uint64_t sample_seed = 0;
  std::string images;
  std::string labels;
  std::size_t per_class = 0;  // 0 keeps every item
  std::uint64_t subsample_seed = 0;
  bool operator==(const TaskConfig&) const = default;
};

struct MajorantProbe {
  std::size_t probe_pairs = 64;
  double radius = 0.1;
  std::uint64_t seed = 0;
  bool operator==(const MajorantProbe&) const = default;
};

struct BoundsConfig {
  std::uint64_t n = 500;
  std::size_t trials = 1000;
  Vector eps_grid{0.05, 0.1, 0.2, 0.3, 0.5};
  std::uint64_t seed = 0;
  double match_tol = 1e-9;
  bool operator==(const BoundsConfig&) const = default;
};

struct RunConfig {
  TaskConfig task;
  NetworkSpec model;
  double init_scale = 1.0;
  std::uint64_t init_seed = 0;
  GeneratorSpec generator = GeneratorSpec::neg_entropy(2);
  SgdConfig sgd;
  std::optional<MajorantProbe> estimate_xi;  // optimalFromXi with an estimated majorant
  std::string outputs = "out";
  std::size_t pearson_window = 20;
  BoundsConfig bounds;
  bool operator==(const RunConfig&) const = default;
};

/// eigenEvery left out of the config: one epoch's worth of steps.
inline constexpr long kEigenEveryEpoch = 0;

namespace detail {

/// Reads typed fields out of one JSON object and rejects unknown keys.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "/" : path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_ + "/" + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(at(key), "required field is missing");
    return j_.at(key);
  }

  template <typename T>
  T get(const std::string& key) {
    const json& v = raw(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(at(key), "expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(at(key), "expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
            throw ConfigError(at(key), "expected a nonnegative integer");
          }
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError(at(key), "expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(at(key), "expected a string");
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(at(key), e.what());
    }
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) {
    return has(key) ? get<T>(key) : fallback;
  }

  void done() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(at(key), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline BlockSpec parse_block(const json& j, const std::string& path) {
  Fields f(j, path);
  BlockSpec b;
  b.dense_width = f.get<std::size_t>("denseWidth");
  try {
    b.activation = parse_activation(f.get<std::string>("activation"));
  } catch (const InvalidInput& e) {
    throw ConfigError(f.at("activation"), e.what());
  }
  b.skip = f.get_or<bool>("skip", false);
  f.done();
  return b;
}

inline std::vector<BlockSpec> parse_blocks(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of blocks");
  std::vector<BlockSpec> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse_block(j[i], path + "/" + std::to_string(i)));
  return out;
}

inline json block_json(const BlockSpec& b) {
  return {{"denseWidth", b.dense_width}, {"activation", std::string(activation_name(b.activation))}, {"skip", b.skip}};
}

inline ModelFamily parse_family(const std::string& s, const std::string& path) {
  if (s == "A") return ModelFamily::A;
  if (s == "B") return ModelFamily::B;
  if (s == "C") return ModelFamily::C;
  if (s == "D") return ModelFamily::D;
  throw ConfigError(path, "unknown model family '" + s + "' (expected A, B, C or D)");
}

}  // namespace detail

/// Parses and validates a run configuration. Errors name the offending field.
inline RunConfig parse_config(const json& doc) {
  RunConfig c;
  detail::Fields root(doc, "");

  {
    detail::Fields t(root.raw("task"), "/task");
    const auto kind = t.get<std::string>("kind");
    if (kind == "synthetic") {
      c.task.kind = TaskConfig::Kind::Synthetic;
      c.task.synthetic.card_x = t.get<std::size_t>("cardX");
      c.task.synthetic.card_y = t.get<std::size_t>("cardY");
      c.task.synthetic.embed_dim = t.get<std::size_t>("embedDim");
      c.task.synthetic.conditional_sharpness = t.get<double>("conditionalSharpness");
      c.task.synthetic.seed = t.get<std::uint64_t>("seed");
      c.task.samples = t.get<std::size_t>("samples");
      c.task.sample_seed = t.get<std::uint64_t>("sampleSeed");
      if (c.task.synthetic.card_x < 2) throw ConfigError("/task/cardX", "must be >= 2");
      if (c.task.synthetic.card_y < 2) throw ConfigError("/task/cardY", "must be >= 2");
      if (c.task.synthetic.embed_dim == 0) throw ConfigError("/task/embedDim", "must be >= 1");
      if (!(c.task.synthetic.conditional_sharpness >= 0.0)) {
        throw ConfigError("/task/conditionalSharpness", "must be >= 0");
      }
      if (c.task.samples == 0) throw ConfigError("/task/samples", "must be >= 1");
    } else if (kind == "idx") {
      c.task.kind = TaskConfig::Kind::Idx;
      c.task.images = t.get<std::string>("images");
      c.task.labels = t.get<std::string>("labels");
      c.task.per_class = t.get_or<std::size_t>("perClass", 0);
      c.task.subsample_seed = t.get_or<std::uint64_t>("seed", 0);
    } else {
      throw ConfigError("/task/kind", "expected \"synthetic\" or \"idx\", got \"" + kind + "\"");
    }
    t.done();
  }

  {
    detail::Fields m(root.raw("model"), "/model");
    if (m.has("family")) {
      const auto fam = detail::parse_family(m.get<std::string>("family"), "/model/family");
      const auto width = m.get<std::size_t>("width");
      if (width == 0) throw ConfigError("/model/width", "must be >= 1");
      const auto repeat = m.get_or<std::size_t>("repeat", 1);
      c.model = make_model(fam, m.get<std::size_t>("inputDim"), m.get<std::size_t>("outputDim"), width, repeat);
    } else {
      c.model.input_dim = m.get<std::size_t>("inputDim");
      c.model.output_dim = m.get<std::size_t>("outputDim");
      c.model.stem = m.has("stem") ? detail::parse_blocks(m.raw("stem"), "/model/stem") : std::vector<BlockSpec>{};
      c.model.blocks =
          m.has("blocks") ? detail::parse_blocks(m.raw("blocks"), "/model/blocks") : std::vector<BlockSpec>{};
      c.model.repeat = m.get_or<std::size_t>("repeat", 1);
    }
    c.init_scale = m.get_or<double>("initScale", 1.0);
    c.init_seed = m.get_or<std::uint64_t>("initSeed", 0);
    m.done();
    if (!(c.init_scale > 0.0)) throw ConfigError("/model/initScale", "must be > 0");
    try {
      NetworkLayout{c.model};
    } catch (const InvalidInput& e) {
      throw ConfigError("/model", e.what());
    }
  }

  const std::size_t want_in =
      c.task.kind == TaskConfig::Kind::Synthetic ? c.task.synthetic.embed_dim : std::size_t{784};
  const std::size_t want_out = c.task.kind == TaskConfig::Kind::Synthetic ? c.task.synthetic.card_y : kIdxClasses;
  if (c.model.input_dim != want_in) {
    throw ConfigError("/model/inputDim", "is " + std::to_string(c.model.input_dim) + " but the task supplies " +
                                             std::to_string(want_in) + "-dimensional inputs");
  }
  if (c.model.output_dim != want_out) {
    throw ConfigError("/model/outputDim", "is " + std::to_string(c.model.output_dim) + " but the task has " +
                                              std::to_string(want_out) + " labels");
  }

  {
    detail::Fields g(root.raw("generator"), "/generator");
    const auto name = g.get<std::string>("variant");
    GeneratorSpec::Variant v;
    try {
      v = parse_variant(name);
    } catch (const InvalidInput& e) {
      throw ConfigError("/generator/variant", e.what());
    }
    if (v == GeneratorSpec::Variant::NormPower) {
      const double r = g.get<double>("order");
      const double a = g.get<double>("scale");
      if (!(r > 1.0)) throw ConfigError("/generator/order", "must be > 1");
      if (!(a > 0.0)) throw ConfigError("/generator/scale", "must be > 0");
      c.generator = GeneratorSpec::norm_power_fn(c.model.output_dim, r, a);
    } else if (v == GeneratorSpec::Variant::SquaredL2) {
      c.generator = GeneratorSpec::squared_l2(c.model.output_dim);
    } else {
      c.generator = GeneratorSpec::neg_entropy(c.model.output_dim);
    }
    g.done();
  }

  {
    detail::Fields s(root.raw("sgd"), "/sgd");
    const auto mode = s.get<std::string>("mode");
    if (mode == "fixedAlpha") {
      c.sgd.mode = SgdConfig::Mode::FixedAlpha;
      c.sgd.alpha = s.get<double>("alpha");
      if (!(c.sgd.alpha >= 0.0)) throw ConfigError("/sgd/alpha", "must be >= 0");
    } else if (mode == "optimalFromXi") {
      c.sgd.mode = SgdConfig::Mode::OptimalFromXi;
      const json& xi = s.raw("xi");
      detail::Fields x(xi, "/sgd/xi");
      if (x.has("estimate")) {
        detail::Fields e(x.raw("estimate"), "/sgd/xi/estimate");
        MajorantProbe p;
        p.probe_pairs = e.get<std::size_t>("probePairs");
        p.radius = e.get<double>("radius");
        p.seed = e.get_or<std::uint64_t>("seed", 0);
        e.done();
        if (p.probe_pairs == 0) throw ConfigError("/sgd/xi/estimate/probePairs", "must be >= 1");
        if (!(p.radius > 0.0)) throw ConfigError("/sgd/xi/estimate/radius", "must be > 0");
        const double r = x.get_or<double>("order", 2.0);
        if (!(r > 1.0)) throw ConfigError("/sgd/xi/order", "must be > 1");
        c.sgd.xi = NormPowerFn(r, 1.0);
        c.estimate_xi = p;
      } else {
        const double r = x.get<double>("order");
        const double a = x.get<double>("scale");
        if (!(r > 1.0)) throw ConfigError("/sgd/xi/order", "must be > 1");
        if (!(a > 0.0)) throw ConfigError("/sgd/xi/scale", "must be > 0");
        c.sgd.xi = NormPowerFn(r, a);
      }
      x.done();
    } else {
      throw ConfigError("/sgd/mode", "expected \"fixedAlpha\" or \"optimalFromXi\", got \"" + mode + "\"");
    }
    c.sgd.batch_size = s.get<std::size_t>("batchSize");
    const auto steps = s.get<long long>("steps");
    if (steps < 0) throw ConfigError("/sgd/steps", "must be >= 0");
    c.sgd.steps = static_cast<long>(steps);
    c.sgd.seed = s.get_or<std::uint64_t>("seed", 0);
    if (s.has("eigenEvery")) {
      const auto every = s.get<long long>("eigenEvery");
      if (every <= 0) throw ConfigError("/sgd/eigenEvery", "must be >= 1");
      c.sgd.eigen_every = static_cast<long>(every);
    } else {
      c.sgd.eigen_every = kEigenEveryEpoch;
    }
    c.sgd.measure_beta = s.get_or<bool>("measureBeta", false);
    s.done();
    if (c.sgd.batch_size == 0) throw ConfigError("/sgd/batchSize", "must be >= 1");
    if (c.task.kind == TaskConfig::Kind::Synthetic && c.sgd.batch_size > c.task.samples) {
      throw ConfigError("/sgd/batchSize", "exceeds the " + std::to_string(c.task.samples) + " training samples");
    }
  }

  c.outputs = root.get_or<std::string>("outputs", "out");
  c.pearson_window = root.get_or<std::size_t>("pearsonWindow", 20);
  if (c.pearson_window < 2) throw ConfigError("/pearsonWindow", "must be >= 2");

  if (root.has("bounds")) {
    detail::Fields b(root.raw("bounds"), "/bounds");
    c.bounds.n = b.get<std::uint64_t>("n");
    c.bounds.trials = b.get<std::size_t>("trials");
    const json& grid = b.raw("epsGrid");
    if (!grid.is_array() || grid.empty()) throw ConfigError("/bounds/epsGrid", "expected a nonempty array");
    c.bounds.eps_grid.clear();
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!grid[i].is_number() || !(grid[i].get<double>() >= 0.0)) {
        throw ConfigError("/bounds/epsGrid/" + std::to_string(i), "expected a number >= 0");
      }
      c.bounds.eps_grid.push_back(grid[i].get<double>());
    }
    c.bounds.seed = b.get_or<std::uint64_t>("seed", 0);
    c.bounds.match_tol = b.get_or<double>("matchTol", 1e-9);
    b.done();
    if (c.bounds.n == 0) throw ConfigError("/bounds/n", "must be >= 1");
    if (c.bounds.trials < 100) throw ConfigError("/bounds/trials", "must be >= 100");
    if (!(c.bounds.match_tol >= 0.0)) throw ConfigError("/bounds/matchTol", "must be >= 0");
  }
  root.done();
  return c;
}

inline RunConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("/", std::string("not valid JSON: ") + e.what());
  }
  return parse_config(doc);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("/", "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// Canonical JSON form; parse_config(to_json(c)) == c.
inline json to_json(const RunConfig& c) {
  json j;
  if (c.task.kind == TaskConfig::Kind::Synthetic) {
    const auto& s = c.task.synthetic;
    j["task"] = {{"kind", "synthetic"},      {"cardX", s.card_x},
                 {"cardY", s.card_y},        {"embedDim", s.embed_dim},
                 {"conditionalSharpness", s.conditional_sharpness},
                 {"seed", s.seed},           {"samples", c.task.samples},
                 {"sampleSeed", c.task.sample_seed}};
  } else {
    j["task"] = {{"kind", "idx"},
                 {"images", c.task.images},
                 {"labels", c.task.labels},
                 {"perClass", c.task.per_class},
                 {"seed", c.task.subsample_seed}};
  }
  json stem = json::array(), blocks = json::array();
  for (const auto& b : c.model.stem) stem.push_back(detail::block_json(b));
  for (const auto& b : c.model.blocks) blocks.push_back(detail::block_json(b));
  j["model"] = {{"inputDim", c.model.input_dim}, {"outputDim", c.model.output_dim}, {"stem", stem},
                {"blocks", blocks},               {"repeat", c.model.repeat},       {"initScale", c.init_scale},
                {"initSeed", c.init_seed}};
  j["generator"] = {{"variant", std::string(variant_name(c.generator.variant))}};
  if (c.generator.variant == GeneratorSpec::Variant::NormPower) {
    j["generator"]["order"] = c.generator.norm_power.order;
    j["generator"]["scale"] = c.generator.norm_power.scale;
  }
  json sgd = {{"batchSize", c.sgd.batch_size},
              {"steps", c.sgd.steps},
              {"seed", c.sgd.seed},
              {"measureBeta", c.sgd.measure_beta}};
  if (c.sgd.eigen_every != kEigenEveryEpoch) sgd["eigenEvery"] = c.sgd.eigen_every;
  if (c.sgd.mode == SgdConfig::Mode::FixedAlpha) {
    sgd["mode"] = "fixedAlpha";
    sgd["alpha"] = c.sgd.alpha;
  } else {
    sgd["mode"] = "optimalFromXi";
    if (c.estimate_xi) {
      sgd["xi"] = {{"order", c.sgd.xi.order},
                   {"estimate",
                    {{"probePairs", c.estimate_xi->probe_pairs},
                     {"radius", c.estimate_xi->radius},
                     {"seed", c.estimate_xi->seed}}}};
    } else {
      sgd["xi"] = {{"order", c.sgd.xi.order}, {"scale", c.sgd.xi.scale}};
    }
  }
  j["sgd"] = sgd;
  j["outputs"] = c.outputs;
  j["pearsonWindow"] = c.pearson_window;
  j["bounds"] = {{"n", c.bounds.n},
                 {"trials", c.bounds.trials},
                 {"epsGrid", c.bounds.eps_grid},
                 {"seed", c.bounds.seed},
                 {"matchTol", c.bounds.match_tol}};
  return j;
}

/// The training set as a finite distribution: the synthetic task's empirical
/// joint, or one feature per IDX item with mass 1/n on its label.
struct PreparedTask {
  std::optional<FinitePD> truth;  // synthetic only
  FinitePD empirical;
  LabeledData data;
};

inline PreparedTask prepare_task(const RunConfig& c) {
  if (c.task.kind == TaskConfig::Kind::Synthetic) {
    FinitePD q = make_synthetic(c.task.synthetic);
    const auto draws = sample(q, c.task.samples, c.task.sample_seed);
    FinitePD qhat = empirical_from_samples(draws, q.card_x(), q.card_y()).joint(q.embeddings());
    LabeledData data = to_labeled_data(q, draws);
    return {std::move(q), std::move(qhat), std::move(data)};
  }
  IdxDataset ds = load_idx(c.task.images, c.task.labels);
  if (c.task.per_class > 0) ds = subsample(ds, c.task.per_class, c.task.subsample_seed);
  if (ds.size() == 0) throw ConfigError("/task/images", "dataset is empty");
  if (ds.image_size() != c.model.input_dim) {
    throw ConfigError("/model/inputDim", "images have " + std::to_string(ds.image_size()) + " pixels");
  }
  if (c.sgd.batch_size > ds.size()) {
    throw ConfigError("/sgd/batchSize", "exceeds the " + std::to_string(ds.size()) + " training items");
  }
  LabeledData data = to_labeled_data(ds);
  Matrix joint(ds.size(), kIdxClasses);
  for (std::size_t i = 0; i < ds.size(); ++i) joint(i, ds.labels[i]) = 1.0 / static_cast<double>(ds.size());
  FinitePD qhat(std::move(joint), data.inputs);
  return {std::nullopt, std::move(qhat), std::move(data)};
}

namespace detail {

inline std::string csv_number(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

inline std::string csv_field(const std::optional<double>& v) { return v ? csv_number(*v) : std::string(); }

inline json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json number_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace detail

inline constexpr const char* kMetricsHeader =
    "step,riskSurrogate,log2Risk,gradEnergy,lambdaMin,lambdaMax,lowerBound,upperBound,log2Lower,log2Upper,"
    "pearsonRiskUpper,pearsonRiskLower";

/// One CSV line per metrics row; empty fields where a value is undefined.
inline void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows, std::size_t window) {
  out << kMetricsHeader << '\n';
  const BoundCorrelation corr = bound_correlations(rows, window);
  std::vector<std::optional<double>> pu(rows.size()), pl(rows.size());
  for (std::size_t k = 0; k < corr.index.size(); ++k) {
    pu[corr.index[k]] = corr.upper[k];
    pl[corr.index[k]] = corr.lower[k];
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const auto log2_opt = [](const std::optional<double>& v) -> std::optional<double> {
      if (!v) return std::nullopt;
      return std::log2(*v);
    };
    out << r.step << ',' << detail::csv_number(r.risk_surrogate) << ',' << detail::csv_number(r.log2_risk()) << ','
        << detail::csv_number(r.grad_energy) << ',' << detail::csv_field(r.lambda_min) << ','
        << detail::csv_field(r.lambda_max) << ',' << detail::csv_field(r.lower_bound) << ','
        << detail::csv_field(r.upper_bound) << ',' << detail::csv_field(log2_opt(r.lower_bound)) << ','
        << detail::csv_field(log2_opt(r.upper_bound)) << ',' << detail::csv_field(pu[i]) << ','
        << detail::csv_field(pl[i]) << '\n';
  }
}

inline constexpr std::size_t kZetaMaxSupport = 10000;

struct TrainOutcome {
  TrainTrace trace;
  json summary;
};

inline TrainOutcome run_training(const RunConfig& c) {
  PreparedTask task = prepare_task(c);
  const Network net(c.model);
  const ParamVector theta0 = init_params(c.model, c.init_seed, c.init_scale);
  SgdConfig sgd = c.sgd;
  if (sgd.eigen_every == kEigenEveryEpoch) {
    sgd.eigen_every = static_cast<long>(std::max<std::size_t>(1, task.data.size() / sgd.batch_size));
  }
  std::optional<MajorantEstimate> est;
  if (c.estimate_xi) {
    const auto f = network_objective(net, c.generator, task.data, theta0, all_indices(task.data.size()));
    est = estimate_majorant(f, theta0.values(), c.sgd.xi.order, c.estimate_xi->probe_pairs, c.estimate_xi->radius,
                            c.estimate_xi->seed);
    sgd.xi = est->xi;
  }
  TrainOutcome out;
  out.trace = train(net, c.generator, task.data, sgd, theta0);
  const ParamVector& theta = out.trace.final_params;

  json s;
  s["steps"] = c.sgd.steps;
  s["trainingSamples"] = task.data.size();
  s["paramCount"] = net.param_count();
  s["generator"] = std::string(variant_name(c.generator.variant));
  s["finalRiskSurrogate"] =
      out.trace.rows.empty() ? json(nullptr) : detail::number_json(out.trace.rows.back().risk_surrogate);
  s["finalEmpiricalRisk"] = detail::number_json(risk(c.generator, task.empirical, net, theta));
  const RiskBounds rb = risk_bounds(c.generator, task.empirical);
  const EntropyTerms ent = generalized_entropy_terms(c.generator, task.empirical);
  s["riskBounds"] = {{"distribution", "empirical"},
                     {"condEntropy", ent.cond_ent},
                     {"mutualInformation", ent.mut_info},
                     {"lower", rb.lower},
                     {"upper", rb.upper}};
  s["gamma"] = detail::number_json(gamma_max_loss(c.generator, net, theta, task.empirical));
  if (task.empirical.card_x() <= kZetaMaxSupport) {
    s["zeta"] = information_loss(net, theta, task.empirical, c.bounds.match_tol);
  } else {
    s["zeta"] = nullptr;  // quadratic in the support size
  }
  if (task.truth) {
    s["trueRisk"] = detail::number_json(risk(c.generator, *task.truth, net, theta));
  }
  s["descentViolations"] = out.trace.descent_violations;
  if (est) s["estimatedXi"] = {{"order", est->xi.order}, {"scale", est->xi.scale}, {"fittedScale", est->fitted_scale}};
  if (c.sgd.measure_beta) {
    json beta = {{"count", out.trace.beta.size()}};
    if (!out.trace.beta.empty()) {
      Vector sorted = out.trace.beta;
      std::sort(sorted.begin(), sorted.end());
      beta["min"] = sorted.front();
      beta["median"] = sorted[sorted.size() / 2];
      beta["max"] = sorted.back();
      beta["mean"] = mean(sorted);
    }
    s["beta"] = beta;
  }
  const BoundCorrelation corr = bound_correlations(out.trace.rows, c.pearson_window);
  s["pearsonWindow"] = c.pearson_window;
  s["finalPearsonRiskUpper"] = corr.upper.empty() ? json(nullptr) : detail::opt_json(corr.upper.back());
  s["finalPearsonRiskLower"] = corr.lower.empty() ? json(nullptr) : detail::opt_json(corr.lower.back());
  out.summary = s;
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw ConfigError("/outputs", "cannot write '" + path.string() + "'");
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("/outputs", "cannot create '" + dir.string() + "': " + ec.message());
}

/// Writes metrics.csv and summary.json into out_dir.
inline json cmd_train(const RunConfig& c, const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);
  const TrainOutcome t = run_training(c);
  std::ostringstream csv;
  write_metrics_csv(csv, t.trace.rows, c.pearson_window);
  write_text(out_dir / "metrics.csv", csv.str());
  write_text(out_dir / "summary.json", t.summary.dump(2) + "\n");
  return t.summary;
}

/// Entropy terms, risk bounds, gamma, zeta and the Monte Carlo
/// generalization check for a synthetic task, at the trained parameters.
inline json bounds_report(const RunConfig& c) {
  if (c.task.kind != TaskConfig::Kind::Synthetic) {
    throw ConfigError("/task/kind", "bounds needs a synthetic task with a known distribution");
  }
  const TrainOutcome t = run_training(c);
  const FinitePD q = make_synthetic(c.task.synthetic);
  const Network net(c.model);
  const ParamVector& theta = t.trace.final_params;

  json r;
  const EntropyTerms ent = generalized_entropy_terms(c.generator, q);
  const EntropyTerms sh = shannon_terms(q);
  const RiskBounds rb = risk_bounds(c.generator, q);
  r["generator"] = std::string(variant_name(c.generator.variant));
  r["condEntropy"] = ent.cond_ent;
  r["mutualInformation"] = ent.mut_info;
  r["shannon"] = {{"condEntropy", sh.cond_ent}, {"mutualInformation", sh.mut_info}};
  r["riskBounds"] = {{"lower", rb.lower}, {"upper", rb.upper}};
  r["trainedSteps"] = c.sgd.steps;

  const auto rep = mc_generalization_check(c.generator, net, theta, q, c.bounds.n, c.bounds.trials,
                                           c.bounds.eps_grid, c.bounds.seed, c.bounds.match_tol);
  r["trueRisk"] = rep.true_risk;
  r["gamma"] = rep.gamma;
  if (c.generator.variant == GeneratorSpec::Variant::NegEntropySimplex) {
    r["gammaFromPmin"] = gamma_from_pmin(net, theta, q);
  }
  r["zeta"] = rep.zeta;
  r["n"] = rep.n;
  r["trials"] = rep.trials;
  r["seed"] = c.bounds.seed;
  r["validFrom"] = rep.valid_from;
  r["maxGap"] = rep.max_gap;
  json curve = json::array();
  for (std::size_t i = 0; i < rep.eps_grid.size(); ++i) {
    curve.push_back({{"eps", rep.eps_grid[i]},
                     {"bound", rep.bound_values[i]},
                     {"valid", static_cast<bool>(rep.valid[i])},
                     {"empiricalExceedance", rep.empirical_exceedance[i]},
                     {"allowed", rep.bound_values[i] + binomial_slack(rep.bound_values[i], rep.trials)}});
  }
  r["genBound"] = curve;
  r["holds"] = rep.holds();
  return r;
}

inline json cmd_bounds(const RunConfig& c, const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);
  const json r = bounds_report(c);
  write_text(out_dir / "bounds.json", r.dump(2) + "\n");
  return r;
}

struct VerifyOutcome {
  std::vector<SuiteResult> results;
  bool pass = true;
  json summary;
};

/// Runs every suite whose name matches `filter` (all when empty).
inline VerifyOutcome cmd_verify(const std::string& filter, const SuiteOptions& opt, std::ostream& log) {
  VerifyOutcome v;
  json suites = json::array();
  for (const auto& s : all_suites()) {
    if (!filter.empty() && s.name != filter) continue;
    const SuiteResult r = run_suite(s, opt);
    log << (r.pass ? "PASS " : "FAIL ") << std::left << std::setw(14) << r.name << ' ' << (r.checked - r.failed)
        << '/' << r.checked << " checks, " << std::fixed << std::setprecision(2) << r.seconds << " s"
        << std::defaultfloat;
    if (!r.detail.empty()) log << "  (" << r.detail << ')';
    log << '\n';
    v.pass = v.pass && r.pass;
    suites.push_back({{"name", r.name},
                      {"pass", r.pass},
                      {"checked", r.checked},
                      {"failed", r.failed},
                      {"worst", detail::number_json(r.worst)},
                      {"seconds", r.seconds},
                      {"detail", r.detail}});
    v.results.push_back(r);
  }
  if (v.results.empty()) {
    std::string names;
    for (const auto& s : all_suites()) names += (names.empty() ? "" : ", ") + s.name;
    throw ConfigError("--suite", "no suite named '" + filter + "' (available: " + names + ")");
  }
  v.summary = {{"pass", v.pass}, {"faultInjected", opt.inject_fault}, {"suites", suites}};
  return v;
}

}  // namespace pdl

#endif  // PDL_HARNESS_HPP_
