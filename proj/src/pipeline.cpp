#include "mdf/pipeline.hpp"

#include "mdf/linops.hpp"

#include <chrono>
#include <fstream>
#include <future>
#include <set>

namespace mdf {

using nlohmann::json;

void ExperimentConfig::validate() const {
  if (!hr_path && !lr_path) throw ConfigError("config needs hr_path (paired mode) or lr_path (measured mode)");
  if (hr_path && lr_path) throw ConfigError("config sets both hr_path and lr_path; choose one mode");
  check_factor(factor);
  if (!(mu > 0 && mu < 1)) throw ConfigError("mu must lie strictly between 0 and 1");
  solver.validate();
  if (!(sigma_w >= 0)) throw ConfigError("sigma_w must be non-negative");
  if (sigma_lambda && !(*sigma_lambda > 0)) throw ConfigError("sigma_lambda must be positive");
  if (sigma_lambda && sigma_w == 0) throw ConfigError("sigma_lambda needs a positive sigma_w");
  prior.validate();
  if (hr_train_shape && (hr_train_shape->height < 0 || hr_train_shape->width < 0))
    throw ConfigError("hr_train_shape must be non-negative");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

NoiseParams ExperimentConfig::noise() const {
  // The balanced gain depends only on sigma_lambda / (L sigma_w); keep it in the noiseless limit.
  if (sigma_w == 0) return NoiseParams::balanced(1.0, factor);
  return sigma_lambda ? NoiseParams(sigma_w, *sigma_lambda) : NoiseParams::balanced(sigma_w, factor);
}

namespace {

const char* to_string(ForwardKind k) { return k == ForwardKind::Rap ? "rap" : "standard"; }

ForwardKind parse_forward(const std::string& s) {
  if (s == "rap") return ForwardKind::Rap;
  if (s == "standard") return ForwardKind::Standard;
  throw ConfigError("forward must be 'rap' or 'standard', got '" + s + "'");
}

json prior_to_json(const DenoiserSpec& spec) {
  json j;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GaussianPrior>) {
          j = {{"kind", "gaussian"}, {"sigma_blur", p.sigma_blur}};
        } else if constexpr (std::is_same_v<T, NlmPrior>) {
          j = {{"kind", "nlm"},
               {"patch_radius", p.params.patch_radius},
               {"search_radius", p.params.search_radius},
               {"bandwidth_h", p.params.bandwidth_h}};
        } else if constexpr (std::is_same_v<T, TvPrior>) {
          j = {{"kind", "tv"}, {"weight", p.weight}, {"inner_iters", p.inner_iters}};
        } else if constexpr (std::is_same_v<T, ExternalPrior>) {
          j = {{"kind", "external"}, {"endpoint", p.endpoint}};
        } else {
          j = {{"kind", "identity"}};
        }
      },
      spec.variant);
  return j;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : obj.items())
    if (!allowed.count(item.key())) throw ConfigError("unknown key '" + item.key() + "' in " + where);
}

template <typename T>
void read_opt(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

DenoiserSpec prior_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind")) throw ConfigError("prior needs a 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  DenoiserSpec spec;
  if (kind == "gaussian") {
    reject_unknown(j, {"kind", "sigma_blur"}, "prior");
    GaussianPrior p;
    read_opt(j, "sigma_blur", p.sigma_blur);
    spec.variant = p;
  } else if (kind == "nlm") {
    reject_unknown(j, {"kind", "patch_radius", "search_radius", "bandwidth_h"}, "prior");
    NlmPrior p;
    read_opt(j, "patch_radius", p.params.patch_radius);
    read_opt(j, "search_radius", p.params.search_radius);
    read_opt(j, "bandwidth_h", p.params.bandwidth_h);
    spec.variant = p;
  } else if (kind == "tv") {
    reject_unknown(j, {"kind", "weight", "inner_iters"}, "prior");
    TvPrior p;
    read_opt(j, "weight", p.weight);
    read_opt(j, "inner_iters", p.inner_iters);
    spec.variant = p;
  } else if (kind == "external") {
    reject_unknown(j, {"kind", "endpoint"}, "prior");
    ExternalPrior p;
    read_opt(j, "endpoint", p.endpoint);
    spec.variant = p;
  } else if (kind == "identity") {
    reject_unknown(j, {"kind"}, "prior");
    spec.variant = IdentityPrior{};
  } else {
    throw ConfigError("unknown prior kind '" + kind + "'");
  }
  return spec;
}

}  // namespace

json to_json(const ExperimentConfig& cfg) {
  json j;
  j["schema_version"] = ExperimentConfig::kSchemaVersion;
  if (cfg.hr_path) j["hr_path"] = cfg.hr_path->string();
  if (cfg.lr_path) j["lr_path"] = cfg.lr_path->string();
  j["output_dir"] = cfg.output_dir.string();
  j["factor"] = cfg.factor;
  j["mu"] = cfg.mu;
  j["solver"] = {{"rho", cfg.solver.rho},
                 {"max_iters", cfg.solver.max_iters},
                 {"tol", cfg.solver.tol},
                 {"sigma_n", cfg.solver.sigma_n},
                 {"parallel_agents", cfg.solver.parallel_agents}};
  j["sigma_w"] = cfg.sigma_w;
  if (cfg.sigma_lambda) j["sigma_lambda"] = *cfg.sigma_lambda;
  j["forward"] = to_string(cfg.forward_kind);
  j["prior"] = prior_to_json(cfg.prior);
  j["noise_seed"] = cfg.noise_seed;
  if (cfg.hr_train_shape) j["hr_train_shape"] = {cfg.hr_train_shape->height, cfg.hr_train_shape->width};
  return j;
}

ExperimentConfig config_from_json(const json& doc) {
  reject_unknown(doc,
                 {"schema_version", "hr_path", "lr_path", "output_dir", "factor", "mu", "solver", "sigma_w",
                  "sigma_lambda", "forward", "prior", "noise_seed", "hr_train_shape"},
                 "config");
  if (!doc.contains("schema_version")) throw ConfigError("config is missing schema_version");
  if (doc.at("schema_version") != ExperimentConfig::kSchemaVersion)
    throw ConfigError("unsupported schema_version " + doc.at("schema_version").dump() + " (expected " +
                      std::to_string(ExperimentConfig::kSchemaVersion) + ")");
  ExperimentConfig cfg;
  std::string s;
  if (doc.contains("hr_path")) cfg.hr_path = doc.at("hr_path").get<std::string>();
  if (doc.contains("lr_path")) cfg.lr_path = doc.at("lr_path").get<std::string>();
  if (doc.contains("output_dir")) cfg.output_dir = doc.at("output_dir").get<std::string>();
  read_opt(doc, "factor", cfg.factor);
  read_opt(doc, "mu", cfg.mu);
  if (doc.contains("solver")) {
    const json& sj = doc.at("solver");
    reject_unknown(sj, {"rho", "max_iters", "tol", "sigma_n", "parallel_agents"}, "solver");
    read_opt(sj, "rho", cfg.solver.rho);
    read_opt(sj, "max_iters", cfg.solver.max_iters);
    read_opt(sj, "tol", cfg.solver.tol);
    read_opt(sj, "sigma_n", cfg.solver.sigma_n);
    read_opt(sj, "parallel_agents", cfg.solver.parallel_agents);
  }
  read_opt(doc, "sigma_w", cfg.sigma_w);
  if (doc.contains("sigma_lambda") && !doc.at("sigma_lambda").is_null()) {
    double sl = 0;
    read_opt(doc, "sigma_lambda", sl);
    cfg.sigma_lambda = sl;
  }
  if (doc.contains("forward")) {
    read_opt(doc, "forward", s);
    cfg.forward_kind = parse_forward(s);
  }
  if (doc.contains("prior")) cfg.prior = prior_from_json(doc.at("prior"));
  cfg.prior.sigma_n = cfg.solver.sigma_n;
  read_opt(doc, "noise_seed", cfg.noise_seed);
  if (doc.contains("hr_train_shape")) {
    std::vector<long> dims;
    read_opt(doc, "hr_train_shape", dims);
    if (dims.size() != 2) throw ConfigError("hr_train_shape must be [height, width]");
    cfg.hr_train_shape = PixelDims{dims[0], dims[1]};
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return config_from_json(doc);
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ImageIoError("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace

namespace {

template <typename Fn>
auto in_stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, std::current_exception(), e.what());
  }
}

}  // namespace

RunRecord run_reconstruction(const ExperimentConfig& cfg, const std::optional<Image>& hr,
                             const std::optional<Image>& lr) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentConfig config = cfg;
  config.prior.sigma_n = config.solver.sigma_n;
  if (!config.hr_path && !config.lr_path) {
    // in-memory inputs stand in for the paths
    if (hr) config.hr_path = "<memory>";
    else if (lr) config.lr_path = "<memory>";
  }
  config.validate();
  if (!hr && !lr) throw ConfigError("run_reconstruction needs an HR or an LR image");

  RunRecord rec;
  rec.config_snapshot = to_json(config);
  const int L = config.factor;
  rec.measurement = in_stage("simulate", [&] {
    if (hr) {
      if (!all_finite(*hr)) throw ConfigError("HR image has non-finite values");
      return simulate_lr(*hr, L, config.sigma_w, config.noise_seed);
    }
    if (!all_finite(*lr)) throw ConfigError("LR image has non-finite values");
    return Image(*lr);
  });
  rec.initial = in_stage("initialize", [&] { return initialize(rec.measurement, L); });

  const std::vector<Agent> agents = in_stage("agents", [&] {
    const NoiseParams noise = config.noise();
    std::vector<Agent> out;
    out.push_back(config.forward_kind == ForwardKind::Rap ? make_rap_agent(rec.measurement, L, noise)
                                                          : make_data_fidelity_agent(rec.measurement, L, noise));
    out.push_back(make_prior_agent(config.prior));
    return out;
  });
  const SolveReport report = in_stage(
      "solve", [&] { return mace_solve(agents, rec.initial, two_agent_weights(config.mu), config.solver); });

  rec.reconstruction = report.final_image;
  rec.convergence_trace = report.convergence_trace;
  rec.converged = report.converged;
  rec.iterations = report.iterations_run;

  std::optional<FrcCurve> curve;
  in_stage("metrics", [&] {
    rec.metrics["iterations"] = report.iterations_run;
    rec.metrics["converged"] = report.converged ? 1.0 : 0.0;
    rec.metrics["final_convergence_error"] = report.convergence_trace.back();
    const Image residual = block_average(rec.reconstruction, L) - rec.measurement;
    rec.metrics["lr_residual_rms"] = std::sqrt(residual.square().mean());
    rec.metrics["lr_relative_residual"] = residual.matrix().norm() / rec.measurement.matrix().norm();
    if (hr) {
      rec.metrics["psnr"] = psnr(*hr, rec.reconstruction);
      rec.metrics["psnr_bicubic"] = psnr(*hr, rec.initial);
      if (hr->rows() == hr->cols() && hr->rows() >= 4) {
        curve = frc(*hr, rec.reconstruction);
        // absent when the curve stays above threshold up to Nyquist
        if (curve->crossing_frequency) rec.metrics["frc_crossing"] = *curve->crossing_frequency;
        const FrcCurve bic = frc(*hr, rec.initial);
        if (bic.crossing_frequency) rec.metrics["frc_crossing_bicubic"] = *bic.crossing_frequency;
      }
    }
    if (config.hr_train_shape) {
      const Shape lr_shape = shape_of(rec.measurement), out_shape = shape_of(rec.reconstruction);
      rec.metrics["speedup"] = speedup({PixelDims{long(lr_shape.height), long(lr_shape.width)},
                                        *config.hr_train_shape,
                                        PixelDims{long(out_shape.height), long(out_shape.width)}});
    }
  });

  in_stage("write", [&] {
    const auto& dir = config.output_dir;
    std::filesystem::create_directories(dir);
    auto artifact = [&](const std::string& key, const std::string& file) {
      rec.artifacts[key] = dir / file;
      return dir / file;
    };
    save_image(artifact("reconstruction", "reconstruction.png"), rec.reconstruction);
    save_image(artifact("initial", "initial.png"), rec.initial);
    {
      std::ostringstream out;
      out.precision(17);
      out << "iteration,convergence_error\n";
      for (std::size_t k = 0; k < rec.convergence_trace.size(); ++k)
        out << k << ',' << rec.convergence_trace[k] << '\n';
      write_text(artifact("trace", "trace.csv"), out.str());
    }
    if (curve) {
      std::ostringstream out;
      write_frc_csv(out, *curve);
      write_text(artifact("frc", "frc.csv"), out.str());
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rec.metrics["wall_seconds"] = rec.wall_seconds;
    {
      std::ostringstream out;
      out.precision(17);
      out << "name,value\n";
      for (const auto& [name, value] : rec.metrics) out << name << ',' << value << '\n';
      write_text(artifact("metrics", "metrics.csv"), out.str());
    }
    write_text(artifact("config", "config.json"), rec.config_snapshot.dump(2) + "\n");
  });
  return rec;
}

RunRecord run_reconstruction(const ExperimentConfig& cfg) {
  cfg.validate();
  std::optional<Image> hr, lr;
  in_stage("load", [&] {
    if (cfg.hr_path) hr = load_image(*cfg.hr_path);
    else lr = load_image(*cfg.lr_path);
  });
  return run_reconstruction(cfg, hr, lr);
}

std::vector<RunRecord> run_batch(const std::vector<ExperimentConfig>& configs, unsigned workers) {
  std::set<std::filesystem::path> dirs;
  for (const auto& c : configs) {
    c.validate();
    if (!dirs.insert(std::filesystem::weakly_canonical(c.output_dir)).second)
      throw ConfigError("batch configs share output_dir '" + c.output_dir.string() + "'");
  }
  workers = std::max(1u, workers);
  std::vector<RunRecord> out(configs.size());
  for (std::size_t begin = 0; begin < configs.size(); begin += workers) {
    const std::size_t end = std::min(configs.size(), begin + workers);
    std::vector<std::future<RunRecord>> wave;
    for (std::size_t i = begin; i < end; ++i)
      wave.push_back(std::async(std::launch::async, [&, i] { return run_reconstruction(configs[i]); }));
    for (std::size_t i = begin; i < end; ++i) out[i] = wave[i - begin].get();
  }
  return out;
}

}  // namespace mdf
