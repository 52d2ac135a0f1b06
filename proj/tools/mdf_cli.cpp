// mdf: command-line front end for reconstruction, simulation, metrics and theory checks.

#include "mdf/linops.hpp"
#include "mdf/pipeline.hpp"
#include "mdf/theory.hpp"

#include <fstream>
#include <iostream>

#include "CLI11.hpp"

namespace {

using nlohmann::json;

struct ReconstructOptions {
  std::vector<std::string> configs;
  std::optional<std::string> hr, lr, out, forward, prior, endpoint;
  std::optional<int> factor, max_iters, tv_iters, nlm_patch, nlm_search;
  std::optional<double> mu, rho, tol, sigma_w, sigma_lambda, sigma_n, tv_weight, gaussian_sigma, nlm_h;
  std::optional<std::uint64_t> seed;
  bool allow_unconverged = false;
  unsigned workers = 1;
};

// Flags override keys of the config document before it is validated.
json apply_overrides(json doc, const ReconstructOptions& o) {
  if (o.hr) {
    doc["hr_path"] = *o.hr;
    doc.erase("lr_path");
  }
  if (o.lr) {
    doc["lr_path"] = *o.lr;
    doc.erase("hr_path");
  }
  if (o.out) doc["output_dir"] = *o.out;
  if (o.factor) doc["factor"] = *o.factor;
  if (o.mu) doc["mu"] = *o.mu;
  if (o.rho) doc["solver"]["rho"] = *o.rho;
  if (o.tol) doc["solver"]["tol"] = *o.tol;
  if (o.max_iters) doc["solver"]["max_iters"] = *o.max_iters;
  if (o.sigma_n) doc["solver"]["sigma_n"] = *o.sigma_n;
  if (o.sigma_w) doc["sigma_w"] = *o.sigma_w;
  if (o.sigma_lambda) doc["sigma_lambda"] = *o.sigma_lambda;
  if (o.forward) doc["forward"] = *o.forward;
  if (o.seed) doc["noise_seed"] = *o.seed;
  if (o.prior && (!doc.contains("prior") || doc["prior"].value("kind", "") != *o.prior))
    doc["prior"] = json{{"kind", *o.prior}};
  auto prior_key = [&](const char* key, const auto& v) {
    if (v) doc["prior"][key] = *v;
  };
  prior_key("weight", o.tv_weight);
  prior_key("inner_iters", o.tv_iters);
  prior_key("sigma_blur", o.gaussian_sigma);
  prior_key("patch_radius", o.nlm_patch);
  prior_key("search_radius", o.nlm_search);
  prior_key("bandwidth_h", o.nlm_h);
  prior_key("endpoint", o.endpoint);
  return doc;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw mdf::ConfigError("cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw mdf::ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

int run_reconstruct(const ReconstructOptions& o) {
  std::vector<mdf::ExperimentConfig> configs;
  if (o.configs.empty()) {
    json doc = mdf::to_json(mdf::ExperimentConfig{});
    configs.push_back(mdf::config_from_json(apply_overrides(doc, o)));
  }
  for (const auto& path : o.configs) configs.push_back(mdf::config_from_json(apply_overrides(read_json(path), o)));

  const auto records = configs.size() == 1 ? std::vector<mdf::RunRecord>{mdf::run_reconstruction(configs.front())}
                                           : mdf::run_batch(configs, o.workers);
  bool all_converged = true;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    std::cout << configs[i].output_dir.string() << ": " << (r.converged ? "converged" : "not converged") << " after "
              << r.iterations << " iterations, error " << r.convergence_trace.back();
    if (r.metrics.count("psnr"))
      std::cout << ", PSNR " << r.metrics.at("psnr") << " dB (bicubic " << r.metrics.at("psnr_bicubic") << " dB)";
    std::cout << '\n';
    all_converged = all_converged && r.converged;
  }
  return all_converged || o.allow_unconverged ? 0 : 2;
}

void write_metrics(std::ostream& out, const std::vector<std::pair<std::string, double>>& rows) {
  out.precision(17);
  out << "name,value\n";
  for (const auto& [k, v] : rows) out << k << ',' << v << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent consensus equilibrium super-resolution"};
  app.require_subcommand(1);

  ReconstructOptions ro;
  auto* rec = app.add_subcommand("reconstruct", "Run reconstructions from config files and/or flags");
  rec->add_option("configs", ro.configs, "JSON config files (several run as a batch)");
  rec->add_option("--hr", ro.hr, "HR reference image (paired mode)");
  rec->add_option("--lr", ro.lr, "Measured LR image");
  rec->add_option("--out", ro.out, "Output directory");
  rec->add_option("--factor", ro.factor, "Upsampling factor L");
  rec->add_option("--mu", ro.mu, "Forward-agent weight in (0,1)");
  rec->add_option("--rho", ro.rho, "Mann relaxation");
  rec->add_option("--tol", ro.tol, "Convergence tolerance");
  rec->add_option("--max-iters", ro.max_iters, "Iteration cap");
  rec->add_option("--sigma-w", ro.sigma_w, "Measurement noise std");
  rec->add_option("--sigma-lambda", ro.sigma_lambda, "Proximal coupling std");
  rec->add_option("--sigma-n", ro.sigma_n, "Prior noise level used to scale the convergence error");
  rec->add_option("--forward", ro.forward, "rap or standard")->check(CLI::IsMember({"rap", "standard"}));
  rec->add_option("--prior", ro.prior, "tv, nlm, gaussian, external or identity")
      ->check(CLI::IsMember({"tv", "nlm", "gaussian", "external", "identity"}));
  rec->add_option("--tv-weight", ro.tv_weight);
  rec->add_option("--tv-iters", ro.tv_iters);
  rec->add_option("--gaussian-sigma", ro.gaussian_sigma);
  rec->add_option("--nlm-patch", ro.nlm_patch);
  rec->add_option("--nlm-search", ro.nlm_search);
  rec->add_option("--nlm-h", ro.nlm_h);
  rec->add_option("--endpoint", ro.endpoint, "External denoiser: stdio:<cmd> or tcp:<host>:<port>");
  rec->add_option("--seed", ro.seed, "Noise seed");
  rec->add_option("--workers", ro.workers, "Concurrent runs in batch mode");
  rec->add_flag("--allow-unconverged", ro.allow_unconverged, "Exit 0 even if the solve did not converge");

  std::string sim_in, sim_out;
  int sim_factor = 4;
  double sim_sigma = 0.01;
  std::uint64_t sim_seed = 0;
  auto* sim = app.add_subcommand("simulate", "Simulate a noisy LR image from an HR image");
  sim->add_option("input", sim_in)->required();
  sim->add_option("output", sim_out)->required();
  sim->add_option("--factor", sim_factor);
  sim->add_option("--sigma-w", sim_sigma);
  sim->add_option("--seed", sim_seed);

  std::string m_ref, m_test, m_frc_csv, m_out;
  double m_peak = 1.0;
  std::vector<long> m_speedup;
  auto* met = app.add_subcommand("metrics", "PSNR and FRC between images, or the speed-up ratio");
  met->add_option("--reference", m_ref, "Reference image");
  met->add_option("--test", m_test, "Test image");
  met->add_option("--peak", m_peak);
  met->add_option("--frc-csv", m_frc_csv, "Write the FRC curve here");
  met->add_option("--speedup", m_speedup, "LR_H LR_W TRAIN_H TRAIN_W RECON_H RECON_W")->expected(6);
  met->add_option("--out", m_out, "Metrics CSV (default stdout)");

  std::string v_out;
  std::uint64_t v_seed = 1;
  auto* ver = app.add_subcommand("verify-theory", "Run the numerical theory checks and write a CSV report");
  ver->add_option("--out", v_out, "Report CSV (default stdout)");
  ver->add_option("--seed", v_seed);

  std::string p_kind = "crystals", p_out;
  int p_size = 128;
  std::uint64_t p_seed = 0;
  auto* ph = app.add_subcommand("phantom", "Generate a synthetic test image");
  ph->add_option("--kind", p_kind)->check(CLI::IsMember({"rods", "crystals", "texture"}));
  ph->add_option("--size", p_size);
  ph->add_option("--seed", p_seed);
  ph->add_option("output", p_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*rec) return run_reconstruct(ro);
    if (*sim) {
      mdf::save_image(sim_out, mdf::simulate_lr(mdf::load_image(sim_in), sim_factor, sim_sigma, sim_seed));
      return 0;
    }
    if (*met) {
      std::vector<std::pair<std::string, double>> rows;
      if (!m_ref.empty() || !m_test.empty()) {
        if (m_ref.empty() || m_test.empty()) throw mdf::ConfigError("metrics needs both --reference and --test");
        const mdf::Image a = mdf::load_image(m_ref), b = mdf::load_image(m_test);
        rows.emplace_back("psnr", mdf::psnr(a, b, m_peak));
        if (a.rows() == a.cols()) {
          const mdf::FrcCurve curve = mdf::frc(a, b);
          if (curve.crossing_frequency) {
            rows.emplace_back("frc_crossing", *curve.crossing_frequency);
          }
          if (!m_frc_csv.empty()) {
            std::ofstream f(m_frc_csv);
            mdf::write_frc_csv(f, curve);
          }
        }
      }
      if (!m_speedup.empty()) {
        rows.emplace_back("speedup", mdf::speedup({{m_speedup[0], m_speedup[1]},
                                                   {m_speedup[2], m_speedup[3]},
                                                   {m_speedup[4], m_speedup[5]}}));
      }
      if (rows.empty()) throw mdf::ConfigError("metrics: nothing to compute");
      if (m_out.empty()) {
        write_metrics(std::cout, rows);
      } else {
        std::ofstream f(m_out);
        write_metrics(f, rows);
      }
      return 0;
    }
    if (*ver) {
      const auto records = mdf::theory::run_verification_suite(v_seed);
      std::ofstream file;
      if (!v_out.empty()) file.open(v_out);
      std::ostream& out = v_out.empty() ? std::cout : file;
      out.precision(17);
      out << "check,seed,parameter,value,threshold,passed\n";
      bool all = true;
      for (const auto& r : records) {
        out << r.check << ',' << r.seed << ',' << r.parameter << ',' << r.value << ',' << r.threshold << ','
            << (r.passed ? 1 : 0) << '\n';
        all = all && r.passed;
      }
      return all ? 0 : 1;
    }
    if (*ph) {
      mdf::save_image(p_out, mdf::make_phantom(mdf::parse_phantom_kind(p_kind), p_size, p_seed));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
