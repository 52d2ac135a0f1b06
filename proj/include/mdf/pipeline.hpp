#pragma once

// Operational shell: image files, synthetic data, experiment configuration and runs.

#include "mdf/agents.hpp"
#include "mdf/core.hpp"
#include "mdf/mace.hpp"
#include "mdf/metrics.hpp"

#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace mdf {

class ImageIoError : public Error {
 public:
  using Error::Error;
};
class UnsupportedFormatError : public ImageIoError {
 public:
  using ImageIoError::ImageIoError;
};
class CorruptFileError : public ImageIoError {
 public:
  using ImageIoError::ImageIoError;
};

// PNG (8/16-bit, gray/gray+alpha/RGB/RGBA) or binary PGM. Multi-channel images are reduced
// by averaging the colour channels; alpha is ignored. Values are scaled to [0, 1].
Image load_image(const std::filesystem::path& path);

// 16-bit grayscale PNG after clipping to [0, 1].
void save_image(const std::filesystem::path& path, const Image& img);

// block_average(hr) + N(0, sigma_w^2) noise drawn from a seeded generator.
Image simulate_lr(const Image& hr, int factor, double sigma_w, std::uint64_t seed);

enum class PhantomKind { Rods, Crystals, Texture };
PhantomKind parse_phantom_kind(const std::string& name);
std::string to_string(PhantomKind k);

// Square size x size phantom in [0, 1]; size must be a positive multiple of 8.
Image make_phantom(PhantomKind kind, int size, std::uint64_t seed);

enum class ForwardKind { Standard, Rap };

struct ExperimentConfig {
  static constexpr int kSchemaVersion = 1;

  std::optional<std::filesystem::path> hr_path;  // paired mode: LR is simulated from it
  std::optional<std::filesystem::path> lr_path;  // measured mode
  std::filesystem::path output_dir = "mdf_out";
  int factor = 4;
  double mu = 0.8;  // forward-agent weight; the prior gets 1 - mu
  MaceConfig solver;
  double sigma_w = 0.01;  // 0 allowed: noiseless simulation with the balanced gain of 1/2
  std::optional<double> sigma_lambda;  // defaults to sigma_w * L
  ForwardKind forward_kind = ForwardKind::Rap;
  DenoiserSpec prior;
  std::uint64_t noise_seed = 0;
  std::optional<PixelDims> hr_train_shape;  // enables the speed-up metric

  void validate() const;
  NoiseParams noise() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
// Missing keys keep their defaults; unknown keys and a wrong schema_version are rejected.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

// A failure inside run_reconstruction, tagged with the stage it happened in
// (load, simulate, initialize, agents, solve, metrics, write). cause() is the original error.
class StageError : public Error {
 public:
  StageError(std::string stage, std::exception_ptr cause, const std::string& what)
      : Error("stage '" + stage + "': " + what), stage_(std::move(stage)), cause_(std::move(cause)) {}
  const std::string& stage() const { return stage_; }
  std::exception_ptr cause() const { return cause_; }

 private:
  std::string stage_;
  std::exception_ptr cause_;
};

struct RunRecord {
  nlohmann::json config_snapshot;
  std::map<std::string, double> metrics;
  std::vector<double> convergence_trace;
  bool converged = false;
  int iterations = 0;
  double wall_seconds = 0.0;
  std::map<std::string, std::filesystem::path> artifacts;
  Image reconstruction;
  Image initial;  // bicubic initialization
  Image measurement;
};

// Paired mode (hr_path set): simulate LR, reconstruct, report PSNR and FRC against HR.
// Measured mode (lr_path only): reconstruct without reference metrics.
// Writes reconstruction.png, initial.png, trace.csv, metrics.csv and config.json.
RunRecord run_reconstruction(const ExperimentConfig& cfg);

// Same as above with in-memory inputs (hr may be empty in measured mode).
RunRecord run_reconstruction(const ExperimentConfig& cfg, const std::optional<Image>& hr,
                             const std::optional<Image>& lr);

// Runs independent experiments concurrently; each must have its own output_dir.
std::vector<RunRecord> run_batch(const std::vector<ExperimentConfig>& configs, unsigned workers);

}  // namespace mdf
