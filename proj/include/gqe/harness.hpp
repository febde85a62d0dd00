#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gqe/fermion.hpp"
#include "gqe/model.hpp"
#include "gqe/pool.hpp"
#include "gqe/trainer.hpp"

namespace gqe::harness {

/// Full run plan. Defaults follow the reference settings: M=10 circuits per
/// iteration, 1e5 shots, 100 iterations, lr 5e-6, weight decay 0.01,
/// 30 updates per batch, repetition penalty 1.2, d_max 2000, d_latent 12.
struct RunConfig {
    // system source: FCIDUMP path or a "sites,t,u" Hubbard spec
    std::string fcidump;
    std::string hubbard;
    int electrons_override = -1;
    int ms2_override = -1000;  // sentinel: keep the system's value

    std::vector<double> angle_grid;  // default set in apply_defaults()

    std::string ffn_variant = "hqkan";
    int d_model = 128;
    int n_heads = 4;
    int n_layers = 4;
    int d_latent = 12;
    int qkan_layers = 1;
    int daruan_depth = 3;

    int batch_size = 10;
    int seq_len = 20;
    int iterations = 100;
    int updates_per_batch = 30;
    double learning_rate = 5e-6;
    double weight_decay = 0.01;
    double clip_epsilon = 0.2;
    double repetition_penalty = 1.2;
    bool ratio_uses_penalized = true;

    std::uint64_t d_max = 2000;
    std::uint64_t n_shots = 100000;
    bool exact_sampling = false;
    bool symmetry_completion = true;

    int n_seeds = 1;
    std::uint64_t seed_base = 0;
    std::string out_dir;
    bool force = false;

    void apply_defaults();
    std::vector<std::string> validate() const;

    /// Resolved-config serialization; parse(to_toml()) is the identity.
    std::string to_toml() const;
    void apply_toml_text(const std::string& text, const std::string& source_name);
    void apply_toml_file(const std::string& path);
};

struct LoadedSystem {
    MolecularIntegrals ints;
    Sector sector;
    Vocabulary vocab;
    Determinant reference;
    double hf_energy = 0.0;
    double casci_energy = 0.0;
};

LoadedSystem load_system(const RunConfig& config);
ModelConfig model_config_from(const RunConfig& config, int vocab_size);
TrainerConfig trainer_config_from(const RunConfig& config, std::uint64_t seed);

/// The documented large configuration used for the parameter-reduction report.
ModelConfig paper_scale_config(FfnVariant variant, int vocab_size = 301);

struct ShotsRow {
    double shots = 0.0;  // 0 = exact mode
    double mean_abs_error = 0.0;
    double std_abs_error = 0.0;
};

std::vector<ShotsRow> sweep_shots(const LoadedSystem& system, const std::vector<int>& tokens,
                                  const std::vector<std::uint64_t>& shot_list, int repeats,
                                  std::uint64_t d_max, bool symmetry_completion,
                                  std::uint64_t seed);

struct DmaxRow {
    std::uint64_t d_max = 0;
    double abs_error = 0.0;
    std::size_t dimension = 0;
};

/// One measurement record, re-truncated per cap (no resampling).
std::vector<DmaxRow> sweep_dmax(const LoadedSystem& system, const std::vector<int>& tokens,
                                const std::vector<std::uint64_t>& dmax_list,
                                std::uint64_t n_shots, bool symmetry_completion,
                                std::uint64_t seed);

int run_cli(int argc, char** argv);

}  // namespace gqe::harness
