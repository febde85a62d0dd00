#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gqe/autodiff.hpp"
#include "gqe/fermion.hpp"
#include "gqe/model.hpp"
#include "gqe/pool.hpp"
#include "gqe/qsci.hpp"

namespace gqe {

struct QsciConfig {
    std::size_t d_max = 2000;
    bool symmetry_completion = true;
    bool exact_sampling = false;
    std::uint64_t n_shots = 100000;
    double p_floor = 1e-12;
};

struct TrainerConfig {
    int batch_size = 10;        // circuits sampled per iteration
    int seq_len = 20;
    int iterations = 100;
    int updates_per_batch = 30;
    double learning_rate = 5e-6;
    double weight_decay = 0.01;
    double clip_epsilon = 0.2;
    double repetition_penalty = 1.2;
    bool ratio_uses_penalized = true;
    std::uint64_t seed = 0;
    QsciConfig qsci;
    int checkpoint_every = 25;
    std::string checkpoint_path;  // empty disables checkpointing
};

struct IterationMetrics {
    int iter = 0;
    double best_energy = 0.0;
    double batch_min = 0.0;
    double batch_mean = 0.0;
    double loss = 0.0;
    double mean_ratio = 1.0;
    double grad_norm = 0.0;
    double seconds = 0.0;
};

/// Decoupled weight decay with bias correction; decay skips parameters
/// registered with decay=false (biases, norm gains, DARUAN angles).
class AdamW {
  public:
    AdamW(ad::ParameterSet& params, double lr, double weight_decay, double beta1 = 0.9,
          double beta2 = 0.999, double eps = 1e-8);
    void step();
    void zero_grad() { params_->zero_grad(); }
    double gradient_norm() const;

  private:
    ad::ParameterSet* params_;
    double lr_, wd_, beta1_, beta2_, eps_;
    long step_count_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

/// rho = exp(new - old); loss = -M^-1 L^-1 sum min(rho*A, clip(rho,1-e,1+e)*A).
/// old_log_probs and advantages are plain data (detached by construction).
ad::Tensor grpo_loss(const ad::Tensor& new_log_probs,
                     const std::vector<double>& old_log_probs,
                     const std::vector<double>& advantages, double clip_epsilon);

/// Standardized advantages: (r - mean) / population std; all-zero when the
/// spread is below the degeneracy guard.
std::vector<double> normalize_advantages(const std::vector<double>& rewards,
                                         double sigma_guard = 1e-12);

struct ScoredSequence {
    double reward = 0.0;           // -E_QSCI
    double energy = 0.0;           // E_QSCI
    std::size_t subspace_dim = 0;
    bool empty_sector_fallback = false;
    bool hf_in_subspace = false;
};

/// Compile tokens, evolve the reference state, measure, select, solve.
/// Falls back to the reference determinant when sampling misses the sector.
ScoredSequence score_sequence(const std::vector<int>& tokens, const MolecularIntegrals& ints,
                              const Vocabulary& vocab, const Determinant& reference,
                              Sector sector, const QsciConfig& cfg, std::uint64_t shot_seed);

struct TrainResult {
    std::vector<IterationMetrics> metrics;
    std::vector<int> best_tokens;
    double best_energy = 0.0;
};

class Trainer {
  public:
    using MetricsCallback = std::function<void(const IterationMetrics&)>;

    Trainer(const MolecularIntegrals& ints, const Vocabulary& vocab, PolicyModel& model,
            TrainerConfig config);

    TrainResult run(const MetricsCallback& on_iteration = {});

    const Determinant& reference() const { return reference_; }
    double hf_energy() const { return hf_energy_; }
    double casci_energy() const { return casci_energy_; }

  private:
    const MolecularIntegrals& ints_;
    const Vocabulary& vocab_;
    PolicyModel& model_;
    TrainerConfig config_;
    Sector sector_;
    Determinant reference_;
    double hf_energy_ = 0.0;
    double casci_energy_ = 0.0;
};

/// Lowest-index-filled reference determinant for the integral's sector.
Determinant hartree_fock_reference(const MolecularIntegrals& ints);

}  // namespace gqe
