#include "gqe/trainer.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "gqe/statevector.hpp"

namespace gqe {

AdamW::AdamW(ad::ParameterSet& params, double lr, double weight_decay, double beta1,
             double beta2, double eps)
    : params_(&params), lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params_->all()) {
        m_.emplace_back(p.tensor.size(), 0.0);
        v_.emplace_back(p.tensor.size(), 0.0);
    }
}

void AdamW::step() {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1_, step_count_);
    const double bc2 = 1.0 - std::pow(beta2_, step_count_);
    auto& all = params_->all();
    for (std::size_t k = 0; k < all.size(); ++k) {
        auto& tensor = all[k].tensor;
        auto& values = tensor.values();
        const auto& grad = tensor.grad();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double g = grad[i];
            m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * g;
            v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * g * g;
            const double mhat = m_[k][i] / bc1;
            const double vhat = v_[k][i] / bc2;
            if (all[k].decay) values[i] *= 1.0 - lr_ * wd_;
            values[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

double AdamW::gradient_norm() const {
    double acc = 0.0;
    for (auto& p : params_->all()) {
        const auto& node = p.tensor.node();
        if (node->grad.size() != node->values.size()) continue;
        for (double g : node->grad) acc += g * g;
    }
    return std::sqrt(acc);
}

std::vector<double> normalize_advantages(const std::vector<double>& rewards,
                                         double sigma_guard) {
    const double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double sigma = std::sqrt(var / n);  // population std
    std::vector<double> out(rewards.size(), 0.0);
    if (sigma < sigma_guard) return out;
    for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / sigma;
    return out;
}

ad::Tensor grpo_loss(const ad::Tensor& new_log_probs,
                     const std::vector<double>& old_log_probs,
                     const std::vector<double>& advantages, double clip_epsilon) {
    const std::size_t m = new_log_probs.rows(), l = new_log_probs.cols();
    if (old_log_probs.size() != m * l || advantages.size() != m)
        throw std::invalid_argument("grpo_loss: shape mismatch");
    ad::Tensor old_t = ad::Tensor::from_values({m, l}, old_log_probs, false);
    ad::Tensor adv_t = ad::Tensor::from_values({m}, advantages, false);
    ad::Tensor ratio = ad::exp_values(ad::sub(new_log_probs, old_t));
    ad::Tensor unclipped = ad::mul_colwise(ratio, adv_t);
    ad::Tensor clipped =
        ad::mul_colwise(ad::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon), adv_t);
    return ad::scalar_mul(ad::reduce_mean_all(ad::minimum(unclipped, clipped)), -1.0);
}

Determinant hartree_fock_reference(const MolecularIntegrals& ints) {
    Determinant d;
    d.n_spin_orbitals = ints.n_spin_orbitals();
    for (unsigned p = 0; p < ints.n_alpha(); ++p) d.bits |= std::uint64_t(1) << (2 * p);
    for (unsigned p = 0; p < ints.n_beta(); ++p) d.bits |= std::uint64_t(1) << (2 * p + 1);
    return d;
}

ScoredSequence score_sequence(const std::vector<int>& tokens, const MolecularIntegrals& ints,
                              const Vocabulary& vocab, const Determinant& reference,
                              Sector sector, const QsciConfig& cfg, std::uint64_t shot_seed) {
    std::vector<unsigned> occupied;
    for (unsigned q = 0; q < reference.n_spin_orbitals; ++q)
        if (reference.occupied(q)) occupied.push_back(q);
    Statevector state = prepare_reference(reference.n_spin_orbitals, occupied);
    for (const auto& gate : compile_sequence(vocab, tokens))
        apply_pauli_rotation(state, gate.paulis, gate.angle);

    MeasurementRecord record = cfg.exact_sampling
                                   ? exact_distribution(state, cfg.p_floor)
                                   : sample(state, cfg.n_shots, shot_seed);

    ScoredSequence scored;
    SubspaceSelection selection;
    try {
        selection = select_subspace(record, cfg.d_max, sector, reference.n_spin_orbitals,
                                    cfg.symmetry_completion);
    } catch (const EmptySubspaceError&) {
        selection.determinants = {reference};
        selection.d_max = cfg.d_max;
        scored.empty_sector_fallback = true;
    }
    for (const auto& det : selection.determinants)
        if (det.bits == reference.bits) scored.hf_in_subspace = true;
    auto result = solve_subspace(ints, selection);
    scored.energy = result.energy;
    scored.reward = reward(result);
    scored.subspace_dim = result.dimension;
    return scored;
}

Trainer::Trainer(const MolecularIntegrals& ints, const Vocabulary& vocab, PolicyModel& model,
                 TrainerConfig config)
    : ints_(ints), vocab_(vocab), model_(model), config_(config) {
    sector_ = Sector{ints.n_electrons, ints.ms2};
    reference_ = hartree_fock_reference(ints);
    hf_energy_ = slater_condon_element(ints_, reference_, reference_);
    casci_energy_ = casci_reference(ints_, sector_);
}

TrainResult Trainer::run(const MetricsCallback& on_iteration) {
    TrainResult result;
    result.best_energy = hf_energy_;

    AdamW optimizer(model_.parameters(), config_.learning_rate, config_.weight_decay);
    const int m = config_.batch_size, l = config_.seq_len;

    for (int iter = 0; iter < config_.iterations; ++iter) {
        const auto t0 = std::chrono::steady_clock::now();

        // Snapshot policy: sample and keep its log-probs as the ratio denominator.
        const std::uint64_t iter_seed = config_.seed * 0x9e3779b97f4a7c15ull + iter + 1;
        auto sequences =
            model_.sample_sequences(m, l, config_.repetition_penalty, iter_seed);

        std::vector<double> old_log_probs;
        old_log_probs.reserve(m * l);
        if (config_.ratio_uses_penalized) {
            for (const auto& seq : sequences)
                old_log_probs.insert(old_log_probs.end(), seq.log_probs.begin(),
                                     seq.log_probs.end());
        } else {
            ad::NoGradGuard no_grad;
            for (const auto& seq : sequences) {
                auto raw = model_.sequence_log_probs(seq.tokens, 1.0);
                old_log_probs.insert(old_log_probs.end(), raw.values().begin(),
                                     raw.values().end());
            }
        }

        std::vector<double> rewards(m), energies(m);
        double batch_min = 1e300, batch_mean = 0.0;
        for (int s = 0; s < m; ++s) {
            auto scored = score_sequence(sequences[s].tokens, ints_, vocab_, reference_,
                                         sector_, config_.qsci,
                                         iter_seed ^ (0x5151u + 7919ull * s));
            rewards[s] = scored.reward;
            energies[s] = scored.energy;
            batch_mean += scored.energy / m;
            if (scored.energy < batch_min) batch_min = scored.energy;
            if (scored.energy < result.best_energy) {
                result.best_energy = scored.energy;
                result.best_tokens = sequences[s].tokens;
            }
            // variational sandwich, asserted on every scored circuit
            if (scored.energy < casci_energy_ - 1e-9)
                throw std::runtime_error("variational bound violated: E < E_CASCI");
            if (scored.hf_in_subspace && scored.energy > hf_energy_ + 1e-9)
                throw std::runtime_error("variational bound violated: E > E_HF");
        }

        auto advantages = normalize_advantages(rewards);
        bool degenerate = true;
        for (double a : advantages)
            if (a != 0.0) degenerate = false;

        double loss_acc = 0.0, ratio_acc = 0.0, grad_norm_acc = 0.0;
        if (!degenerate) {
            const double penalty_for_ratio =
                config_.ratio_uses_penalized ? config_.repetition_penalty : 1.0;
            for (int update = 0; update < config_.updates_per_batch; ++update) {
                std::vector<ad::Tensor> rows;
                rows.reserve(m);
                for (const auto& seq : sequences)
                    rows.push_back(model_.sequence_log_probs(seq.tokens, penalty_for_ratio));
                ad::Tensor new_log_probs = ad::stack_rows(rows);

                double mean_ratio = 0.0;
                for (std::size_t i = 0; i < new_log_probs.size(); ++i)
                    mean_ratio += std::exp(new_log_probs.values()[i] - old_log_probs[i]);
                ratio_acc += mean_ratio / static_cast<double>(m * l);

                ad::Tensor loss =
                    grpo_loss(new_log_probs, old_log_probs, advantages, config_.clip_epsilon);
                if (!std::isfinite(loss.item())) {
                    std::ostringstream dump;
                    dump << "non-finite GRPO loss at iteration " << iter << ", update "
                         << update << "; rewards:";
                    for (double r : rewards) dump << ' ' << r;
                    throw std::runtime_error(dump.str());
                }
                loss_acc += loss.item();
                optimizer.zero_grad();
                ad::backward(loss);
                grad_norm_acc += optimizer.gradient_norm();
                optimizer.step();
            }
            loss_acc /= config_.updates_per_batch;
            ratio_acc /= config_.updates_per_batch;
            grad_norm_acc /= config_.updates_per_batch;
        }

        const auto t1 = std::chrono::steady_clock::now();
        IterationMetrics metrics;
        metrics.iter = iter;
        metrics.best_energy = result.best_energy;
        metrics.batch_min = batch_min;
        metrics.batch_mean = batch_mean;
        metrics.loss = loss_acc;
        metrics.mean_ratio = degenerate ? 1.0 : ratio_acc;
        metrics.grad_norm = grad_norm_acc;
        metrics.seconds = std::chrono::duration<double>(t1 - t0).count();
        result.metrics.push_back(metrics);
        if (on_iteration) on_iteration(metrics);

        if (!config_.checkpoint_path.empty() &&
            ((iter + 1) % config_.checkpoint_every == 0 || iter + 1 == config_.iterations))
            model_.parameters().save(config_.checkpoint_path);
    }
    return result;
}

}  // namespace gqe
