#include "gqe/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "gqe/qsci.hpp"
#include "gqe/statevector.hpp"

namespace gqe::harness {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

void RunConfig::apply_defaults() {
    if (angle_grid.empty())
        angle_grid = {M_PI / 2,  -M_PI / 2,  M_PI / 4,  -M_PI / 4,
                      M_PI / 8,  -M_PI / 8,  M_PI / 16, -M_PI / 16};
}

std::vector<std::string> RunConfig::validate() const {
    std::vector<std::string> violations;
    if (fcidump.empty() == hubbard.empty())
        violations.push_back("exactly one of fcidump/hubbard must be set");
    if (angle_grid.empty()) violations.push_back("angle_grid must be non-empty");
    if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0)
        violations.push_back("d_model must be a positive multiple of n_heads");
    if (n_layers < 1) violations.push_back("n_layers must be >= 1");
    if (ffn_variant != "gpt2" && ffn_variant != "hqkan")
        violations.push_back("ffn_variant must be gpt2 or hqkan");
    if (ffn_variant == "hqkan" && (d_latent < 1 || d_latent >= d_model))
        violations.push_back("d_latent must satisfy 0 < d_latent < d_model");
    if (batch_size < 1) violations.push_back("batch_size must be >= 1");
    if (seq_len < 1) violations.push_back("seq_len must be >= 1");
    if (iterations < 1) violations.push_back("iterations must be >= 1");
    if (updates_per_batch < 1) violations.push_back("updates_per_batch must be >= 1");
    if (learning_rate <= 0) violations.push_back("learning_rate must be positive");
    if (weight_decay < 0) violations.push_back("weight_decay must be >= 0");
    if (clip_epsilon <= 0 || clip_epsilon >= 1)
        violations.push_back("clip_epsilon must lie in (0, 1)");
    if (repetition_penalty <= 0) violations.push_back("repetition_penalty must be positive");
    if (d_max < 1) violations.push_back("d_max must be >= 1");
    if (n_shots < 1) violations.push_back("n_shots must be >= 1");
    if (n_seeds < 1) violations.push_back("n_seeds must be >= 1");
    return violations;
}

// ------------------------- TOML config round trip ---------------------------

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string trim(const std::string& s) {
    auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

std::string RunConfig::to_toml() const {
    std::ostringstream out;
    out << "fcidump = \"" << fcidump << "\"\n";
    out << "hubbard = \"" << hubbard << "\"\n";
    out << "electrons = " << electrons_override << "\n";
    out << "ms2 = " << ms2_override << "\n";
    out << "angle_grid = [";
    for (std::size_t i = 0; i < angle_grid.size(); ++i)
        out << (i ? ", " : "") << fmt_double(angle_grid[i]);
    out << "]\n";
    out << "ffn_variant = \"" << ffn_variant << "\"\n";
    out << "d_model = " << d_model << "\n";
    out << "n_heads = " << n_heads << "\n";
    out << "n_layers = " << n_layers << "\n";
    out << "d_latent = " << d_latent << "\n";
    out << "qkan_layers = " << qkan_layers << "\n";
    out << "daruan_depth = " << daruan_depth << "\n";
    out << "batch_size = " << batch_size << "\n";
    out << "seq_len = " << seq_len << "\n";
    out << "iterations = " << iterations << "\n";
    out << "updates_per_batch = " << updates_per_batch << "\n";
    out << "learning_rate = " << fmt_double(learning_rate) << "\n";
    out << "weight_decay = " << fmt_double(weight_decay) << "\n";
    out << "clip_epsilon = " << fmt_double(clip_epsilon) << "\n";
    out << "repetition_penalty = " << fmt_double(repetition_penalty) << "\n";
    out << "ratio_uses_penalized = " << (ratio_uses_penalized ? "true" : "false") << "\n";
    out << "d_max = " << d_max << "\n";
    out << "n_shots = " << n_shots << "\n";
    out << "exact_sampling = " << (exact_sampling ? "true" : "false") << "\n";
    out << "symmetry_completion = " << (symmetry_completion ? "true" : "false") << "\n";
    out << "n_seeds = " << n_seeds << "\n";
    out << "seed_base = " << seed_base << "\n";
    return out.str();
}

void RunConfig::apply_toml_text(const std::string& text, const std::string& source_name) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos && line.find('"') == std::string::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(source_name + ":" + std::to_string(line_no) +
                                        ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));

        auto as_string = [&]() {
            if (value.size() < 2 || value.front() != '"' || value.back() != '"')
                throw std::invalid_argument(source_name + ": " + key + " expects a string");
            return value.substr(1, value.size() - 2);
        };
        auto as_bool = [&]() {
            if (value == "true") return true;
            if (value == "false") return false;
            throw std::invalid_argument(source_name + ": " + key + " expects true/false");
        };
        auto as_long = [&]() { return std::stoll(value); };
        auto as_double = [&]() { return std::stod(value); };
        auto as_array = [&]() {
            if (value.size() < 2 || value.front() != '[' || value.back() != ']')
                throw std::invalid_argument(source_name + ": " + key + " expects an array");
            std::vector<double> out;
            std::istringstream items(value.substr(1, value.size() - 2));
            std::string item;
            while (std::getline(items, item, ','))
                if (!trim(item).empty()) out.push_back(std::stod(trim(item)));
            return out;
        };

        if (key == "fcidump") fcidump = as_string();
        else if (key == "hubbard") hubbard = as_string();
        else if (key == "electrons") electrons_override = static_cast<int>(as_long());
        else if (key == "ms2") ms2_override = static_cast<int>(as_long());
        else if (key == "angle_grid") angle_grid = as_array();
        else if (key == "ffn_variant") ffn_variant = as_string();
        else if (key == "d_model") d_model = static_cast<int>(as_long());
        else if (key == "n_heads") n_heads = static_cast<int>(as_long());
        else if (key == "n_layers") n_layers = static_cast<int>(as_long());
        else if (key == "d_latent") d_latent = static_cast<int>(as_long());
        else if (key == "qkan_layers") qkan_layers = static_cast<int>(as_long());
        else if (key == "daruan_depth") daruan_depth = static_cast<int>(as_long());
        else if (key == "batch_size") batch_size = static_cast<int>(as_long());
        else if (key == "seq_len") seq_len = static_cast<int>(as_long());
        else if (key == "iterations") iterations = static_cast<int>(as_long());
        else if (key == "updates_per_batch") updates_per_batch = static_cast<int>(as_long());
        else if (key == "learning_rate") learning_rate = as_double();
        else if (key == "weight_decay") weight_decay = as_double();
        else if (key == "clip_epsilon") clip_epsilon = as_double();
        else if (key == "repetition_penalty") repetition_penalty = as_double();
        else if (key == "ratio_uses_penalized") ratio_uses_penalized = as_bool();
        else if (key == "d_max") d_max = static_cast<std::uint64_t>(as_long());
        else if (key == "n_shots") n_shots = static_cast<std::uint64_t>(as_long());
        else if (key == "exact_sampling") exact_sampling = as_bool();
        else if (key == "symmetry_completion") symmetry_completion = as_bool();
        else if (key == "n_seeds") n_seeds = static_cast<int>(as_long());
        else if (key == "seed_base") seed_base = static_cast<std::uint64_t>(as_long());
        else
            throw std::invalid_argument(source_name + ": unknown configuration key '" + key +
                                        "'");
    }
}

void RunConfig::apply_toml_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    std::ostringstream text;
    text << in.rdbuf();
    apply_toml_text(text.str(), path);
}

namespace {

MolecularIntegrals load_integrals(const RunConfig& config) {
    MolecularIntegrals ints;
    if (!config.fcidump.empty()) {
        ints = parse_fcidump_file(config.fcidump);
    } else {
        std::istringstream ss(config.hubbard);
        std::string part;
        std::vector<std::string> parts;
        while (std::getline(ss, part, ',')) parts.push_back(part);
        if (parts.size() != 3)
            throw std::invalid_argument("hubbard spec must be sites,t,u");
        ints = build_hubbard(static_cast<unsigned>(std::stoul(parts[0])),
                             std::stod(parts[1]), std::stod(parts[2]));
    }
    if (config.electrons_override >= 0)
        ints.n_electrons = static_cast<unsigned>(config.electrons_override);
    if (config.ms2_override != -1000) ints.ms2 = config.ms2_override;
    if (ints.n_electrons < 1 || ints.n_electrons > ints.n_spin_orbitals())
        throw std::invalid_argument("electron count out of range for this system");
    return ints;
}

}  // namespace

LoadedSystem load_system(const RunConfig& config) {
    LoadedSystem system;
    system.ints = load_integrals(config);
    system.sector = Sector{system.ints.n_electrons, system.ints.ms2};
    system.reference = hartree_fock_reference(system.ints);
    system.vocab = build_vocabulary(
        enumerate_uccsd(system.ints.n_orbitals, system.reference), config.angle_grid);
    if (system.vocab.size() == 0)
        throw std::invalid_argument("empty operator pool for this system");
    system.hf_energy = slater_condon_element(system.ints, system.reference, system.reference);
    system.casci_energy = casci_reference(system.ints, system.sector);
    return system;
}

ModelConfig model_config_from(const RunConfig& config, int vocab_size) {
    ModelConfig m;
    m.vocab_size = vocab_size + 1;  // start token
    m.context = config.seq_len;
    m.d_model = config.d_model;
    m.n_heads = config.n_heads;
    m.n_layers = config.n_layers;
    m.ffn = ffn_variant_from_string(config.ffn_variant);
    m.d_latent = config.d_latent;
    m.qkan_layers = config.qkan_layers;
    m.daruan_depth = config.daruan_depth;
    return m;
}

TrainerConfig trainer_config_from(const RunConfig& config, std::uint64_t seed) {
    TrainerConfig t;
    t.batch_size = config.batch_size;
    t.seq_len = config.seq_len;
    t.iterations = config.iterations;
    t.updates_per_batch = config.updates_per_batch;
    t.learning_rate = config.learning_rate;
    t.weight_decay = config.weight_decay;
    t.clip_epsilon = config.clip_epsilon;
    t.repetition_penalty = config.repetition_penalty;
    t.ratio_uses_penalized = config.ratio_uses_penalized;
    t.seed = seed;
    t.qsci.d_max = config.d_max;
    t.qsci.symmetry_completion = config.symmetry_completion;
    t.qsci.exact_sampling = config.exact_sampling;
    t.qsci.n_shots = config.n_shots;
    return t;
}

ModelConfig paper_scale_config(FfnVariant variant, int vocab_size) {
    ModelConfig m;
    m.vocab_size = vocab_size;
    m.context = 100;
    m.d_model = 768;
    m.n_heads = 12;
    m.n_layers = 8;
    m.ffn = variant;
    m.d_latent = 12;
    m.qkan_layers = 1;
    m.daruan_depth = 3;
    return m;
}

namespace {

Statevector evolve_tokens(const LoadedSystem& system, const std::vector<int>& tokens) {
    std::vector<unsigned> occupied;
    for (unsigned q = 0; q < system.reference.n_spin_orbitals; ++q)
        if (system.reference.occupied(q)) occupied.push_back(q);
    Statevector state = prepare_reference(system.reference.n_spin_orbitals, occupied);
    for (const auto& gate : compile_sequence(system.vocab, tokens))
        apply_pauli_rotation(state, gate.paulis, gate.angle);
    return state;
}

double energy_of_record(const LoadedSystem& system, const MeasurementRecord& record,
                        std::uint64_t d_max, bool completion, std::size_t* dim_out = nullptr) {
    SubspaceSelection selection;
    try {
        selection = select_subspace(record, d_max, system.sector,
                                    system.reference.n_spin_orbitals, completion);
    } catch (const EmptySubspaceError&) {
        selection.determinants = {system.reference};
        selection.d_max = d_max;
    }
    auto result = solve_subspace(system.ints, selection);
    if (dim_out) *dim_out = result.dimension;
    return result.energy;
}

}  // namespace

std::vector<ShotsRow> sweep_shots(const LoadedSystem& system, const std::vector<int>& tokens,
                                  const std::vector<std::uint64_t>& shot_list, int repeats,
                                  std::uint64_t d_max, bool symmetry_completion,
                                  std::uint64_t seed) {
    Statevector state = evolve_tokens(system, tokens);
    std::vector<ShotsRow> rows;

    // exact-mode reference row (infinite shots)
    {
        ShotsRow row;
        row.shots = 0.0;
        row.mean_abs_error = std::abs(
            energy_of_record(system, exact_distribution(state), d_max, symmetry_completion) -
            system.casci_energy);
        row.std_abs_error = 0.0;
        rows.push_back(row);
    }

    for (std::uint64_t shots : shot_list) {
        std::vector<double> errors;
        for (int r = 0; r < repeats; ++r) {
            auto record = sample(state, shots, seed + 7919 * r + shots);
            errors.push_back(std::abs(
                energy_of_record(system, record, d_max, symmetry_completion) -
                system.casci_energy));
        }
        double mean = 0.0;
        for (double e : errors) mean += e;
        mean /= errors.size();
        double var = 0.0;
        for (double e : errors) var += (e - mean) * (e - mean);
        ShotsRow row;
        row.shots = static_cast<double>(shots);
        row.mean_abs_error = mean;
        row.std_abs_error = std::sqrt(var / errors.size());
        rows.push_back(row);
    }
    return rows;
}

std::vector<DmaxRow> sweep_dmax(const LoadedSystem& system, const std::vector<int>& tokens,
                                const std::vector<std::uint64_t>& dmax_list,
                                std::uint64_t n_shots, bool symmetry_completion,
                                std::uint64_t seed) {
    Statevector state = evolve_tokens(system, tokens);
    auto record = sample(state, n_shots, seed);  // one record, re-truncated per cap
    std::vector<DmaxRow> rows;
    for (std::uint64_t cap : dmax_list) {
        DmaxRow row;
        row.d_max = cap;
        std::size_t dim = 0;
        row.abs_error = std::abs(
            energy_of_record(system, record, cap, symmetry_completion, &dim) -
            system.casci_energy);
        row.dimension = dim;
        rows.push_back(row);
    }
    return rows;
}

// --------------------------------- CLI -------------------------------------

namespace {

constexpr double kChemicalAccuracy = 1.6e-3;

struct CliState {
    RunConfig config;
    std::vector<int> tokens;
    std::string checkpoint;
    std::vector<std::uint64_t> shot_list = {100, 1000, 10000, 100000};
    std::vector<std::uint64_t> dmax_list = {1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024, 2000};
    int repeats = 5;
    bool emit = false;
    bool instantiate = false;
    bool config_given = false;
    int vocab_size_hint = 301;
};

fs::path resolve_out_dir(const std::string& out_dir) {
    fs::path p(out_dir);
    if (p.is_relative()) {
        if (const char* root = std::getenv("GQE_RUN_ROOT")) p = fs::path(root) / p;
    }
    return p;
}

// Creates the run directory and stores the resolved configuration; refuses to
// reuse a directory that already holds a run unless --force is given.
fs::path prepare_run_dir(const RunConfig& config, const std::string& resolved_toml) {
    if (config.out_dir.empty())
        throw std::invalid_argument("this subcommand requires --out");
    fs::path dir = resolve_out_dir(config.out_dir);
    fs::path marker = dir / "resolved.toml";
    if (fs::exists(marker) && !config.force)
        throw std::invalid_argument("run directory already used: " + dir.string() +
                                    " (pass --force to overwrite)");
    fs::create_directories(dir);
    std::ofstream(marker) << resolved_toml;
    return dir;
}

void check_config(const RunConfig& config) {
    auto violations = config.validate();
    if (!violations.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& v : violations) msg += "\n  - " + v;
        throw std::invalid_argument(msg);
    }
}

json metrics_to_json(const IterationMetrics& m) {
    json j;
    j["iter"] = m.iter;
    j["best_energy"] = m.best_energy;
    j["batch_min"] = m.batch_min;
    j["batch_mean"] = m.batch_mean;
    j["loss"] = m.loss;
    j["mean_ratio"] = m.mean_ratio;
    j["grad_norm"] = m.grad_norm;
    j["seconds"] = m.seconds;
    return j;
}

struct SeedRunResult {
    std::uint64_t seed = 0;
    TrainResult result;
    double wall_seconds = 0.0;
};

// Seeds run as independent workers; each owns its model and metrics file.
std::vector<SeedRunResult> run_seeds(const LoadedSystem& system, const RunConfig& config,
                                     const fs::path& dir, FfnVariant variant,
                                     const std::string& tag) {
    std::vector<std::uint64_t> seeds;
    for (int s = 0; s < config.n_seeds; ++s) seeds.push_back(config.seed_base + s);
    std::vector<SeedRunResult> results(seeds.size());

    auto worker = [&](std::size_t index) {
        const std::uint64_t seed = seeds[index];
        ModelConfig mc = model_config_from(config, system.vocab.size());
        mc.ffn = variant;
        PolicyModel model(mc, seed);
        TrainerConfig tc = trainer_config_from(config, seed);
        fs::path seed_dir = dir / (tag + "seed_" + std::to_string(seed));
        fs::create_directories(seed_dir);
        tc.checkpoint_path = (seed_dir / "checkpoint.bin").string();
        std::ofstream metrics_file(seed_dir / "metrics.jsonl");
        Trainer trainer(system.ints, system.vocab, model, tc);
        const auto t0 = std::chrono::steady_clock::now();
        auto result = trainer.run([&](const IterationMetrics& m) {
            metrics_file << metrics_to_json(m).dump() << '\n';
        });
        const auto t1 = std::chrono::steady_clock::now();
        results[index] = SeedRunResult{seed, std::move(result),
                                       std::chrono::duration<double>(t1 - t0).count()};
    };

    const std::size_t workers =
        std::min<std::size_t>(seeds.size(),
                              std::max(1u, std::thread::hardware_concurrency()));
    std::size_t next = 0;
    while (next < seeds.size()) {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers && next < seeds.size(); ++w, ++next)
            pool.emplace_back(worker, next);
        for (auto& t : pool) t.join();
    }
    return results;
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= xs.size();
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    return {mean, std::sqrt(var / xs.size())};
}

std::vector<int> tokens_for_eval(const CliState& state, const LoadedSystem& system,
                                 std::string* source) {
    if (!state.tokens.empty()) {
        for (int t : state.tokens)
            if (t < 0 || t >= system.vocab.size())
                throw std::invalid_argument("token id out of range: " + std::to_string(t));
        *source = "fixed-tokens";
        return state.tokens;
    }
    if (!state.checkpoint.empty()) {
        ModelConfig mc = model_config_from(state.config, system.vocab.size());
        PolicyModel model(mc, 0);
        model.parameters().load(state.checkpoint);
        *source = "checkpoint-greedy";
        return model.sample_sequences(1, state.config.seq_len,
                                      state.config.repetition_penalty, 0, true)[0]
            .tokens;
    }
    throw std::invalid_argument("provide --tokens or --checkpoint");
}

void write_csv(const fs::path& path, const std::string& header,
               const std::vector<std::string>& lines) {
    std::ofstream out(path);
    out << header << '\n';
    for (const auto& l : lines) out << l << '\n';
}

json gate_report_json(const GateCountReport& r) {
    json j;
    j["two_qubit"] = r.two_qubit;
    j["single_rotation"] = r.single_rotation;
    j["clifford"] = r.clifford;
    j["total"] = r.total;
    return j;
}

std::string det_hex(const Determinant& d) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(d.bits));
    return buf;
}

// ------------------------- subcommand handlers ------------------------------

int exec_parse_fcidump(const CliState& state) {
    auto ints = parse_fcidump_file(state.config.fcidump);
    json j;
    j["n_orbitals"] = ints.n_orbitals;
    j["n_electrons"] = ints.n_electrons;
    j["ms2"] = ints.ms2;
    j["core_energy"] = ints.core_energy;
    j["two_body_entries"] = ints.two_body_entries().size();
    std::cout << j.dump(2) << '\n';
    if (state.emit) write_fcidump(ints, std::cout);
    return 0;
}

int exec_casci(const CliState& state) {
    RunConfig config = state.config;
    auto ints = load_integrals(config);
    Sector sector{ints.n_electrons, ints.ms2};
    double energy = casci_reference(ints, sector);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10f", energy);
    std::cout << buf << '\n';
    return 0;
}

int exec_train(CliState& state, const std::string& resolved) {
    check_config(state.config);
    auto system = load_system(state.config);
    fs::path dir = prepare_run_dir(state.config, resolved);
    auto results = run_seeds(system, state.config, dir,
                             ffn_variant_from_string(state.config.ffn_variant), "");

    std::vector<double> best_errors;
    json per_seed = json::array();
    for (const auto& r : results) {
        double err = std::abs(r.result.best_energy - system.casci_energy);
        best_errors.push_back(err);
        json s;
        s["seed"] = r.seed;
        s["best_energy"] = r.result.best_energy;
        s["best_error"] = err;
        s["best_tokens"] = r.result.best_tokens;
        s["wall_seconds"] = r.wall_seconds;
        per_seed.push_back(s);
    }
    auto [mean, stdev] = mean_std(best_errors);
    json summary;
    summary["variant"] = state.config.ffn_variant;
    summary["casci_energy"] = system.casci_energy;
    summary["hf_energy"] = system.hf_energy;
    summary["chemical_accuracy"] = kChemicalAccuracy;
    summary["mean_best_error"] = mean;
    summary["std_best_error"] = stdev;
    summary["seeds"] = per_seed;
    std::ofstream(dir / "summary.json") << summary.dump(2) << '\n';
    std::cout << "trained " << results.size() << " seed(s): best error " << mean << " +/- "
              << stdev << " Ha (CASCI " << system.casci_energy << ")\n"
              << "outputs in " << dir.string() << '\n';
    return 0;
}

int exec_qsci_eval(CliState& state) {
    auto system = load_system(state.config);
    std::string source;
    auto tokens = tokens_for_eval(state, system, &source);
    Statevector psi = evolve_tokens(system, tokens);
    MeasurementRecord record = state.config.exact_sampling
                                   ? exact_distribution(psi)
                                   : sample(psi, state.config.n_shots,
                                            state.config.seed_base);
    SubspaceSelection selection;
    try {
        selection = select_subspace(record, state.config.d_max, system.sector,
                                    system.reference.n_spin_orbitals,
                                    state.config.symmetry_completion);
    } catch (const EmptySubspaceError&) {
        selection.determinants = {system.reference};
        selection.d_max = state.config.d_max;
    }
    auto result = solve_subspace(system.ints, selection);

    // top determinants by |coefficient|
    std::vector<std::size_t> order(result.dimension);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(result.ground_vector[a]) > std::abs(result.ground_vector[b]);
    });
    json top = json::array();
    for (std::size_t i = 0; i < std::min<std::size_t>(10, order.size()); ++i) {
        json d;
        d["determinant"] = det_hex(selection.determinants[order[i]]);
        d["coefficient"] = result.ground_vector[order[i]];
        top.push_back(d);
    }
    json j;
    j["circuit_source"] = source;
    j["tokens"] = tokens;
    j["energy"] = result.energy;
    j["reward"] = -result.energy;
    j["dimension"] = result.dimension;
    j["casci_energy"] = system.casci_energy;
    j["abs_error"] = std::abs(result.energy - system.casci_energy);
    j["top_determinants"] = top;
    std::cout << j.dump(2) << '\n';
    return 0;
}

int exec_sweep_shots(CliState& state, const std::string& resolved) {
    check_config(state.config);
    auto system = load_system(state.config);
    std::string source;
    auto tokens = tokens_for_eval(state, system, &source);
    auto rows = sweep_shots(system, tokens, state.shot_list, state.repeats,
                            state.config.d_max, state.config.symmetry_completion,
                            state.config.seed_base);
    fs::path dir = prepare_run_dir(state.config, resolved);
    std::vector<std::string> lines;
    json jrows = json::array();
    std::printf("%12s %18s %18s\n", "shots", "mean_abs_error", "std_abs_error");
    for (const auto& r : rows) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%.0f,%.12e,%.12e", r.shots, r.mean_abs_error,
                      r.std_abs_error);
        lines.push_back(buf);
        std::printf("%12s %18.3e %18.3e\n",
                    r.shots == 0 ? "exact" : std::to_string((long)r.shots).c_str(),
                    r.mean_abs_error, r.std_abs_error);
        json jr;
        jr["shots"] = r.shots;
        jr["mean_abs_error"] = r.mean_abs_error;
        jr["std_abs_error"] = r.std_abs_error;
        jrows.push_back(jr);
    }
    write_csv(dir / "shots.csv", "shots,mean_abs_error,std_abs_error", lines);
    json j;
    j["circuit_source"] = source;
    j["tokens"] = tokens;
    j["repeats"] = state.repeats;
    j["d_max"] = state.config.d_max;
    j["rows"] = jrows;
    std::ofstream(dir / "shots.json") << j.dump(2) << '\n';
    return 0;
}

int exec_sweep_dmax(CliState& state, const std::string& resolved) {
    check_config(state.config);
    auto system = load_system(state.config);
    std::string source;
    auto tokens = tokens_for_eval(state, system, &source);
    auto rows = sweep_dmax(system, tokens, state.dmax_list, state.config.n_shots,
                           state.config.symmetry_completion, state.config.seed_base);
    fs::path dir = prepare_run_dir(state.config, resolved);
    std::vector<std::string> lines;
    json jrows = json::array();
    std::printf("%8s %18s %10s\n", "d_max", "abs_error", "dimension");
    for (const auto& r : rows) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%llu,%.12e,%zu",
                      static_cast<unsigned long long>(r.d_max), r.abs_error, r.dimension);
        lines.push_back(buf);
        std::printf("%8llu %18.3e %10zu\n", static_cast<unsigned long long>(r.d_max),
                    r.abs_error, r.dimension);
        json jr;
        jr["d_max"] = r.d_max;
        jr["abs_error"] = r.abs_error;
        jr["dimension"] = r.dimension;
        jrows.push_back(jr);
    }
    write_csv(dir / "dmax.csv", "d_max,abs_error,dimension", lines);
    json j;
    j["circuit_source"] = source;
    j["tokens"] = tokens;
    j["n_shots"] = state.config.n_shots;
    j["rows"] = jrows;
    std::ofstream(dir / "dmax.json") << j.dump(2) << '\n';
    return 0;
}

int exec_report_params(CliState& state) {
    ModelConfig gpt2_cfg, hqkan_cfg;
    if (state.config_given || state.instantiate) {
        // dims from the provided run configuration
        RunConfig rc = state.config;
        gpt2_cfg = model_config_from(rc, state.vocab_size_hint - 1);
        gpt2_cfg.ffn = FfnVariant::Gpt2;
        hqkan_cfg = gpt2_cfg;
        hqkan_cfg.ffn = FfnVariant::Hqkan;
        hqkan_cfg.d_latent = rc.d_latent;
        hqkan_cfg.qkan_layers = rc.qkan_layers;
        hqkan_cfg.daruan_depth = rc.daruan_depth;
    } else {
        gpt2_cfg = paper_scale_config(FfnVariant::Gpt2, state.vocab_size_hint);
        hqkan_cfg = paper_scale_config(FfnVariant::Hqkan, state.vocab_size_hint);
    }
    auto gpt2 = analytic_parameter_report(gpt2_cfg);
    auto hqkan = analytic_parameter_report(hqkan_cfg);

    std::printf("%-12s %16s %16s\n", "component", "gpt2", "hqkan");
    for (std::size_t i = 0; i < gpt2.items.size(); ++i)
        std::printf("%-12s %16ld %16ld\n", gpt2.items[i].component.c_str(),
                    gpt2.items[i].count, hqkan.items[i].count);
    const double ratio = static_cast<double>(hqkan.total) / gpt2.total;
    std::printf("%-12s %16ld %16ld\n", "total", gpt2.total, hqkan.total);
    std::printf("%-12s %15.2fM %15.2fM\n", "params", gpt2.total / 1e6, hqkan.total / 1e6);
    std::printf("%-12s %15.2f %15.2f  (f32 MB)\n", "memory",
                gpt2.bytes_f32() / 1.048576e6, hqkan.bytes_f32() / 1.048576e6);
    std::printf("reduction: %.1f%%  (ratio %.3f)\n", 100.0 * (1.0 - ratio), ratio);

    if (state.instantiate) {
        PolicyModel a(gpt2_cfg, 0), b(hqkan_cfg, 0);
        std::printf("instantiated: gpt2 %ld, hqkan %ld (exact match: %s)\n",
                    a.instantiated_parameter_count(), b.instantiated_parameter_count(),
                    (a.instantiated_parameter_count() == gpt2.total &&
                     b.instantiated_parameter_count() == hqkan.total)
                        ? "yes"
                        : "NO");
    }

    json j;
    auto fill = [](const ParameterReport& r) {
        json out;
        for (const auto& it : r.items) out[it.component] = it.count;
        out["total"] = r.total;
        out["bytes_f64"] = r.bytes_f64();
        out["bytes_f32"] = r.bytes_f32();
        return out;
    };
    j["gpt2"] = fill(gpt2);
    j["hqkan"] = fill(hqkan);
    j["ratio"] = ratio;
    j["reduction_percent"] = 100.0 * (1.0 - ratio);
    if (!state.config.out_dir.empty()) {
        fs::path dir = resolve_out_dir(state.config.out_dir);
        fs::create_directories(dir);
        std::ofstream(dir / "params.json") << j.dump(2) << '\n';
    } else {
        std::cout << j.dump(2) << '\n';
    }
    return 0;
}

int exec_report_gates(CliState& state) {
    auto system = load_system(state.config);
    std::string source;
    auto tokens = tokens_for_eval(state, system, &source);
    auto report = count_gates(std::span<const int>(tokens), system.vocab);
    std::printf("%zu tokens: %ld two-qubit, %ld rotations, %ld Cliffords, %ld total\n",
                tokens.size(), report.two_qubit, report.single_rotation, report.clifford,
                report.total);
    json j = gate_report_json(report);
    j["circuit_source"] = source;
    j["sequence_length"] = tokens.size();
    std::cout << j.dump(2) << '\n';
    return 0;
}

int exec_compare_variants(CliState& state, const std::string& resolved) {
    check_config(state.config);
    auto system = load_system(state.config);
    fs::path dir = prepare_run_dir(state.config, resolved);

    struct VariantOutcome {
        std::vector<SeedRunResult> runs;
        ParameterReport report;
    };
    std::map<std::string, VariantOutcome> outcomes;
    for (const std::string name : {"gpt2", "hqkan"}) {
        FfnVariant variant = ffn_variant_from_string(name);
        VariantOutcome outcome;
        outcome.runs = run_seeds(system, state.config, dir, variant, name + "_");
        ModelConfig mc = model_config_from(state.config, system.vocab.size());
        mc.ffn = variant;
        outcome.report = analytic_parameter_report(mc);
        outcomes[name] = std::move(outcome);
    }

    // per-iteration best-so-far error, mean +/- std over seeds
    std::vector<std::string> lines;
    for (int it = 0; it < state.config.iterations; ++it) {
        std::string line = std::to_string(it);
        for (const std::string name : {"gpt2", "hqkan"}) {
            std::vector<double> errs;
            for (const auto& r : outcomes[name].runs)
                errs.push_back(
                    std::abs(r.result.metrics[it].best_energy - system.casci_energy));
            auto [mean, stdev] = mean_std(errs);
            char buf[64];
            std::snprintf(buf, sizeof buf, ",%.12e,%.12e", mean, stdev);
            line += buf;
        }
        char thr[32];
        std::snprintf(thr, sizeof thr, ",%.4e", kChemicalAccuracy);
        line += thr;
        lines.push_back(line);
    }
    write_csv(dir / "convergence.csv",
              "iter,gpt2_mean_error,gpt2_std_error,hqkan_mean_error,hqkan_std_error,"
              "chemical_accuracy",
              lines);

    json j;
    j["casci_energy"] = system.casci_energy;
    j["hf_energy"] = system.hf_energy;
    j["chemical_accuracy"] = kChemicalAccuracy;
    std::printf("%-8s %14s %14s %12s %12s %12s\n", "variant", "final_error", "std", "params",
                "f32_MB", "wall_s");
    for (const std::string name : {"gpt2", "hqkan"}) {
        auto& outcome = outcomes[name];
        std::vector<double> errs, walls;
        for (const auto& r : outcome.runs) {
            errs.push_back(std::abs(r.result.best_energy - system.casci_energy));
            walls.push_back(r.wall_seconds);
        }
        auto [mean_err, std_err] = mean_std(errs);
        auto [mean_wall, std_wall] = mean_std(walls);
        json v;
        v["mean_best_error"] = mean_err;
        v["std_best_error"] = std_err;
        v["params"] = outcome.report.total;
        v["bytes_f64"] = outcome.report.bytes_f64();
        v["bytes_f32"] = outcome.report.bytes_f32();
        v["mean_wall_seconds"] = mean_wall;
        v["std_wall_seconds"] = std_wall;
        j[name] = v;
        std::printf("%-8s %14.3e %14.3e %12ld %12.2f %12.1f\n", name.c_str(), mean_err,
                    std_err, outcome.report.total, outcome.report.bytes_f32() / 1.048576e6,
                    mean_wall);
    }
    const double ratio = static_cast<double>(outcomes["hqkan"].report.total) /
                         outcomes["gpt2"].report.total;
    j["param_ratio"] = ratio;
    j["param_reduction_percent"] = 100.0 * (1.0 - ratio);
    std::printf("parameter reduction: %.1f%%\n", 100.0 * (1.0 - ratio));
    std::ofstream(dir / "compare.json") << j.dump(2) << '\n';
    return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"generative circuit search with QSCI scoring"};
    app.require_subcommand(1);

    CliState state;
    state.config.apply_defaults();

    auto add_system_options = [&](CLI::App* cmd) {
        cmd->add_option("--fcidump", state.config.fcidump, "FCIDUMP file path")
            ->capture_default_str();
        cmd->add_option("--hubbard", state.config.hubbard, "Hubbard spec: sites,t,u")
            ->capture_default_str();
        cmd->add_option("--electrons", state.config.electrons_override,
                        "override electron count")
            ->capture_default_str();
        cmd->add_option("--ms2", state.config.ms2_override, "override 2*Sz")
            ->capture_default_str();
    };
    std::string config_path;
    auto add_full_options = [&](CLI::App* cmd) {
        add_system_options(cmd);
        cmd->add_option("--config", config_path, "TOML run configuration");
        cmd->add_option("--angle-grid", state.config.angle_grid, "pool angle grid (radians)")
            ->delimiter(',')
            ->capture_default_str();
        cmd->add_option("--variant", state.config.ffn_variant, "ffn_variant: gpt2|hqkan")
            ->capture_default_str();
        cmd->add_option("--ffn-variant", state.config.ffn_variant,
                        "alias for --variant (config key ffn_variant)")
            ->capture_default_str();
        cmd->add_option("--d-model", state.config.d_model, "embedding width")
            ->capture_default_str();
        cmd->add_option("--heads", state.config.n_heads, "attention heads")
            ->capture_default_str();
        cmd->add_option("--layers", state.config.n_layers, "transformer blocks")
            ->capture_default_str();
        cmd->add_option("--d-latent", state.config.d_latent, "hqkan latent width")
            ->capture_default_str();
        cmd->add_option("--qkan-layers", state.config.qkan_layers, "qkan layers per block")
            ->capture_default_str();
        cmd->add_option("--daruan-depth", state.config.daruan_depth,
                        "data re-uploading repetitions")
            ->capture_default_str();
        cmd->add_option("--batch", state.config.batch_size, "circuits per iteration")
            ->capture_default_str();
        cmd->add_option("--seq-len", state.config.seq_len, "generated sequence length")
            ->capture_default_str();
        cmd->add_option("--iterations", state.config.iterations, "training iterations")
            ->capture_default_str();
        cmd->add_option("--updates", state.config.updates_per_batch,
                        "policy updates per batch")
            ->capture_default_str();
        cmd->add_option("--lr", state.config.learning_rate, "learning rate")
            ->capture_default_str();
        cmd->add_option("--weight-decay", state.config.weight_decay, "decoupled weight decay")
            ->capture_default_str();
        cmd->add_option("--clip", state.config.clip_epsilon, "surrogate clip epsilon")
            ->capture_default_str();
        cmd->add_option("--penalty", state.config.repetition_penalty, "repetition penalty")
            ->capture_default_str();
        cmd->add_flag("--raw-ratio{false}", state.config.ratio_uses_penalized,
                      "use raw (unpenalized) log-probs in importance ratios")
            ->capture_default_str();
        cmd->add_option("--d-max", state.config.d_max, "subspace dimension cap")
            ->capture_default_str();
        cmd->add_option("--shots", state.config.n_shots, "measurement shots")
            ->capture_default_str();
        cmd->add_flag("--exact", state.config.exact_sampling,
                      "noiseless exact-distribution sampling")
            ->capture_default_str();
        cmd->add_flag("--no-completion{false}", state.config.symmetry_completion,
                      "disable symmetry completion")
            ->capture_default_str();
        cmd->add_option("--seeds", state.config.n_seeds, "number of seeds")
            ->capture_default_str();
        cmd->add_option("--seed-base", state.config.seed_base, "first seed value")
            ->capture_default_str();
        cmd->add_option("--out", state.config.out_dir,
                        "run directory (under GQE_RUN_ROOT when relative)")
            ->capture_default_str();
        cmd->add_flag("--force", state.config.force, "overwrite an existing run directory")
            ->capture_default_str();
    };

    auto* parse_cmd = app.add_subcommand("parse-fcidump", "parse and summarize an FCIDUMP");
    parse_cmd->add_option("--fcidump", state.config.fcidump, "FCIDUMP file path")->required();
    parse_cmd->add_flag("--emit", state.emit, "re-emit the parsed file to stdout");

    auto* casci_cmd = app.add_subcommand("casci", "exact sector ground-state energy");
    add_system_options(casci_cmd);

    auto* train_cmd = app.add_subcommand("train", "train the policy over a seed list");
    add_full_options(train_cmd);

    auto* qsci_cmd = app.add_subcommand("qsci-eval", "score one circuit through QSCI");
    add_full_options(qsci_cmd);
    qsci_cmd->add_option("--tokens", state.tokens, "token ids")->delimiter(',');
    qsci_cmd->add_option("--checkpoint", state.checkpoint, "greedy-decode this checkpoint");

    auto* shots_cmd = app.add_subcommand("sweep-shots", "error versus measurement shots");
    add_full_options(shots_cmd);
    shots_cmd->add_option("--tokens", state.tokens, "token ids")->delimiter(',');
    shots_cmd->add_option("--checkpoint", state.checkpoint, "greedy-decode this checkpoint");
    shots_cmd->add_option("--shot-list", state.shot_list, "shot counts")->delimiter(',');
    shots_cmd->add_option("--repeats", state.repeats, "repeats per shot count");

    auto* dmax_cmd = app.add_subcommand("sweep-dmax", "error versus subspace cap");
    add_full_options(dmax_cmd);
    dmax_cmd->add_option("--tokens", state.tokens, "token ids")->delimiter(',');
    dmax_cmd->add_option("--checkpoint", state.checkpoint, "greedy-decode this checkpoint");
    dmax_cmd->add_option("--dmax-list", state.dmax_list, "cap values")->delimiter(',');

    auto* params_cmd = app.add_subcommand("report-params",
                                          "parameter counts: gpt2 vs hqkan");
    add_full_options(params_cmd);
    params_cmd->add_option("--vocab-size", state.vocab_size_hint,
                           "vocabulary size (incl. start token)");
    params_cmd->add_flag("--instantiate", state.instantiate,
                         "instantiate at run dims and verify the analytic count");

    auto* gates_cmd = app.add_subcommand("report-gates", "gate counts for a circuit");
    add_full_options(gates_cmd);
    gates_cmd->add_option("--tokens", state.tokens, "token ids")->delimiter(',');
    gates_cmd->add_option("--checkpoint", state.checkpoint, "greedy-decode this checkpoint");

    auto* compare_cmd =
        app.add_subcommand("compare-variants", "train both ffn variants side by side");
    add_full_options(compare_cmd);

    try {
        app.parse(argc, argv);
        state.config_given = !config_path.empty();
        if (!config_path.empty()) {
            // precedence: defaults < config file < command line. The config is
            // applied to a fresh default state, then the command line options
            // are re-applied on top.
            RunConfig from_file;
            from_file.apply_defaults();
            from_file.apply_toml_file(config_path);
            state.config = from_file;
            app.clear();
            app.parse(argc, argv);
        }
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (parse_cmd->parsed()) return exec_parse_fcidump(state);
        if (casci_cmd->parsed()) return exec_casci(state);
        if (train_cmd->parsed()) return exec_train(state, state.config.to_toml());
        if (qsci_cmd->parsed()) return exec_qsci_eval(state);
        if (shots_cmd->parsed()) return exec_sweep_shots(state, state.config.to_toml());
        if (dmax_cmd->parsed()) return exec_sweep_dmax(state, state.config.to_toml());
        if (params_cmd->parsed()) return exec_report_params(state);
        if (gates_cmd->parsed()) return exec_report_gates(state);
        if (compare_cmd->parsed())
            return exec_compare_variants(state, state.config.to_toml());
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    }
    return 0;
}

}  // namespace gqe::harness
