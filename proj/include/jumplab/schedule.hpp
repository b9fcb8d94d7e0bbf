#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "jumplab/codebook.hpp"
#include "jumplab/data.hpp"
#include "jumplab/model.hpp"
#include "jumplab/rng.hpp"
#include "jumplab/selection.hpp"

namespace jumplab {

enum class Strategy { standard, self_update, cross_update, jump_update };

Strategy parse_strategy(std::string_view name);
std::string_view to_string(Strategy s) noexcept;

struct ScheduleConfig {
    Strategy strategy = Strategy::jump_update;
    double effect_rate = 1.0;
    /// Iterations between table commits; 0 means one epoch's worth of iterations.
    std::size_t jump_step = 0;

    void validate() const;
};

/// Iteration index value meaning "part of the initial all-True table".
inline constexpr std::int64_t kInitialEntry = -1;

/// Double-buffered per-sample clean flags.
///
/// Fresh identifiers land in the pending buffer together with the iteration
/// that produced them; training reads only the active buffer. commit() copies
/// pending into active, so a flag is never consumed in the window that made it.
class IdentifierTable {
public:
    IdentifierTable(std::size_t samples, std::size_t jump_step);

    std::size_t size() const noexcept { return active_.size(); }
    std::size_t jump_step() const noexcept { return jump_step_; }
    std::size_t commit_count() const noexcept { return commits_; }

    void write(std::size_t sample, bool clean, std::int64_t iteration);
    void commit();
    void reset_all_true();

    bool active(std::size_t sample) const { return active_.at(sample); }
    bool pending(std::size_t sample) const { return pending_.at(sample); }
    std::int64_t active_produced_at(std::size_t sample) const { return active_produced_at_.at(sample); }
    std::int64_t pending_produced_at(std::size_t sample) const { return pending_produced_at_.at(sample); }

    const std::vector<bool>& active_flags() const noexcept { return active_; }
    const std::vector<bool>& pending_flags() const noexcept { return pending_; }

private:
    std::size_t jump_step_;
    std::size_t commits_ = 0;
    std::vector<bool> active_;
    std::vector<bool> pending_;
    std::vector<std::int64_t> active_produced_at_;
    std::vector<std::int64_t> pending_produced_at_;
};

inline void commit_pending(IdentifierTable& table) { table.commit(); }

/// True with probability r: selection takes effect for this iteration.
bool apply_effect_rate(double r, RngStream& rng);

struct ErrorFlowDiagnostics {
    std::uint64_t selection_iterations = 0;  ///< N_A
    std::uint64_t sub_flows = 1;             ///< N_f
    std::uint64_t per_flow = 0;              ///< N_a = N_A / N_f, integer division
    double per_flow_exact = 0.0;             ///< N_A / N_f as a real number
    double accumulation_proxy = 0.0;         ///< r * n, selections taking effect per epoch
};

ErrorFlowDiagnostics error_flow(Strategy s, std::uint64_t selection_iterations, std::size_t dataset_size,
                                double effect_rate, std::size_t iterations_per_epoch);

/// One entry of the jump bookkeeping log.
struct TableEvent {
    enum class Kind { write, commit, apply };
    Kind kind = Kind::write;
    std::int64_t iteration = 0;
    std::size_t sample = 0;
    bool value = false;
    std::int64_t produced_at = kInitialEntry;  ///< apply only
};

struct EpochStats {
    std::size_t epoch = 0;
    Strategy strategy = Strategy::standard;
    bool warmup = false;
    double lr = 0.0;
    std::size_t iterations = 0;
    std::size_t updates = 0;
    std::size_t skipped_batches = 0;
    std::size_t forward_passes = 0;
    std::size_t gated_iterations = 0;  ///< iterations where selection took effect
    std::size_t selected_count = 0;    ///< samples contributing to parameter updates
    std::size_t commit_count = 0;
    double mean_lag = 0.0;
    double train_loss = 0.0;
    double wall_ms = 0.0;

    /// Selection produced during this epoch, one flag per training sample.
    std::vector<bool> selection;
    /// Peer network's selection (cross_update only).
    std::vector<bool> peer_selection;
    /// Single-loss quantities from this epoch's forward passes (net A).
    std::vector<double> variance;
    std::vector<double> bce;
    std::vector<bool> detection_flags;
    std::vector<bool> classifier_flags;
    std::vector<bool> combined_flags;

    ErrorFlowDiagnostics flow;
};

/// Owns the network(s), optimiser state, identifier table and RNG streams for
/// one training run, and advances it one epoch at a time.
class TrainingSession {
public:
    TrainingSession(const NoisyDataset& train, const HadamardCodebook& codebook, TrainConfig train_cfg,
                    SelectionConfig selection_cfg, ScheduleConfig schedule_cfg, std::uint64_t seed);

    /// Runs the next epoch: warm-up while epoch < warmup_epochs, then the
    /// configured strategy.
    EpochStats run_epoch();

    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t iterations_per_epoch() const noexcept;
    std::int64_t iteration() const noexcept { return iteration_; }
    /// First iteration of the post-warm-up jump phase, or -1 before it starts.
    std::int64_t jump_start() const noexcept { return jump_start_; }
    std::size_t jump_step() const noexcept { return table_.jump_step(); }
    const ScheduleConfig& schedule() const noexcept { return schedule_cfg_; }
    /// Also compute single-loss statistics for baseline strategies.
    void collect_single_loss(bool on) { collect_single_loss_ = on; }

    const DualHeadNet& net() const noexcept { return nets_.front(); }
    const DualHeadNet& peer() const { return nets_.at(1); }
    DualHeadNet& mutable_net() noexcept { return nets_.front(); }
    const IdentifierTable& table() const noexcept { return table_; }

    /// When enabled, every table write/commit/apply is appended to events().
    void record_events(bool on) { record_events_ = on; }
    const std::vector<TableEvent>& events() const noexcept { return events_; }

    /// Batches (as dataset indices) trained on by each net in the last epoch;
    /// recorded only when record_events is on.
    const std::vector<std::vector<std::size_t>>& trained_indices(std::size_t net) const {
        return trained_.at(net);
    }

private:
    EpochStats warmup_epoch(double lr);
    EpochStats jump_train_epoch(double lr);
    EpochStats baseline_train_epoch(double lr);

    struct Batch {
        std::vector<std::size_t> indices;
        Matrix features;
        std::vector<std::size_t> labels;
        Matrix targets;
    };
    std::vector<Batch> make_batches();
    SelectionConfig current_selection() const;
    void record_single_loss(EpochStats& stats, const Batch& batch, const std::vector<SelectionDecision>& d);
    double train_step(std::size_t net, const ForwardCache& cache, const Batch& batch,
                      const std::vector<double>& weights, double lr);
    void init_stats(EpochStats& stats, bool warmup, double lr) const;
    void finish_flow(EpochStats& stats);

    const NoisyDataset* train_;
    const HadamardCodebook* codebook_;
    TrainConfig train_cfg_;
    SelectionConfig selection_cfg_;
    ScheduleConfig schedule_cfg_;
    std::vector<DualHeadNet> nets_;
    std::vector<SgdMomentum> optimizers_;
    IdentifierTable table_;
    RngStream shuffle_rng_;
    RngStream gate_rng_;
    std::size_t epoch_ = 0;
    std::int64_t iteration_ = 0;
    std::int64_t jump_start_ = -1;
    std::uint64_t selection_iterations_ = 0;
    bool record_events_ = false;
    bool collect_single_loss_ = false;
    std::vector<TableEvent> events_;
    std::vector<std::vector<std::vector<std::size_t>>> trained_{2};
};

/// Verifies jump bookkeeping from an event log. Returns the number of
/// violations: applied flags whose value differs from the replayed active
/// table, whose producer is not in an earlier commit window, or (when
/// strict_previous_window) not in exactly the preceding window.
struct BookkeepingReport {
    std::size_t applied = 0;
    std::size_t initial_applied = 0;
    std::size_t value_mismatches = 0;
    std::size_t same_window = 0;
    std::size_t not_previous_window = 0;
    std::size_t initial_outside_first_window = 0;

    std::size_t violations() const noexcept {
        return value_mismatches + same_window + not_previous_window + initial_outside_first_window;
    }
};

BookkeepingReport replay_bookkeeping(const std::vector<TableEvent>& events, std::size_t samples,
                                     std::int64_t jump_start, std::size_t jump_step,
                                     bool strict_previous_window);

}  // namespace jumplab
