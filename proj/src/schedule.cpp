#include "jumplab/schedule.hpp"

#include <algorithm>
#include <chrono>

#include <fmt/format.h>

namespace jumplab {

Strategy parse_strategy(std::string_view name) {
    if (name == "standard") return Strategy::standard;
    if (name == "self_update") return Strategy::self_update;
    if (name == "cross_update") return Strategy::cross_update;
    if (name == "jump_update") return Strategy::jump_update;
    fail(ErrorKind::config, fmt::format("unknown strategy '{}'", name));
}

std::string_view to_string(Strategy s) noexcept {
    switch (s) {
        case Strategy::standard: return "standard";
        case Strategy::self_update: return "self_update";
        case Strategy::cross_update: return "cross_update";
        case Strategy::jump_update: return "jump_update";
    }
    return "unknown";
}

void ScheduleConfig::validate() const {
    if (!(effect_rate > 0.0 && effect_rate <= 1.0)) {
        fail(ErrorKind::config, fmt::format("schedule: effect_rate {} outside (0, 1]", effect_rate));
    }
    if (jump_step == 1) fail(ErrorKind::config, "schedule: jump_step must be >= 2");
}

IdentifierTable::IdentifierTable(std::size_t samples, std::size_t jump_step)
    : jump_step_(jump_step),
      active_(samples, true),
      pending_(samples, true),
      active_produced_at_(samples, kInitialEntry),
      pending_produced_at_(samples, kInitialEntry) {
    if (jump_step < 2) fail(ErrorKind::config, fmt::format("jump step S={} must be >= 2", jump_step));
}

void IdentifierTable::write(std::size_t sample, bool clean, std::int64_t iteration) {
    pending_.at(sample) = clean;
    pending_produced_at_.at(sample) = iteration;
}

void IdentifierTable::commit() {
    active_ = pending_;
    active_produced_at_ = pending_produced_at_;
    ++commits_;
}

void IdentifierTable::reset_all_true() {
    std::fill(active_.begin(), active_.end(), true);
    std::fill(active_produced_at_.begin(), active_produced_at_.end(), kInitialEntry);
}

bool apply_effect_rate(double r, RngStream& rng) {
    if (!(r > 0.0 && r <= 1.0)) fail(ErrorKind::config, fmt::format("effect rate {} outside (0, 1]", r));
    return rng.uniform() < r;
}

ErrorFlowDiagnostics error_flow(Strategy s, std::uint64_t selection_iterations, std::size_t dataset_size,
                                double effect_rate, std::size_t iterations_per_epoch) {
    ErrorFlowDiagnostics d;
    d.selection_iterations = s == Strategy::standard ? 0 : selection_iterations;
    switch (s) {
        case Strategy::standard:
        case Strategy::self_update: d.sub_flows = 1; break;
        case Strategy::cross_update: d.sub_flows = 2; break;
        case Strategy::jump_update: d.sub_flows = std::max<std::size_t>(dataset_size, 1); break;
    }
    d.per_flow = d.selection_iterations / d.sub_flows;
    d.per_flow_exact = static_cast<double>(d.selection_iterations) / static_cast<double>(d.sub_flows);
    d.accumulation_proxy =
        s == Strategy::standard ? 0.0 : effect_rate * static_cast<double>(iterations_per_epoch);
    return d;
}

TrainingSession::TrainingSession(const NoisyDataset& train, const HadamardCodebook& codebook,
                                 TrainConfig train_cfg, SelectionConfig selection_cfg,
                                 ScheduleConfig schedule_cfg, std::uint64_t seed)
    : train_(&train),
      codebook_(&codebook),
      train_cfg_(std::move(train_cfg)),
      selection_cfg_(selection_cfg),
      schedule_cfg_(schedule_cfg),
      table_(train.size(), 2),
      shuffle_rng_(RngStream(seed).derive("shuffle")),
      gate_rng_(RngStream(seed).derive("effect-rate")) {
    train_cfg_.validate();
    selection_cfg_.validate();
    schedule_cfg_.validate();
    if (train.size() == 0) fail(ErrorKind::config, "training set is empty");
    if (codebook.classes() != train.classes) {
        fail(ErrorKind::config, fmt::format("codebook has {} classes, dataset has {}", codebook.classes(),
                                            train.classes));
    }
    const std::size_t per_epoch = iterations_per_epoch();
    const std::size_t total = per_epoch * train_cfg_.epochs;
    const std::size_t step = schedule_cfg_.jump_step ? schedule_cfg_.jump_step : per_epoch;
    if (schedule_cfg_.strategy == Strategy::jump_update) {
        if (step < 2 || step > total) {
            fail(ErrorKind::config, fmt::format("jump step S={} outside [2, {}]", step, total));
        }
        table_ = IdentifierTable(train.size(), step);
    }

    NetShape shape;
    shape.input_dim = train.dim();
    shape.trunk_widths = train_cfg_.trunk_widths;
    shape.classes = train.classes;
    shape.code_bits = codebook.bits();
    const RngStream root(seed);
    const std::size_t count = schedule_cfg_.strategy == Strategy::cross_update ? 2 : 1;
    for (std::size_t k = 0; k < count; ++k) {
        RngStream init = root.derive(fmt::format("init/net{}", k));
        nets_.push_back(DualHeadNet::initialize(shape, train_cfg_.temperature, init));
        optimizers_.emplace_back();
    }
}

std::size_t TrainingSession::iterations_per_epoch() const noexcept {
    return (train_->size() + train_cfg_.batch_size - 1) / train_cfg_.batch_size;
}

std::vector<TrainingSession::Batch> TrainingSession::make_batches() {
    const auto order = shuffle_rng_.permutation(train_->size());
    std::vector<Batch> batches;
    for (std::size_t start = 0; start < order.size(); start += train_cfg_.batch_size) {
        const std::size_t len = std::min(train_cfg_.batch_size, order.size() - start);
        Batch b;
        b.indices.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(start + len));
        b.features.resize(static_cast<Eigen::Index>(len), train_->features.cols());
        for (std::size_t i = 0; i < len; ++i) {
            b.features.row(static_cast<Eigen::Index>(i)) =
                train_->features.row(static_cast<Eigen::Index>(b.indices[i]));
            b.labels.push_back(train_->noisy_labels[b.indices[i]]);
        }
        b.targets = codebook_->targets_for(b.labels);
        batches.push_back(std::move(b));
    }
    return batches;
}

void TrainingSession::init_stats(EpochStats& stats, bool warmup, double lr) const {
    const std::size_t n = train_->size();
    stats.epoch = epoch_;
    stats.strategy = schedule_cfg_.strategy;
    stats.warmup = warmup;
    stats.lr = lr;
    stats.selection.assign(n, true);
    if (schedule_cfg_.strategy == Strategy::cross_update) stats.peer_selection.assign(n, true);
}

void TrainingSession::record_single_loss(EpochStats& stats, const Batch& batch,
                                         const std::vector<SelectionDecision>& decisions) {
    const std::size_t n = train_->size();
    if (stats.variance.size() != n) {
        stats.variance.assign(n, 0.0);
        stats.bce.assign(n, 0.0);
        stats.detection_flags.assign(n, false);
        stats.classifier_flags.assign(n, false);
        stats.combined_flags.assign(n, false);
    }
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        const auto& d = decisions[i];
        const std::size_t idx = batch.indices[i];
        stats.variance[idx] = d.variance;
        stats.bce[idx] = d.bce_loss;
        stats.detection_flags[idx] = d.detection_flag;
        stats.classifier_flags[idx] = d.classifier_flag;
        stats.combined_flags[idx] = d.combined_flag;
    }
}

double TrainingSession::train_step(std::size_t k, const ForwardCache& cache, const Batch& batch,
                                   const std::vector<double>& weights, double lr) {
    DualHeadNet& net = nets_[k];
    const auto loss = combined_loss(net, cache, batch.labels, batch.targets, weights,
                                    train_cfg_.detection_weight);
    if (!std::isfinite(loss.total)) {
        fail(ErrorKind::numeric, "non-finite loss");
    }
    optimizers_[k].step(net, loss.grads, lr, train_cfg_.momentum, train_cfg_.weight_decay);
    if (!net.parameters_finite()) {
        fail(ErrorKind::numeric, "non-finite parameters after update");
    }
    if (record_events_) {
        std::vector<std::size_t> used;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] > 0.0) used.push_back(batch.indices[i]);
        }
        trained_[k].push_back(std::move(used));
    }
    return loss.total;
}

void TrainingSession::finish_flow(EpochStats& stats) {
    stats.commit_count = table_.commit_count();
    stats.flow = error_flow(schedule_cfg_.strategy, selection_iterations_, train_->size(),
                            schedule_cfg_.effect_rate, iterations_per_epoch());
}

EpochStats TrainingSession::run_epoch() {
    if (epoch_ >= train_cfg_.epochs) fail(ErrorKind::config, "training already finished");
    const double lr = cosine_lr(epoch_, train_cfg_.epochs, train_cfg_.lr0, train_cfg_.lr_min);
    for (auto& t : trained_) t.clear();
    const auto start = std::chrono::steady_clock::now();
    EpochStats stats;
    try {
        if (epoch_ < train_cfg_.warmup_epochs) {
            stats = warmup_epoch(lr);
        } else if (schedule_cfg_.strategy == Strategy::jump_update) {
            stats = jump_train_epoch(lr);
        } else {
            stats = baseline_train_epoch(lr);
        }
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::numeric) throw;
        fail(ErrorKind::numeric, fmt::format("epoch {} iteration {}: {}", epoch_, iteration_, e.what()));
    }
    stats.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    finish_flow(stats);
    ++epoch_;
    return stats;
}

SelectionConfig TrainingSession::current_selection() const {
    SelectionConfig cfg = selection_cfg_;
    if (epoch_ >= train_cfg_.warmup_epochs) cfg.tau = cfg.tau_after(epoch_ - train_cfg_.warmup_epochs);
    return cfg;
}

EpochStats TrainingSession::warmup_epoch(double lr) {
    const SelectionConfig& selection = selection_cfg_;
    EpochStats stats;
    init_stats(stats, true, lr);
    const bool jump = schedule_cfg_.strategy == Strategy::jump_update;
    double loss_sum = 0.0;
    for (const auto& batch : make_batches()) {
        const std::vector<double> weights(batch.indices.size(), 1.0);
        for (std::size_t k = 0; k < nets_.size(); ++k) {
            const ForwardCache cache = nets_[k].forward_cached(batch.features);
            ++stats.forward_passes;
            if (k == 0 && (jump || collect_single_loss_)) {
                const auto decisions = select_single_loss(cache.out.probs, cache.out.embeddings, batch.targets,
                                                          batch.labels, batch.indices, selection);
                record_single_loss(stats, batch, decisions);
                if (jump) {
                    for (const auto& d : decisions) {
                        table_.write(d.sample_index, d.combined_flag, iteration_);
                        if (record_events_) {
                            events_.push_back({TableEvent::Kind::write, iteration_, d.sample_index,
                                               d.combined_flag, kInitialEntry});
                        }
                    }
                }
            }
            loss_sum += train_step(k, cache, batch, weights, lr);
            ++stats.updates;
        }
        stats.selected_count += batch.indices.size();
        ++stats.iterations;
        ++iteration_;
    }
    if (jump && !stats.combined_flags.empty()) stats.selection = stats.combined_flags;
    stats.train_loss = stats.updates ? loss_sum / static_cast<double>(stats.updates) : 0.0;
    return stats;
}

EpochStats TrainingSession::jump_train_epoch(double lr) {
    const SelectionConfig selection = current_selection();
    if (jump_start_ < 0) {
        jump_start_ = iteration_;
        table_.reset_all_true();
    }
    EpochStats stats;
    init_stats(stats, false, lr);
    DualHeadNet& net = nets_.front();
    const auto step = static_cast<std::int64_t>(table_.jump_step());
    double loss_sum = 0.0;
    double lag_sum = 0.0;
    std::size_t lag_count = 0;

    for (const auto& batch : make_batches()) {
        const ForwardCache cache = net.forward_cached(batch.features);
        ++stats.forward_passes;

        // (1) fresh identifiers go to the pending buffer only.
        const auto decisions = select_single_loss(cache.out.probs, cache.out.embeddings, batch.targets,
                                                  batch.labels, batch.indices, selection);
        record_single_loss(stats, batch, decisions);
        for (const auto& d : decisions) {
            table_.write(d.sample_index, d.combined_flag, iteration_);
            if (record_events_) {
                events_.push_back({TableEvent::Kind::write, iteration_, d.sample_index, d.combined_flag,
                                   kInitialEntry});
            }
        }

        // (2) update on samples the committed table marks clean.
        const bool gate = apply_effect_rate(schedule_cfg_.effect_rate, gate_rng_);
        std::vector<double> weights(batch.indices.size(), 1.0);
        if (gate) {
            ++selection_iterations_;
            ++stats.gated_iterations;
            for (std::size_t i = 0; i < batch.indices.size(); ++i) {
                const std::size_t idx = batch.indices[i];
                weights[i] = table_.active(idx) ? 1.0 : 0.0;
                const std::int64_t produced = table_.active_produced_at(idx);
                if (produced != kInitialEntry) {
                    lag_sum += static_cast<double>(iteration_ - produced);
                    ++lag_count;
                }
                if (record_events_) {
                    events_.push_back({TableEvent::Kind::apply, iteration_, idx, table_.active(idx), produced});
                }
            }
        }
        const auto used = static_cast<std::size_t>(std::count(weights.begin(), weights.end(), 1.0));
        if (used == 0) {
            ++stats.skipped_batches;
        } else {
            loss_sum += train_step(0, cache, batch, weights, lr);
            ++stats.updates;
            stats.selected_count += used;
        }

        // (3) commit at the end of every S-iteration window.
        if ((iteration_ - jump_start_ + 1) % step == 0) {
            table_.commit();
            if (record_events_) events_.push_back({TableEvent::Kind::commit, iteration_, 0, false, kInitialEntry});
        }
        ++stats.iterations;
        ++iteration_;
    }
    stats.selection = stats.combined_flags;
    stats.mean_lag = lag_count ? lag_sum / static_cast<double>(lag_count) : 0.0;
    stats.train_loss = stats.updates ? loss_sum / static_cast<double>(stats.updates) : 0.0;
    return stats;
}

EpochStats TrainingSession::baseline_train_epoch(double lr) {
    const SelectionConfig selection = current_selection();
    const Strategy strategy = schedule_cfg_.strategy;
    if (strategy == Strategy::cross_update && nets_.size() < 2) {
        fail(ErrorKind::config, "cross_update needs two networks");
    }
    if (strategy == Strategy::jump_update) fail(ErrorKind::config, "baseline epoch called for jump_update");
    EpochStats stats;
    init_stats(stats, false, lr);
    const double keep = selection_cfg_.small_loss_keep_ratio;
    double loss_sum = 0.0;

    for (const auto& batch : make_batches()) {
        const std::size_t m = batch.indices.size();
        std::vector<ForwardCache> caches;
        std::vector<std::vector<bool>> masks;
        for (auto& net : nets_) {
            caches.push_back(net.forward_cached(batch.features));
            ++stats.forward_passes;
            if (strategy == Strategy::standard) {
                masks.emplace_back(m, true);
            } else {
                const Vector ce = per_sample_cross_entropy(caches.back().out.probs, batch.labels);
                masks.push_back(small_loss_select(std::span<const double>(ce.data(), m), keep));
            }
        }
        if (collect_single_loss_) {
            record_single_loss(stats, batch,
                               select_single_loss(caches[0].out.probs, caches[0].out.embeddings, batch.targets,
                                                  batch.labels, batch.indices, selection));
        }
        for (std::size_t i = 0; i < m; ++i) {
            stats.selection[batch.indices[i]] = masks[0][i];
            if (nets_.size() > 1) stats.peer_selection[batch.indices[i]] = masks[1][i];
        }

        bool gate = false;
        if (strategy != Strategy::standard) {
            gate = apply_effect_rate(schedule_cfg_.effect_rate, gate_rng_);
            if (gate) {
                ++selection_iterations_;
                ++stats.gated_iterations;
            }
        }
        bool any_update = false;
        for (std::size_t k = 0; k < nets_.size(); ++k) {
            // Cross-update trains each net on its peer's selection.
            const auto& mask = strategy == Strategy::cross_update ? masks[1 - k] : masks[k];
            std::vector<double> weights(m, 1.0);
            if (gate) {
                for (std::size_t i = 0; i < m; ++i) weights[i] = mask[i] ? 1.0 : 0.0;
            }
            const auto used = static_cast<std::size_t>(std::count(weights.begin(), weights.end(), 1.0));
            if (used == 0) continue;
            loss_sum += train_step(k, caches[k], batch, weights, lr);
            ++stats.updates;
            if (k == 0) stats.selected_count += used;
            any_update = true;
        }
        if (!any_update) ++stats.skipped_batches;
        ++stats.iterations;
        ++iteration_;
    }
    stats.train_loss = stats.updates ? loss_sum / static_cast<double>(stats.updates) : 0.0;
    return stats;
}

BookkeepingReport replay_bookkeeping(const std::vector<TableEvent>& events, std::size_t samples,
                                     std::int64_t jump_start, std::size_t jump_step,
                                     bool strict_previous_window) {
    BookkeepingReport report;
    std::vector<bool> pending(samples, true);
    std::vector<std::int64_t> pending_at(samples, kInitialEntry);
    std::vector<bool> active(samples, true);
    std::vector<std::int64_t> active_at(samples, kInitialEntry);
    const auto step = static_cast<std::int64_t>(jump_step);
    // Floor division so warm-up iterations fall in negative windows.
    const auto window = [&](std::int64_t t) {
        const std::int64_t rel = t - jump_start;
        return rel >= 0 ? rel / step : -((-rel + step - 1) / step);
    };
    for (const auto& e : events) {
        switch (e.kind) {
            case TableEvent::Kind::write:
                pending[e.sample] = e.value;
                pending_at[e.sample] = e.iteration;
                break;
            case TableEvent::Kind::commit:
                active = pending;
                active_at = pending_at;
                break;
            case TableEvent::Kind::apply: {
                ++report.applied;
                if (e.value != active[e.sample] || e.produced_at != active_at[e.sample]) {
                    ++report.value_mismatches;
                }
                if (e.produced_at == kInitialEntry) {
                    ++report.initial_applied;
                    if (window(e.iteration) != 0) ++report.initial_outside_first_window;
                    break;
                }
                const auto produced_window = window(e.produced_at);
                const auto applied_window = window(e.iteration);
                if (produced_window >= applied_window) ++report.same_window;
                else if (strict_previous_window && produced_window != applied_window - 1) {
                    ++report.not_previous_window;
                }
                break;
            }
        }
    }
    return report;
}

}  // namespace jumplab
