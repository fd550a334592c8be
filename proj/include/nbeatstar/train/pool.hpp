#pragma once

#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "nbeatstar/model/checkpoint.hpp"
#include "nbeatstar/train/trainer.hpp"

namespace nbeatstar::train {

inline constexpr const char* kPoolFormat = "nbeatstar-pool";

struct PoolOptions {
    /// Where checkpoints and manifest.json go; empty keeps the pool in memory only.
    std::filesystem::path directory;
    /// Worker threads; 0 uses the hardware concurrency.
    std::size_t threads = 1;
    /// Reuse existing member checkpoints whose hash and seed match.
    bool resume = true;
    /// Extra top-level fields copied into the manifest.
    nlohmann::json extra = nlohmann::json::object();
};

struct Pool {
    std::vector<TrainedMember> members;
    nlohmann::json manifest;
};

inline std::uint64_t member_seed(std::uint64_t master_seed, std::size_t index) {
    return util::derive_seed(master_seed, index);
}

inline std::string member_checkpoint_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "members/member_%04zu.json", index);
    return buf;
}

namespace detail {

inline nlohmann::json trace_to_json(const std::vector<StepLoss>& trace) {
    std::vector<double> total, pm, nm;
    for (const auto& s : trace) {
        total.push_back(s.total);
        pm.push_back(s.pmape);
        nm.push_back(s.nmse);
    }
    return {{"total", total}, {"pmape", pm}, {"nmse", nm}};
}

inline std::vector<StepLoss> trace_from_json(const nlohmann::json& j) {
    auto total = j.at("total").get<std::vector<double>>();
    auto pm = j.at("pmape").get<std::vector<double>>();
    auto nm = j.at("nmse").get<std::vector<double>>();
    std::vector<StepLoss> out;
    for (std::size_t i = 0; i < total.size(); ++i) out.push_back(StepLoss{total[i], pm.at(i), nm.at(i)});
    return out;
}

inline nlohmann::json member_entry(const TrainedMember& m, const TrainSchedule& s) {
    auto fl = m.final_loss(s.batches_per_epoch);
    return {{"index", m.index},
            {"seed", m.seed},
            {"checkpoint", m.checkpoint},
            {"final_loss", {{"total", fl.total}, {"pmape", fl.pmape}, {"nmse", fl.nmse}}},
            {"first_loss", m.trace.empty() ? 0.0 : m.trace.front().total}};
}

}  // namespace detail

inline nlohmann::json make_manifest(const ModelConfig& cfg, const TrainSchedule& s, const std::vector<TrainedMember>& members,
                                    const nlohmann::json& extra) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& m : members) entries.push_back(detail::member_entry(m, s));
    nlohmann::json j{{"format", kPoolFormat}, {"version", 1},   {"config_hash", training_hash(cfg, s)},
                     {"master_seed", s.seed}, {"model", cfg},   {"schedule", s},
                     {"members", entries}};
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    return j;
}

/// Trains `schedule.pool_size` members that differ only in their derived seeds.
/// Members train concurrently; the manifest is rewritten (sorted by index) as each finishes.
inline Pool build_pool(const std::vector<std::vector<Window>>& per_series, const ModelConfig& cfg,
                       const TrainSchedule& schedule, const PoolOptions& opts = {}) {
    cfg.validate();
    schedule.validate();
    const std::string hash = training_hash(cfg, schedule);
    const bool persist = !opts.directory.empty();
    if (persist) std::filesystem::create_directories(opts.directory / "members");

    std::vector<std::optional<TrainedMember>> slots(schedule.pool_size);
    std::mutex manifest_mutex;
    auto write_manifest = [&] {
        std::vector<TrainedMember> done;
        for (const auto& s : slots) {
            if (s) done.push_back(*s);
        }
        auto j = make_manifest(cfg, schedule, done, opts.extra);
        std::ofstream out(opts.directory / "manifest.json");
        out << j.dump(2) << '\n';
    };

    auto run_member = [&](std::size_t i) {
        const std::uint64_t seed = member_seed(schedule.seed, i);
        const std::string rel = member_checkpoint_name(i);
        const auto path = opts.directory / rel;
        if (persist && opts.resume && std::filesystem::exists(path)) {
            try {
                auto ck = model::load_checkpoint(path);
                if (ck.config_hash == hash && ck.provenance.value("member_seed", std::uint64_t{0}) == seed &&
                    ck.model.config() == cfg) {
                    TrainedMember m{i, seed, std::move(ck.model), detail::trace_from_json(ck.provenance.at("loss_trace")),
                                    hash, rel};
                    std::lock_guard lock(manifest_mutex);
                    slots[i] = std::move(m);
                    write_manifest();
                    return;
                }
            } catch (const std::exception&) {
                // unreadable or stale checkpoint: retrain
            }
        }
        TrainedMember m = train_one(per_series, cfg, schedule, seed);
        m.index = i;
        if (persist) {
            m.checkpoint = rel;
            nlohmann::json prov{{"master_seed", schedule.seed}, {"member_index", i}, {"member_seed", seed},
                                {"schedule", schedule}, {"loss_trace", detail::trace_to_json(m.trace)}};
            model::save_checkpoint(path, m.model, hash, prov);
        }
        std::lock_guard lock(manifest_mutex);
        slots[i] = std::move(m);
        if (persist) write_manifest();
    };

    std::size_t threads = opts.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : opts.threads;
    threads = std::min(threads, schedule.pool_size);
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= schedule.pool_size) return;
            {
                std::lock_guard lock(error_mutex);
                if (error) return;
            }
            try {
                run_member(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);

    Pool out;
    for (auto& s : slots) out.members.push_back(std::move(*s));
    out.manifest = make_manifest(cfg, schedule, out.members, opts.extra);
    if (persist) {
        std::ofstream f(opts.directory / "manifest.json");
        f << out.manifest.dump(2) << '\n';
    }
    return out;
}

/// Reloads every member listed in a manifest written by build_pool.
inline Pool load_pool(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw Error("cannot open pool manifest '" + manifest_path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw Error("pool manifest '" + manifest_path.string() + "': " + e.what());
    }
    if (j.value("format", "") != kPoolFormat) throw Error("not a pool manifest: '" + manifest_path.string() + "'");
    const auto dir = manifest_path.parent_path();
    Pool p;
    for (const auto& e : j.at("members")) {
        const auto rel = e.at("checkpoint").get<std::string>();
        auto ck = model::load_checkpoint(dir / rel);
        if (ck.config_hash != j.at("config_hash").get<std::string>()) {
            throw Error("checkpoint '" + rel + "' does not match the manifest config hash");
        }
        TrainedMember m{e.at("index").get<std::size_t>(), e.at("seed").get<std::uint64_t>(), std::move(ck.model), {},
                        ck.config_hash, rel};
        if (ck.provenance.contains("loss_trace")) m.trace = detail::trace_from_json(ck.provenance["loss_trace"]);
        p.members.push_back(std::move(m));
    }
    p.manifest = std::move(j);
    return p;
}

}  // namespace nbeatstar::train
