#include "teg/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace teg {

std::vector<BaselinePlacement> baseline_schedule(std::vector<double>& free_capacity,
                                                 const std::vector<BaselineJob>& jobs,
                                                 const BaselineModel& model) {
  const int n = static_cast<int>(free_capacity.size());
  std::vector<BaselinePlacement> out;
  out.reserve(jobs.size());
  for (const auto& job : jobs) {
    BaselinePlacement p;
    p.agent_id = job.agent_id;
    p.request = job.real_demand * (1.0 + model.fear_alpha);
    p.latency = model.decision_latency(n);
    // filter + score: sequential scan, best fit by residual capacity
    int best = -1;
    double best_residual = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (free_capacity[i] + 1e-12 < p.request) continue;
      const double residual = free_capacity[i] - p.request;
      if (residual < best_residual) {
        best_residual = residual;
        best = i;
      }
    }
    p.node = best;
    if (best >= 0) free_capacity[best] -= p.request;
    out.push_back(p);
  }
  return out;
}

BaselineRun run_baseline(const ScenarioConfig& cfg, const BaselineModel& model) {
  BaselineRun run;
  run.model = model;
  const LatticeDomain& dom = cfg.domain;
  const int n_nodes = dom.cells();
  const double usable = 0.95 * cfg.node_capacity;

  MetricsAccumulator acc(cfg.cop);
  auto emit = [&](const Json& e) {
    run.log.emit(e);
    acc.consume(e);
  };

  emit(Json{{"type", "meta"}, {"domain_w", dom.width}, {"domain_h", dom.height},
            {"wrap", dom.wrap}, {"nodes", n_nodes}, {"node_capacity", cfg.node_capacity},
            {"zones_per_side", 1}, {"duration", cfg.duration},
            {"ticks_per_epoch", cfg.ticks_per_epoch}, {"seed", cfg.seed},
            {"mode", "baseline"}, {"cop_min", cfg.cop.cop_min},
            {"cop_max", cfg.cop.cop_max}, {"cop_slope", cfg.cop.slope},
            {"power_per_util", cfg.cop.power_per_util}});

  struct Job {
    AgentSpec spec;
    int id;
    long spawn_epoch;
    long seated_epoch = -1;
    int node = -1;
    double request = 0.0;
    double need = 0.0;
  };
  std::vector<Job> all;
  std::deque<int> pending;
  std::vector<double> free_cap(n_nodes, usable);
  CounterRng spawn_rng(cfg.seed, 0xA5A5A5A5ULL);

  double latency_sum = 0.0;
  long decisions = 0;

  for (long epoch = 0; epoch < cfg.duration; ++epoch) {
    // identical arrival stream to the TEG scenario
    int arriving = epoch == 0 ? cfg.initial_count : 0;
    if (cfg.arrival_rate > 0.0) arriving += spawn_rng.next_poisson(cfg.arrival_rate);
    for (const auto& b : cfg.bursts)
      if (b.epoch == epoch) arriving += b.count;
    for (int i = 0; i < arriving; ++i) {
      Job j;
      j.spec = sample_spec(spawn_rng, cfg, epoch == 0);
      j.id = static_cast<int>(all.size());
      j.spawn_epoch = epoch;
      j.need = std::max(1.0, j.spec.mem_size * cfg.need0_frac);
      all.push_back(j);
      pending.push_back(j.id);
      emit(Json{{"type", "agent"}, {"epoch", epoch}, {"agent", j.id},
                {"phase", "Flight"}, {"x", 0.0}, {"y", 0.0},
                {"wallet", j.spec.e_init}, {"footprint", 0.0}, {"event", "spawn"},
                {"e_init", j.spec.e_init}, {"mem_size", j.spec.mem_size}});
    }

    // centralized dispatch pass
    std::vector<BaselineJob> batch;
    for (int id : pending) batch.push_back({id, all[id].spec.mem_size});
    auto placements = baseline_schedule(free_cap, batch, model);
    std::deque<int> still_pending;
    for (const auto& p : placements) {
      Job& j = all[p.agent_id];
      latency_sum += p.latency;
      ++decisions;
      emit(Json{{"type", "decision"}, {"epoch", epoch}, {"agent", j.id},
                {"examined", static_cast<double>(n_nodes)}});
      if (p.node < 0) {
        still_pending.push_back(j.id);
        continue;
      }
      j.node = p.node;
      j.request = p.request;
      j.seated_epoch = epoch;
      emit(Json{{"type", "agent"}, {"epoch", epoch}, {"agent", j.id},
                {"phase", "Seated"}, {"x", 0.0}, {"y", 0.0},
                {"wallet", j.spec.e_init}, {"footprint", j.request},
                {"event", "seat"}, {"node", p.node}});
      emit(Json{{"type", "node"}, {"epoch", epoch}, {"node", p.node},
                {"event", "grant"}, {"agent", j.id}, {"bytes", j.request},
                {"burned", 0}});
    }
    pending = std::move(still_pending);

    // working sets grow; static leases never shrink or move
    for (auto& j : all) {
      if (j.node < 0 || j.seated_epoch < 0) continue;
      if (j.spec.lifetime > 0 && epoch - j.seated_epoch >= j.spec.lifetime) {
        free_cap[j.node] += j.request;
        emit(Json{{"type", "agent"}, {"epoch", epoch}, {"agent", j.id},
                  {"phase", "Terminated"}, {"x", 0.0}, {"y", 0.0},
                  {"wallet", j.spec.e_init}, {"footprint", 0.0},
                  {"event", "terminate"}});
        j.node = -1;
        continue;
      }
      j.need = std::min(j.spec.mem_size, j.need + j.spec.consumption_rate);
      emit(Json{{"type", "usage"}, {"epoch", epoch}, {"agent", j.id},
                {"node", j.node}, {"leased", j.request},
                {"used", std::min(j.need, j.spec.mem_size)}});
    }
    emit(Json{{"type", "epoch_end"}, {"epoch", epoch}});
  }

  run.metrics = acc.metrics();
  run.mean_decision_latency = decisions ? latency_sum / decisions : 0.0;
  run.queue_length = model.queue_length(n_nodes);
  return run;
}

}  // namespace teg
