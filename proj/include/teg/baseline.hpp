#pragma once

#include "teg/events.hpp"
#include "teg/metrics.hpp"
#include "teg/scenario.hpp"

#include <limits>
#include <vector>

namespace teg {

/// Centralized legacy scheduler model: per-decision latency N*tau, M/M/1
/// queueing behind a single dispatch loop.
struct BaselineModel {
  double tau = 1e-3;        // per-node scan cost, seconds
  double arrival_rate = 0;  // lambda, jobs/s
  double fear_alpha = 0.4;  // static over-provisioning ratio

  double service_rate(int n_nodes) const { return 1.0 / (n_nodes * tau); }
  double decision_latency(int n_nodes) const { return n_nodes * tau; }

  /// Little's-law queue length; infinity sentinel at/after the pole.
  double queue_length(int n_nodes) const {
    const double mu = service_rate(n_nodes);
    if (arrival_rate >= mu) return std::numeric_limits<double>::infinity();
    return arrival_rate / (mu - arrival_rate);
  }
};

struct BaselinePlacement {
  int agent_id = -1;
  int node = -1;  // -1: no fit
  double request = 0.0;
  double latency = 0.0;  // modeled seconds
};

struct BaselineJob {
  int agent_id = -1;
  double real_demand = 0.0;  // peak working set
};

/// One centralized scheduling pass: filter + score (best fit by residual
/// free capacity) over every node for every job, requests inflated by the
/// fear premium. free_capacity is mutated as jobs place.
std::vector<BaselinePlacement> baseline_schedule(std::vector<double>& free_capacity,
                                                 const std::vector<BaselineJob>& jobs,
                                                 const BaselineModel& model);

/// Full baseline run: same arrival stream as the TEG scenario, static
/// 1+alpha leases, greedy packing. Emits the same event schema so the
/// shared metrics fold applies.
struct BaselineRun {
  EventLog log;
  RunMetrics metrics;
  BaselineModel model;
  double mean_decision_latency = 0.0;
  double queue_length = 0.0;
};

BaselineRun run_baseline(const ScenarioConfig& cfg, const BaselineModel& model);

}  // namespace teg
