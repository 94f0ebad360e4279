#pragma once

#include "teg/events.hpp"

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace teg {

struct CopModel {
  double cop_min = 2.5;
  double cop_max = 3.5;
  double slope = 1.0;           // COP(u) = cop_max - slope*u, clamped
  double power_per_util = 1.0;  // power drawn by a fully utilized node

  double cop(double util) const;
};

/// Per-epoch run series. Every series has exactly `duration` entries and
/// is derived purely from the event log (the live path folds the same
/// events as offline replay).
struct RunMetrics {
  std::vector<long> epoch;
  std::vector<long> unplaced;          // Delta-S(t)
  std::vector<double> latency_mean;    // cells examined per placement decision
  std::vector<double> utilization;     // sum leased / total capacity
  std::vector<double> util_variance;   // variance of per-node utilization
  std::vector<double> cop;             // COP at the hottest node
  std::vector<double> energy;          // sum power/COP over nodes
  std::vector<double> re;
  std::vector<double> sdot;
  std::vector<double> gamma;
  std::vector<std::string> phase;
  std::vector<double> h_barrier;
  std::vector<long> burned;            // cumulative
  std::vector<long> evictions;
  std::vector<long> airlocks;
  std::vector<double> fear_premium;    // mean (leased-used)/used

  std::size_t size() const { return epoch.size(); }
  void write_csv(std::ostream& os) const;

  static const char* csv_header();
};

/// Folds the event stream into RunMetrics. The simulation feeds events
/// as they happen; replaying events.jsonl through the same fold yields
/// identical metrics by construction.
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(const CopModel& cop = {}) : cop_(cop) {}

  void consume(const Json& event);
  const RunMetrics& metrics() const { return out_; }

  static RunMetrics replay(std::span<const Json> events, const CopModel& cop = {});

 private:
  void finalize_epoch(long epoch);

  CopModel cop_;
  RunMetrics out_;

  // run shape, from the meta event
  int num_nodes_ = 0;
  double node_capacity_ = 1.0;

  // evolving state
  std::map<int, std::string> agent_phase_;
  std::map<int, int> agent_node_;        // seat node index
  std::map<int, double> agent_leased_;
  std::map<int, double> agent_used_;
  double examined_sum_ = 0.0;
  long examined_count_ = 0;
  long evictions_ = 0;
  long airlocks_ = 0;
  long burned_cum_ = 0;
  double re_ = 0.0, sdot_ = 0.0, gamma_ = 0.0, h_barrier_ = 0.0;
  std::string phase_ = "ColdStasis";
};

}  // namespace teg
