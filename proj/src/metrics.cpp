#include "teg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace teg {

double CopModel::cop(double util) const {
  return std::clamp(cop_max - slope * util, cop_min, cop_max);
}

const char* RunMetrics::csv_header() {
  return "epoch,unplaced,latency_mean,utilization,util_variance,cop,energy,re,sdot,"
         "gamma,phase,h_barrier,burned,evictions,airlocks,fear_premium";
}

void RunMetrics::write_csv(std::ostream& os) const {
  os << csv_header() << '\n';
  for (std::size_t i = 0; i < size(); ++i) {
    os << epoch[i] << ',' << unplaced[i] << ',' << latency_mean[i] << ','
       << utilization[i] << ',' << util_variance[i] << ',' << cop[i] << ',' << energy[i]
       << ',' << re[i] << ',' << sdot[i] << ',' << gamma[i] << ',' << phase[i] << ','
       << h_barrier[i] << ',' << burned[i] << ',' << evictions[i] << ',' << airlocks[i]
       << ',' << fear_premium[i] << '\n';
  }
}

void MetricsAccumulator::consume(const Json& event) {
  const std::string type = event.value("type", "");
  if (type == "meta") {
    num_nodes_ = event.value("nodes", 0);
    node_capacity_ = event.value("node_capacity", 1.0);
  } else if (type == "agent") {
    const int id = event.at("agent").get<int>();
    const std::string ev = event.value("event", "");
    agent_phase_[id] = event.value("phase", "");
    if (ev == "seat") agent_node_[id] = event.value("node", -1);
    if (ev == "evict") ++evictions_;
    if (ev == "evict" || ev == "terminate" || ev == "escape") {
      agent_node_.erase(id);
      agent_leased_.erase(id);
      agent_used_.erase(id);
    }
  } else if (type == "usage") {
    const int id = event.at("agent").get<int>();
    agent_leased_[id] = event.value("leased", 0.0);
    agent_used_[id] = event.value("used", 0.0);
  } else if (type == "decision") {
    examined_sum_ += event.value("examined", 0.0);
    ++examined_count_;
  } else if (type == "node") {
    if (event.value("event", "") == "escape") ++airlocks_;
  } else if (type == "governor") {
    re_ = event.value("re", 0.0);
    sdot_ = event.value("sdot", 0.0);
    gamma_ = event.value("gamma_safe", 0.0);
    h_barrier_ = event.value("h_barrier", 0.0);
    phase_ = event.value("phase", "");
  } else if (type == "supply") {
    burned_cum_ = event.value("burned", 0L);
  } else if (type == "epoch_end") {
    finalize_epoch(event.at("epoch").get<long>());
  }
}

void MetricsAccumulator::finalize_epoch(long epoch) {
  out_.epoch.push_back(epoch);

  long unplaced = 0;
  for (const auto& [id, ph] : agent_phase_)
    if (ph == "Flight" || ph == "Evacuating") ++unplaced;
  out_.unplaced.push_back(unplaced);

  out_.latency_mean.push_back(examined_count_ ? examined_sum_ / examined_count_ : 0.0);
  examined_sum_ = 0.0;
  examined_count_ = 0;

  std::vector<double> node_alloc(std::max(num_nodes_, 1), 0.0);
  double leased_total = 0.0;
  for (const auto& [id, leased] : agent_leased_) {
    leased_total += leased;
    auto it = agent_node_.find(id);
    if (it != agent_node_.end() && it->second >= 0 && it->second < num_nodes_)
      node_alloc[it->second] += leased;
  }
  const double cap_total = std::max(1e-12, num_nodes_ * node_capacity_);
  out_.utilization.push_back(leased_total / cap_total);

  double mean_u = 0.0, max_u = 0.0;
  for (double a : node_alloc) {
    const double u = a / std::max(1e-12, node_capacity_);
    mean_u += u;
    max_u = std::max(max_u, u);
  }
  mean_u /= node_alloc.size();
  double var = 0.0;
  for (double a : node_alloc) {
    const double u = a / std::max(1e-12, node_capacity_);
    var += (u - mean_u) * (u - mean_u);
  }
  var /= node_alloc.size();
  out_.util_variance.push_back(var);

  out_.cop.push_back(cop_.cop(max_u));
  double energy = 0.0;
  for (double a : node_alloc) {
    const double u = a / std::max(1e-12, node_capacity_);
    energy += cop_.power_per_util * u / cop_.cop(u);
  }
  out_.energy.push_back(energy);

  out_.re.push_back(re_);
  out_.sdot.push_back(sdot_);
  out_.gamma.push_back(gamma_);
  out_.phase.push_back(phase_);
  out_.h_barrier.push_back(h_barrier_);
  out_.burned.push_back(burned_cum_);
  out_.evictions.push_back(evictions_);
  out_.airlocks.push_back(airlocks_);
  evictions_ = 0;
  airlocks_ = 0;

  double fp_sum = 0.0;
  long fp_n = 0;
  for (const auto& [id, leased] : agent_leased_) {
    auto itu = agent_used_.find(id);
    if (itu == agent_used_.end() || itu->second <= 0.0) continue;
    fp_sum += (leased - itu->second) / itu->second;
    ++fp_n;
  }
  out_.fear_premium.push_back(fp_n ? fp_sum / fp_n : 0.0);
}

RunMetrics MetricsAccumulator::replay(std::span<const Json> events, const CopModel& cop) {
  MetricsAccumulator acc(cop);
  for (const auto& e : events) acc.consume(e);
  return acc.metrics();
}

}  // namespace teg
