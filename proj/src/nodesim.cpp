#include "teg/nodesim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace teg {

const char* to_string(CgroupMode m) {
  switch (m) {
    case CgroupMode::Normal: return "Normal";
    case CgroupMode::Throttled: return "Throttled";
    case CgroupMode::Frozen: return "Frozen";
    case CgroupMode::Suspended: return "Suspended";
  }
  return "?";
}

const char* to_string(NodeEventKind k) {
  switch (k) {
    case NodeEventKind::Grant: return "grant";
    case NodeEventKind::Glassy: return "glassy";
    case NodeEventKind::Freeze: return "freeze";
    case NodeEventKind::Suspend: return "suspend";
    case NodeEventKind::Escape: return "escape";
    case NodeEventKind::Resume: return "resume";
    case NodeEventKind::Terminate: return "terminate";
  }
  return "?";
}

Resident* NodeState::find_resident(int agent_id) {
  for (auto& r : residents)
    if (r.agent_id == agent_id) return &r;
  return nullptr;
}

const Resident* NodeState::find_resident(int agent_id) const {
  for (const auto& r : residents)
    if (r.agent_id == agent_id) return &r;
  return nullptr;
}

void NodeState::add_resident(int agent_id, double footprint, CgroupMode mode) {
  residents.push_back({agent_id, footprint, mode, 0.0});
  allocated += footprint;
  audit();
}

void NodeState::remove_resident(int agent_id) {
  for (auto it = residents.begin(); it != residents.end(); ++it) {
    if (it->agent_id == agent_id) {
      allocated -= it->footprint;
      residents.erase(it);
      audit();
      return;
    }
  }
  throw std::logic_error("remove_resident: unknown resident");
}

double NodeState::recount() const {
  double sum = buffer_in_use;
  for (const auto& r : residents) sum += r.footprint;
  for (const auto& z : zram) sum += z.compressed;
  return sum;
}

void NodeState::audit() const {
  if (std::abs(recount() - allocated) > 1e-9)
    throw std::logic_error("node memory accounting drift");
  if (allocated > c_total + 1e-9) throw std::logic_error("node over-allocated (OOM)");
}

ExpandResult try_expand(NodeState& node, int agent_id, double delta) {
  if (delta <= 0.0) throw std::invalid_argument("expansion delta must be > 0");
  Resident* r = node.find_resident(agent_id);
  if (!r) throw std::invalid_argument("try_expand: unknown resident");
  if (node.allocated + delta <= node.usable_cap() + 1e-12) {
    r->footprint += delta;
    node.allocated += delta;
    if (r->mode == CgroupMode::Throttled) r->mode = CgroupMode::Normal;
    r->pending_expand = 0.0;
    node.audit();
    return ExpandResult::Granted;
  }
  r->mode = CgroupMode::Throttled;  // glassy: expansion rate arrested
  r->pending_expand = delta;
  return ExpandResult::GlassyTriggered;
}

int select_weak(const NodeState& node, const std::vector<Tokens>& wallet_of) {
  if (node.residents.size() < 2)
    throw std::invalid_argument("select_weak needs >= 2 residents");
  const Resident* best = nullptr;
  for (const auto& r : node.residents) {
    if (!best) {
      best = &r;
      continue;
    }
    const Tokens wb = wallet_of[best->agent_id], wr = wallet_of[r.agent_id];
    if (wr < wb ||
        (wr == wb && (r.footprint < best->footprint ||
                      (r.footprint == best->footprint && r.agent_id < best->agent_id))))
      best = &r;
  }
  return best->agent_id;
}

std::vector<NodeEvent> run_airlock(NodeState& node, const AirlockPlan& plan,
                                   double weak_checkpoint_size) {
  if (weak_checkpoint_size > node.buffer_reserved + 1e-12)
    throw std::invalid_argument("checkpoint exceeds the 5% emergency buffer");
  Resident* weak = node.find_resident(plan.weak);
  Resident* strong = node.find_resident(plan.strong);
  if (!weak || !strong) throw std::invalid_argument("airlock agents not resident");

  std::vector<NodeEvent> events;
  auto emit = [&](NodeEventKind k, int agent, double bytes) {
    node.audit();
    events.push_back({k, agent, bytes, node.allocated});
  };

  // 1. zRAM ice sealing: freeze the weak agent, compress 3x
  const double f = weak->footprint;
  const double sealed = std::ceil(f / 3.0);
  weak->mode = CgroupMode::Frozen;
  weak->footprint = 0.0;
  node.zram.push_back({plan.weak, sealed});
  node.allocated -= (f - sealed);
  emit(NodeEventKind::Freeze, plan.weak, f - sealed);

  // 2. suspension mutex: lock the strong agent if its pending expansion
  // still does not fit
  bool suspended = false;
  if (strong->pending_expand > node.free_space() + 1e-12) {
    strong->mode = CgroupMode::Suspended;
    suspended = true;
    emit(NodeEventKind::Suspend, plan.strong, strong->footprint);
  }

  // 3. vacuum escape through the emergency buffer, then local terminate
  node.buffer_in_use += weak_checkpoint_size;
  node.allocated += weak_checkpoint_size;
  emit(NodeEventKind::Escape, plan.weak, weak_checkpoint_size);

  node.buffer_in_use -= weak_checkpoint_size;
  node.allocated -= weak_checkpoint_size;
  for (auto it = node.zram.begin(); it != node.zram.end(); ++it) {
    if (it->agent_id == plan.weak) {
      node.allocated -= it->compressed;
      node.zram.erase(it);
      break;
    }
  }
  node.remove_resident(plan.weak);
  emit(NodeEventKind::Terminate, plan.weak, sealed);

  // 4. the strong agent always resumes (pending expansion retries through
  // the normal try_expand path now that space is free)
  if (suspended) {
    strong = node.find_resident(plan.strong);
    strong->mode = CgroupMode::Normal;
    emit(NodeEventKind::Resume, plan.strong, strong->footprint);
  }
  return events;
}

}  // namespace teg
