#pragma once

#include "teg/ledger.hpp"

#include <optional>
#include <string>
#include <vector>

namespace teg {

enum class CgroupMode { Normal, Throttled, Frozen, Suspended };

const char* to_string(CgroupMode m);

struct Resident {
  int agent_id = -1;
  double footprint = 0.0;
  CgroupMode mode = CgroupMode::Normal;
  double pending_expand = 0.0;  // arrested expansion while throttled
};

struct ZramEntry {
  int agent_id = -1;
  double compressed = 0.0;
};

enum class NodeEventKind { Grant, Glassy, Freeze, Suspend, Escape, Resume, Terminate };

const char* to_string(NodeEventKind k);

struct NodeEvent {
  NodeEventKind kind;
  int agent_id = -1;
  double bytes = 0.0;
  double allocated_after = 0.0;  // audit trail: allocation after this sub-step
};

/// One node's memory state. Memory is incompressible: the invariant
/// allocated <= c_total must hold after every sub-step, with the rigid
/// 5% buffer reserved for airlock escapes only.
struct NodeState {
  int node_id = -1;
  double c_total = 0.0;
  double allocated = 0.0;  // residents + zram + escape buffer in use
  double buffer_reserved = 0.0;
  std::vector<Resident> residents;
  std::vector<ZramEntry> zram;
  double buffer_in_use = 0.0;

  NodeState() = default;
  NodeState(int id, double capacity)
      : node_id(id), c_total(capacity), buffer_reserved(0.05 * capacity) {}

  double usable_cap() const { return 0.95 * c_total; }
  double free_space() const { return usable_cap() - allocated; }

  Resident* find_resident(int agent_id);
  const Resident* find_resident(int agent_id) const;
  void add_resident(int agent_id, double footprint, CgroupMode mode = CgroupMode::Normal);
  void remove_resident(int agent_id);

  /// Sum of footprints + zram + buffer; must equal `allocated` always.
  double recount() const;
  void audit() const;  // throws on accounting drift or allocated > c_total
};

enum class ExpandResult { Granted, GlassyTriggered };

/// Synchronous-reclaim semantics: grant only below the 95% boundary,
/// otherwise throttle the requester (its expansion rate is arrested).
/// Payment is cleared by the caller before the grant.
ExpandResult try_expand(NodeState& node, int agent_id, double delta);

enum class AirlockStage { IceSeal, SuspendStrong, VacuumEscape, ResumeStrong, Done };

struct AirlockPlan {
  int weak = -1;
  int strong = -1;
  AirlockStage stage = AirlockStage::IceSeal;
};

/// Weakest resident by wallet; ties break to the smaller footprint, then
/// the lower agent id. wallet_of is indexed by agent id.
int select_weak(const NodeState& node, const std::vector<Tokens>& wallet_of);

/// Ordered airlock evacuation mutex, run as one atomic script:
/// freeze + zram-compress the weak resident, suspend the strong expander
/// if its pending growth still exceeds free space, checkpoint the weak
/// agent through the emergency buffer, terminate it locally, resume the
/// strong agent. Rejects (before any mutation) checkpoints larger than
/// the buffer. Returns the ordered event sequence with an allocation
/// audit after every sub-step.
std::vector<NodeEvent> run_airlock(NodeState& node, const AirlockPlan& plan,
                                   double weak_checkpoint_size);

}  // namespace teg
