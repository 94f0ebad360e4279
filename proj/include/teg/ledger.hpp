#pragma once

#include "teg/field.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace teg {

/// All economic flows are integer token units so supply conservation is
/// exact.
using Tokens = std::int64_t;

enum class OrderKind { Bid, FokBlock, Release };

struct Order {
  std::uint64_t seq = 0;  // ledger-assigned, strictly increasing per zone
  int agent_id = -1;
  OrderKind kind = OrderKind::Bid;
  int cx = 0, cy = 0;       // cell, or block root for FOK
  int quantity = 1;         // cells; FOK requires 4^k
  Tokens limit_price = 0;   // tokens per cell
  bool virtual_probe = false;
  double footprint = 0.0;   // memory-units to lease on seat
  Tokens escrow = 0;        // funds locked at submit (0 for probes)
};

/// Bounded FIFO of orders; stamps sequence numbers on push. The single
/// consumer pops in seq order. A full ring signals backpressure.
class OrderRing {
 public:
  explicit OrderRing(std::size_t capacity) : buf_(capacity) {}

  /// nullopt on a full ring (caller retries next tick)
  std::optional<std::uint64_t> push(Order order) {
    if (count_ == buf_.size()) return std::nullopt;
    order.seq = next_seq_++;
    buf_[(head_ + count_) % buf_.size()] = order;
    ++count_;
    return order.seq;
  }

  std::optional<Order> pop() {
    if (count_ == 0) return std::nullopt;
    Order o = buf_[head_];
    head_ = (head_ + 1) % buf_.size();
    --count_;
    return o;
  }

  std::size_t size() const { return count_; }
  bool full() const { return count_ == buf_.size(); }
  std::uint64_t next_seq() const { return next_seq_; }

 private:
  std::vector<Order> buf_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
  std::uint64_t next_seq_ = 1;
};

/// Recursive quad-tree aggregate order book over a rectangle of cells.
/// Level-k blocks are aligned 2^k x 2^k squares (4^k leaves); rectangles
/// that are not a power-of-two square are padded with phantom-occupied
/// leaves so aggregates stay exact.
class QuadBook {
 public:
  QuadBook(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  int side() const { return side_; }
  int max_level() const { return levels_; }

  bool occupied(int lx, int ly) const { return occ_[ly * side_ + lx] != 0; }
  void occupy(int lx, int ly);
  void release(int lx, int ly);

  struct BlockRoot {
    int lx = 0, ly = 0, level = 0;
  };

  /// Lowest-(y,x) aligned level-k block with free_full = true, if any.
  std::optional<BlockRoot> find_free_block(int level) const;
  void fill_block(const BlockRoot& b);
  void release_block(const BlockRoot& b);

  int free_leaves_at(int level, int bx, int by) const;
  bool free_full_at(int level, int bx, int by) const;
  int free_cells() const;  // within the real rectangle

  /// from-scratch recount of one node, for consistency audits
  int recount_free_leaves(int level, int bx, int by) const;

 private:
  void update_path(int lx, int ly);

  int width_, height_;
  int side_;    // padded power-of-two
  int levels_;  // root level: side_ == 2^levels_
  std::vector<std::uint8_t> occ_;
  // aggregates_[k-1] holds level-k nodes, row-major by (by,bx)
  struct Node {
    int free_leaves = 0;
    bool free_full = false;
  };
  std::vector<std::vector<Node>> agg_;
};

/// Conserved token pool: injected == circulating + escrowed + burned at
/// every observable step. Wallets are owned by the caller; the supply
/// only moves totals.
struct TokenSupply {
  Tokens injected = 0;
  Tokens circulating = 0;
  Tokens escrowed = 0;
  Tokens burned = 0;

  void inject(Tokens& wallet, Tokens amount);
  void lock_escrow(Tokens& wallet, Tokens amount);
  void refund_escrow(Tokens& wallet, Tokens amount);
  void burn_from_wallet(Tokens& wallet, Tokens amount);

  bool conserved() const { return injected == circulating + escrowed + burned; }
};

/// Move already-escrowed funds to the burn sink (permanent evaporation).
void evaporate(TokenSupply& supply, Tokens amount);

struct AuctionContext {
  Tokens reserve = 0;  // floor; phantom second bid for a sole bidder
  Tokens cap = 0;      // entropic price ceiling
};

struct Settlement {
  int winner = -1;
  std::uint64_t winner_seq = 0;
  Tokens price = 0;   // per cell
  Tokens second = 0;  // second-highest eligible limit (reserve if none)
};

/// Second-price settlement for one cell's bids this tick. Virtual probes
/// and bids below the reserve never settle. nullopt when no eligible bid.
std::optional<Settlement> settle_vickrey(std::span<const Order> bids,
                                         const AuctionContext& ctx);

/// Integer token ceiling from the entropic valuation (never below 1).
Tokens price_cap_tokens(double s_local, const FieldWeights& w);

/// Static-friction eviction test: thermodynamic force must exceed
/// mu * incumbent mass.
inline bool eviction_check(Tokens p_bid_new, Tokens p_local, double incumbent_mass,
                           double mu) {
  return static_cast<double>(p_bid_new - p_local) > mu * incumbent_mass;
}

struct MemoryPrice {
  bool saturated = false;
  double price = 0.0;  // tokens per memory-unit
};

/// One zone's sequenced ledger: bounded intake ring, quad-tree book,
/// per-cell clearing prices and the burn counter. Orders are applied by
/// exactly one consumer in seq order; zones share nothing.
class ZoneLedger {
 public:
  ZoneLedger(int zone_id, int x0, int y0, int width, int height,
             std::size_t ring_capacity, Tokens c_txn, double mu_friction)
      : zone_id_(zone_id),
        x0_(x0),
        y0_(y0),
        width_(width),
        height_(height),
        book_(width, height),
        pending_(ring_capacity),
        clearing_price_(static_cast<std::size_t>(width) * height, 0),
        c_txn_(c_txn),
        mu_friction_(mu_friction) {}

  int zone_id() const { return zone_id_; }
  int x0() const { return x0_; }
  int y0() const { return y0_; }
  int width() const { return width_; }
  int height() const { return height_; }
  bool contains_cell(int cx, int cy) const {
    return cx >= x0_ && cx < x0_ + width_ && cy >= y0_ && cy < y0_ + height_;
  }

  /// Stamp and enqueue; nullopt = ring full (backpressure).
  std::optional<std::uint64_t> submit(const Order& order) {
    Order o = order;
    return pending_.push(o);
  }
  std::optional<Order> next_order() { return pending_.pop(); }
  std::size_t pending_count() const { return pending_.size(); }

  /// Fill-or-kill block match. quantity must be 4^k (else rejected with
  /// invalid_argument: callers round up to the next SKU). On Fill the
  /// leaves are marked occupied; the returned root is in global cells.
  std::optional<QuadBook::BlockRoot> match_fok(const Order& order);

  QuadBook& book() { return book_; }
  const QuadBook& book() const { return book_; }

  Tokens clearing_price(int cx, int cy) const {
    return clearing_price_[local_index(cx, cy)];
  }
  void set_clearing_price(int cx, int cy, Tokens p) {
    clearing_price_[local_index(cx, cy)] = p;
  }

  void add_burned(Tokens t) { burned_ += t; }
  Tokens burned() const { return burned_; }
  Tokens c_txn() const { return c_txn_; }
  double mu_friction() const { return mu_friction_; }

 private:
  std::size_t local_index(int cx, int cy) const {
    return static_cast<std::size_t>(cy - y0_) * width_ + (cx - x0_);
  }

  int zone_id_;
  int x0_, y0_, width_, height_;
  QuadBook book_;
  OrderRing pending_;
  std::vector<Tokens> clearing_price_;
  Tokens burned_ = 0;
  Tokens c_txn_;
  double mu_friction_;
};

/// Asymptotic memory pricing against the rigid 5% buffer:
/// price = k_mem / (0.95*c_total - u); u at or past the boundary reports
/// Saturated (treated as +inf by bidders, triggers the glassy path).
MemoryPrice memory_price(double u, double c_total, double k_mem);

/// EMA bidding-heat update: h <- (1 - lambda)*h + per-cell sum of bid
/// limits this tick (virtual probes included). Cell coordinates are
/// domain-global.
void heat_update(Grid& h_auction, std::span<const Order> tick_bids, double lambda_h);

}  // namespace teg
