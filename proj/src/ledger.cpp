#include "teg/ledger.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace teg {

namespace {
int pow2_at_least(int n) {
  int p = 1;
  while (p < n) p *= 2;
  return p;
}
}  // namespace

QuadBook::QuadBook(int width, int height) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw std::invalid_argument("quadbook needs a rectangle");
  side_ = pow2_at_least(std::max(width, height));
  levels_ = 0;
  while ((1 << levels_) < side_) ++levels_;
  occ_.assign(static_cast<std::size_t>(side_) * side_, 0);
  // phantom padding outside the real rectangle counts occupied
  for (int ly = 0; ly < side_; ++ly)
    for (int lx = 0; lx < side_; ++lx)
      if (lx >= width_ || ly >= height_) occ_[ly * side_ + lx] = 1;

  agg_.resize(levels_);
  for (int k = 1; k <= levels_; ++k) {
    const int n = side_ >> k;
    agg_[k - 1].assign(static_cast<std::size_t>(n) * n, Node{});
  }
  for (int k = 1; k <= levels_; ++k) {
    const int n = side_ >> k;
    for (int by = 0; by < n; ++by)
      for (int bx = 0; bx < n; ++bx) {
        Node& nd = agg_[k - 1][by * n + bx];
        nd.free_leaves = recount_free_leaves(k, bx, by);
        nd.free_full = nd.free_leaves == (1 << (2 * k));
      }
  }
}

int QuadBook::recount_free_leaves(int level, int bx, int by) const {
  const int bs = 1 << level;
  int cnt = 0;
  for (int ly = by * bs; ly < (by + 1) * bs; ++ly)
    for (int lx = bx * bs; lx < (bx + 1) * bs; ++lx)
      if (!occ_[ly * side_ + lx]) ++cnt;
  return cnt;
}

int QuadBook::free_leaves_at(int level, int bx, int by) const {
  if (level == 0) return occ_[by * side_ + bx] ? 0 : 1;
  const int n = side_ >> level;
  return agg_[level - 1][by * n + bx].free_leaves;
}

bool QuadBook::free_full_at(int level, int bx, int by) const {
  if (level == 0) return !occ_[by * side_ + bx];
  const int n = side_ >> level;
  return agg_[level - 1][by * n + bx].free_full;
}

int QuadBook::free_cells() const {
  return agg_.empty() ? (occ_[0] ? 0 : 1) : agg_[levels_ - 1][0].free_leaves;
}

void QuadBook::update_path(int lx, int ly) {
  const int d = occ_[ly * side_ + lx] ? -1 : +1;
  for (int k = 1; k <= levels_; ++k) {
    const int n = side_ >> k;
    const int bx = lx >> k, by = ly >> k;
    Node& nd = agg_[k - 1][by * n + bx];
    nd.free_leaves += d;
    nd.free_full = nd.free_leaves == (1 << (2 * k));
  }
}

void QuadBook::occupy(int lx, int ly) {
  if (occ_[ly * side_ + lx]) throw std::logic_error("cell already occupied");
  occ_[ly * side_ + lx] = 1;
  update_path(lx, ly);
}

void QuadBook::release(int lx, int ly) {
  if (lx >= width_ || ly >= height_) throw std::logic_error("release outside rectangle");
  if (!occ_[ly * side_ + lx]) throw std::logic_error("cell already free");
  occ_[ly * side_ + lx] = 0;
  update_path(lx, ly);
}

std::optional<QuadBook::BlockRoot> QuadBook::find_free_block(int level) const {
  if (level < 0 || level > levels_) return std::nullopt;
  const int n = side_ >> level;
  for (int by = 0; by < n; ++by)
    for (int bx = 0; bx < n; ++bx)
      if (free_full_at(level, bx, by))
        return BlockRoot{bx * (1 << level), by * (1 << level), level};
  return std::nullopt;
}

void QuadBook::fill_block(const BlockRoot& b) {
  const int bs = 1 << b.level;
  for (int ly = b.ly; ly < b.ly + bs; ++ly)
    for (int lx = b.lx; lx < b.lx + bs; ++lx) occupy(lx, ly);
}

void QuadBook::release_block(const BlockRoot& b) {
  const int bs = 1 << b.level;
  for (int ly = b.ly; ly < b.ly + bs; ++ly)
    for (int lx = b.lx; lx < b.lx + bs; ++lx) release(lx, ly);
}

void TokenSupply::inject(Tokens& wallet, Tokens amount) {
  if (amount < 0) throw std::invalid_argument("negative injection");
  wallet += amount;
  injected += amount;
  circulating += amount;
}

void TokenSupply::lock_escrow(Tokens& wallet, Tokens amount) {
  if (amount < 0 || wallet < amount) throw std::invalid_argument("bad escrow lock");
  wallet -= amount;
  circulating -= amount;
  escrowed += amount;
}

void TokenSupply::refund_escrow(Tokens& wallet, Tokens amount) {
  if (amount < 0 || escrowed < amount) throw std::invalid_argument("bad escrow refund");
  wallet += amount;
  circulating += amount;
  escrowed -= amount;
}

void TokenSupply::burn_from_wallet(Tokens& wallet, Tokens amount) {
  if (amount < 0 || wallet < amount) throw std::invalid_argument("bad wallet burn");
  wallet -= amount;
  circulating -= amount;
  burned += amount;
}

void evaporate(TokenSupply& supply, Tokens amount) {
  if (amount < 0) throw std::invalid_argument("negative evaporation");
  if (supply.escrowed < amount) throw std::invalid_argument("evaporating unescrowed funds");
  supply.escrowed -= amount;
  supply.burned += amount;
}

std::optional<Settlement> settle_vickrey(std::span<const Order> bids,
                                         const AuctionContext& ctx) {
  const Order* best = nullptr;
  for (const Order& b : bids) {
    if (b.virtual_probe || b.kind != OrderKind::Bid) continue;
    if (b.limit_price < ctx.reserve) continue;
    if (!best || b.limit_price > best->limit_price ||
        (b.limit_price == best->limit_price && b.seq < best->seq))
      best = &b;
  }
  if (!best) return std::nullopt;

  Tokens second = ctx.reserve;  // reserve acts as the phantom second bid
  for (const Order& b : bids) {
    if (&b == best || b.virtual_probe || b.kind != OrderKind::Bid) continue;
    if (b.limit_price < ctx.reserve) continue;
    second = std::max(second, b.limit_price);
  }
  Tokens price = std::min(second, ctx.cap);
  return Settlement{best->agent_id, best->seq, price, second};
}

Tokens price_cap_tokens(double s_local, const FieldWeights& w) {
  const double cap = entropic_price_cap(s_local, w);
  return std::max<Tokens>(1, static_cast<Tokens>(std::floor(cap)));
}

MemoryPrice memory_price(double u, double c_total, double k_mem) {
  if (u < 0.0 || c_total <= 0.0) throw std::invalid_argument("bad memory_price input");
  const double c_max = 0.95 * c_total;
  if (u >= c_max) return {true, 0.0};
  return {false, k_mem / (c_max - u)};
}

std::optional<QuadBook::BlockRoot> ZoneLedger::match_fok(const Order& order) {
  int level = 0, q = order.quantity;
  while (q > 1 && q % 4 == 0) {
    q /= 4;
    ++level;
  }
  if (q != 1 || order.quantity < 1)
    throw std::invalid_argument("fok quantity must be 4^k cells (round up to next SKU)");
  auto root = book_.find_free_block(level);
  if (!root) return std::nullopt;  // Kill
  book_.fill_block(*root);
  return QuadBook::BlockRoot{root->lx + x0_, root->ly + y0_, root->level};
}

void heat_update(Grid& h_auction, std::span<const Order> tick_bids, double lambda_h) {
  h_auction *= (1.0 - lambda_h);
  const int w = static_cast<int>(h_auction.cols());
  const int h = static_cast<int>(h_auction.rows());
  for (const Order& o : tick_bids) {
    if (o.kind == OrderKind::Release) continue;
    if (o.kind == OrderKind::FokBlock) {
      const int bs = static_cast<int>(std::lround(std::sqrt(double(o.quantity))));
      for (int cy = o.cy; cy < std::min(o.cy + bs, h); ++cy)
        for (int cx = o.cx; cx < std::min(o.cx + bs, w); ++cx)
          h_auction(cy, cx) += static_cast<double>(o.limit_price);
    } else if (o.cx >= 0 && o.cx < w && o.cy >= 0 && o.cy < h) {
      h_auction(o.cy, o.cx) += static_cast<double>(o.limit_price);
    }
  }
}

}  // namespace teg
