use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::log::{BookEvent, BookEventKind, Drop, MarketDataLog, Quote, Trade};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bid,
    Ask,
}

impl Side {
    pub fn opposite(self) -> Self {
        match self {
            Side::Bid => Side::Ask,
            Side::Ask => Side::Bid,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Bid => "bid",
            Side::Ask => "ask",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bid" => Some(Side::Bid),
            "ask" => Some(Side::Ask),
            _ => None,
        }
    }
}

/// A resting limit order. Prices are integer ticks, timestamps virtual milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Order {
    pub id: u64,
    pub side: Side,
    pub price: u64,
    pub volume: u64,
    pub entry_seq: u64,
    pub timestamp: u64,
}

/// Both sides of the book. Levels are FIFO queues keyed by price.
#[derive(Debug, Clone)]
pub struct LimitOrderBook {
    bids: BTreeMap<u64, VecDeque<Order>>,
    asks: BTreeMap<u64, VecDeque<Order>>,
    index: HashMap<u64, (Side, u64)>,
    last_best_bid: u64,
    last_best_ask: u64,
}

impl LimitOrderBook {
    pub fn new(initial_reference_price: u64) -> Self {
        Self {
            bids: BTreeMap::new(),
            asks: BTreeMap::new(),
            index: HashMap::new(),
            last_best_bid: initial_reference_price,
            last_best_ask: initial_reference_price,
        }
    }

    fn levels(&self, side: Side) -> &BTreeMap<u64, VecDeque<Order>> {
        match side {
            Side::Bid => &self.bids,
            Side::Ask => &self.asks,
        }
    }

    fn levels_mut(&mut self, side: Side) -> &mut BTreeMap<u64, VecDeque<Order>> {
        match side {
            Side::Bid => &mut self.bids,
            Side::Ask => &mut self.asks,
        }
    }

    /// Best price on a side, `None` when the side is empty.
    pub fn best(&self, side: Side) -> Option<u64> {
        match side {
            Side::Bid => self.bids.keys().next_back().copied(),
            Side::Ask => self.asks.keys().next().copied(),
        }
    }

    fn level_volume(&self, side: Side, price: u64) -> u64 {
        self.levels(side)
            .get(&price)
            .map_or(0, |q| q.iter().map(|o| o.volume).sum())
    }

    /// Total resting volume on a side.
    pub fn depth(&self, side: Side) -> u64 {
        self.levels(side).values().flatten().map(|o| o.volume).sum()
    }

    /// Last best price seen on a side, retained after the side empties.
    pub fn last_best(&self, side: Side) -> u64 {
        match side {
            Side::Bid => self.last_best_bid,
            Side::Ask => self.last_best_ask,
        }
    }

    /// `(best_bid, bid_vol, best_ask, ask_vol)`, 0 for an empty side.
    pub fn best_quotes(&self) -> (u64, u64, u64, u64) {
        let bid = self.best(Side::Bid).unwrap_or(0);
        let ask = self.best(Side::Ask).unwrap_or(0);
        (
            bid,
            if bid > 0 { self.level_volume(Side::Bid, bid) } else { 0 },
            ask,
            if ask > 0 { self.level_volume(Side::Ask, ask) } else { 0 },
        )
    }

    /// Ids resting at the best price of `side`, in time priority.
    pub fn l1_orders(&self, side: Side) -> Vec<u64> {
        self.best(side)
            .and_then(|p| self.levels(side).get(&p))
            .map(|q| q.iter().map(|o| o.id).collect())
            .unwrap_or_default()
    }

    /// Ids resting strictly behind the best price of `side`.
    pub fn deeper_orders(&self, side: Side) -> Vec<u64> {
        let Some(best) = self.best(side) else {
            return Vec::new();
        };
        self.orders(side)
            .filter(|o| o.price != best)
            .map(|o| o.id)
            .collect()
    }

    /// Resting orders from the best price outward, FIFO within a level.
    pub fn orders(&self, side: Side) -> Box<dyn Iterator<Item = &Order> + '_> {
        match side {
            Side::Bid => Box::new(self.bids.values().rev().flatten()),
            Side::Ask => Box::new(self.asks.values().flatten()),
        }
    }

    pub fn get(&self, id: u64) -> Option<&Order> {
        let (side, price) = self.index.get(&id)?;
        self.levels(*side).get(price)?.iter().find(|o| o.id == id)
    }

    pub fn is_empty(&self, side: Side) -> bool {
        self.levels(side).is_empty()
    }

    pub fn order_count(&self) -> usize {
        self.index.len()
    }

    fn remember_bests(&mut self) {
        if let Some(b) = self.best(Side::Bid) {
            self.last_best_bid = b;
        }
        if let Some(a) = self.best(Side::Ask) {
            self.last_best_ask = a;
        }
    }

    fn insert(&mut self, order: Order) {
        self.index.insert(order.id, (order.side, order.price));
        self.levels_mut(order.side)
            .entry(order.price)
            .or_default()
            .push_back(order);
        self.remember_bests();
    }

    fn remove(&mut self, id: u64) -> Option<Order> {
        let (side, price) = self.index.remove(&id)?;
        let levels = self.levels_mut(side);
        let queue = levels.get_mut(&price)?;
        let pos = queue.iter().position(|o| o.id == id)?;
        let order = queue.remove(pos);
        if queue.is_empty() {
            levels.remove(&price);
        }
        self.remember_bests();
        order
    }

    /// Fill up to `volume` against `contra`, best price first and FIFO within
    /// a level, stopping at `limit` when given. Returns `(maker, fill)` pairs.
    fn take(&mut self, contra: Side, mut volume: u64, limit: Option<u64>) -> Vec<(Order, u64)> {
        let mut fills = Vec::new();
        while volume > 0 {
            let Some(best) = self.best(contra) else { break };
            let crosses = match (limit, contra) {
                (None, _) => true,
                (Some(p), Side::Ask) => best <= p,
                (Some(p), Side::Bid) => best >= p,
            };
            if !crosses {
                break;
            }
            let levels = self.levels_mut(contra);
            let queue = levels.get_mut(&best).expect("best level exists");
            let maker = queue.front_mut().expect("levels are never empty");
            let fill = maker.volume.min(volume);
            maker.volume -= fill;
            volume -= fill;
            let snapshot = Order { volume: fill, ..*maker };
            if maker.volume == 0 {
                let id = maker.id;
                queue.pop_front();
                if queue.is_empty() {
                    levels.remove(&best);
                }
                self.index.remove(&id);
            }
            fills.push((snapshot, fill));
        }
        self.remember_bests();
        fills
    }
}

/// Result of a limit order submission.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitOutcome {
    pub order_id: u64,
    pub trades: Vec<Trade>,
    pub resting: Option<Order>,
}

/// Result of a market order submission.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketOutcome {
    pub order_id: u64,
    pub trades: Vec<Trade>,
    /// True when the contra side was empty and nothing happened.
    pub dropped: bool,
    /// Volume left over after the contra side was exhausted.
    pub discarded: u64,
}

/// Continuous double auction with price-time priority. Messages are processed
/// synchronously in submission order on virtual millisecond timestamps.
#[derive(Debug, Clone)]
pub struct MatchingEngine {
    book: LimitOrderBook,
    log: MarketDataLog,
    next_id: u64,
    next_seq: u64,
}

pub const DEFAULT_REFERENCE_PRICE: u64 = 1000;

impl Default for MatchingEngine {
    fn default() -> Self {
        Self::new(DEFAULT_REFERENCE_PRICE)
    }
}

impl MatchingEngine {
    pub fn new(initial_reference_price: u64) -> Self {
        Self {
            book: LimitOrderBook::new(initial_reference_price),
            log: MarketDataLog::default(),
            next_id: 1,
            next_seq: 0,
        }
    }

    pub fn book(&self) -> &LimitOrderBook {
        &self.book
    }

    pub fn log(&self) -> &MarketDataLog {
        &self.log
    }

    pub fn into_log(self) -> MarketDataLog {
        self.log
    }

    pub fn best_quotes(&self) -> (u64, u64, u64, u64) {
        self.book.best_quotes()
    }

    fn allocate_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn emit_quote(&mut self, timestamp: u64) {
        let (bid, bid_vol, ask, ask_vol) = self.book.best_quotes();
        self.log.quotes.push(Quote {
            timestamp,
            bid,
            bid_vol,
            ask,
            ask_vol,
            bid_depth: self.book.depth(Side::Bid),
            ask_depth: self.book.depth(Side::Ask),
        });
    }

    fn record_fills(&mut self, fills: Vec<(Order, u64)>, aggressor: Side, taker: u64, timestamp: u64) -> Vec<Trade> {
        fills
            .into_iter()
            .map(|(maker, fill)| {
                self.log.book_events.push(BookEvent {
                    timestamp,
                    kind: BookEventKind::Execute,
                    order_id: maker.id,
                    side: maker.side,
                    price: maker.price,
                    volume: fill,
                    contra_id: taker,
                });
                let trade = Trade {
                    timestamp,
                    price: maker.price,
                    volume: fill,
                    aggressor_side: aggressor,
                    maker_order_id: maker.id,
                    taker_ref: taker,
                };
                self.log.trades.push(trade);
                trade
            })
            .collect()
    }

    /// Submit a limit order. Any part that crosses the contra best trades at
    /// the makers' prices; the residual rests at the original limit price.
    pub fn submit_limit(&mut self, side: Side, price: u64, volume: u64, timestamp: u64) -> Result<LimitOutcome> {
        if price < 1 || volume < 1 {
            return Err(Error::InvalidOrder(format!(
                "limit orders need price >= 1 and volume >= 1 (got {price} x {volume})"
            )));
        }
        let id = self.allocate_id();
        let fills = self.book.take(side.opposite(), volume, Some(price));
        let filled: u64 = fills.iter().map(|(_, f)| f).sum();
        let trades = self.record_fills(fills, side, id, timestamp);
        let remaining = volume - filled;
        let resting = (remaining > 0).then(|| {
            let order = Order {
                id,
                side,
                price,
                volume: remaining,
                entry_seq: self.next_seq,
                timestamp,
            };
            self.next_seq += 1;
            self.book.insert(order);
            self.log.book_events.push(BookEvent {
                timestamp,
                kind: BookEventKind::New,
                order_id: id,
                side,
                price,
                volume: remaining,
                contra_id: 0,
            });
            order
        });
        self.emit_quote(timestamp);
        Ok(LimitOutcome {
            order_id: id,
            trades,
            resting,
        })
    }

    /// Submit a market order. An empty contra side drops the message; volume
    /// beyond the available contra liquidity is discarded.
    pub fn submit_market(&mut self, side: Side, volume: u64, timestamp: u64) -> Result<MarketOutcome> {
        if volume < 1 {
            return Err(Error::InvalidOrder("market orders need volume >= 1".into()));
        }
        let id = self.allocate_id();
        if self.book.is_empty(side.opposite()) {
            self.log.drops.push(Drop {
                timestamp,
                action: "market".into(),
                side: Some(side),
                order_id: id,
            });
            return Ok(MarketOutcome {
                order_id: id,
                trades: Vec::new(),
                dropped: true,
                discarded: volume,
            });
        }
        let fills = self.book.take(side.opposite(), volume, None);
        let filled: u64 = fills.iter().map(|(_, f)| f).sum();
        let trades = self.record_fills(fills, side, id, timestamp);
        self.emit_quote(timestamp);
        Ok(MarketOutcome {
            order_id: id,
            trades,
            dropped: false,
            discarded: volume - filled,
        })
    }

    /// Cancel a resting order by id. Unknown ids are recorded as dropped.
    pub fn cancel(&mut self, order_id: u64, timestamp: u64) -> Option<Order> {
        let Some(order) = self.book.remove(order_id) else {
            self.log.drops.push(Drop {
                timestamp,
                action: "cancel".into(),
                side: None,
                order_id,
            });
            return None;
        };
        self.log.book_events.push(BookEvent {
            timestamp,
            kind: BookEventKind::Cancel,
            order_id,
            side: order.side,
            price: order.price,
            volume: order.volume,
            contra_id: 0,
        });
        self.emit_quote(timestamp);
        Some(order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_limit_order_worked_example() {
        let mut e = MatchingEngine::default();
        e.submit_limit(Side::Ask, 50, 30, 1).unwrap();
        let out = e.submit_limit(Side::Bid, 50, 70, 2).unwrap();
        assert_eq!(out.trades.len(), 1);
        assert_eq!((out.trades[0].price, out.trades[0].volume), (50, 30));
        assert_eq!(out.trades[0].aggressor_side, Side::Bid);
        let rest = out.resting.unwrap();
        assert_eq!((rest.price, rest.volume), (50, 40));
        assert_eq!(e.best_quotes(), (50, 40, 0, 0));
    }

    #[test]
    fn resting_on_empty_book() {
        let mut e = MatchingEngine::default();
        let out = e.submit_limit(Side::Ask, 1005, 10, 1).unwrap();
        assert!(out.trades.is_empty());
        assert_eq!(e.best_quotes(), (0, 0, 1005, 10));
    }

    #[test]
    fn fifo_within_level() {
        let mut e = MatchingEngine::default();
        let first = e.submit_limit(Side::Ask, 50, 10, 1).unwrap().order_id;
        let second = e.submit_limit(Side::Ask, 50, 10, 2).unwrap().order_id;
        let out = e.submit_limit(Side::Bid, 50, 10, 3).unwrap();
        assert_eq!(out.trades.len(), 1);
        assert_eq!(out.trades[0].maker_order_id, first);
        assert!(out.resting.is_none());
        assert_eq!(e.book().l1_orders(Side::Ask), vec![second]);
    }

    #[test]
    fn market_order_walks_levels() {
        let mut e = MatchingEngine::default();
        e.submit_limit(Side::Ask, 50, 30, 1).unwrap();
        e.submit_limit(Side::Ask, 51, 30, 2).unwrap();
        let out = e.submit_market(Side::Bid, 40, 3).unwrap();
        let prints: Vec<_> = out.trades.iter().map(|t| (t.price, t.volume, t.timestamp)).collect();
        assert_eq!(prints, vec![(50, 30, 3), (51, 10, 3)]);
        assert_eq!(out.discarded, 0);
    }

    #[test]
    fn market_order_on_empty_contra_is_dropped() {
        let mut e = MatchingEngine::default();
        e.submit_limit(Side::Bid, 99, 5, 1).unwrap();
        let out = e.submit_market(Side::Bid, 40, 2).unwrap();
        assert!(out.dropped);
        assert!(out.trades.is_empty());
        assert_eq!(e.log().drops.len(), 1);
        assert_eq!(e.log().quotes.len(), 1);
    }

    #[test]
    fn market_order_exhausting_contra() {
        let mut e = MatchingEngine::default();
        e.submit_limit(Side::Ask, 50, 30, 1).unwrap();
        e.submit_limit(Side::Ask, 52, 20, 2).unwrap();
        let out = e.submit_market(Side::Bid, 50, 3).unwrap();
        assert_eq!(out.discarded, 0);
        assert!(e.book().is_empty(Side::Ask));
        assert_eq!(e.book().last_best(Side::Ask), 50);
        let over = {
            e.submit_limit(Side::Ask, 60, 5, 4).unwrap();
            e.submit_market(Side::Bid, 12, 5).unwrap()
        };
        assert_eq!(over.discarded, 7);
    }

    #[test]
    fn cancel_semantics() {
        let mut e = MatchingEngine::default();
        let only = e.submit_limit(Side::Bid, 100, 5, 1).unwrap().order_id;
        assert_eq!(e.cancel(only, 2).unwrap().id, only);
        assert!(e.book().is_empty(Side::Bid));
        assert_eq!(e.book().last_best(Side::Bid), 100);
        assert!(e.cancel(only, 3).is_none());
        assert_eq!(e.log().drops.len(), 1);

        e.submit_limit(Side::Bid, 100, 5, 4).unwrap();
        let behind = e.submit_limit(Side::Bid, 98, 5, 5).unwrap().order_id;
        e.cancel(behind, 6).unwrap();
        assert_eq!(e.best_quotes().0, 100);
    }

    #[test]
    fn best_quotes_sentinels() {
        let mut e = MatchingEngine::default();
        assert_eq!(e.best_quotes(), (0, 0, 0, 0));
        e.submit_limit(Side::Bid, 100, 5, 1).unwrap();
        assert_eq!(e.best_quotes(), (100, 5, 0, 0));
    }

    #[test]
    fn level_partition() {
        let mut e = MatchingEngine::default();
        let a = e.submit_limit(Side::Bid, 100, 1, 1).unwrap().order_id;
        let b = e.submit_limit(Side::Bid, 100, 1, 2).unwrap().order_id;
        let c = e.submit_limit(Side::Bid, 99, 1, 3).unwrap().order_id;
        assert_eq!(e.book().l1_orders(Side::Bid), vec![a, b]);
        assert_eq!(e.book().deeper_orders(Side::Bid), vec![c]);
        assert!(e.book().l1_orders(Side::Ask).is_empty());
        assert!(e.book().deeper_orders(Side::Ask).is_empty());

        let mut single = MatchingEngine::default();
        single.submit_limit(Side::Ask, 70, 1, 1).unwrap();
        single.submit_limit(Side::Ask, 70, 2, 2).unwrap();
        assert!(single.book().deeper_orders(Side::Ask).is_empty());
    }

    #[test]
    fn rejects_malformed_orders() {
        let mut e = MatchingEngine::default();
        assert!(e.submit_limit(Side::Bid, 0, 5, 1).is_err());
        assert!(e.submit_limit(Side::Bid, 5, 0, 1).is_err());
        assert!(e.submit_market(Side::Bid, 0, 1).is_err());
    }
}
