#![allow(dead_code)]

use hawkeslob::hawkes::{Event, EventStream, HawkesParams};
use hawkeslob::lob::{MatchingEngine, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Limit(Side, u64, u64),
    Market(Side, u64),
    /// Cancel the oldest resting order.
    CancelOldest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resting {
    pub id: u64,
    pub side: Side,
    pub price: u64,
    pub volume: u64,
    seq: u64,
}

/// Naive matcher: scan every resting order for the best contra one on each fill.
#[derive(Debug, Clone, Default)]
pub struct BruteBook {
    pub resting: Vec<Resting>,
    next_id: u64,
    next_seq: u64,
}

/// `(maker id, price, volume)`
pub type Fill = (u64, u64, u64);

impl BruteBook {
    pub fn new() -> Self {
        Self {
            next_id: 1,
            ..Default::default()
        }
    }

    fn best_contra(&self, side: Side, limit: Option<u64>) -> Option<usize> {
        self.resting
            .iter()
            .enumerate()
            .filter(|(_, o)| o.side != side)
            .filter(|(_, o)| match (limit, side) {
                (None, _) => true,
                (Some(p), Side::Bid) => o.price <= p,
                (Some(p), Side::Ask) => o.price >= p,
            })
            .min_by_key(|(_, o)| {
                let price_rank = match side {
                    Side::Bid => o.price as i64,
                    Side::Ask => -(o.price as i64),
                };
                (price_rank, o.seq)
            })
            .map(|(i, _)| i)
    }

    fn take(&mut self, side: Side, mut volume: u64, limit: Option<u64>) -> (Vec<Fill>, u64) {
        let mut fills = Vec::new();
        while volume > 0 {
            let Some(i) = self.best_contra(side, limit) else { break };
            let maker = &mut self.resting[i];
            let q = volume.min(maker.volume);
            fills.push((maker.id, maker.price, q));
            maker.volume -= q;
            volume -= q;
            if maker.volume == 0 {
                self.resting.remove(i);
            }
        }
        (fills, volume)
    }

    pub fn limit(&mut self, side: Side, price: u64, volume: u64) -> (Vec<Fill>, u64) {
        let id = self.next_id;
        self.next_id += 1;
        let (fills, left) = self.take(side, volume, Some(price));
        if left > 0 {
            self.resting.push(Resting {
                id,
                side,
                price,
                volume: left,
                seq: self.next_seq,
            });
            self.next_seq += 1;
        }
        (fills, left)
    }

    pub fn market(&mut self, side: Side, volume: u64) -> (Vec<Fill>, u64) {
        self.next_id += 1;
        self.take(side, volume, None)
    }

    pub fn oldest(&self) -> Option<u64> {
        self.resting.iter().min_by_key(|o| o.seq).map(|o| o.id)
    }

    pub fn cancel(&mut self, id: u64) -> u64 {
        let i = self.resting.iter().position(|o| o.id == id).expect("resting id");
        self.resting.remove(i).volume
    }

    pub fn snapshot(&self) -> Vec<(u64, Side, u64, u64)> {
        let mut v: Vec<_> = self.resting.iter().map(|o| (o.id, o.side, o.price, o.volume)).collect();
        v.sort_by_key(|o| o.0);
        v
    }
}

pub fn engine_snapshot(engine: &MatchingEngine) -> Vec<(u64, Side, u64, u64)> {
    let book = engine.book();
    let mut v: Vec<_> = [Side::Bid, Side::Ask]
        .into_iter()
        .flat_map(|s| book.orders(s).map(|o| (o.id, o.side, o.price, o.volume)).collect::<Vec<_>>())
        .collect();
    v.sort_by_key(|o| o.0);
    v
}

/// Engine and oracle side by side, with a running volume ledger.
#[derive(Debug, Clone)]
pub struct Harness {
    pub engine: MatchingEngine,
    pub brute: BruteBook,
    /// Volume that has come to rest minus volume executed or cancelled from the book.
    pub ledger: u64,
    clock: u64,
}

impl Default for Harness {
    fn default() -> Self {
        Self {
            engine: MatchingEngine::default(),
            brute: BruteBook::new(),
            ledger: 0,
            clock: 0,
        }
    }
}

impl Harness {
    /// Apply one action to both books and check every property. Returns
    /// `Ok(false)` when the action does not apply (nothing to cancel).
    pub fn step(&mut self, action: Action) -> Result<bool, String> {
        self.clock += 1;
        let t = self.clock;
        match action {
            Action::Limit(side, price, volume) => {
                let out = self.engine.submit_limit(side, price, volume, t).map_err(|e| e.to_string())?;
                let (fills, left) = self.brute.limit(side, price, volume);
                let got: Vec<Fill> = out.trades.iter().map(|x| (x.maker_order_id, x.price, x.volume)).collect();
                if got != fills {
                    return Err(format!("{action:?}: engine fills {got:?}, oracle {fills:?}"));
                }
                let rested = out.resting.map_or(0, |o| o.volume);
                if rested != left {
                    return Err(format!("{action:?}: residual {rested}, oracle {left}"));
                }
                let filled: u64 = got.iter().map(|f| f.2).sum();
                if filled + rested != volume {
                    return Err(format!("{action:?}: volume not conserved"));
                }
                if let Some(o) = out.resting {
                    if o.price != price {
                        return Err(format!("{action:?}: residual re-priced to {}", o.price));
                    }
                }
                self.ledger = self.ledger + rested - filled;
            }
            Action::Market(side, volume) => {
                let out = self.engine.submit_market(side, volume, t).map_err(|e| e.to_string())?;
                let (fills, left) = self.brute.market(side, volume);
                let got: Vec<Fill> = out.trades.iter().map(|x| (x.maker_order_id, x.price, x.volume)).collect();
                if got != fills {
                    return Err(format!("{action:?}: engine fills {got:?}, oracle {fills:?}"));
                }
                let filled: u64 = got.iter().map(|f| f.2).sum();
                if filled + out.discarded != volume || out.discarded != left {
                    return Err(format!("{action:?}: volume not conserved"));
                }
                self.ledger -= filled;
            }
            Action::CancelOldest => {
                let Some(id) = self.brute.oldest() else { return Ok(false) };
                let removed = self.brute.cancel(id);
                match self.engine.cancel(id, t) {
                    Some(o) if o.volume == removed => self.ledger -= removed,
                    other => return Err(format!("cancel {id}: engine {other:?}, oracle volume {removed}")),
                }
            }
        }
        self.check()?;
        Ok(true)
    }

    fn check(&self) -> Result<(), String> {
        let book = self.engine.book();
        if let (Some(b), Some(a)) = (book.best(Side::Bid), book.best(Side::Ask)) {
            if b >= a {
                return Err(format!("crossed book: bid {b} ask {a}"));
            }
        }
        let depth = book.depth(Side::Bid) + book.depth(Side::Ask);
        if depth != self.ledger {
            return Err(format!("resting volume {depth}, ledger {}", self.ledger));
        }
        let (e, b) = (engine_snapshot(&self.engine), self.brute.snapshot());
        if e != b {
            return Err(format!("book {e:?}, oracle {b:?}"));
        }
        Ok(())
    }
}

/// Two prices, two sizes, both sides, market orders and cancels.
pub fn small_alphabet() -> Vec<Action> {
    let mut v = Vec::new();
    for side in [Side::Bid, Side::Ask] {
        for price in [1, 2] {
            for volume in [1, 3] {
                v.push(Action::Limit(side, price, volume));
            }
        }
        for volume in [1, 3] {
            v.push(Action::Market(side, volume));
        }
    }
    v.push(Action::CancelOldest);
    v
}

#[derive(Debug, Default)]
pub struct ExhaustiveReport {
    pub sequences: u64,
    pub failures: Vec<String>,
}

fn explore(h: &Harness, depth: usize, alphabet: &[Action], path: &mut Vec<Action>, out: &mut ExhaustiveReport) {
    if depth == 0 {
        return;
    }
    for &a in alphabet {
        let mut next = h.clone();
        path.push(a);
        match next.step(a) {
            Ok(true) => {
                out.sequences += 1;
                explore(&next, depth - 1, alphabet, path, out);
            }
            Ok(false) => {}
            Err(e) => {
                if out.failures.len() < 5 {
                    out.failures.push(format!("{path:?}: {e}"));
                }
            }
        }
        path.pop();
    }
}

/// Every applicable action sequence of length 1..=`max_len`.
pub fn exhaustive(max_len: usize) -> ExhaustiveReport {
    let alphabet = small_alphabet();
    let parts: Vec<ExhaustiveReport> = alphabet
        .par_iter()
        .map(|&first| {
            let mut out = ExhaustiveReport::default();
            let mut h = Harness::default();
            match h.step(first) {
                Ok(true) => {
                    out.sequences += 1;
                    explore(&h, max_len - 1, &alphabet, &mut vec![first], &mut out);
                }
                Ok(false) => {}
                Err(e) => out.failures.push(format!("[{first:?}]: {e}")),
            }
            out
        })
        .collect();
    let mut total = ExhaustiveReport::default();
    for p in parts {
        total.sequences += p.sequences;
        total.failures.extend(p.failures);
    }
    total
}

/// Random stream and parameters with at most `max_events` events on
/// `max_dim` types.
pub fn random_instance(rng: &mut ChaCha8Rng, max_dim: usize, max_events: usize) -> (HawkesParams, EventStream) {
    let dim = rng.random_range(1..=max_dim);
    let n = rng.random_range(0..=max_events);
    let horizon = rng.random_range(5.0..50.0);
    let mut times: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..horizon)).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let events = times
        .into_iter()
        .filter(|&t| t > 0.0)
        .map(|time| Event {
            time,
            mark: rng.random_range(0..dim),
            volume: None,
        })
        .collect();
    let mu = (0..dim).map(|_| rng.random_range(0.05..2.0)).collect();
    let alpha = (0..dim)
        .map(|_| (0..dim).map(|_| rng.random_range(0.0..1.5)).collect())
        .collect();
    let beta = (0..dim)
        .map(|_| (0..dim).map(|_| rng.random_range(0.1..5.0)).collect())
        .collect();
    let params = HawkesParams::new(mu, alpha, beta).expect("valid random parameters");
    (params, EventStream::new(horizon, events))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
