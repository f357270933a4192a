//! Recovering the ten event types from published market data.
//!
//! Two readers are provided. [`classify_book_events`] replays the order-level
//! feed and so sees the exact book before every message.
//! [`classify_quotes`] uses only trades, top-of-book quotes and per-side
//! depth, as an outside observer would. On engine output the two agree.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::csvio::{write_rows, Rows};
use crate::error::{Error, Result};
use crate::hawkes::{Event, EventStream};
use crate::injection::{EventClass, EventKind, SimulationOutput, EVENT_TYPES};
use crate::lob::{BookEvent, BookEventKind, MarketDataLog, Quote, Side};

/// An event located on the engine's millisecond clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimedEvent {
    pub timestamp_ms: u64,
    pub kind: EventKind,
}

/// Classified event stream (times in seconds) with per-type totals.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedStream {
    pub stream: EventStream,
    pub counts: Vec<usize>,
}

impl ClassifiedStream {
    pub fn from_stream(stream: EventStream) -> Self {
        let counts = stream.counts(EVENT_TYPES);
        Self { stream, counts }
    }

    fn from_timed(events: &[TimedEvent], horizon: f64) -> Self {
        let events: Vec<Event> = events
            .iter()
            .map(|e| Event {
                time: e.timestamp_ms as f64 / 1000.0,
                mark: e.kind.mark(),
                volume: None,
            })
            .collect();
        let horizon = events.last().map_or(horizon, |e| horizon.max(e.time));
        Self::from_stream(EventStream::new(horizon, events))
    }

    /// `classified.csv`: header `time_s,type`, times with 6 fractional digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(
            out,
            &["time_s", "type"],
            self.stream
                .events
                .iter()
                .map(|e| vec![format!("{:.6}", e.time), (e.mark + 1).to_string()]),
        )
    }

    pub fn read_csv<R: Read>(input: R, horizon: f64, source: &str) -> Result<Self> {
        let mut events = Vec::new();
        for row in Rows::read(input, source, &["time_s", "type"])?.iter() {
            let time: f64 = row.get(0, "time")?;
            let t: usize = row.get(1, "type")?;
            if !(1..=EVENT_TYPES).contains(&t) {
                return Err(row.error(format!("type {t} outside 1..={EVENT_TYPES}")));
            }
            events.push(Event { time, mark: t - 1, volume: None });
        }
        let horizon = events.last().map_or(horizon, |e| horizon.max(e.time));
        let out = Self::from_stream(EventStream::new(horizon, events));
        out.stream.validate(EVENT_TYPES)?;
        Ok(out)
    }

    pub fn read_csv_path(path: &Path, horizon: f64) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file), horizon, &path.display().to_string())
    }
}

/// One row per event type in the layout of an event-count table.
#[derive(Debug, Clone, Serialize)]
pub struct CountRow {
    #[serde(rename = "type")]
    pub event_type: usize,
    pub hawkes_count: usize,
    pub classified_count: usize,
}

pub fn count_table(hawkes: &EventStream, classified: &ClassifiedStream) -> Vec<CountRow> {
    let injected = hawkes.counts(EVENT_TYPES);
    (0..EVENT_TYPES)
        .map(|m| CountRow {
            event_type: m + 1,
            hawkes_count: injected[m],
            classified_count: classified.counts[m],
        })
        .collect()
}

/// Trades sharing a timestamp and aggressor side form a single market order.
pub fn aggregate_trades(log: &MarketDataLog) -> Vec<TimedEvent> {
    let mut out: Vec<TimedEvent> = Vec::new();
    for t in &log.trades {
        let kind = EventKind::new(EventClass::MarketOrder, t.aggressor_side);
        if out
            .last()
            .is_some_and(|last| last.timestamp_ms == t.timestamp && last.kind == kind)
        {
            continue;
        }
        out.push(TimedEvent {
            timestamp_ms: t.timestamp,
            kind,
        });
    }
    out
}

fn improves_or_joins(side: Side, price: u64, best: u64) -> bool {
    match side {
        Side::Bid => price >= best,
        Side::Ask => price <= best,
    }
}

/// Aggressive if the price joins or improves the same-side best, or the side
/// was empty; passive if strictly behind the best.
pub fn classify_limit(same_side_best: Option<u64>, side: Side, price: u64) -> EventKind {
    let aggressive = same_side_best.is_none_or(|best| improves_or_joins(side, price, best));
    let class = if aggressive {
        EventClass::AggressiveLimit
    } else {
        EventClass::PassiveLimit
    };
    EventKind::new(class, side)
}

/// Aggressive iff the cancelled order sat at the best price of its side.
pub fn classify_cancel(same_side_best: Option<u64>, side: Side, price: u64) -> EventKind {
    let class = if same_side_best == Some(price) {
        EventClass::AggressiveCancel
    } else {
        EventClass::PassiveCancel
    };
    EventKind::new(class, side)
}

/// Separate the only permitted coincidence, a market-order event followed by
/// the aggressive limit order its crossing residual spawned, by moving the
/// limit order one millisecond later.
pub fn resolve_concurrent(events: &[TimedEvent]) -> Result<Vec<TimedEvent>> {
    let mut out = Vec::with_capacity(events.len());
    let mut i = 0;
    while i < events.len() {
        let ts = events[i].timestamp_ms;
        let group_end = events[i..]
            .iter()
            .position(|e| e.timestamp_ms != ts)
            .map_or(events.len(), |p| i + p);
        match &events[i..group_end] {
            [single] => out.push(*single),
            [first, second]
                if first.kind.class == EventClass::MarketOrder
                    && second.kind == EventKind::new(EventClass::AggressiveLimit, first.kind.side) =>
            {
                out.push(*first);
                out.push(TimedEvent {
                    timestamp_ms: ts + 1,
                    kind: second.kind,
                });
            }
            group => {
                return Err(Error::Concurrency {
                    timestamp_ms: ts,
                    detail: format!("{group:?}"),
                })
            }
        }
        i = group_end;
    }
    for w in out.windows(2) {
        if w[1].timestamp_ms <= w[0].timestamp_ms {
            return Err(Error::Concurrency {
                timestamp_ms: w[1].timestamp_ms,
                detail: "shifted limit order collides with the next message".into(),
            });
        }
    }
    Ok(out)
}

#[derive(Default)]
struct ReplayBook {
    levels: [BTreeMap<u64, u64>; 2],
    orders: HashMap<u64, (Side, u64, u64)>,
}

impl ReplayBook {
    fn side(side: Side) -> usize {
        match side {
            Side::Bid => 0,
            Side::Ask => 1,
        }
    }

    fn best(&self, side: Side) -> Option<u64> {
        let levels = &self.levels[Self::side(side)];
        match side {
            Side::Bid => levels.keys().next_back().copied(),
            Side::Ask => levels.keys().next().copied(),
        }
    }

    fn add(&mut self, id: u64, side: Side, price: u64, volume: u64) {
        *self.levels[Self::side(side)].entry(price).or_default() += volume;
        self.orders.insert(id, (side, price, volume));
    }

    fn reduce(&mut self, id: u64, volume: u64) -> Result<()> {
        let entry = self
            .orders
            .get_mut(&id)
            .ok_or_else(|| Error::Stream(format!("order {id} is not resting")))?;
        let (side, price, remaining) = *entry;
        if volume > remaining {
            return Err(Error::Stream(format!("order {id} over-filled")));
        }
        entry.2 -= volume;
        if entry.2 == 0 {
            self.orders.remove(&id);
        }
        let levels = &mut self.levels[Self::side(side)];
        let level = levels.get_mut(&price).expect("level of a resting order");
        *level -= volume;
        if *level == 0 {
            levels.remove(&price);
        }
        Ok(())
    }
}

fn classify_message(book: &mut ReplayBook, group: &[BookEvent], out: &mut Vec<TimedEvent>) -> Result<()> {
    let ts = group[0].timestamp;
    let bad = |detail: &str| Error::Concurrency {
        timestamp_ms: ts,
        detail: detail.to_string(),
    };
    let executes: Vec<&BookEvent> = group.iter().filter(|e| e.kind == BookEventKind::Execute).collect();
    let news: Vec<&BookEvent> = group.iter().filter(|e| e.kind == BookEventKind::New).collect();
    let cancels: Vec<&BookEvent> = group.iter().filter(|e| e.kind == BookEventKind::Cancel).collect();

    match (executes.len(), news.len(), cancels.len()) {
        (0, 1, 0) => {
            let n = news[0];
            let kind = classify_limit(book.best(n.side), n.side, n.price);
            book.add(n.order_id, n.side, n.price, n.volume);
            out.push(TimedEvent { timestamp_ms: ts, kind });
        }
        (0, 0, 1) => {
            let c = cancels[0];
            let kind = classify_cancel(book.best(c.side), c.side, c.price);
            book.reduce(c.order_id, c.volume)?;
            out.push(TimedEvent { timestamp_ms: ts, kind });
        }
        (e, n, 0) if e > 0 && n <= 1 => {
            let maker_side = executes[0].side;
            let taker = executes[0].contra_id;
            if executes.iter().any(|x| x.side != maker_side || x.contra_id != taker) {
                return Err(bad("executions from more than one aggressor"));
            }
            let aggressor = maker_side.opposite();
            let residual_kind = match news.first() {
                Some(n) if n.order_id == taker && n.side == aggressor => {
                    Some(classify_limit(book.best(n.side), n.side, n.price))
                }
                Some(_) => return Err(bad("new order does not belong to the aggressor")),
                None => None,
            };
            for x in &executes {
                book.reduce(x.order_id, x.volume)?;
            }
            out.push(TimedEvent {
                timestamp_ms: ts,
                kind: EventKind::new(EventClass::MarketOrder, aggressor),
            });
            if let (Some(kind), Some(n)) = (residual_kind, news.first()) {
                book.add(n.order_id, n.side, n.price, n.volume);
                out.push(TimedEvent { timestamp_ms: ts, kind });
            }
        }
        _ => return Err(bad("unrecognised message pattern")),
    }
    Ok(())
}

/// Classify by replaying the order-level feed.
pub fn classify_book_events(log: &MarketDataLog, horizon: f64) -> Result<ClassifiedStream> {
    let mut book = ReplayBook::default();
    let mut raw = Vec::new();
    for group in log.book_events.chunk_by(|a, b| a.timestamp == b.timestamp) {
        classify_message(&mut book, group, &mut raw)?;
    }
    let resolved = resolve_concurrent(&raw)?;
    Ok(ClassifiedStream::from_timed(&resolved, horizon))
}

fn l1(q: &Quote, side: Side) -> (u64, u64) {
    match side {
        Side::Bid => (q.bid, q.bid_vol),
        Side::Ask => (q.ask, q.ask_vol),
    }
}

fn depth(q: &Quote, side: Side) -> u64 {
    match side {
        Side::Bid => q.bid_depth,
        Side::Ask => q.ask_depth,
    }
}

/// Classify from trades, top-of-book quotes and per-side depth only. Each
/// quote follows exactly one state-changing message.
pub fn classify_quotes(log: &MarketDataLog, horizon: f64) -> Result<ClassifiedStream> {
    let trades = aggregate_trades(log);
    let mut trade_iter = trades.iter().peekable();
    let mut prev = Quote {
        timestamp: 0,
        bid: 0,
        bid_vol: 0,
        ask: 0,
        ask_vol: 0,
        bid_depth: 0,
        ask_depth: 0,
    };
    let mut raw = Vec::new();
    for q in &log.quotes {
        let ts = q.timestamp;
        while trade_iter.peek().is_some_and(|t| t.timestamp_ms < ts) {
            trade_iter.next();
        }
        if let Some(trade) = trade_iter.next_if(|t| t.timestamp_ms == ts) {
            let side = trade.kind.side;
            raw.push(*trade);
            if depth(q, side) > depth(&prev, side) {
                raw.push(TimedEvent {
                    timestamp_ms: ts,
                    kind: EventKind::new(EventClass::AggressiveLimit, side),
                });
            }
        } else {
            let changed: Vec<Side> = [Side::Bid, Side::Ask]
                .into_iter()
                .filter(|&s| depth(q, s) != depth(&prev, s))
                .collect();
            let [side] = changed[..] else {
                return Err(Error::Concurrency {
                    timestamp_ms: ts,
                    detail: format!("quote update changes depth on {} sides without a trade", changed.len()),
                });
            };
            let top_moved = l1(q, side) != l1(&prev, side);
            let class = match (depth(q, side) > depth(&prev, side), top_moved) {
                (true, true) => EventClass::AggressiveLimit,
                (true, false) => EventClass::PassiveLimit,
                (false, true) => EventClass::AggressiveCancel,
                (false, false) => EventClass::PassiveCancel,
            };
            raw.push(TimedEvent {
                timestamp_ms: ts,
                kind: EventKind::new(class, side),
            });
        }
        prev = *q;
    }
    let resolved = resolve_concurrent(&raw)?;
    Ok(ClassifiedStream::from_timed(&resolved, horizon))
}

/// The reference model is observed directly: types and times pass through.
pub fn classify_reference(stream: &EventStream) -> ClassifiedStream {
    let events = stream
        .events
        .iter()
        .map(|e| Event { volume: None, ..*e })
        .collect();
    ClassifiedStream::from_stream(EventStream::new(stream.horizon, events))
}

/// Classify whatever a simulation run published.
pub fn classify(output: &SimulationOutput) -> Result<ClassifiedStream> {
    match &output.log {
        None => Ok(classify_reference(&output.stream)),
        Some(log) => classify_book_events(log, output.stream.horizon),
    }
}
