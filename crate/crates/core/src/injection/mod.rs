//! Turning Hawkes events into matching-engine messages.

mod rules;

use std::io::Write;

use rand::Rng;
use serde::Serialize;

pub use rules::{
    limit_price_model1, limit_price_model2, EventClass, EventKind, InjectionModel, OrderClass, PriceContext,
    PricedOrder, VolumeModel, EVENT_TYPES,
};

use crate::csvio::write_rows;
use crate::error::{Error, Result};
use crate::hawkes::{EventStream, TIME_RESOLUTION};
use crate::lob::{MarketDataLog, MatchingEngine, Side, DEFAULT_REFERENCE_PRICE};
use crate::rng::{open_unit, substream, Substream};

/// Minimum spacing of engine timestamps. A crossing limit order's resting
/// residual is reported one millisecond after its executions, so two
/// milliseconds keep every message strictly ordered after that shift.
pub const MIN_MESSAGE_GAP_MS: u64 = 2;

/// Fill in missing market/limit order volumes from the volume substream.
/// One draw per market or limit event in stream order, so the result depends
/// only on the stream and seed.
pub fn assign_volumes(stream: &EventStream, model: &VolumeModel, seed: u64) -> Result<EventStream> {
    model.validate()?;
    let mut rng = substream(seed, Substream::Volumes);
    let mut out = stream.clone();
    for e in &mut out.events {
        let kind = EventKind::from_mark(e.mark)?;
        let class = match kind.class {
            EventClass::MarketOrder => OrderClass::Market,
            EventClass::AggressiveLimit | EventClass::PassiveLimit => OrderClass::Limit,
            _ => continue,
        };
        let u = open_unit(&mut rng);
        if e.volume.is_none() {
            e.volume = Some(model.sample(class, u));
        }
    }
    Ok(out)
}

/// Virtual engine timestamps: event times rounded up to whole milliseconds,
/// then pushed forward where needed to keep [`MIN_MESSAGE_GAP_MS`].
pub fn engine_timestamps(stream: &EventStream) -> Vec<u64> {
    let mut prev: Option<u64> = None;
    stream
        .events
        .iter()
        .map(|e| {
            let micros = (e.time / TIME_RESOLUTION).round().max(0.0) as u64;
            let mut ms = micros.div_ceil(1000).max(1);
            if let Some(p) = prev {
                ms = ms.max(p + MIN_MESSAGE_GAP_MS);
            }
            prev = Some(ms);
            ms
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Market,
    LimitAggressive,
    LimitPassive,
    CancelAggressive,
    CancelPassive,
}

impl Action {
    fn of(kind: EventKind) -> Self {
        match kind.class {
            EventClass::MarketOrder => Action::Market,
            EventClass::AggressiveLimit => Action::LimitAggressive,
            EventClass::PassiveLimit => Action::LimitPassive,
            EventClass::AggressiveCancel => Action::CancelAggressive,
            EventClass::PassiveCancel => Action::CancelPassive,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Market => "market",
            Action::LimitAggressive => "limit_aggressive",
            Action::LimitPassive => "limit_passive",
            Action::CancelAggressive => "cancel_aggressive",
            Action::CancelPassive => "cancel_passive",
        }
    }
}

/// One injected (or dropped) message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MessageRecord {
    pub timestamp_ms: u64,
    pub action: Action,
    pub side: Side,
    /// Limit price, or the cancelled order's price; 0 for market orders and drops.
    pub price: u64,
    pub volume: u64,
    pub order_id: u64,
    pub dropped: bool,
    /// 0-based Hawkes type that produced the message.
    pub event_type: usize,
}

pub const MESSAGES_HEADER: [&str; 7] = ["timestamp_ms", "action", "side", "price", "volume", "order_id", "dropped"];

pub fn write_messages_csv<W: Write>(messages: &[MessageRecord], out: W) -> Result<()> {
    write_rows(
        out,
        &MESSAGES_HEADER,
        messages.iter().map(|m| {
            vec![
                m.timestamp_ms.to_string(),
                m.action.as_str().to_string(),
                m.side.as_str().to_string(),
                m.price.to_string(),
                m.volume.to_string(),
                m.order_id.to_string(),
                m.dropped.to_string(),
            ]
        }),
    )
}

/// Result of pushing one Hawkes realisation through the engine.
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub model: InjectionModel,
    /// The realisation that drove the run, with volumes filled in.
    pub stream: EventStream,
    /// `None` for the reference model, which never touches the engine.
    pub log: Option<MarketDataLog>,
    pub messages: Vec<MessageRecord>,
    pub clamped_prices: usize,
}

impl SimulationOutput {
    pub fn dropped(&self) -> usize {
        self.messages.iter().filter(|m| m.dropped).count()
    }
}

/// Inject a Hawkes realisation under `model`. Randomness for tick offsets and
/// cancel targets comes from their own substreams; the stream and its
/// volumes are shared by all models.
pub fn run_simulation(
    stream: &EventStream,
    model: InjectionModel,
    seed: u64,
    volumes: &VolumeModel,
) -> Result<SimulationOutput> {
    stream.validate(EVENT_TYPES)?;
    let stream = assign_volumes(stream, volumes, seed)?;
    if model == InjectionModel::Reference {
        return Ok(SimulationOutput {
            model,
            stream,
            log: None,
            messages: Vec::new(),
            clamped_prices: 0,
        });
    }

    let mut offsets = substream(seed, Substream::PriceOffsets);
    let mut choices = substream(seed, Substream::CancelChoice);
    let mut engine = MatchingEngine::new(DEFAULT_REFERENCE_PRICE);
    let mut messages = Vec::with_capacity(stream.len());
    let mut clamped_prices = 0;
    let timestamps = engine_timestamps(&stream);

    for (event, &ts) in stream.events.iter().zip(&timestamps) {
        let kind = EventKind::from_mark(event.mark)?;
        let side = kind.side;
        let volume = event.volume.unwrap_or(0);
        let mut record = MessageRecord {
            timestamp_ms: ts,
            action: Action::of(kind),
            side,
            price: 0,
            volume,
            order_id: 0,
            dropped: false,
            event_type: event.mark,
        };
        match kind.class {
            EventClass::AggressiveLimit | EventClass::PassiveLimit => {
                let u: i64 = offsets.random_range(1..=10);
                let (b, _, a, _) = engine.best_quotes();
                let ctx = PriceContext {
                    best_bid: b as i64,
                    best_ask: a as i64,
                    prev_best_bid: engine.book().last_best(Side::Bid) as i64,
                    prev_best_ask: engine.book().last_best(Side::Ask) as i64,
                };
                let priced = match model {
                    InjectionModel::Model1 => limit_price_model1(ctx, side, kind.is_aggressive(), u),
                    InjectionModel::Model2 => limit_price_model2(ctx, side, kind.is_aggressive(), u),
                    InjectionModel::Reference => unreachable!(),
                };
                clamped_prices += usize::from(priced.clamped);
                let out = engine.submit_limit(side, priced.price, volume, ts)?;
                record.price = priced.price;
                record.order_id = out.order_id;
            }
            EventClass::MarketOrder => {
                if engine.book().is_empty(side.opposite()) {
                    record.dropped = true;
                } else {
                    record.order_id = engine.submit_market(side, volume, ts)?.order_id;
                }
            }
            EventClass::AggressiveCancel | EventClass::PassiveCancel => {
                record.volume = 0;
                let candidates = if kind.is_aggressive() {
                    engine.book().l1_orders(side)
                } else {
                    engine.book().deeper_orders(side)
                };
                if candidates.is_empty() {
                    record.dropped = true;
                } else {
                    let id = candidates[choices.random_range(0..candidates.len())];
                    let order = engine
                        .cancel(id, ts)
                        .ok_or_else(|| Error::InvalidOrder(format!("resting order {id} vanished")))?;
                    record.price = order.price;
                    record.volume = order.volume;
                    record.order_id = id;
                }
            }
        }
        messages.push(record);
    }

    Ok(SimulationOutput {
        model,
        stream,
        log: Some(engine.into_log()),
        messages,
        clamped_prices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hawkes::Event;

    fn stream(events: &[(f64, usize)]) -> EventStream {
        EventStream::new(
            100.0,
            events
                .iter()
                .map(|&(time, mark)| Event { time, mark, volume: None })
                .collect(),
        )
    }

    #[test]
    fn timestamps_are_spaced() {
        let s = stream(&[(0.0004, 0), (0.0011, 1), (0.0012, 2), (5.0, 3)]);
        assert_eq!(engine_timestamps(&s), vec![1, 3, 5, 5000]);
    }

    #[test]
    fn first_limit_order_prices_off_1000() {
        let s = stream(&[(1.0, 2)]);
        let out = run_simulation(&s, InjectionModel::Model1, 3, &VolumeModel::default()).unwrap();
        let m = &out.messages[0];
        assert!(!m.dropped);
        assert!((990..1000).contains(&m.price), "price {}", m.price);
    }

    #[test]
    fn market_order_on_empty_contra_is_dropped() {
        let s = stream(&[(1.0, 0), (2.0, 1)]);
        let out = run_simulation(&s, InjectionModel::Model2, 3, &VolumeModel::default()).unwrap();
        assert!(out.messages.iter().all(|m| m.dropped));
        let log = out.log.unwrap();
        assert!(log.quotes.is_empty() && log.trades.is_empty());
    }

    #[test]
    fn passive_cancel_with_single_level_is_dropped() {
        // Two aggressive bids into a book with no asks: the first lands at
        // 1000 - u, the second improves it by one tick, leaving two levels;
        // aggressive cancel removes the top, then passive cancel finds one level.
        let s = stream(&[(1.0, 2), (2.0, 2), (3.0, 6), (4.0, 8)]);
        let out = run_simulation(&s, InjectionModel::Model1, 9, &VolumeModel::default()).unwrap();
        assert!(!out.messages[2].dropped);
        assert!(out.messages[3].dropped);
    }

    #[test]
    fn reference_model_skips_engine() {
        let s = stream(&[(1.0, 0), (2.0, 4)]);
        let out = run_simulation(&s, InjectionModel::Reference, 1, &VolumeModel::default()).unwrap();
        assert!(out.log.is_none());
        assert!(out.messages.is_empty());
        assert!(out.stream.events.iter().all(|e| e.volume.is_some()));
    }

    #[test]
    fn volumes_shared_across_models() {
        let s = stream(&[(1.0, 2), (2.0, 3), (3.0, 0), (4.0, 8)]);
        let a = assign_volumes(&s, &VolumeModel::default(), 5).unwrap();
        let b = run_simulation(&s, InjectionModel::Model2, 5, &VolumeModel::default()).unwrap();
        assert_eq!(a, b.stream);
        assert!(a.events[3].volume.is_none());
        assert!(a.events[0].volume.unwrap() >= 20);
        assert!(a.events[2].volume.unwrap() >= 50);
    }
}
