use std::path::Path;

use serde::{Deserialize, Serialize};

use super::book::Side;
use crate::csvio::{create, write_rows, Rows};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trade {
    pub timestamp: u64,
    pub price: u64,
    pub volume: u64,
    pub aggressor_side: Side,
    pub maker_order_id: u64,
    pub taker_ref: u64,
}

/// Top of book after a state-changing message, plus total resting volume per side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quote {
    pub timestamp: u64,
    pub bid: u64,
    pub bid_vol: u64,
    pub ask: u64,
    pub ask_vol: u64,
    pub bid_depth: u64,
    pub ask_depth: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BookEventKind {
    New,
    Cancel,
    Execute,
}

impl BookEventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BookEventKind::New => "new",
            BookEventKind::Cancel => "cancel",
            BookEventKind::Execute => "execute",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "new" => Some(Self::New),
            "cancel" => Some(Self::Cancel),
            "execute" => Some(Self::Execute),
            _ => None,
        }
    }
}

/// Order-level feed entry. For executions `order_id`, `side` and `price`
/// describe the maker and `contra_id` the aggressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookEvent {
    pub timestamp: u64,
    pub kind: BookEventKind,
    pub order_id: u64,
    pub side: Side,
    pub price: u64,
    pub volume: u64,
    pub contra_id: u64,
}

/// A message the engine received but could not act on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Drop {
    pub timestamp: u64,
    pub action: String,
    pub side: Option<Side>,
    pub order_id: u64,
}

/// Everything the engine publishes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MarketDataLog {
    pub trades: Vec<Trade>,
    pub quotes: Vec<Quote>,
    pub book_events: Vec<BookEvent>,
    pub drops: Vec<Drop>,
}

pub const TRADES_HEADER: [&str; 4] = ["timestamp_ms", "price", "volume", "aggressor_side"];
pub const QUOTES_HEADER: [&str; 5] = ["timestamp_ms", "bid", "bid_vol", "ask", "ask_vol"];
pub const DEPTH_HEADER: [&str; 3] = ["timestamp_ms", "bid_depth", "ask_depth"];
pub const EVENTS_HEADER: [&str; 7] = ["timestamp_ms", "kind", "order_id", "side", "price", "volume", "contra_id"];
pub const DROPS_HEADER: [&str; 4] = ["timestamp_ms", "action", "side", "order_id"];

impl MarketDataLog {
    /// Writes `trades.csv`, `quotes.csv`, `depth.csv`, `events.csv` and `drops.csv`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        write_rows(
            create(&dir.join("trades.csv"))?,
            &TRADES_HEADER,
            self.trades.iter().map(|t| {
                vec![
                    t.timestamp.to_string(),
                    t.price.to_string(),
                    t.volume.to_string(),
                    t.aggressor_side.as_str().to_string(),
                ]
            }),
        )?;
        write_rows(
            create(&dir.join("quotes.csv"))?,
            &QUOTES_HEADER,
            self.quotes.iter().map(|q| {
                [q.timestamp, q.bid, q.bid_vol, q.ask, q.ask_vol]
                    .iter()
                    .map(u64::to_string)
                    .collect()
            }),
        )?;
        write_rows(
            create(&dir.join("depth.csv"))?,
            &DEPTH_HEADER,
            self.quotes.iter().map(|q| {
                [q.timestamp, q.bid_depth, q.ask_depth]
                    .iter()
                    .map(u64::to_string)
                    .collect()
            }),
        )?;
        write_rows(
            create(&dir.join("events.csv"))?,
            &EVENTS_HEADER,
            self.book_events.iter().map(|e| {
                vec![
                    e.timestamp.to_string(),
                    e.kind.as_str().to_string(),
                    e.order_id.to_string(),
                    e.side.as_str().to_string(),
                    e.price.to_string(),
                    e.volume.to_string(),
                    e.contra_id.to_string(),
                ]
            }),
        )?;
        write_rows(
            create(&dir.join("drops.csv"))?,
            &DROPS_HEADER,
            self.drops.iter().map(|d| {
                vec![
                    d.timestamp.to_string(),
                    d.action.clone(),
                    d.side.map(|s| s.as_str().to_string()).unwrap_or_default(),
                    d.order_id.to_string(),
                ]
            }),
        )?;
        Ok(())
    }

    /// Inverse of [`MarketDataLog::write_dir`]. Trade maker/taker ids are
    /// recovered from the execution entries of `events.csv`.
    pub fn read_dir(dir: &Path) -> Result<Self> {
        let mut book_events = Vec::new();
        for row in Rows::open(&dir.join("events.csv"), &EVENTS_HEADER)?.iter() {
            let kind = BookEventKind::parse(row.str(1))
                .ok_or_else(|| row.error(format!("unknown kind {:?}", row.str(1))))?;
            let side = Side::parse(row.str(3)).ok_or_else(|| row.error(format!("unknown side {:?}", row.str(3))))?;
            book_events.push(BookEvent {
                timestamp: row.get(0, "timestamp")?,
                kind,
                order_id: row.get(2, "order_id")?,
                side,
                price: row.get(4, "price")?,
                volume: row.get(5, "volume")?,
                contra_id: row.get(6, "contra_id")?,
            });
        }

        let mut executions = book_events.iter().filter(|e| e.kind == BookEventKind::Execute);
        let mut trades = Vec::new();
        for row in Rows::open(&dir.join("trades.csv"), &TRADES_HEADER)?.iter() {
            let aggressor_side =
                Side::parse(row.str(3)).ok_or_else(|| row.error(format!("unknown side {:?}", row.str(3))))?;
            let exec = executions
                .next()
                .ok_or_else(|| row.error("trade without a matching execution in events.csv".into()))?;
            trades.push(Trade {
                timestamp: row.get(0, "timestamp")?,
                price: row.get(1, "price")?,
                volume: row.get(2, "volume")?,
                aggressor_side,
                maker_order_id: exec.order_id,
                taker_ref: exec.contra_id,
            });
        }

        let depth_rows = Rows::open(&dir.join("depth.csv"), &DEPTH_HEADER)?;
        let mut depth = depth_rows.iter();
        let mut quotes = Vec::new();
        for row in Rows::open(&dir.join("quotes.csv"), &QUOTES_HEADER)?.iter() {
            let d = depth
                .next()
                .ok_or_else(|| row.error("quote without a matching depth row".into()))?;
            quotes.push(Quote {
                timestamp: row.get(0, "timestamp")?,
                bid: row.get(1, "bid")?,
                bid_vol: row.get(2, "bid_vol")?,
                ask: row.get(3, "ask")?,
                ask_vol: row.get(4, "ask_vol")?,
                bid_depth: d.get(1, "bid_depth")?,
                ask_depth: d.get(2, "ask_depth")?,
            });
        }

        let mut drops = Vec::new();
        for row in Rows::open(&dir.join("drops.csv"), &DROPS_HEADER)?.iter() {
            drops.push(Drop {
                timestamp: row.get(0, "timestamp")?,
                action: row.str(1).to_string(),
                side: Side::parse(row.str(2)),
                order_id: row.get(3, "order_id")?,
            });
        }

        Ok(Self {
            trades,
            quotes,
            book_events,
            drops,
        })
    }
}
