//! In-process limit order book and matching engine.

mod book;
mod log;
mod series;

pub use book::{
    LimitOrderBook, LimitOutcome, MarketOutcome, MatchingEngine, Order, Side, DEFAULT_REFERENCE_PRICE,
};
pub use log::{BookEvent, BookEventKind, Drop, MarketDataLog, Quote, Trade};
pub use series::{microstructure_series, write_series_csv, MicrostructurePoint};
