use std::io::Write;

use serde::Serialize;

use super::log::{MarketDataLog, Quote};
use crate::csvio::{opt_f64, write_rows};
use crate::error::Result;

/// Price and liquidity summary after one quote update. Fields are `None`
/// when either side of the book is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MicrostructurePoint {
    pub timestamp: u64,
    pub mid: Option<f64>,
    pub micro: Option<f64>,
    pub spread: Option<f64>,
    pub imbalance: Option<f64>,
}

impl MicrostructurePoint {
    pub fn from_quote(q: &Quote) -> Self {
        if q.bid == 0 || q.ask == 0 {
            return Self {
                timestamp: q.timestamp,
                mid: None,
                micro: None,
                spread: None,
                imbalance: None,
            };
        }
        let (b, a) = (q.bid as f64, q.ask as f64);
        let (vb, va) = (q.bid_depth as f64, q.ask_depth as f64);
        Self {
            timestamp: q.timestamp,
            mid: Some(0.5 * (b + a)),
            micro: Some((vb * a + va * b) / (vb + va)),
            spread: Some(a - b),
            imbalance: Some((vb - va) / (vb + va)),
        }
    }
}

/// Mid-price, micro-price, spread and depth imbalance after every quote update.
pub fn microstructure_series(log: &MarketDataLog) -> Vec<MicrostructurePoint> {
    log.quotes.iter().map(MicrostructurePoint::from_quote).collect()
}

pub fn write_series_csv<W: Write>(points: &[MicrostructurePoint], out: W) -> Result<()> {
    write_rows(
        out,
        &["timestamp_ms", "mid", "micro", "spread", "imbalance"],
        points.iter().map(|p| {
            vec![
                p.timestamp.to_string(),
                opt_f64(p.mid),
                opt_f64(p.micro),
                opt_f64(p.spread),
                opt_f64(p.imbalance),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quote(bid: u64, ask: u64, bid_depth: u64, ask_depth: u64) -> Quote {
        Quote {
            timestamp: 1,
            bid,
            bid_vol: bid_depth,
            ask,
            ask_vol: ask_depth,
            bid_depth,
            ask_depth,
        }
    }

    #[test]
    fn symmetric_book() {
        let p = MicrostructurePoint::from_quote(&quote(100, 102, 10, 10));
        assert_eq!(p.mid, Some(101.0));
        assert_eq!(p.spread, Some(2.0));
        assert_eq!(p.imbalance, Some(0.0));
        assert_eq!(p.micro, Some(101.0));
    }

    #[test]
    fn bid_heavy_book() {
        let p = MicrostructurePoint::from_quote(&quote(100, 102, 30, 10));
        assert_eq!(p.imbalance, Some(0.5));
        // micro-price leans toward the ask when bids dominate
        assert_eq!(p.micro, Some((30.0 * 102.0 + 10.0 * 100.0) / 40.0));
    }

    #[test]
    fn one_sided_book_is_missing() {
        let p = MicrostructurePoint::from_quote(&quote(100, 0, 30, 0));
        assert!(p.mid.is_none() && p.spread.is_none() && p.imbalance.is_none() && p.micro.is_none());
    }
}
