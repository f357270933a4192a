use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lob::Side;

/// The five message classes behind the ten Hawkes event types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventClass {
    MarketOrder,
    AggressiveLimit,
    PassiveLimit,
    AggressiveCancel,
    PassiveCancel,
}

/// One row of the event-type table: types 1-2 market orders, 3-4 aggressive
/// limit orders, 5-6 passive limit orders, 7-8 aggressive cancels, 9-10
/// passive cancels; odd types are bids, even types asks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventKind {
    pub class: EventClass,
    pub side: Side,
}

pub const EVENT_TYPES: usize = 10;

impl EventKind {
    pub const fn new(class: EventClass, side: Side) -> Self {
        Self { class, side }
    }

    /// From a 0-based mark (type number minus one).
    pub fn from_mark(mark: usize) -> Result<Self> {
        let class = match mark / 2 {
            0 => EventClass::MarketOrder,
            1 => EventClass::AggressiveLimit,
            2 => EventClass::PassiveLimit,
            3 => EventClass::AggressiveCancel,
            4 => EventClass::PassiveCancel,
            _ => return Err(Error::Domain(format!("event type {} is not in 1..=10", mark + 1))),
        };
        let side = if mark % 2 == 0 { Side::Bid } else { Side::Ask };
        Ok(Self { class, side })
    }

    /// 0-based mark.
    pub fn mark(self) -> usize {
        let base = match self.class {
            EventClass::MarketOrder => 0,
            EventClass::AggressiveLimit => 2,
            EventClass::PassiveLimit => 4,
            EventClass::AggressiveCancel => 6,
            EventClass::PassiveCancel => 8,
        };
        base + usize::from(self.side == Side::Ask)
    }

    /// 1-based type number.
    pub fn type_number(self) -> usize {
        self.mark() + 1
    }

    pub fn is_limit(self) -> bool {
        matches!(self.class, EventClass::AggressiveLimit | EventClass::PassiveLimit)
    }

    pub fn is_cancel(self) -> bool {
        matches!(self.class, EventClass::AggressiveCancel | EventClass::PassiveCancel)
    }

    pub fn is_aggressive(self) -> bool {
        matches!(self.class, EventClass::AggressiveLimit | EventClass::AggressiveCancel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderClass {
    Limit,
    Market,
}

/// Pareto order sizes with density `alpha x_m^alpha / x^(alpha+1)` on `x >= x_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeModel {
    pub x_m_lo: f64,
    pub x_m_mo: f64,
    pub alpha: f64,
}

impl Default for VolumeModel {
    fn default() -> Self {
        Self {
            x_m_lo: 20.0,
            x_m_mo: 50.0,
            alpha: 1.0,
        }
    }
}

impl VolumeModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_m_lo >= 1.0 && self.x_m_mo >= 1.0 && self.alpha > 0.0) {
            return Err(Error::InvalidParams(format!(
                "volume model needs x_m >= 1 and alpha > 0, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Inverse-CDF sample `x_m (1-u)^(-1/alpha)`, floored to whole units.
    pub fn sample(&self, class: OrderClass, u: f64) -> u64 {
        let x_m = match class {
            OrderClass::Limit => self.x_m_lo,
            OrderClass::Market => self.x_m_mo,
        };
        let x = x_m * (1.0 - u).powf(-1.0 / self.alpha);
        (x.floor() as u64).max(x_m.ceil() as u64)
    }
}

/// How aggressive limit orders are priced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InjectionModel {
    /// No engine: the Hawkes stream is observed directly.
    Reference,
    /// Always improve the best by one tick, crossing if the spread is one tick.
    Model1,
    /// Improve only while the spread exceeds one tick, otherwise join the best.
    Model2,
}

impl InjectionModel {
    pub fn as_str(self) -> &'static str {
        match self {
            InjectionModel::Reference => "reference",
            InjectionModel::Model1 => "model1",
            InjectionModel::Model2 => "model2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "reference" => Some(Self::Reference),
            "model1" => Some(Self::Model1),
            "model2" => Some(Self::Model2),
            _ => None,
        }
    }

    pub const ALL: [InjectionModel; 3] = [Self::Reference, Self::Model1, Self::Model2];
}

/// Current and remembered best prices; 0 marks an empty side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PriceContext {
    pub best_bid: i64,
    pub best_ask: i64,
    pub prev_best_bid: i64,
    pub prev_best_ask: i64,
}

impl PriceContext {
    /// When the whole book is empty the contra reference becomes the last
    /// best price on that side and the own side stays empty.
    fn effective(&self, side: Side) -> (i64, i64) {
        if self.best_bid == 0 && self.best_ask == 0 {
            match side {
                Side::Bid => (0, self.prev_best_ask),
                Side::Ask => (self.prev_best_bid, 0),
            }
        } else {
            (self.best_bid, self.best_ask)
        }
    }
}

/// A limit price plus whether it had to be clamped up to one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PricedOrder {
    pub price: u64,
    pub clamped: bool,
}

fn clamp(p: i64) -> PricedOrder {
    if p < 1 {
        PricedOrder { price: 1, clamped: true }
    } else {
        PricedOrder { price: p as u64, clamped: false }
    }
}

fn passive_price(b: i64, a: i64, side: Side, u: i64) -> i64 {
    match side {
        Side::Bid => {
            if a == 0 || b != 0 {
                b - 1
            } else {
                a - u
            }
        }
        Side::Ask => {
            if b == 0 || a != 0 {
                a + 1
            } else {
                b + u
            }
        }
    }
}

/// Model 1 limit price; `u` is the random tick offset in `1..=10`.
pub fn limit_price_model1(ctx: PriceContext, side: Side, aggressive: bool, u: i64) -> PricedOrder {
    let (b, a) = ctx.effective(side);
    let p = if !aggressive {
        passive_price(b, a, side, u)
    } else {
        match side {
            Side::Bid if b == 0 => a - u,
            Side::Bid => b + 1,
            Side::Ask if a == 0 => b + u,
            Side::Ask => a - 1,
        }
    };
    clamp(p)
}

/// Model 2 limit price: aggressive orders improve by one tick only while the
/// spread is wider than one tick, so they never cross.
pub fn limit_price_model2(ctx: PriceContext, side: Side, aggressive: bool, u: i64) -> PricedOrder {
    let (b, a) = ctx.effective(side);
    let p = if !aggressive {
        passive_price(b, a, side, u)
    } else {
        let spread = (a - b).abs();
        match side {
            Side::Bid if b == 0 => a - u,
            Side::Bid if spread > 1 => b + 1,
            Side::Bid => b,
            Side::Ask if a == 0 => b + u,
            Side::Ask if spread > 1 => a - 1,
            Side::Ask => a,
        }
    };
    clamp(p)
}
