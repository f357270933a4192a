use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One point of a marked point process. `mark` is the 0-based event type;
/// files carry it 1-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub mark: usize,
    pub volume: Option<u64>,
}

/// A realisation of a marked point process on `(0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    pub horizon: f64,
    pub events: Vec<Event>,
}

#[derive(Serialize, Deserialize)]
struct EventRecord {
    time: f64,
    #[serde(rename = "type")]
    event_type: usize,
    volume: Option<u64>,
}

impl EventStream {
    pub fn new(horizon: f64, events: Vec<Event>) -> Self {
        Self { horizon, events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.events.iter().map(|e| e.time)
    }

    /// Checks strictly increasing times on `(0, horizon]` and marks below `dimension`.
    pub fn validate(&self, dimension: usize) -> Result<()> {
        if !(self.horizon > 0.0) {
            return Err(Error::Stream(format!("horizon must be positive, got {}", self.horizon)));
        }
        let mut prev = 0.0;
        for (i, e) in self.events.iter().enumerate() {
            if !(e.time > prev) {
                return Err(Error::Stream(format!(
                    "event {i}: time {} is not after {prev}",
                    e.time
                )));
            }
            if e.time > self.horizon {
                return Err(Error::Stream(format!(
                    "event {i}: time {} exceeds horizon {}",
                    e.time, self.horizon
                )));
            }
            if e.mark >= dimension {
                return Err(Error::Stream(format!(
                    "event {i}: type {} out of range 1..={dimension}",
                    e.mark + 1
                )));
            }
            prev = e.time;
        }
        Ok(())
    }

    pub fn counts(&self, dimension: usize) -> Vec<usize> {
        let mut counts = vec![0; dimension];
        for e in &self.events {
            if e.mark < dimension {
                counts[e.mark] += 1;
            }
        }
        counts
    }

    /// Keep only the given (0-based) types, relabelled by their position in `types`.
    pub fn restrict(&self, types: &[usize]) -> Self {
        let events = self
            .events
            .iter()
            .filter_map(|e| {
                types
                    .iter()
                    .position(|&t| t == e.mark)
                    .map(|mark| Event { mark, ..*e })
            })
            .collect();
        Self::new(self.horizon, events)
    }

    /// Truncate to `(0, horizon]`.
    pub fn truncate(&self, horizon: f64) -> Self {
        Self::new(
            horizon,
            self.events.iter().filter(|e| e.time <= horizon).copied().collect(),
        )
    }

    /// CSV with header `time,type,volume`; times with 6 fractional digits and
    /// an empty volume field when absent.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "type", "volume"])?;
        for e in &self.events {
            w.write_record([
                format!("{:.6}", e.time),
                (e.mark + 1).to_string(),
                e.volume.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, horizon: f64, source: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let headers = reader.headers()?.clone();
        let expected = ["time", "type", "volume"];
        if headers.len() < 2 || headers.get(0) != Some("time") || headers.get(1) != Some("type") {
            return Err(Error::Parse {
                path: source.into(),
                line: 1,
                message: format!("expected header {}", expected.join(",")),
            });
        }
        let mut events = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Parse {
                path: source.into(),
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let bad = |message: String| Error::Parse {
                path: source.into(),
                line,
                message,
            };
            let time: f64 = record[0]
                .trim()
                .parse()
                .map_err(|_| bad(format!("invalid time {:?}", &record[0])))?;
            let event_type: usize = record[1]
                .trim()
                .parse()
                .map_err(|_| bad(format!("invalid type {:?}", &record[1])))?;
            if event_type == 0 {
                return Err(bad("event types are numbered from 1".into()));
            }
            let volume = match record.get(2).map(str::trim) {
                None | Some("") => None,
                Some(v) => Some(v.parse().map_err(|_| bad(format!("invalid volume {v:?}")))?),
            };
            events.push(Event {
                time,
                mark: event_type - 1,
                volume,
            });
        }
        let horizon = events.last().map_or(horizon, |e| horizon.max(e.time));
        Ok(Self::new(horizon, events))
    }

    pub fn to_json(&self) -> Result<String> {
        let records: Vec<EventRecord> = self
            .events
            .iter()
            .map(|e| EventRecord {
                time: e.time,
                event_type: e.mark + 1,
                volume: e.volume,
            })
            .collect();
        Ok(serde_json::to_string_pretty(&records)?)
    }

    pub fn from_json(text: &str, horizon: f64) -> Result<Self> {
        let records: Vec<EventRecord> = serde_json::from_str(text)?;
        let events: Vec<Event> = records
            .into_iter()
            .map(|r| {
                if r.event_type == 0 {
                    return Err(Error::Stream("event types are numbered from 1".into()));
                }
                Ok(Event {
                    time: r.time,
                    mark: r.event_type - 1,
                    volume: r.volume,
                })
            })
            .collect::<Result<_>>()?;
        let horizon = events.last().map_or(horizon, |e| horizon.max(e.time));
        Ok(Self::new(horizon, events))
    }
}
