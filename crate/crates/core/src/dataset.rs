//! Historical data CSV: `date,series_id,kind,value`, one row per sample.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydronet::{LakeId, RiverId};
use crate::series::{MonthlySeries, YearMonth};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SeriesKey {
    /// End-of-month lake level (m).
    Level(LakeId),
    /// Mean river flow over the month (m3/s).
    Flow(RiverId),
}

impl SeriesKey {
    fn id(&self) -> &'static str {
        match self {
            SeriesKey::Level(l) => l.code(),
            SeriesKey::Flow(r) => r.code(),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            SeriesKey::Level(_) => "level",
            SeriesKey::Flow(_) => "flow",
        }
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct Row {
    date: String,
    series_id: String,
    kind: String,
    value: f64,
}

/// A set of contiguous monthly series keyed by lake level or river flow.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    series: BTreeMap<SeriesKey, MonthlySeries>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: SeriesKey, series: MonthlySeries) {
        self.series.insert(key, series);
    }

    pub fn get(&self, key: SeriesKey) -> Option<&MonthlySeries> {
        self.series.get(&key)
    }

    pub fn level(&self, lake: LakeId) -> Result<&MonthlySeries> {
        self.get(SeriesKey::Level(lake))
            .ok_or_else(|| Error::Data(format!("no level series for lake {lake}")))
    }

    pub fn flow(&self, river: RiverId) -> Result<&MonthlySeries> {
        self.get(SeriesKey::Flow(river))
            .ok_or_else(|| Error::Data(format!("no flow series for river {river}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SeriesKey, &MonthlySeries)> {
        self.series.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Concatenate `later` onto this dataset; each of its series must either be
    /// new or continue the matching series without a gap.
    pub fn append(&mut self, later: &Dataset) -> Result<()> {
        for (key, s) in &later.series {
            match self.series.get_mut(key) {
                None => {
                    self.series.insert(*key, s.clone());
                }
                Some(cur) => {
                    if cur.end().add_months(1) != s.start {
                        return Err(Error::Data(format!(
                            "{} {} continues at {} but the earlier series ends {}",
                            key.kind(),
                            key.id(),
                            s.start,
                            cur.end()
                        )));
                    }
                    cur.values.extend_from_slice(&s.values);
                }
            }
        }
        Ok(())
    }

    /// Parse the CSV format. Rows of one series must be consecutive months in
    /// increasing order, though series may interleave.
    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Csv { row: 1, message: e.to_string() })?
            .clone();
        let expected = ["date", "series_id", "kind", "value"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Csv {
                row: 1,
                message: format!("header must be {}", expected.join(",")),
            });
        }
        let mut out: BTreeMap<SeriesKey, MonthlySeries> = BTreeMap::new();
        for (i, rec) in rdr.deserialize::<Row>().enumerate() {
            let row = i + 2;
            let err = |message: String| Error::Csv { row, message };
            let rec = rec.map_err(|e| err(e.to_string()))?;
            let date: YearMonth = rec.date.parse().map_err(|e: Error| err(e.to_string()))?;
            let key = match rec.kind.as_str() {
                "level" => SeriesKey::Level(rec.series_id.parse().map_err(|e: Error| err(e.to_string()))?),
                "flow" => SeriesKey::Flow(rec.series_id.parse().map_err(|e: Error| err(e.to_string()))?),
                other => return Err(err(format!("unknown kind {other:?}, expected level or flow"))),
            };
            if !rec.value.is_finite() {
                return Err(err(format!("value {} is not finite", rec.value)));
            }
            match out.get_mut(&key) {
                None => {
                    out.insert(key, MonthlySeries::new(date, vec![rec.value]));
                }
                Some(s) => {
                    let next = s.end().add_months(1);
                    if date != next {
                        return Err(err(format!(
                            "{} {}: expected {next} after {}, got {date}",
                            key.kind(),
                            key.id(),
                            s.end()
                        )));
                    }
                    s.values.push(rec.value);
                }
            }
        }
        if out.is_empty() {
            return Err(Error::Csv {
                row: 1,
                message: "no data rows".into(),
            });
        }
        Ok(Self { series: out })
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        for (key, s) in &self.series {
            for (i, v) in s.values.iter().enumerate() {
                w.serialize(Row {
                    date: s.month_at(i).to_string(),
                    series_id: key.id().to_string(),
                    kind: key.kind().to_string(),
                    value: *v,
                })
                .map_err(io)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
