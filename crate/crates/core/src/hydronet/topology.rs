//! Lake and river identifiers, per-id containers and the network layout.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Seconds per day.
pub const DAY_SECONDS: f64 = 86_400.0;
/// Mean month length used for flow to volume integration (365.25 / 12, rounded).
pub const DEFAULT_MONTH_DAYS: f64 = 30.44;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LakeId {
    Superior,
    MichiganHuron,
    StClair,
    Erie,
    Ontario,
}

impl LakeId {
    pub const ALL: [LakeId; 5] = [
        LakeId::Superior,
        LakeId::MichiganHuron,
        LakeId::StClair,
        LakeId::Erie,
        LakeId::Ontario,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Short id used in files: `A`..`E`.
    pub fn code(self) -> &'static str {
        match self {
            LakeId::Superior => "A",
            LakeId::MichiganHuron => "B",
            LakeId::StClair => "C",
            LakeId::Erie => "D",
            LakeId::Ontario => "E",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LakeId::Superior => "superior",
            LakeId::MichiganHuron => "michigan_huron",
            LakeId::StClair => "st_clair",
            LakeId::Erie => "erie",
            LakeId::Ontario => "ontario",
        }
    }
}

impl fmt::Display for LakeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for LakeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LakeId::ALL
            .into_iter()
            .find(|l| l.code() == s || l.name() == s)
            .ok_or_else(|| Error::Data(format!("unknown lake id {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RiverId {
    StMarys,
    StClair,
    Detroit,
    Niagara,
    StLawrence,
    Ottawa,
}

impl RiverId {
    pub const ALL: [RiverId; 6] = [
        RiverId::StMarys,
        RiverId::StClair,
        RiverId::Detroit,
        RiverId::Niagara,
        RiverId::StLawrence,
        RiverId::Ottawa,
    ];

    /// The four rivers whose flow follows the upstream lake level.
    pub const RATED: [RiverId; 4] = [
        RiverId::StMarys,
        RiverId::StClair,
        RiverId::Detroit,
        RiverId::Niagara,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Short id used in files: `a`..`e`, `ottawa`.
    pub fn code(self) -> &'static str {
        match self {
            RiverId::StMarys => "a",
            RiverId::StClair => "b",
            RiverId::Detroit => "c",
            RiverId::Niagara => "d",
            RiverId::StLawrence => "e",
            RiverId::Ottawa => "ottawa",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RiverId::StMarys => "st_marys",
            RiverId::StClair => "st_clair_river",
            RiverId::Detroit => "detroit",
            RiverId::Niagara => "niagara",
            RiverId::StLawrence => "st_lawrence",
            RiverId::Ottawa => "ottawa",
        }
    }
}

impl fmt::Display for RiverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for RiverId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RiverId::ALL
            .into_iter()
            .find(|r| r.code() == s || r.name() == s)
            .ok_or_else(|| Error::Data(format!("unknown river id {s:?}")))
    }
}

macro_rules! string_serde {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(self.code())
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(LakeId);
string_serde!(RiverId);

/// One value per lake, indexed by [`LakeId`].
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PerLake<T>(pub [T; 5]);

/// One value per river, indexed by [`RiverId`].
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PerRiver<T>(pub [T; 6]);

macro_rules! keyed_array {
    ($name:ident, $key:ty, $n:expr) => {
        impl<T> $name<T> {
            pub fn from_fn(mut f: impl FnMut($key) -> T) -> Self {
                let mut keys = <$key>::ALL.into_iter();
                $name(std::array::from_fn(|_| f(keys.next().unwrap())))
            }

            pub fn iter(&self) -> impl Iterator<Item = ($key, &T)> {
                <$key>::ALL.into_iter().zip(self.0.iter())
            }

            pub fn map<U>(&self, mut f: impl FnMut($key, &T) -> U) -> $name<U> {
                $name::from_fn(|k| f(k, &self[k]))
            }
        }

        impl<T: Clone> $name<T> {
            pub fn splat(value: T) -> Self {
                $name::from_fn(|_| value.clone())
            }
        }

        impl<T> Index<$key> for $name<T> {
            type Output = T;
            fn index(&self, key: $key) -> &T {
                &self.0[key.index()]
            }
        }

        impl<T> IndexMut<$key> for $name<T> {
            fn index_mut(&mut self, key: $key) -> &mut T {
                &mut self.0[key.index()]
            }
        }

        impl<T: Serialize> Serialize for $name<T> {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                use serde::ser::SerializeMap;
                let mut map = s.serialize_map(Some($n))?;
                for (k, v) in self.iter() {
                    map.serialize_entry(k.code(), v)?;
                }
                map.end()
            }
        }

        impl<'de, T: DeserializeOwned> Deserialize<'de> for $name<T> {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let mut raw: BTreeMap<$key, T> = BTreeMap::deserialize(d)?;
                let mut missing = Vec::new();
                let mut out: Vec<T> = Vec::with_capacity($n);
                for k in <$key>::ALL {
                    match raw.remove(&k) {
                        Some(v) => out.push(v),
                        None => missing.push(k.code()),
                    }
                }
                if !missing.is_empty() {
                    return Err(serde::de::Error::custom(format!(
                        "missing entries for {}",
                        missing.join(", ")
                    )));
                }
                let arr: [T; $n] = out
                    .try_into()
                    .map_err(|_| serde::de::Error::custom("wrong entry count"))?;
                Ok($name(arr))
            }
        }
    };
}

keyed_array!(PerLake, LakeId, 5);
keyed_array!(PerRiver, RiverId, 6);

/// Where an edge ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endpoint {
    Lake(LakeId),
    /// The Montreal junction downstream of Lake Ontario.
    Montreal,
}

impl Serialize for Endpoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Endpoint::Lake(l) => s.serialize_str(l.code()),
            Endpoint::Montreal => s.serialize_str("montreal"),
        }
    }
}

impl<'de> Deserialize<'de> for Endpoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == "montreal" {
            Ok(Endpoint::Montreal)
        } else {
            s.parse().map(Endpoint::Lake).map_err(serde::de::Error::custom)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowBounds {
    pub min: f64,
    pub max: f64,
}

impl FlowBounds {
    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn clip(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LakeSpec {
    pub area_m2: f64,
    pub initial_level_m: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeSpec {
    /// `None` for an exogenous tributary (the Ottawa).
    pub from: Option<LakeId>,
    pub to: Endpoint,
    pub controllable: bool,
    pub bounds: Option<FlowBounds>,
}

/// The five-lake chain: surface areas, one-month edges, and the dam-controlled edges.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkTopology {
    pub month_length_days: f64,
    pub lakes: PerLake<LakeSpec>,
    pub edges: PerRiver<EdgeSpec>,
}

impl NetworkTopology {
    pub fn month_seconds(&self) -> f64 {
        self.month_length_days * DAY_SECONDS
    }

    pub fn area(&self, lake: LakeId) -> f64 {
        self.lakes[lake].area_m2
    }

    /// Controllable edges in [`RiverId`] order.
    pub fn controllable(&self) -> Vec<RiverId> {
        RiverId::ALL
            .into_iter()
            .filter(|r| self.edges[*r].controllable)
            .collect()
    }

    pub fn bounds(&self, river: RiverId) -> Result<FlowBounds> {
        self.edges[river]
            .bounds
            .ok_or_else(|| Error::Precondition(format!("no flow bounds configured for river {river}")))
    }

    /// The lake a river drains, if any.
    pub fn source(&self, river: RiverId) -> Option<LakeId> {
        self.edges[river].from
    }

    /// Per-month fractional response of lake `lake` to its own level through a
    /// rated outflow: `slope * month_seconds / area`. The explicit monthly
    /// update of that lake is stable only while this stays below 2.
    pub fn explicit_gain(&self, lake: LakeId, slope_m2_per_s: f64) -> f64 {
        slope_m2_per_s * self.month_seconds() / self.area(lake)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.month_length_days.is_finite() && self.month_length_days > 0.0) {
            return Err(Error::Config("month length must be positive".into()));
        }
        for (lake, spec) in self.lakes.iter() {
            if !(spec.area_m2.is_finite() && spec.area_m2 > 0.0) {
                return Err(Error::Config(format!("lake {lake}: area must be > 0")));
            }
            if let Some(h) = spec.initial_level_m {
                if !(h.is_finite() && h > 0.0) {
                    return Err(Error::Config(format!("lake {lake}: initial level must be > 0")));
                }
            }
        }
        let expected: [(RiverId, Option<LakeId>, Endpoint); 6] = [
            (RiverId::StMarys, Some(LakeId::Superior), Endpoint::Lake(LakeId::MichiganHuron)),
            (RiverId::StClair, Some(LakeId::MichiganHuron), Endpoint::Lake(LakeId::StClair)),
            (RiverId::Detroit, Some(LakeId::StClair), Endpoint::Lake(LakeId::Erie)),
            (RiverId::Niagara, Some(LakeId::Erie), Endpoint::Lake(LakeId::Ontario)),
            (RiverId::StLawrence, Some(LakeId::Ontario), Endpoint::Montreal),
            (RiverId::Ottawa, None, Endpoint::Montreal),
        ];
        for (river, from, to) in expected {
            let e = &self.edges[river];
            if e.from != from || e.to != to {
                return Err(Error::Config(format!(
                    "edge {river} must run {} -> {:?}",
                    from.map_or("external", |l| l.code()),
                    to
                )));
            }
            if let Some(b) = e.bounds {
                if !(b.min.is_finite() && b.max.is_finite() && b.min >= 0.0 && b.min < b.max) {
                    return Err(Error::Config(format!(
                        "edge {river}: bounds need 0 <= min < max, got [{}, {}]",
                        b.min, b.max
                    )));
                }
            }
        }
        if self.edges[RiverId::Ottawa].controllable {
            return Err(Error::Config("the Ottawa is exogenous and cannot be controllable".into()));
        }
        Ok(())
    }
}

/// Default surface areas (m2): Superior, Michigan-Huron, St. Clair, Erie, Ontario.
pub const DEFAULT_AREAS: [f64; 5] = [8.21e10, 1.174e11, 1.114e9, 2.57e10, 1.896e10];

/// Nominal mean releases (m3/s) for the two dams, used for default bounds.
pub const NOMINAL_ST_MARYS_FLOW: f64 = 2_100.0;
pub const NOMINAL_ST_LAWRENCE_FLOW: f64 = 7_000.0;

/// The five-lake chain with geographic surface areas, dams on rivers a and e
/// bounded to [0.5x, 1.5x] of their nominal mean release.
pub fn default_topology() -> NetworkTopology {
    let edge = |from: Option<LakeId>, to: Endpoint| EdgeSpec {
        from,
        to,
        controllable: false,
        bounds: None,
    };
    let mut edges = PerRiver([
        edge(Some(LakeId::Superior), Endpoint::Lake(LakeId::MichiganHuron)),
        edge(Some(LakeId::MichiganHuron), Endpoint::Lake(LakeId::StClair)),
        edge(Some(LakeId::StClair), Endpoint::Lake(LakeId::Erie)),
        edge(Some(LakeId::Erie), Endpoint::Lake(LakeId::Ontario)),
        edge(Some(LakeId::Ontario), Endpoint::Montreal),
        edge(None, Endpoint::Montreal),
    ]);
    for (river, nominal) in [
        (RiverId::StMarys, NOMINAL_ST_MARYS_FLOW),
        (RiverId::StLawrence, NOMINAL_ST_LAWRENCE_FLOW),
    ] {
        edges[river].controllable = true;
        edges[river].bounds = Some(FlowBounds {
            min: 0.5 * nominal,
            max: 1.5 * nominal,
        });
    }
    NetworkTopology {
        month_length_days: DEFAULT_MONTH_DAYS,
        lakes: PerLake::from_fn(|l| LakeSpec {
            area_m2: DEFAULT_AREAS[l.index()],
            initial_level_m: None,
        }),
        edges,
    }
}

// File form of the topology: lists of lakes and edges.

#[derive(Clone, Debug, Serialize, Deserialize)]
struct LakeEntry {
    id: LakeId,
    area_m2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_level_m: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct EdgeEntry {
    id: RiverId,
    from: String,
    to: Endpoint,
    #[serde(default)]
    controllable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    min_flow: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_flow: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TopologyFile {
    #[serde(default = "default_month_days")]
    month_length_days: f64,
    lakes: Vec<LakeEntry>,
    edges: Vec<EdgeEntry>,
}

fn default_month_days() -> f64 {
    DEFAULT_MONTH_DAYS
}

impl NetworkTopology {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: TopologyFile = serde_json::from_str(text)?;
        let mut lakes: PerLake<Option<LakeSpec>> = PerLake::default();
        for l in file.lakes {
            if lakes[l.id].is_some() {
                return Err(Error::Config(format!("lake {} listed twice", l.id)));
            }
            lakes[l.id] = Some(LakeSpec {
                area_m2: l.area_m2,
                initial_level_m: l.initial_level_m,
            });
        }
        let mut edges: PerRiver<Option<EdgeSpec>> = PerRiver::default();
        for e in file.edges {
            if edges[e.id].is_some() {
                return Err(Error::Config(format!("edge {} listed twice", e.id)));
            }
            let from = match e.from.as_str() {
                "external" => None,
                s => Some(s.parse::<LakeId>().map_err(|err| Error::Config(err.to_string()))?),
            };
            let bounds = match (e.min_flow, e.max_flow) {
                (Some(min), Some(max)) => Some(FlowBounds { min, max }),
                (None, None) => None,
                _ => {
                    return Err(Error::Config(format!(
                        "edge {}: give both min_flow and max_flow or neither",
                        e.id
                    )))
                }
            };
            edges[e.id] = Some(EdgeSpec {
                from,
                to: e.to,
                controllable: e.controllable,
                bounds,
            });
        }
        let lakes = lakes
            .iter()
            .map(|(k, v)| v.clone().ok_or_else(|| Error::Config(format!("missing lake {k}"))))
            .collect::<Result<Vec<_>>>()?;
        let edges = edges
            .iter()
            .map(|(k, v)| v.clone().ok_or_else(|| Error::Config(format!("missing edge {k}"))))
            .collect::<Result<Vec<_>>>()?;
        let topo = NetworkTopology {
            month_length_days: file.month_length_days,
            lakes: PerLake(lakes.try_into().expect("five lakes")),
            edges: PerRiver(edges.try_into().expect("six edges")),
        };
        topo.validate()?;
        Ok(topo)
    }

    pub fn to_json(&self) -> String {
        let file = TopologyFile {
            month_length_days: self.month_length_days,
            lakes: self
                .lakes
                .iter()
                .map(|(id, s)| LakeEntry {
                    id,
                    area_m2: s.area_m2,
                    initial_level_m: s.initial_level_m,
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|(id, e)| EdgeEntry {
                    id,
                    from: e.from.map_or_else(|| "external".to_string(), |l| l.code().to_string()),
                    to: e.to,
                    controllable: e.controllable,
                    min_flow: e.bounds.map(|b| b.min),
                    max_flow: e.bounds.map(|b| b.max),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("topology serializes")
    }
}
