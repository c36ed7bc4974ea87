//! Trip-record ingestion into hourly origin-destination networks.
//!
//! A trip belongs to the hour containing the midpoint of its start and end
//! times. Hours are half-open, `[h:00, h+1:00)`. Stations are indexed in
//! lexicographic order of their identifiers, over the union of start and end
//! stations of the trips kept.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::{NaiveDate, NaiveDateTime, Timelike};
use ipfnet::io::{read_network, write_marginal, write_network};
use ipfnet::{aggregate, marginals, NetworkSeries, SparseNetwork};
use serde::{Deserialize, Serialize};

const TIME_FORMATS: [&str; 4] = [
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%dT%H:%M",
];

pub const HOUR_LABEL: &str = "%Y-%m-%dT%H";

#[derive(Debug, Clone, PartialEq)]
pub struct TripRecord {
    pub started_at: NaiveDateTime,
    pub ended_at: NaiveDateTime,
    pub start_station: String,
    pub end_station: String,
}

/// Column names of the trip CSV.
#[derive(Debug, Clone)]
pub struct TripColumns {
    pub started_at: String,
    pub ended_at: String,
    pub start_station: String,
    pub end_station: String,
}

impl Default for TripColumns {
    fn default() -> Self {
        TripColumns {
            started_at: "started_at".into(),
            ended_at: "ended_at".into(),
            start_station: "start_station_id".into(),
            end_station: "end_station_id".into(),
        }
    }
}

/// Half-open window on assigned hours.
#[derive(Debug, Clone, Copy, Default)]
pub struct TimeWindow {
    pub from: Option<NaiveDateTime>,
    pub to: Option<NaiveDateTime>,
}

impl TimeWindow {
    fn contains(&self, t: NaiveDateTime) -> bool {
        self.from.is_none_or(|f| t >= f) && self.to.is_none_or(|e| t < e)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestCounts {
    pub rows: usize,
    pub malformed: usize,
    pub outside_window: usize,
    pub trips: usize,
    pub same_hour: usize,
    pub midpoint_assigned: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub index: usize,
    pub id: String,
    pub lat: Option<f64>,
    pub lng: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct IngestReport {
    pub stations: Vec<Station>,
    pub series: NetworkSeries,
    pub aggregated: SparseNetwork,
    pub counts: IngestCounts,
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim().trim_end_matches('Z');
    TIME_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .or_else(|| NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().and_then(|d| d.and_hms_opt(0, 0, 0)))
}

fn hour_floor(t: NaiveDateTime) -> NaiveDateTime {
    t.date().and_hms_opt(t.hour(), 0, 0).expect("valid hour")
}

/// The hour a trip is counted in, and whether start and end share it.
pub fn assign_hour(trip: &TripRecord) -> (NaiveDateTime, bool) {
    let start = hour_floor(trip.started_at);
    if start == hour_floor(trip.ended_at) {
        return (start, true);
    }
    let mid = trip.started_at + (trip.ended_at - trip.started_at) / 2;
    (hour_floor(mid), false)
}

struct Kept {
    hour: NaiveDateTime,
    start: String,
    end: String,
}

/// Reads trips from every source in order and builds the hourly series.
pub fn ingest_trips<R: Read>(sources: Vec<R>, columns: &TripColumns, window: TimeWindow) -> Result<IngestReport> {
    let mut counts = IngestCounts::default();
    let mut kept = Vec::new();
    let mut coords: HashMap<String, (f64, f64)> = HashMap::new();

    for source in sources {
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
        let headers = reader.headers().context("reading trip CSV header")?.clone();
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let (Some(c_start), Some(c_end), Some(c_from), Some(c_to)) = (
            find(&columns.started_at),
            find(&columns.ended_at),
            find(&columns.start_station),
            find(&columns.end_station),
        ) else {
            bail!(
                "trip CSV header must contain {}, {}, {}, {}",
                columns.started_at,
                columns.ended_at,
                columns.start_station,
                columns.end_station
            );
        };
        let coord_cols = ["start_lat", "start_lng", "end_lat", "end_lng"].map(find);

        for record in reader.records() {
            counts.rows += 1;
            let Ok(record) = record else {
                counts.malformed += 1;
                continue;
            };
            let field = |k: usize| record.get(k).map(str::trim).unwrap_or("");
            let (start, end) = (field(c_from), field(c_to));
            let times = (parse_timestamp(field(c_start)), parse_timestamp(field(c_end)));
            let (Some(started_at), Some(ended_at)) = times else {
                counts.malformed += 1;
                continue;
            };
            if start.is_empty() || end.is_empty() || ended_at < started_at {
                counts.malformed += 1;
                continue;
            }
            let trip = TripRecord {
                started_at,
                ended_at,
                start_station: start.to_string(),
                end_station: end.to_string(),
            };
            let (hour, same) = assign_hour(&trip);
            if !window.contains(hour) {
                counts.outside_window += 1;
                continue;
            }
            counts.trips += 1;
            if same {
                counts.same_hour += 1;
            } else {
                counts.midpoint_assigned += 1;
            }
            let coord = |a: Option<usize>, b: Option<usize>| -> Option<(f64, f64)> {
                Some((field(a?).parse().ok()?, field(b?).parse().ok()?))
            };
            for (id, c) in [
                (start, coord(coord_cols[0], coord_cols[1])),
                (end, coord(coord_cols[2], coord_cols[3])),
            ] {
                if let Some(c) = c {
                    coords.entry(id.to_string()).or_insert(c);
                }
            }
            kept.push(Kept {
                hour,
                start: trip.start_station,
                end: trip.end_station,
            });
        }
    }
    if kept.is_empty() {
        bail!("no trips fall inside the requested window");
    }

    let ids: BTreeSet<&str> = kept.iter().flat_map(|k| [k.start.as_str(), k.end.as_str()]).collect();
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(k, id)| (*id, k)).collect();
    let stations: Vec<Station> = ids
        .iter()
        .enumerate()
        .map(|(k, id)| {
            let c = coords.get(*id);
            Station {
                index: k,
                id: id.to_string(),
                lat: c.map(|c| c.0),
                lng: c.map(|c| c.1),
            }
        })
        .collect();

    let mut hours: BTreeMap<NaiveDateTime, HashMap<(usize, usize), f64>> = BTreeMap::new();
    for k in &kept {
        *hours
            .entry(k.hour)
            .or_default()
            .entry((index[k.start.as_str()], index[k.end.as_str()]))
            .or_default() += 1.0;
    }
    let s = stations.len();
    let mut labels = Vec::with_capacity(hours.len());
    let mut slices = Vec::with_capacity(hours.len());
    for (hour, cells) in hours {
        labels.push(hour.format(HOUR_LABEL).to_string());
        slices.push(SparseNetwork::from_triplets(s, s, cells.into_iter().map(|((i, j), w)| (i, j, w)))?);
    }
    let series = NetworkSeries::new(labels, slices)?;
    let aggregated = aggregate(&series)?;
    Ok(IngestReport {
        stations,
        series,
        aggregated,
        counts,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct HourRow {
    label: String,
    trips: f64,
}

fn slice_path(dir: &Path, label: &str, ext: &str) -> PathBuf {
    dir.join("slices").join(format!("{label}.{ext}"))
}

/// Layout: `stations.csv`, `aggregate.txt`, `hours.csv`, `counts.json` and
/// per hour `slices/<label>.txt`, `.p.txt`, `.q.txt`.
pub fn write_ingest(dir: &Path, report: &IngestReport) -> Result<()> {
    fs::create_dir_all(dir.join("slices"))?;
    let mut w = csv::Writer::from_path(dir.join("stations.csv"))?;
    for s in &report.stations {
        w.serialize(s)?;
    }
    w.flush()?;
    write_network(dir.join("aggregate.txt"), &report.aggregated)?;
    let mut w = csv::Writer::from_path(dir.join("hours.csv"))?;
    for (label, slice) in report.series.labels().iter().zip(report.series.slices()) {
        w.serialize(HourRow {
            label: label.clone(),
            trips: slice.total(),
        })?;
        write_network(slice_path(dir, label, "txt"), slice)?;
        let marg = marginals(slice);
        write_marginal(slice_path(dir, label, "p.txt"), marg.p())?;
        write_marginal(slice_path(dir, label, "q.txt"), marg.q())?;
    }
    w.flush()?;
    fs::write(dir.join("counts.json"), serde_json::to_string_pretty(&report.counts)? + "\n")?;
    Ok(())
}

/// An ingest directory read back.
pub struct IngestDir {
    pub stations: Vec<Station>,
    pub aggregated: SparseNetwork,
    pub series: NetworkSeries,
}

pub fn read_ingest(dir: &Path) -> Result<IngestDir> {
    let mut stations = Vec::new();
    for row in csv::Reader::from_path(dir.join("stations.csv"))
        .with_context(|| format!("reading {}", dir.join("stations.csv").display()))?
        .deserialize()
    {
        stations.push(row?);
    }
    let aggregated = read_network(dir.join("aggregate.txt"))?;
    let mut labels = Vec::new();
    let mut slices = Vec::new();
    for row in csv::Reader::from_path(dir.join("hours.csv"))?.deserialize() {
        let row: HourRow = row?;
        slices.push(read_network(slice_path(dir, &row.label, "txt"))?);
        labels.push(row.label);
    }
    Ok(IngestDir {
        stations,
        aggregated,
        series: NetworkSeries::new(labels, slices)?,
    })
}
