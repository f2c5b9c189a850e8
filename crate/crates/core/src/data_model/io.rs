//! CSV readers and writers for the five input tables.

use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{DateTime, FixedOffset, NaiveDate};
use csv::{ReaderBuilder, StringRecord, Writer};

use super::{
    ActivityObservation, DataError, Dataset, HazardPathPoint, OutageObservation,
    RegionAttributes, RegionId, RoadEvent, RoadEventCategory,
};

pub const ACTIVITY_COLUMNS: [&str; 7] = [
    "polygon_id",
    "name",
    "county",
    "date",
    "baseline_users",
    "crisis_users",
    "z_score",
];
pub const OUTAGE_COLUMNS: [&str; 4] = ["county", "timestamp", "customers_total", "customers_out"];
pub const ROAD_EVENT_COLUMNS: [&str; 6] = ["event_id", "lat", "lon", "start", "end", "category"];
pub const HAZARD_PATH_COLUMNS: [&str; 3] = ["timestamp", "lat", "lon"];
pub const ATTRIBUTE_COLUMNS: [&str; 8] = [
    "polygon_id",
    "center_lat",
    "center_lon",
    "median_income",
    "pct_black",
    "pct_hispanic",
    "pct_pre2000_houses",
    "property_damage",
];

/// Header-resolved view over the records of one table.
struct Table {
    name: &'static str,
    columns: Vec<(&'static str, usize)>,
}

impl Table {
    fn new(name: &'static str, headers: &StringRecord, wanted: &[&'static str]) -> Result<Self, DataError> {
        let mut columns = Vec::with_capacity(wanted.len());
        for &col in wanted {
            let idx = headers
                .iter()
                .position(|h| h.trim().trim_start_matches('\u{feff}') == col)
                .ok_or_else(|| DataError::schema(name, 1, format!("missing column `{col}`")))?;
            columns.push((col, idx));
        }
        Ok(Table { name, columns })
    }

    fn raw<'r>(&self, rec: &'r StringRecord, k: usize) -> &'r str {
        rec.get(self.columns[k].1).unwrap_or("").trim()
    }

    fn parse<T: FromStr>(&self, rec: &StringRecord, row: usize, k: usize) -> Result<T, DataError> {
        let raw = self.raw(rec, k);
        raw.parse::<T>().map_err(|_| {
            DataError::schema(
                self.name,
                row,
                format!("column `{}`: cannot parse {raw:?}", self.columns[k].0),
            )
        })
    }

    fn float(&self, rec: &StringRecord, row: usize, k: usize) -> Result<f64, DataError> {
        let v: f64 = self.parse(rec, row, k)?;
        if !v.is_finite() {
            return Err(DataError::schema(
                self.name,
                row,
                format!("column `{}`: non-finite value", self.columns[k].0),
            ));
        }
        Ok(v)
    }

    fn date(&self, rec: &StringRecord, row: usize, k: usize) -> Result<NaiveDate, DataError> {
        let raw = self.raw(rec, k);
        NaiveDate::parse_from_str(raw, "%Y-%m-%d").map_err(|_| {
            DataError::schema(
                self.name,
                row,
                format!("column `{}`: expected YYYY-MM-DD, got {raw:?}", self.columns[k].0),
            )
        })
    }

    fn instant(&self, rec: &StringRecord, row: usize, k: usize) -> Result<DateTime<FixedOffset>, DataError> {
        let raw = self.raw(rec, k);
        DateTime::parse_from_rfc3339(raw).map_err(|_| {
            DataError::schema(
                self.name,
                row,
                format!(
                    "column `{}`: expected ISO-8601 instant with offset, got {raw:?}",
                    self.columns[k].0
                ),
            )
        })
    }
}

fn read_table<R: Read, T>(
    name: &'static str,
    reader: R,
    wanted: &[&'static str],
    mut row_fn: impl FnMut(&Table, &StringRecord, usize) -> Result<T, DataError>,
) -> Result<Vec<T>, DataError> {
    let mut rdr = ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| DataError::schema(name, 1, format!("unreadable header: {e}")))?
        .clone();
    let table = Table::new(name, &headers, wanted)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| DataError::schema(name, row, e.to_string()))?;
        out.push(row_fn(&table, &rec, row)?);
    }
    Ok(out)
}

pub fn parse_activity<R: Read>(reader: R) -> Result<Vec<ActivityObservation>, DataError> {
    read_table("activity", reader, &ACTIVITY_COLUMNS, |t, rec, row| {
        Ok(ActivityObservation {
            region: RegionId {
                polygon_id: t.raw(rec, 0).to_string(),
                name: t.raw(rec, 1).to_string(),
                county: t.raw(rec, 2).to_string(),
            },
            date: t.date(rec, row, 3)?,
            baseline_users: t.float(rec, row, 4)?,
            crisis_users: t.parse(rec, row, 5)?,
            z_score: t.float(rec, row, 6)?,
        })
    })
}

pub fn parse_outages<R: Read>(reader: R) -> Result<Vec<OutageObservation>, DataError> {
    read_table("outages", reader, &OUTAGE_COLUMNS, |t, rec, row| {
        let o = OutageObservation {
            county: t.raw(rec, 0).to_string(),
            timestamp: t.instant(rec, row, 1)?,
            customers_total: t.parse(rec, row, 2)?,
            customers_out: t.parse(rec, row, 3)?,
        };
        if o.customers_out > o.customers_total {
            return Err(DataError::schema(
                "outages",
                row,
                format!(
                    "customers_out ({}) exceeds customers_total ({}); invariant customers_out <= customers_total",
                    o.customers_out, o.customers_total
                ),
            ));
        }
        Ok(o)
    })
}

pub fn parse_road_events<R: Read>(reader: R) -> Result<Vec<RoadEvent>, DataError> {
    read_table("road_events", reader, &ROAD_EVENT_COLUMNS, |t, rec, row| {
        let end = if t.raw(rec, 4).is_empty() {
            None
        } else {
            Some(t.instant(rec, row, 4)?)
        };
        Ok(RoadEvent {
            event_id: t.raw(rec, 0).to_string(),
            lat: t.float(rec, row, 1)?,
            lon: t.float(rec, row, 2)?,
            start: t.instant(rec, row, 3)?,
            end,
            category: RoadEventCategory::parse_lenient(t.raw(rec, 5)),
        })
    })
}

pub fn parse_hazard_path<R: Read>(reader: R) -> Result<Vec<HazardPathPoint>, DataError> {
    read_table("hazard_path", reader, &HAZARD_PATH_COLUMNS, |t, rec, row| {
        Ok(HazardPathPoint {
            timestamp: t.instant(rec, row, 0)?,
            lat: t.float(rec, row, 1)?,
            lon: t.float(rec, row, 2)?,
        })
    })
}

pub fn parse_attributes<R: Read>(reader: R) -> Result<Vec<RegionAttributes>, DataError> {
    read_table("attributes", reader, &ATTRIBUTE_COLUMNS, |t, rec, row| {
        let property_damage = if t.raw(rec, 7).is_empty() {
            0.0
        } else {
            t.float(rec, row, 7)?
        };
        Ok(RegionAttributes {
            polygon_id: t.raw(rec, 0).to_string(),
            center_lat: t.float(rec, row, 1)?,
            center_lon: t.float(rec, row, 2)?,
            median_income: t.float(rec, row, 3)?,
            pct_black: t.float(rec, row, 4)?,
            pct_hispanic: t.float(rec, row, 5)?,
            pct_pre2000_houses: t.float(rec, row, 6)?,
            property_damage,
        })
    })
}

fn csv_err(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

fn write_rows<W: Write>(
    writer: W,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> std::io::Result<()> {
    let mut w = Writer::from_writer(writer);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush()
}

pub fn write_activity<W: Write>(writer: W, rows: &[ActivityObservation]) -> std::io::Result<()> {
    write_rows(
        writer,
        &ACTIVITY_COLUMNS,
        rows.iter().map(|o| {
            vec![
                o.region.polygon_id.clone(),
                o.region.name.clone(),
                o.region.county.clone(),
                o.date.format("%Y-%m-%d").to_string(),
                o.baseline_users.to_string(),
                o.crisis_users.to_string(),
                o.z_score.to_string(),
            ]
        }),
    )
}

pub fn write_outages<W: Write>(writer: W, rows: &[OutageObservation]) -> std::io::Result<()> {
    write_rows(
        writer,
        &OUTAGE_COLUMNS,
        rows.iter().map(|o| {
            vec![
                o.county.clone(),
                o.timestamp.to_rfc3339(),
                o.customers_total.to_string(),
                o.customers_out.to_string(),
            ]
        }),
    )
}

pub fn write_road_events<W: Write>(writer: W, rows: &[RoadEvent]) -> std::io::Result<()> {
    write_rows(
        writer,
        &ROAD_EVENT_COLUMNS,
        rows.iter().map(|e| {
            vec![
                e.event_id.clone(),
                e.lat.to_string(),
                e.lon.to_string(),
                e.start.to_rfc3339(),
                e.end.map(|t| t.to_rfc3339()).unwrap_or_default(),
                e.category.as_str().to_string(),
            ]
        }),
    )
}

pub fn write_hazard_path<W: Write>(writer: W, rows: &[HazardPathPoint]) -> std::io::Result<()> {
    write_rows(
        writer,
        &HAZARD_PATH_COLUMNS,
        rows.iter()
            .map(|p| vec![p.timestamp.to_rfc3339(), p.lat.to_string(), p.lon.to_string()]),
    )
}

pub fn write_attributes<W: Write>(writer: W, rows: &[RegionAttributes]) -> std::io::Result<()> {
    write_rows(
        writer,
        &ATTRIBUTE_COLUMNS,
        rows.iter().map(|a| {
            vec![
                a.polygon_id.clone(),
                a.center_lat.to_string(),
                a.center_lon.to_string(),
                a.median_income.to_string(),
                a.pct_black.to_string(),
                a.pct_hispanic.to_string(),
                a.pct_pre2000_houses.to_string(),
                a.property_damage.to_string(),
            ]
        }),
    )
}

/// Writes the five tables of `dataset` into `dir` under their conventional
/// file names (`activity.csv`, ...).
pub fn write_dataset_csvs(dataset: &Dataset, dir: &std::path::Path) -> std::io::Result<()> {
    use std::fs::File;
    use std::io::BufWriter;
    let open = |name: &str| File::create(dir.join(name)).map(BufWriter::new);
    write_activity(open("activity.csv")?, dataset.activity())?;
    write_outages(open("outages.csv")?, dataset.outages())?;
    write_road_events(open("road_events.csv")?, dataset.road_events())?;
    write_hazard_path(open("hazard_path.csv")?, dataset.hazard_path())?;
    let attrs: Vec<RegionAttributes> = dataset.all_attributes().cloned().collect();
    write_attributes(open("attributes.csv")?, &attrs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_column_is_schema_error() {
        let csv = "polygon_id,name,county,date,baseline_users,crisis_users\nA,n,c,2021-08-25,1,1\n";
        let err = parse_activity(csv.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("z_score"), "{err}");
    }

    #[test]
    fn untypeable_value_reports_row() {
        let csv = "polygon_id,name,county,date,baseline_users,crisis_users,z_score\n\
                   A,n,c,2021-08-25,1,1,0\n\
                   A,n,c,2021-08-26,1,many,0\n";
        match parse_activity(csv.as_bytes()) {
            Err(DataError::Schema { row, message, .. }) => {
                assert_eq!(row, 3);
                assert!(message.contains("crisis_users"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn outage_invariant_checked_at_parse() {
        let csv = "county,timestamp,customers_total,customers_out\nC,2021-08-29T10:00:00-05:00,5,6\n";
        let err = parse_outages(csv.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("customers_out <= customers_total"));
    }

    #[test]
    fn column_order_is_free_and_empty_end_is_none() {
        let csv = "category,end,start,lon,lat,event_id\n\
                   road closed,,2021-08-29T10:00:00-05:00,-90.1,29.9,e1\n";
        let ev = parse_road_events(csv.as_bytes()).unwrap();
        assert_eq!(ev[0].end, None);
        assert_eq!(ev[0].category, RoadEventCategory::RoadClosed);
        assert_eq!(ev[0].lat, 29.9);
    }

    #[test]
    fn empty_damage_defaults_to_zero() {
        let csv = "polygon_id,center_lat,center_lon,median_income,pct_black,pct_hispanic,pct_pre2000_houses,property_damage\n\
                   A,30,-90,50000,10,2,80,\n";
        let a = parse_attributes(csv.as_bytes()).unwrap();
        assert_eq!(a[0].property_damage, 0.0);
    }
}
