use std::collections::BTreeMap;
use std::io::Read;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use super::hotel::{HotelDay, ROOM_CATEGORIES};
use crate::choice::MnlModel;
use crate::engine::{ArrivalSequence, AssortmentArrivals, AssortmentCustomer};
use crate::error::{Error, Result};

/// One booking from a reservation log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionRecord {
    /// First night of the stay.
    pub occupancy_date: NaiveDate,
    pub booking_date: NaiveDate,
    /// Index into the room categories.
    pub room: usize,
    /// 0 for the low fare, 1 for the high fare.
    pub fare: usize,
    pub group: bool,
    pub cro: bool,
    pub vip: bool,
    pub nights: u32,
}

impl TransactionRecord {
    /// Customer type index: group, then channel, then VIP as binary digits.
    pub fn customer_type(&self) -> usize {
        4 * self.group as usize + 2 * self.cro as usize + self.vip as usize
    }
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    occupancy_date: String,
    booking_date: String,
    room_category: String,
    fare_class: String,
    group: String,
    cro: String,
    vip: String,
    #[serde(default)]
    nights: Option<String>,
}

fn parse_flag(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" => Some(true),
        "0" | "false" | "no" | "n" | "" => Some(false),
        _ => None,
    }
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}

fn validate(raw: RawRecord, row: usize) -> Result<TransactionRecord> {
    let err = |msg: String| Error::Schema { row, msg };
    let occupancy_date = parse_date(&raw.occupancy_date)
        .ok_or_else(|| err(format!("bad occupancy_date {:?}", raw.occupancy_date)))?;
    let booking_date =
        parse_date(&raw.booking_date).ok_or_else(|| err(format!("bad booking_date {:?}", raw.booking_date)))?;
    if booking_date > occupancy_date {
        return Err(err("booking_date is after occupancy_date".into()));
    }
    let room_name = raw.room_category.trim().to_ascii_lowercase().replace([' ', '-'], "_");
    let room = ROOM_CATEGORIES
        .iter()
        .position(|c| c.0 == room_name)
        .ok_or_else(|| err(format!("unknown room_category {:?}", raw.room_category)))?;
    let fare = match raw.fare_class.trim().to_ascii_lowercase().as_str() {
        "low" | "l" => 0,
        "high" | "h" => 1,
        other => return Err(err(format!("unknown fare_class {other:?}"))),
    };
    let flag = |name: &str, v: &str| parse_flag(v).ok_or_else(|| err(format!("bad {name} flag {v:?}")));
    let nights = match raw.nights.as_deref().map(str::trim) {
        None | Some("") => 1,
        Some(s) => s
            .parse::<u32>()
            .ok()
            .filter(|n| *n >= 1)
            .ok_or_else(|| err(format!("bad nights {s:?}")))?,
    };
    Ok(TransactionRecord {
        occupancy_date,
        booking_date,
        room,
        fare,
        group: flag("group", &raw.group)?,
        cro: flag("cro", &raw.cro)?,
        vip: flag("vip", &raw.vip)?,
        nights,
    })
}

/// Reads a transaction CSV with header
/// `occupancy_date,booking_date,room_category,fare_class,group,cro,vip[,nights]`.
/// Rows are numbered from 1, not counting the header.
pub fn read_transactions<R: Read>(reader: R) -> Result<Vec<TransactionRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<RawRecord>().enumerate() {
        let row = i + 1;
        let raw = rec.map_err(|e| Error::Schema { row, msg: e.to_string() })?;
        out.push(validate(raw, row)?);
    }
    Ok(out)
}

/// Turns transactions into one arrival stream per occupied date. A stay of
/// several nights arrives once on each of its dates, arrivals are ordered by
/// booking date, and `replication` repeats every arrival in place.
pub fn ingest_transactions(
    records: &[TransactionRecord],
    model: &MnlModel,
    replication: usize,
) -> Result<Vec<HotelDay>> {
    if replication == 0 {
        return Err(Error::InvalidArgument("replication must be at least 1".into()));
    }
    if model.num_types() < 8 {
        return Err(Error::DimensionMismatch(format!(
            "transactions need 8 customer types, model has {}",
            model.num_types()
        )));
    }
    let mut by_date: BTreeMap<NaiveDate, Vec<(NaiveDate, AssortmentCustomer)>> = BTreeMap::new();
    for r in records {
        for night in 0..r.nights {
            let date = r.occupancy_date + Days::new(night as u64);
            let days_before = (date - r.booking_date).num_days() as f64;
            by_date.entry(date).or_default().push((
                r.booking_date,
                AssortmentCustomer {
                    customer_type: r.customer_type(),
                    days_before,
                },
            ));
        }
    }
    Ok(by_date
        .into_iter()
        .map(|(date, mut cs)| {
            cs.sort_by_key(|c| c.0);
            let customers = cs
                .into_iter()
                .flat_map(|(_, c)| std::iter::repeat_n(c, replication))
                .collect();
            HotelDay {
                date,
                arrivals: ArrivalSequence::Assortment(AssortmentArrivals {
                    model: model.clone(),
                    customers,
                }),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "occupancy_date,booking_date,room_category,fare_class,group,cro,vip,nights\n";

    fn parse(body: &str) -> Result<Vec<TransactionRecord>> {
        read_transactions(format!("{HEADER}{body}").as_bytes())
    }

    #[test]
    fn empty_file() {
        let recs = parse("").unwrap();
        assert!(ingest_transactions(&recs, &MnlModel::hotel(), 10).unwrap().is_empty());
    }

    #[test]
    fn one_night() {
        let recs = parse("2007-03-20,2007-03-01,King,low,0,1,0,1\n").unwrap();
        assert_eq!(recs[0].customer_type(), 2);
        let days = ingest_transactions(&recs, &MnlModel::hotel(), 1).unwrap();
        assert_eq!(days.len(), 1);
        assert_eq!(days[0].arrivals.len(), 1);
        assert_eq!(days[0].customers().customers[0].days_before, 19.0);
    }

    #[test]
    fn multi_night_stay_expands() {
        let recs = parse("2007-03-20,2007-03-01,suite,high,1,1,1,3\n").unwrap();
        let days = ingest_transactions(&recs, &MnlModel::hotel(), 10).unwrap();
        assert_eq!(days.len(), 3);
        for (d, day) in days.iter().enumerate() {
            assert_eq!(day.arrivals.len(), 10);
            assert_eq!(day.customers().customers[0].customer_type, 7);
            assert_eq!(day.customers().customers[0].days_before, 19.0 + d as f64);
        }
    }

    #[test]
    fn ordered_by_booking_date() {
        let body = "2007-03-20,2007-03-10,king,low,0,0,0,1\n\
                    2007-03-20,2007-03-01,queen,low,1,0,0,1\n\
                    2007-03-20,2007-03-05,two double,high,0,0,1,\n";
        let days = ingest_transactions(&parse(body).unwrap(), &MnlModel::hotel(), 1).unwrap();
        let types: Vec<usize> = days[0].customers().customers.iter().map(|c| c.customer_type).collect();
        assert_eq!(types, vec![4, 1, 0]);
    }

    #[test]
    fn schema_errors_carry_rows() {
        let e = parse("2007-03-20,2007-03-01,king,low,0,0,0,1\n2007-03-20,2007-03-21,king,low,0,0,0,1\n")
            .unwrap_err();
        assert!(matches!(e, Error::Schema { row: 2, .. }));
        let e = parse("2007-03-20,2007-03-01,penthouse,low,0,0,0,1\n").unwrap_err();
        assert!(matches!(e, Error::Schema { row: 1, .. }));
        let e = parse("2007-03-20,2007-03-01,king,mid,0,0,0,1\n").unwrap_err();
        assert!(matches!(e, Error::Schema { row: 1, .. }));
        let e = parse("2007-03-20,2007-03-01,king,low,maybe,0,0,1\n").unwrap_err();
        assert!(matches!(e, Error::Schema { row: 1, .. }));
        let e = parse("2007-03-20,2007-03-01\n").unwrap_err();
        assert!(matches!(e, Error::Schema { row: 1, .. }));
    }
}
