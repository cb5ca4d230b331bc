//! Bid-level CSV ingestion and emission.
//!
//! The file carries one row per bid: the auction id, one column per schema
//! variable (category labels as strings) and the raw bid. Lines starting with
//! `#` are comments; emitted files use one to record provenance.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::schema::Schema;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionRecord {
    pub auction_id: String,
    /// One state index per schema variable.
    pub states: Vec<usize>,
    /// Raw, strictly positive bids.
    pub bids: Vec<f64>,
}

impl AuctionRecord {
    /// Checks state ranges, bid positivity and the bidder-count/bid-array
    /// agreement.
    pub fn validate(&self, schema: &Schema) -> Result<()> {
        if self.states.len() != schema.variables.len() {
            return Err(Error::Data(format!(
                "auction {}: {} states for {} variables",
                self.auction_id,
                self.states.len(),
                schema.variables.len()
            )));
        }
        for (s, v) in self.states.iter().zip(&schema.variables) {
            if *s >= v.cardinality() {
                return Err(Error::Data(format!(
                    "auction {}: state {s} out of range for {:?}",
                    self.auction_id, v.name
                )));
            }
        }
        let nb = schema.bidder_count(self.states[schema.bidder_count_index()])?;
        if nb != self.bids.len() {
            return Err(Error::Data(format!(
                "auction {}: bidder count says {nb} but {} bids present",
                self.auction_id,
                self.bids.len()
            )));
        }
        if let Some(b) = self.bids.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(Error::Data(format!(
                "auction {}: bid {b} is not a positive finite number",
                self.auction_id
            )));
        }
        Ok(())
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Vec<AuctionRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Groups bid rows into auctions, keeping first-appearance order.
pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<Vec<AuctionRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("missing column {name:?}")))
    };
    let id_col = column(&schema.auction_id_column)?;
    let bid_col = column(&schema.bid_column)?;
    let var_cols = schema
        .variables
        .iter()
        .map(|v| column(&v.name))
        .collect::<Result<Vec<_>>>()?;

    let mut records: Vec<AuctionRecord> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let line = line + 2;
        let id = row.get(id_col).unwrap_or_default().to_string();
        let mut states = Vec::with_capacity(var_cols.len());
        for (v, &c) in schema.variables.iter().zip(&var_cols) {
            let label = row.get(c).unwrap_or_default();
            let s = v.state_of(label).ok_or_else(|| {
                Error::Data(format!(
                    "line {line}: unknown category {label:?} for variable {:?}",
                    v.name
                ))
            })?;
            states.push(s);
        }
        let raw = row.get(bid_col).unwrap_or_default();
        let bid: f64 = raw
            .parse()
            .map_err(|_| Error::Data(format!("line {line}: bid {raw:?} is not a number")))?;
        if !(bid > 0.0 && bid.is_finite()) {
            return Err(Error::Data(format!("line {line}: nonpositive bid {bid}")));
        }
        match by_id.get(&id) {
            Some(&i) => {
                if records[i].states != states {
                    return Err(Error::Data(format!(
                        "line {line}: features of auction {id:?} differ from its earlier rows"
                    )));
                }
                records[i].bids.push(bid);
            }
            None => {
                by_id.insert(id.clone(), records.len());
                records.push(AuctionRecord {
                    auction_id: id,
                    states,
                    bids: vec![bid],
                });
            }
        }
    }
    for r in &records {
        r.validate(schema)?;
    }
    Ok(records)
}

/// Writes records as bid-level CSV. `comment`, when given, becomes a leading
/// `# ...` line.
pub fn write_csv<W: Write>(writer: W, schema: &Schema, records: &[AuctionRecord], comment: Option<&str>) -> Result<()> {
    let mut writer = writer;
    if let Some(c) = comment {
        writeln!(writer, "# {c}").map_err(|e| Error::io("<csv writer>", e))?;
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![schema.auction_id_column.as_str()];
    header.extend(schema.variables.iter().map(|v| v.name.as_str()));
    header.push(schema.bid_column.as_str());
    w.write_record(&header)?;
    for r in records {
        for &b in &r.bids {
            let mut row: Vec<String> = vec![r.auction_id.clone()];
            row.extend(
                r.states
                    .iter()
                    .zip(&schema.variables)
                    .map(|(&s, v)| v.categories[s].clone()),
            );
            row.push(format!("{b}"));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::Variable;

    fn schema() -> Schema {
        Schema::new(
            vec![
                Variable::new("municipality", &["0", "1"]),
                Variable::new("number of bidders", &["1", "2", "3"]),
            ],
            "municipality",
        )
        .unwrap()
    }

    #[test]
    fn groups_rows_by_auction() {
        let text = "auction_id,municipality,number of bidders,bid\n\
                    a1,1,2,100.5\n\
                    a1,1,2,120\n\
                    a2,0,1,50\n";
        let recs = read_csv(text.as_bytes(), &schema()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].bids, vec![100.5, 120.0]);
        assert_eq!(recs[0].states, vec![1, 1]);
    }

    #[test]
    fn bidder_count_must_match_rows() {
        let text = "auction_id,municipality,number of bidders,bid\na1,1,3,1\na1,1,3,2\n";
        let err = read_csv(text.as_bytes(), &schema()).unwrap_err();
        assert!(err.to_string().contains("bidder count says 3"), "{err}");
    }

    #[test]
    fn empty_file_gives_no_records() {
        assert!(read_csv("".as_bytes(), &schema()).unwrap().is_empty());
        let header_only = "auction_id,municipality,number of bidders,bid\n";
        assert!(read_csv(header_only.as_bytes(), &schema()).unwrap().is_empty());
    }

    #[test]
    fn rejects_unknown_category_inconsistency_and_bad_bids() {
        let unknown = "auction_id,municipality,number of bidders,bid\na1,7,1,5\n";
        let err = read_csv(unknown.as_bytes(), &schema()).unwrap_err();
        assert!(err.to_string().contains("\"7\""), "{err}");

        let inconsistent = "auction_id,municipality,number of bidders,bid\na1,1,2,5\na1,0,2,6\n";
        assert!(read_csv(inconsistent.as_bytes(), &schema()).is_err());

        let negative = "auction_id,municipality,number of bidders,bid\na1,1,1,-5\n";
        assert!(read_csv(negative.as_bytes(), &schema()).is_err());
    }

    #[test]
    fn write_then_read_roundtrips() {
        let recs = vec![
            AuctionRecord {
                auction_id: "x".into(),
                states: vec![0, 2],
                bids: vec![1.5, 2.25, 1e6],
            },
            AuctionRecord {
                auction_id: "y".into(),
                states: vec![1, 0],
                bids: vec![0.125],
            },
        ];
        let mut buf = Vec::new();
        write_csv(&mut buf, &schema(), &recs, Some("seed=1")).unwrap();
        let back = read_csv(buf.as_slice(), &schema()).unwrap();
        assert_eq!(back, recs);
    }
}
