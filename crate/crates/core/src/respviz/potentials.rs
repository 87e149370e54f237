use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::gradnap::GradNap;
use crate::netcore::Sign;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSeries {
    pub channel: usize,
    pub values: Vec<f64>,
    /// Rank among the highlighted (most responsive) channels.
    pub highlight: Option<usize>,
}

/// Every channel of a profile over window offsets, for superimposed plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionPotentials {
    pub group: String,
    pub layer: usize,
    /// Offsets from the aligned center, symmetric about 0.
    pub offsets: Vec<i64>,
    pub series: Vec<PotentialSeries>,
}

impl ActionPotentials {
    pub fn highlighted(&self) -> Vec<usize> {
        let mut ranked: Vec<(usize, usize)> = self
            .series
            .iter()
            .filter_map(|s| s.highlight.map(|r| (r, s.channel)))
            .collect();
        ranked.sort();
        ranked.into_iter().map(|(_, c)| c).collect()
    }
}

pub fn action_potentials(nap: &GradNap, top: &[(usize, Sign)]) -> ActionPotentials {
    let half = (nap.width() / 2) as i64;
    let offsets = (-half..=half).collect();
    let series = nap
        .values
        .rows()
        .into_iter()
        .enumerate()
        .map(|(channel, row)| PotentialSeries {
            channel,
            values: row.to_vec(),
            highlight: top.iter().position(|&(n, _)| n == channel),
        })
        .collect();
    ActionPotentials {
        group: nap.group.clone(),
        layer: nap.layer,
        offsets,
        series,
    }
}

/// Long format: `channel,highlight,offset,value`; `highlight` is the rank or
/// empty.
pub fn write_action_potentials_csv(path: &Path, ap: &ActionPotentials) -> Result<()> {
    let err = |e: csv::Error| Error::format(path, e.to_string());
    let mut writer = csv::Writer::from_path(path).map_err(err)?;
    writer
        .write_record(["channel", "highlight", "offset", "value"])
        .map_err(err)?;
    for s in &ap.series {
        let rank = s.highlight.map(|r| r.to_string()).unwrap_or_default();
        for (offset, value) in ap.offsets.iter().zip(&s.values) {
            writer
                .write_record([
                    s.channel.to_string(),
                    rank.clone(),
                    offset.to_string(),
                    value.to_string(),
                ])
                .map_err(err)?;
        }
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn read_action_potentials_csv(
    path: &Path,
    group: &str,
    layer: usize,
) -> Result<ActionPotentials> {
    let err = |e: String| Error::format(path, e);
    let mut reader = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let mut series: Vec<PotentialSeries> = Vec::new();
    let mut offsets: Vec<i64> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| err(e.to_string()))?;
        let field = |i: usize| record.get(i).unwrap_or("").to_string();
        let channel: usize = field(0).parse().map_err(|e| err(format!("channel: {e}")))?;
        let highlight = match field(1).as_str() {
            "" => None,
            r => Some(r.parse().map_err(|e| err(format!("highlight: {e}")))?),
        };
        let offset: i64 = field(2).parse().map_err(|e| err(format!("offset: {e}")))?;
        let value: f64 = field(3).parse().map_err(|e| err(format!("value: {e}")))?;
        if series.last().is_none_or(|s| s.channel != channel) {
            series.push(PotentialSeries {
                channel,
                values: Vec::new(),
                highlight,
            });
        }
        if series.len() == 1 {
            offsets.push(offset);
        }
        series.last_mut().expect("pushed").values.push(value);
    }
    Ok(ActionPotentials {
        group: group.to_string(),
        layer,
        offsets,
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::respviz::{responsiveness, top_responsive};
    use ndarray::Array2;

    fn nap() -> GradNap {
        GradNap {
            group: "A".into(),
            label: 1,
            layer: 2,
            values: Array2::from_shape_fn((6, 5), |(c, t)| ((c * 5 + t) as f64 * 0.37).sin() / 3.0),
            count: 4,
            skipped: 0,
            degenerate: false,
        }
    }

    #[test]
    fn shape_contract() {
        let nap = nap();
        let top = top_responsive(&responsiveness(&nap.values), 3).unwrap();
        let ap = action_potentials(&nap, &top);
        assert_eq!(ap.series.len(), 6);
        assert_eq!(ap.offsets, vec![-2, -1, 0, 1, 2]);
        assert_eq!(
            ap.highlighted(),
            top.iter().map(|t| t.0).collect::<Vec<_>>()
        );
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let nap = nap();
        let top = top_responsive(&responsiveness(&nap.values), 2).unwrap();
        let ap = action_potentials(&nap, &top);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ap.csv");
        write_action_potentials_csv(&path, &ap).unwrap();
        let back = read_action_potentials_csv(&path, "A", 2).unwrap();
        assert_eq!(back, ap);
    }
}
